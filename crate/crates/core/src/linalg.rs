//! Deterministic dense complex-matrix kernel.
//!
//! Everything downstream (dilation dimensions, tower growth, rank decisions)
//! rests on the three operations here: Hermitian eigendecomposition,
//! rank-revealing orthonormalization, and isometry completion. All three are
//! deterministic for identical input: eigenvalues are sorted ascending,
//! orthonormalization processes columns in their given order, and every
//! produced basis column has its first nonzero component rotated to the
//! positive real axis.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tol::TolerancePolicy;

/// Dense complex matrix, the carrier for all operators and algebra elements.
pub type CMatrix = DMatrix<Complex64>;

/// Dense complex column vector (coordinates of algebra elements and states).
pub type CVector = nalgebra::DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Frobenius norm.
pub fn fro(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Frobenius distance ‖a − b‖.
pub fn fro_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn zeros(r: usize, c: usize) -> CMatrix {
    CMatrix::zeros(r, c)
}

/// Rejects NaN/Inf entries.
pub fn check_finite(m: &CMatrix, what: &str) -> Result<()> {
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Shape(format!("{what}: non-finite entry")));
    }
    Ok(())
}

/// Rotates the phase of each column so its first significant component is
/// real positive. Columns that are numerically zero are left alone.
fn fix_column_phases(m: &mut CMatrix) {
    let (rows, cols) = m.shape();
    for j in 0..cols {
        let col_max = (0..rows).map(|i| m[(i, j)].norm()).fold(0.0, f64::max);
        if col_max == 0.0 {
            continue;
        }
        let lead = (0..rows).find(|&i| m[(i, j)].norm() > 1e-8 * col_max);
        if let Some(i) = lead {
            let z = m[(i, j)];
            let phase = z.conj() / z.norm();
            for i in 0..rows {
                m[(i, j)] *= phase;
            }
            // force the pivot exactly real
            let zi = m[(i, j)];
            m[(i, j)] = Complex64::new(zi.norm() * zi.re.signum(), 0.0);
        }
    }
}

/// Hermitian eigendecomposition `M = V diag(λ) V*` with λ ascending.
///
/// The input is symmetrized before factoring; inputs whose anti-Hermitian
/// part exceeds `check_tol · ‖M‖` are rejected with the symmetry residual.
pub fn eigh_hermitian(m: &CMatrix, tol: &TolerancePolicy) -> Result<(Vec<f64>, CMatrix)> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::Shape(format!(
            "eigh: matrix is {}x{}, expected square",
            m.nrows(),
            m.ncols()
        )));
    }
    check_finite(m, "eigh input")?;
    if n == 0 {
        return Ok((Vec::new(), zeros(0, 0)));
    }
    let scale = fro(m);
    let sym_residual = fro_diff(m, &m.adjoint());
    if sym_residual > tol.check_tol * scale.max(1.0) {
        return Err(Error::validation(
            "eigh: input not Hermitian",
            sym_residual,
            tol.check_tol * scale.max(1.0),
        ));
    }
    let herm = (m + m.adjoint()).scale(0.5);
    let se = herm
        .try_symmetric_eigen(f64::EPSILON, 0)
        .ok_or_else(|| Error::internal("eigh: eigensolver failed to converge", f64::NAN))?;

    // sort ascending; nalgebra returns an unspecified order
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].partial_cmp(&se.eigenvalues[b]).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&k| se.eigenvalues[k]).collect();
    let mut vectors = zeros(n, n);
    for (j, &k) in order.iter().enumerate() {
        vectors.set_column(j, &se.eigenvectors.column(k));
    }
    fix_column_phases(&mut vectors);
    Ok((eigenvalues, vectors))
}

/// Smallest eigenvalue of a Hermitian matrix (0 for the empty matrix).
pub fn hermitian_min_eig(m: &CMatrix, tol: &TolerancePolicy) -> Result<f64> {
    let (vals, _) = eigh_hermitian(m, tol)?;
    Ok(vals.first().copied().unwrap_or(0.0))
}

/// Rank-revealing orthonormal basis of the column span.
///
/// Modified Gram–Schmidt with re-orthogonalization, processing columns in
/// their given order (the fixed "pivoting"). A column is accepted when its
/// residual after projection exceeds `rank_tol` times the largest original
/// column norm. The zero matrix legally yields rank 0 with an empty `Q`.
pub fn orthonormal_columns(m: &CMatrix, tol: &TolerancePolicy) -> (CMatrix, usize) {
    orthonormalize_against(&[], m, 0.0, tol)
}

/// [`orthonormal_columns`] with an external scale floor: the acceptance
/// threshold is `rank_tol · max(largest column norm, floor)`. A matrix that
/// is numerically zero relative to `floor` gets rank 0 instead of a basis
/// made of noise.
pub fn orthonormal_columns_floor(
    m: &CMatrix,
    floor: f64,
    tol: &TolerancePolicy,
) -> (CMatrix, usize) {
    orthonormalize_against(&[], m, floor, tol)
}

/// Gram–Schmidt of `candidates` against an already-orthonormal `fixed` set;
/// returns only the new columns. Backbone for both [`orthonormal_columns`]
/// and [`complete_isometry`].
fn orthonormalize_against(
    fixed: &[CVector],
    candidates: &CMatrix,
    floor: f64,
    tol: &TolerancePolicy,
) -> (CMatrix, usize) {
    let rows = candidates.nrows();
    let max_norm = (0..candidates.ncols())
        .map(|j| candidates.column(j).norm())
        .fold(0.0, f64::max);
    let threshold = tol.rank_tol * max_norm.max(floor);
    let mut accepted: Vec<CVector> = Vec::new();
    for j in 0..candidates.ncols() {
        let mut v: CVector = candidates.column(j).into_owned();
        // two projection passes keep the basis orthonormal to working precision
        for _ in 0..2 {
            for q in fixed.iter().chain(accepted.iter()) {
                let coef = q.dotc(&v);
                v.axpy(-coef, q, ONE);
            }
        }
        let norm = v.norm();
        if norm > threshold && norm > 0.0 {
            v.unscale_mut(norm);
            accepted.push(v);
        }
    }
    let rank = accepted.len();
    let mut q = zeros(rows, rank);
    for (j, v) in accepted.iter().enumerate() {
        q.set_column(j, v);
    }
    fix_column_phases(&mut q);
    (q, rank)
}

/// Completes an isometry `V : ℂᵏ → ℂⁿ` to a unitary `[V | W]`.
///
/// Deterministic: the complement basis comes from orthonormalizing the
/// columns of `I − V V*` in natural order. `k = n` legally returns an
/// `n × 0` block.
pub fn complete_isometry(v: &CMatrix, tol: &TolerancePolicy) -> Result<CMatrix> {
    let (n, k) = v.shape();
    if k > n {
        return Err(Error::Shape(format!(
            "complete_isometry: {n}x{k} has more columns than rows"
        )));
    }
    check_finite(v, "complete_isometry input")?;
    let gram = v.adjoint() * v;
    let res = fro_diff(&gram, &identity(k));
    if res > tol.check_tol {
        return Err(Error::validation(
            "complete_isometry: input is not an isometry",
            res,
            tol.check_tol,
        ));
    }
    if k == n {
        return Ok(zeros(n, 0));
    }
    let proj = identity(n) - v * v.adjoint();
    let fixed: Vec<CVector> = (0..k).map(|j| v.column(j).into_owned()).collect();
    let (w, rank) = orthonormalize_against(&fixed, &proj, 0.0, tol);
    if rank != n - k {
        return Err(Error::internal(
            format!("complete_isometry: complement rank {rank}, expected {}", n - k),
            rank as f64,
        ));
    }
    Ok(w)
}

/// `M^{-1/2}` for Hermitian positive definite `M`; eigenvalues below
/// `eig_tol · λ_max` make the matrix count as singular.
pub fn inv_sqrt_hpd(m: &CMatrix, tol: &TolerancePolicy) -> Result<CMatrix> {
    let (vals, vecs) = eigh_hermitian(m, tol)?;
    let lam_max = vals.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
    if vals.is_empty() {
        return Ok(zeros(0, 0));
    }
    if vals[0] <= tol.eig_tol * lam_max.max(1e-300) {
        return Err(Error::validation(
            "inv_sqrt: matrix numerically singular",
            vals[0],
            tol.eig_tol * lam_max,
        ));
    }
    let inv_sqrt = CMatrix::from_fn(vals.len(), vals.len(), |i, j| {
        if i == j {
            Complex64::new(1.0 / vals[i].sqrt(), 0.0)
        } else {
            ZERO
        }
    });
    Ok(&vecs * inv_sqrt * vecs.adjoint())
}

/// Unitary polar factor `X (X*X)^{-1/2}` of a square invertible matrix.
pub fn polar_unitary(x: &CMatrix, tol: &TolerancePolicy) -> Result<CMatrix> {
    if x.nrows() != x.ncols() && x.nrows() < x.ncols() {
        return Err(Error::Shape(format!(
            "polar: {}x{} has more columns than rows",
            x.nrows(),
            x.ncols()
        )));
    }
    let gram = x.adjoint() * x;
    let isr = inv_sqrt_hpd(&gram, tol).map_err(|_| {
        Error::validation("polar: rank-deficient input", 0.0, tol.eig_tol)
    })?;
    Ok(x * isr)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn tol() -> TolerancePolicy {
        TolerancePolicy::default()
    }

    #[test]
    fn eigh_diagonal() {
        let m = CMatrix::from_diagonal(&nalgebra::dvector![c(2.0, 0.0), c(1.0, 0.0)]);
        let (vals, vecs) = eigh_hermitian(&m, &tol()).unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-12);
        assert!((vals[1] - 2.0).abs() < 1e-12);
        // permutation of the identity
        let p = &vecs * vecs.adjoint();
        assert!(fro_diff(&p, &identity(2)) < 1e-12);
        assert!((vecs[(1, 0)].re - 1.0).abs() < 1e-12);
        assert!((vecs[(0, 1)].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eigh_pauli_x() {
        let m = CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]);
        let (vals, vecs) = eigh_hermitian(&m, &tol()).unwrap();
        assert!((vals[0] + 1.0).abs() < 1e-12);
        assert!((vals[1] - 1.0).abs() < 1e-12);
        let recon = &vecs
            * CMatrix::from_diagonal(&nalgebra::dvector![c(vals[0], 0.0), c(vals[1], 0.0)])
            * vecs.adjoint();
        assert!(fro_diff(&recon, &m) < 1e-12);
    }

    #[test]
    fn eigh_complex_hermitian() {
        // genuinely complex: Pauli-y
        let m = CMatrix::from_row_slice(2, 2, &[ZERO, c(0.0, -1.0), c(0.0, 1.0), ZERO]);
        let (vals, vecs) = eigh_hermitian(&m, &tol()).unwrap();
        assert!((vals[0] + 1.0).abs() < 1e-12);
        assert!((vals[1] - 1.0).abs() < 1e-12);
        let d = CMatrix::from_diagonal(&nalgebra::dvector![c(vals[0], 0.0), c(vals[1], 0.0)]);
        assert!(fro_diff(&(&vecs * d * vecs.adjoint()), &m) < 1e-12);
        // unitary
        assert!(fro_diff(&(vecs.adjoint() * &vecs), &identity(2)) < 1e-12);
    }

    #[test]
    fn eigh_rejects_non_hermitian() {
        let m = CMatrix::from_row_slice(2, 2, &[ONE, ONE, ZERO, ONE]);
        assert!(eigh_hermitian(&m, &tol()).is_err());
    }

    #[test]
    fn eigh_empty() {
        let (vals, vecs) = eigh_hermitian(&zeros(0, 0), &tol()).unwrap();
        assert!(vals.is_empty());
        assert_eq!(vecs.shape(), (0, 0));
    }

    #[test]
    fn orthonormal_identity() {
        let (q, rank) = orthonormal_columns(&identity(3), &tol());
        assert_eq!(rank, 3);
        assert!(fro_diff(&q, &identity(3)) < 1e-14);
    }

    #[test]
    fn orthonormal_duplicated_column() {
        let m = CMatrix::from_row_slice(2, 2, &[ONE, ONE, ONE, ONE]);
        let (q, rank) = orthonormal_columns(&m, &tol());
        assert_eq!(rank, 1);
        let inv_sqrt2 = 1.0 / 2.0_f64.sqrt();
        assert!((q[(0, 0)].re - inv_sqrt2).abs() < 1e-14);
        assert!((q[(1, 0)].re - inv_sqrt2).abs() < 1e-14);
    }

    #[test]
    fn orthonormal_zero_matrix() {
        let (q, rank) = orthonormal_columns(&zeros(3, 2), &tol());
        assert_eq!(rank, 0);
        assert_eq!(q.shape(), (3, 0));
    }

    #[test]
    fn orthonormal_idempotent() {
        let m = CMatrix::from_row_slice(
            3,
            3,
            &[
                c(1.0, 0.5),
                c(2.0, -0.5),
                c(3.0, 0.0),
                c(0.0, 1.0),
                c(0.0, 2.0),
                c(0.0, 3.0),
                c(1.0, 0.0),
                c(2.0, 0.0),
                c(3.0, 0.0),
            ],
        );
        let (q1, r1) = orthonormal_columns(&m, &tol());
        let (q2, r2) = orthonormal_columns(&q1, &tol());
        assert_eq!(r1, r2);
        assert!(fro_diff(&q1, &q2) < 1e-12);
    }

    #[test]
    fn complete_isometry_e1() {
        let v = CMatrix::from_row_slice(2, 1, &[ONE, ZERO]);
        let w = complete_isometry(&v, &tol()).unwrap();
        assert_eq!(w.shape(), (2, 1));
        assert!((w[(1, 0)].re.abs() - 1.0).abs() < 1e-14);
        assert!(w[(0, 0)].norm() < 1e-14);
    }

    #[test]
    fn complete_isometry_full() {
        let w = complete_isometry(&identity(2), &tol()).unwrap();
        assert_eq!(w.shape(), (2, 0));
    }

    #[test]
    fn complete_isometry_plus_state() {
        let s = 1.0 / 2.0_f64.sqrt();
        let v = CMatrix::from_row_slice(2, 1, &[c(s, 0.0), c(s, 0.0)]);
        let w = complete_isometry(&v, &tol()).unwrap();
        // (e1 - e2)/√2 up to the sign convention (first component positive)
        assert!((w[(0, 0)].re - s).abs() < 1e-12);
        assert!((w[(1, 0)].re + s).abs() < 1e-12);
    }

    #[test]
    fn complete_isometry_rejects_non_isometry() {
        let v = CMatrix::from_row_slice(2, 1, &[ONE, ONE]);
        assert!(complete_isometry(&v, &tol()).is_err());
    }

    #[test]
    fn polar_recovers_unitary() {
        let s = 1.0 / 2.0_f64.sqrt();
        let u = CMatrix::from_row_slice(2, 2, &[c(s, 0.0), c(s, 0.0), c(-s, 0.0), c(s, 0.0)]);
        let x = &u * CMatrix::from_diagonal(&nalgebra::dvector![c(2.0, 0.0), c(0.5, 0.0)]);
        // x = u * p with p positive: polar factor of x*... here x = (u p) has polar unitary u
        let got = polar_unitary(&(u.clone() * CMatrix::from_diagonal(&nalgebra::dvector![c(3.0, 0.0), c(1.0, 0.0)])), &tol()).unwrap();
        assert!(fro_diff(&(got.adjoint() * &got), &identity(2)) < 1e-12);
        let _ = x;
    }
}
