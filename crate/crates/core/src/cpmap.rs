//! Unital completely positive maps and their minimal Stinespring dilations.
//!
//! Complete positivity is decided by the Gram–Choi test: over an orthonormal
//! algebra basis the block matrix `G[p][q] = Φ(b_p* b_q)` is positive
//! semidefinite iff `Φ` is completely positive (the domain is
//! finite-dimensional, so positivity of this one form is the whole story).
//! The same form drives the GNS construction: the minimal dilation lives on
//! the quotient of `A ⊗ H` by the kernel of `G`, with left multiplication
//! acting through the structure constants.

use std::sync::Arc;

use num_complex::Complex64;

use crate::algebra::{basis_vec, FiniteCStarAlgebra, StarEmbedding};
use crate::error::{Error, Result};
use crate::linalg::{
    self, complete_isometry, eigh_hermitian, fro, fro_diff, orthonormal_columns, polar_unitary,
    CMatrix, CVector,
};
use crate::tol::TolerancePolicy;

/// Assembles the Gram–Choi matrix of an action list over the domain basis.
pub fn gram_choi(domain: &FiniteCStarAlgebra, action: &[CMatrix]) -> CMatrix {
    let d = domain.dim();
    let h = action.first().map_or(0, |m| m.nrows());
    let mut g = linalg::zeros(d * h, d * h);
    for p in 0..d {
        let star_p = domain.star(&basis_vec(d, p));
        let lm = domain.lm(&star_p);
        for q in 0..d {
            let coords = lm.column(q);
            let mut block = linalg::zeros(h, h);
            for (r, a) in action.iter().enumerate() {
                let z = coords[r];
                if z.norm_sqr() > 0.0 {
                    block += a.map(|x| x * z);
                }
            }
            g.view_mut((p * h, q * h), (h, h)).copy_from(&block);
        }
    }
    g
}

/// Minimum eigenvalue of the symmetrized Gram–Choi matrix and the spectral
/// scale `max |λ|`.
pub fn gram_choi_min_eig(
    domain: &FiniteCStarAlgebra,
    action: &[CMatrix],
    tol: &TolerancePolicy,
) -> Result<(f64, f64)> {
    let g = gram_choi(domain, action);
    let sym = (&g + g.adjoint()).map(|z| z * 0.5);
    let (vals, _) = eigh_hermitian(&sym, tol)?;
    let min = vals.first().copied().unwrap_or(0.0);
    let scale = vals.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
    Ok((min, scale))
}

/// A unital completely positive map `Φ : A → B(ℂʰ)`, stored by its action on
/// the algebra basis.
#[derive(Debug, Clone)]
pub struct CpMap {
    domain: Arc<FiniteCStarAlgebra>,
    target_dim: usize,
    action: Vec<CMatrix>,
}

impl CpMap {
    /// Validated constructor: unital, *-preserving, completely positive.
    pub fn new(
        domain: Arc<FiniteCStarAlgebra>,
        target_dim: usize,
        action: Vec<CMatrix>,
        tol: &TolerancePolicy,
    ) -> Result<Self> {
        let map = Self::with_shape_checked(domain, target_dim, action)?;
        map.validate_ucp(tol)?;
        Ok(map)
    }

    /// Validated constructor that additionally requires multiplicativity.
    pub fn representation(
        domain: Arc<FiniteCStarAlgebra>,
        target_dim: usize,
        action: Vec<CMatrix>,
        tol: &TolerancePolicy,
    ) -> Result<Self> {
        let map = Self::with_shape_checked(domain, target_dim, action)?;
        let res = map.representation_residual();
        if res > tol.check_tol {
            return Err(Error::validation(
                "action is not a *-representation",
                res,
                tol.check_tol,
            ));
        }
        Ok(map)
    }

    pub(crate) fn unchecked(
        domain: Arc<FiniteCStarAlgebra>,
        target_dim: usize,
        action: Vec<CMatrix>,
    ) -> Self {
        CpMap {
            domain,
            target_dim,
            action,
        }
    }

    fn with_shape_checked(
        domain: Arc<FiniteCStarAlgebra>,
        target_dim: usize,
        action: Vec<CMatrix>,
    ) -> Result<Self> {
        if action.len() != domain.dim() {
            return Err(Error::Shape(format!(
                "map needs {} action matrices, got {}",
                domain.dim(),
                action.len()
            )));
        }
        for (p, m) in action.iter().enumerate() {
            if m.shape() != (target_dim, target_dim) {
                return Err(Error::Shape(format!(
                    "action matrix {p} is {}x{}, target dimension is {target_dim}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            linalg::check_finite(m, "map action")?;
        }
        Ok(CpMap {
            domain,
            target_dim,
            action,
        })
    }

    fn validate_ucp(&self, tol: &TolerancePolicy) -> Result<()> {
        let unital = self.unital_residual();
        if unital > tol.check_tol {
            return Err(Error::validation(
                "map is not unital",
                unital,
                tol.check_tol,
            ));
        }
        let star = self.star_residual();
        if star > tol.check_tol {
            return Err(Error::validation(
                "map is not *-preserving",
                star,
                tol.check_tol,
            ));
        }
        let (min_eig, scale) = gram_choi_min_eig(&self.domain, &self.action, tol)?;
        if min_eig < -tol.check_tol * scale.max(1.0) {
            return Err(Error::hypothesis(
                format!(
                    "map is not completely positive (most negative Gram-Choi eigenvalue {min_eig:.3e})"
                ),
                min_eig,
            ));
        }
        Ok(())
    }

    pub fn domain(&self) -> &Arc<FiniteCStarAlgebra> {
        &self.domain
    }

    pub fn target_dim(&self) -> usize {
        self.target_dim
    }

    pub fn action(&self) -> &[CMatrix] {
        &self.action
    }

    /// `Φ(x)` for domain coordinates `x`.
    pub fn apply(&self, v: &CVector) -> CMatrix {
        let mut acc = linalg::zeros(self.target_dim, self.target_dim);
        for (p, m) in self.action.iter().enumerate() {
            let z = v[p];
            if z.norm_sqr() > 0.0 {
                acc += m.map(|x| x * z);
            }
        }
        acc
    }

    pub fn unital_residual(&self) -> f64 {
        fro_diff(
            &self.apply(self.domain.unit_coords()),
            &linalg::identity(self.target_dim),
        )
    }

    pub fn star_residual(&self) -> f64 {
        let d = self.domain.dim();
        let mut worst = 0.0_f64;
        for p in 0..d {
            let lhs = self.apply(&self.domain.star(&basis_vec(d, p)));
            worst = worst.max(fro_diff(&lhs, &self.action[p].adjoint()));
        }
        worst
    }

    /// Worst violation of multiplicativity, unitality and *-preservation.
    pub fn representation_residual(&self) -> f64 {
        let d = self.domain.dim();
        let mut worst = self.unital_residual().max(self.star_residual());
        for p in 0..d {
            for q in 0..d {
                let prod = self.apply(&self.domain.mult(&basis_vec(d, p), &basis_vec(d, q)));
                worst = worst.max(fro_diff(&prod, &(&self.action[p] * &self.action[q])));
            }
        }
        worst
    }

    /// The composition `Φ ∘ ε` as a map on the embedding's source.
    pub fn restrict(&self, embedding: &StarEmbedding) -> Result<CpMap> {
        if embedding.target().dim() != self.domain.dim()
            || embedding.target().ambient_dim() != self.domain.ambient_dim()
        {
            return Err(Error::Shape(
                "restriction: embedding target differs from map domain".into(),
            ));
        }
        let action = (0..embedding.source().dim())
            .map(|p| self.apply(&embedding.matrix().column(p).into_owned()))
            .collect();
        Ok(CpMap::unchecked(
            embedding.source().clone(),
            self.target_dim,
            action,
        ))
    }

    /// Whether `Φ ∘ ε` is a *-representation, together with the worst
    /// residual over all checks.
    pub fn is_rep_on_b(
        &self,
        embedding: &StarEmbedding,
        tol: &TolerancePolicy,
    ) -> Result<(bool, f64)> {
        let restriction = self.restrict(embedding)?;
        let res = restriction.representation_residual();
        Ok((res <= tol.check_tol, res))
    }

    /// Largest pointwise difference of two maps over the shared basis.
    pub fn action_distance(&self, other: &CpMap) -> f64 {
        self.action
            .iter()
            .zip(other.action.iter())
            .map(|(a, b)| fro_diff(a, b))
            .fold(0.0, f64::max)
    }
}

/// A Stinespring dilation `π : A → B(ℂᵗ)` of `Φ : A → B(ℂʰ)`, written in a
/// basis whose first `h` coordinates carry the embedded copy of `H`.
#[derive(Debug, Clone)]
pub struct StinespringDilation {
    map: CpMap,
    total_dim: usize,
    rep: Vec<CMatrix>,
    minimal: bool,
}

impl StinespringDilation {
    /// Minimal Stinespring dilation via GNS on the Gram–Choi form.
    ///
    /// The sesquilinear form `⟨a⊗ξ, a'⊗ξ'⟩ = ⟨ξ, Φ(a*a')ξ'⟩` on `A ⊗ ℂʰ` is
    /// factored as `T*T` through its eigendecomposition, the `rank_tol`
    /// kernel is quotiented away, left multiplication is pushed through the
    /// structure constants, and the copy of `H` (the classes `[1⊗ξ]`,
    /// isometric since `Φ` is unital) is rotated into the first `h`
    /// coordinates.
    pub fn stinespring_gns(map: &CpMap, tol: &TolerancePolicy) -> Result<StinespringDilation> {
        let domain = map.domain().clone();
        let d = domain.dim();
        let h = map.target_dim();
        if h == 0 {
            return Ok(StinespringDilation {
                map: map.clone(),
                total_dim: 0,
                rep: vec![linalg::zeros(0, 0); d],
                minimal: true,
            });
        }

        let g = gram_choi(&domain, map.action());
        let sym = (&g + g.adjoint()).map(|z| z * 0.5);
        let (vals, vecs) = eigh_hermitian(&sym, tol)?;
        let lam_max = vals.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
        if vals.first().copied().unwrap_or(0.0) < -tol.check_tol * lam_max.max(1.0) {
            return Err(Error::hypothesis(
                "dilation input is not completely positive",
                vals[0],
            ));
        }
        // keep the eigenvectors above the rank cutoff
        let keep: Vec<usize> = (0..vals.len())
            .filter(|&k| vals[k] > tol.rank_tol * lam_max)
            .collect();
        let r = keep.len();
        let n = d * h;
        let mut v_r = linalg::zeros(n, r);
        let mut sqrt_l = vec![0.0_f64; r];
        for (j, &k) in keep.iter().enumerate() {
            v_r.set_column(j, &vecs.column(k));
            sqrt_l[j] = vals[k].sqrt();
        }
        // T = Λ^{1/2} V*,  T⁺ = V Λ^{-1/2}
        let mut t = v_r.adjoint();
        let mut t_pinv = v_r.clone();
        for j in 0..r {
            for c in 0..n {
                t[(j, c)] *= sqrt_l[j];
                t_pinv[(c, j)] /= sqrt_l[j];
            }
        }

        // left multiplication on A ⊗ H, applied blockwise so the Kronecker
        // product never gets materialized
        let kron_apply = |l: &CMatrix, m: &CMatrix| -> CMatrix {
            let mut out = linalg::zeros(n, m.ncols());
            for bp in 0..d {
                let mut block = linalg::zeros(h, m.ncols());
                for bq in 0..d {
                    let z = l[(bp, bq)];
                    if z.norm_sqr() > 0.0 {
                        block += m.view((bq * h, 0), (h, m.ncols())).map(|x| x * z);
                    }
                }
                out.view_mut((bp * h, 0), (h, m.ncols())).copy_from(&block);
            }
            out
        };

        let pi_raw: Vec<CMatrix> = (0..d)
            .map(|p| &t * kron_apply(domain.left_mult_table(p), &t_pinv))
            .collect();

        // embed H as the classes [1 ⊗ ξ] and rotate it into the lead block
        let unit = domain.unit_coords();
        let mut unit_block = linalg::zeros(n, h);
        for q in 0..d {
            let z = unit[q];
            if z.norm_sqr() > 0.0 {
                for j in 0..h {
                    unit_block[(q * h + j, j)] = z;
                }
            }
        }
        let emb = &t * unit_block;
        let emb_res = fro_diff(&(emb.adjoint() * &emb), &linalg::identity(h));
        if emb_res > tol.check_tol {
            return Err(Error::internal(
                "GNS embedding of H is not isometric",
                emb_res,
            ));
        }
        let w = complete_isometry(&emb, tol)?;
        let mut u = linalg::zeros(r, r);
        u.view_mut((0, 0), (r, h)).copy_from(&emb);
        u.view_mut((0, h), (r, r - h)).copy_from(&w);

        let rep: Vec<CMatrix> = pi_raw.iter().map(|m| u.adjoint() * m * &u).collect();
        let dilation = StinespringDilation {
            map: map.clone(),
            total_dim: r,
            rep,
            minimal: true,
        };
        dilation.validate(tol)?;
        Ok(dilation)
    }

    /// Verifies the dilation identities: `π` is a unital *-representation,
    /// its `H`-corner is `Φ`, and (when flagged minimal) `π(A)H` spans the
    /// whole space.
    pub fn validate(&self, tol: &TolerancePolicy) -> Result<()> {
        let rep_map = self.rep_map();
        let rep_res = rep_map.representation_residual();
        if rep_res > tol.check_tol {
            return Err(Error::internal(
                "dilation is not a *-representation",
                rep_res,
            ));
        }
        let h = self.map.target_dim();
        let mut corner_res = 0.0_f64;
        for (p, m) in self.rep.iter().enumerate() {
            let corner = m.view((0, 0), (h, h)).into_owned();
            corner_res = corner_res.max(fro_diff(&corner, &self.map.action()[p]));
        }
        if corner_res > tol.check_tol {
            return Err(Error::internal(
                "dilation corner does not reproduce the map",
                corner_res,
            ));
        }
        if self.minimal && self.total_dim > 0 {
            let d = self.map.domain().dim();
            let mut orbit = linalg::zeros(self.total_dim, d * h);
            for (p, m) in self.rep.iter().enumerate() {
                orbit
                    .view_mut((0, p * h), (self.total_dim, h))
                    .copy_from(&m.view((0, 0), (self.total_dim, h)));
            }
            let (_, rank) = orthonormal_columns(&orbit, tol);
            if rank != self.total_dim {
                return Err(Error::internal(
                    format!(
                        "dilation is not minimal: orbit rank {rank} < {}",
                        self.total_dim
                    ),
                    rank as f64,
                ));
            }
        }
        Ok(())
    }

    pub fn map(&self) -> &CpMap {
        &self.map
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    /// Dimension of the orthogonal complement `H'`.
    pub fn extra_dim(&self) -> usize {
        self.total_dim - self.map.target_dim()
    }

    pub fn rep(&self) -> &[CMatrix] {
        &self.rep
    }

    pub fn is_minimal(&self) -> bool {
        self.minimal
    }

    /// `π(x)` for domain coordinates `x`.
    pub fn apply_rep(&self, v: &CVector) -> CMatrix {
        let mut acc = linalg::zeros(self.total_dim, self.total_dim);
        for (p, m) in self.rep.iter().enumerate() {
            let z = v[p];
            if z.norm_sqr() > 0.0 {
                acc += m.map(|x| x * z);
            }
        }
        acc
    }

    /// The dilation as a representation-valued [`CpMap`].
    pub fn rep_map(&self) -> CpMap {
        CpMap::unchecked(self.map.domain().clone(), self.total_dim, self.rep.clone())
    }
}

/// Splits `π ∘ ε` along `H ⊕ H'` when `Φ ∘ ε` is multiplicative.
///
/// The hypothesis makes `H` reducing for `π(ε(B))`; the off-diagonal blocks
/// are checked to vanish and the two diagonal representations `ρ₀ = Φ ∘ ε`
/// (on `H`) and `ρ'` (on `H'`) are returned.
pub fn reducing_split(
    dilation: &StinespringDilation,
    embedding: &StarEmbedding,
    tol: &TolerancePolicy,
) -> Result<(CpMap, CpMap)> {
    let (ok, res) = dilation.map().is_rep_on_b(embedding, tol)?;
    if !ok {
        return Err(Error::hypothesis(
            "reducing split: Φ∘ε is not multiplicative",
            res,
        ));
    }
    let h = dilation.map().target_dim();
    let hp = dilation.extra_dim();
    let db = embedding.source().dim();
    let mut rho0 = Vec::with_capacity(db);
    let mut rho1 = Vec::with_capacity(db);
    for p in 0..db {
        let m = dilation.apply_rep(&embedding.matrix().column(p).into_owned());
        let off = fro(&m.view((0, h), (h, hp)).into_owned())
            .max(fro(&m.view((h, 0), (hp, h)).into_owned()));
        if off > tol.check_tol * (1.0 + fro(&m)) {
            return Err(Error::hypothesis(
                format!("reducing split: off-diagonal block of π(ε(b_{p})) does not vanish"),
                off,
            ));
        }
        rho0.push(m.view((0, 0), (h, h)).into_owned());
        rho1.push(m.view((h, h), (hp, hp)).into_owned());
    }
    let rho0 = CpMap::unchecked(embedding.source().clone(), h, rho0);
    let rho1 = CpMap::unchecked(embedding.source().clone(), hp, rho1);
    Ok((rho0, rho1))
}

/// Minimal reducing subspace `M = span{π(ε(B)) H}` of a dilation for the
/// (merely UCP) restriction `Φ ∘ ε`, as an isometry whose first `h` columns
/// are the `H`-basis, together with the compressed representation of `B`
/// on `M`.
pub fn minimal_b_restriction_dilation(
    dilation: &StinespringDilation,
    embedding: &StarEmbedding,
    tol: &TolerancePolicy,
) -> Result<(CMatrix, CpMap)> {
    let h = dilation.map().target_dim();
    let total = dilation.total_dim();
    let db = embedding.source().dim();
    // H first, then the orbit vectors π(ε(b_p)) e_j
    let mut cols = linalg::zeros(total, h + db * h);
    for j in 0..h {
        cols[(j, j)] = Complex64::ONE;
    }
    for p in 0..db {
        let m = dilation.apply_rep(&embedding.matrix().column(p).into_owned());
        cols.view_mut((0, h + p * h), (total, h))
            .copy_from(&m.view((0, 0), (total, h)));
    }
    let (q, rank) = orthonormal_columns(&cols, tol);
    // the H columns are orthonormal already, so they survive as the lead block
    let lead_res = fro_diff(&q.view((0, 0), (h, h)).into_owned(), &linalg::identity(h));
    if lead_res > tol.check_tol {
        return Err(Error::internal(
            "minimal reducing subspace lost the H block",
            lead_res,
        ));
    }
    let action: Vec<CMatrix> = (0..db)
        .map(|p| {
            let m = dilation.apply_rep(&embedding.matrix().column(p).into_owned());
            q.adjoint() * m * &q
        })
        .collect();
    let rho = CpMap::unchecked(embedding.source().clone(), rank, action);
    let res = rho.representation_residual();
    if res > tol.check_tol {
        return Err(Error::internal(
            "compression to the minimal reducing subspace is not multiplicative",
            res,
        ));
    }
    Ok((q, rho))
}

/// The unitary identifying two minimal Stinespring dilations of a common UCP
/// map on `B(ℂʰ)`: `U ρ₁(b) = ρ₂(b) U` with `U|_H = I`.
///
/// Computed by solving for the intertwiner that restricts to the identity on
/// the lead `h` columns and polishing it with a polar step; uniqueness of
/// the minimal dilation makes that element the unitary.
pub fn minimal_dilation_unitary(
    rho1: &CpMap,
    rho2: &CpMap,
    h: usize,
    tol: &TolerancePolicy,
) -> Result<CMatrix> {
    let m1 = rho1.target_dim();
    let m2 = rho2.target_dim();
    if m1 != m2 {
        return Err(Error::hypothesis(
            format!("minimal dilations have different dimensions ({m1} vs {m2})"),
            (m1 as f64 - m2 as f64).abs(),
        ));
    }
    if h > m1 {
        return Err(Error::Shape(format!(
            "common subspace dimension {h} exceeds dilation dimension {m1}"
        )));
    }
    // both must compress to the same map on the lead block
    let mut corner_res = 0.0_f64;
    for (a, b) in rho1.action().iter().zip(rho2.action().iter()) {
        corner_res = corner_res.max(fro_diff(
            &a.view((0, 0), (h, h)).into_owned(),
            &b.view((0, 0), (h, h)).into_owned(),
        ));
    }
    if corner_res > tol.check_tol {
        return Err(Error::hypothesis(
            "dilations do not compress to a common map on H",
            corner_res,
        ));
    }

    let basis = crate::algebra::rep_intertwiners(rho1.action(), rho2.action(), tol)?;
    if basis.is_empty() {
        return Err(Error::hypothesis(
            "no intertwiner between the dilations",
            0.0,
        ));
    }
    // least squares for Σ c_t X_t restricted to the lead columns = [I; 0]
    let t_dim = basis.len();
    let rows = m2 * h;
    let mut a = linalg::zeros(rows, t_dim);
    for (t, x) in basis.iter().enumerate() {
        for j in 0..h {
            for i in 0..m2 {
                a[(j * m2 + i, t)] = x[(i, j)];
            }
        }
    }
    let mut b = CVector::zeros(rows);
    for j in 0..h {
        b[j * m2 + j] = Complex64::ONE;
    }
    let gram = a.adjoint() * &a;
    let rhs = a.adjoint() * &b;
    let sol = gram
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::hypothesis("intertwiner system is singular", 0.0))?;
    let residual = (&a * &sol - &b).norm();
    if residual > tol.check_tol {
        return Err(Error::hypothesis(
            "no intertwining unitary restricts to the identity on H",
            residual,
        ));
    }
    let mut u0 = linalg::zeros(m2, m1);
    for (t, x) in basis.iter().enumerate() {
        let z = sol[t];
        u0 += x.map(|v| v * z);
    }
    let u = polar_unitary(&u0, tol)
        .map_err(|_| Error::hypothesis("intertwiner is not invertible", 0.0))?;

    // final checks: unitary, identity on H, intertwining
    let unit_res = fro_diff(&(u.adjoint() * &u), &linalg::identity(m1));
    let lead_res = {
        let mut lead = linalg::zeros(m2, h);
        for j in 0..h {
            lead[(j, j)] = Complex64::ONE;
        }
        fro_diff(&u.view((0, 0), (m2, h)).into_owned(), &lead)
    };
    let mut twine_res = 0.0_f64;
    for (r1, r2) in rho1.action().iter().zip(rho2.action().iter()) {
        twine_res = twine_res.max(fro_diff(&(&u * r1), &(r2 * &u)));
    }
    let worst = unit_res.max(lead_res).max(twine_res);
    if worst > tol.check_tol {
        return Err(Error::hypothesis(
            "inputs are not minimal dilations of a common map",
            worst,
        ));
    }
    Ok(u)
}
