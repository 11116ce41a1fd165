//! Finite-dimensional C*-algebras as validated matrix subalgebras.
//!
//! An algebra is always given concretely inside some `M_n`, carried by an
//! orthonormal basis in the normalized Hilbert–Schmidt inner product
//! `⟨x,y⟩ = tr(x*y)/n` together with left/right multiplication tables
//! (structure constants) and the adjoint in coordinates. The normalization
//! makes the ambient identity a unit vector and turns the HS-orthogonal
//! projection onto any unital *-subalgebra into its trace-preserving
//! conditional expectation.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{
    self, check_finite, complete_isometry, fro, fro_diff, orthonormal_columns, CMatrix, CVector,
};
use crate::tol::TolerancePolicy;

/// Default cap on the dimension a generated algebra may reach during closure.
pub const DEFAULT_CLOSURE_CAP: usize = 64;

/// A unital *-subalgebra of `M_n`, with HS-orthonormal basis and
/// multiplication tables.
#[derive(Debug, Clone)]
pub struct FiniteCStarAlgebra {
    ambient_dim: usize,
    basis: Vec<CMatrix>,
    /// `left_mult[p] · coords(x) = coords(b_p · x)`
    left_mult: Vec<CMatrix>,
    /// `right_mult[q] · coords(x) = coords(x · b_q)`
    right_mult: Vec<CMatrix>,
    /// `star · conj(coords(x)) = coords(x*)`
    star: CMatrix,
    unit_coords: CVector,
}

/// Flatten to the HS-normalized coordinate vector (column-major / √n).
fn vec_mat(m: &CMatrix, n: usize) -> CVector {
    let s = Complex64::new(1.0 / (n as f64).sqrt(), 0.0);
    CVector::from_iterator(n * n, m.iter().map(|z| z * s))
}

fn unvec_mat(v: &[Complex64], n: usize) -> CMatrix {
    let s = Complex64::new((n as f64).sqrt(), 0.0);
    CMatrix::from_iterator(n, n, v.iter().map(|z| z * s))
}

/// HS-orthonormal basis of the span of `mats`, in deterministic order.
fn hs_orthonormal_span(mats: &[CMatrix], n: usize, tol: &TolerancePolicy) -> Vec<CMatrix> {
    let cols = CMatrix::from_columns(&mats.iter().map(|m| vec_mat(m, n)).collect::<Vec<_>>());
    let (q, rank) = orthonormal_columns(&cols, tol);
    (0..rank)
        .map(|j| unvec_mat(q.column(j).as_slice(), n))
        .collect()
}

/// Standard basis vector of length `d`.
pub fn basis_vec(d: usize, p: usize) -> CVector {
    let mut v = CVector::zeros(d);
    v[p] = Complex64::ONE;
    v
}

impl FiniteCStarAlgebra {
    /// Builds an algebra from an already HS-orthonormal basis, validating
    /// *-closure, multiplicative closure, presence of the unit, and
    /// orthonormality, and populating the multiplication tables.
    pub fn from_basis(
        ambient_dim: usize,
        basis: Vec<CMatrix>,
        tol: &TolerancePolicy,
    ) -> Result<Arc<Self>> {
        let n = ambient_dim;
        if n == 0 || basis.is_empty() {
            return Err(Error::Shape("algebra: empty basis or zero ambient".into()));
        }
        for (p, b) in basis.iter().enumerate() {
            if b.shape() != (n, n) {
                return Err(Error::Shape(format!(
                    "algebra basis element {p} is {}x{}, ambient is {n}",
                    b.nrows(),
                    b.ncols()
                )));
            }
            check_finite(b, "algebra basis")?;
        }
        let dim = basis.len();

        // Gram matrix must be the identity.
        let mut gram_res = 0.0_f64;
        for p in 0..dim {
            for q in 0..dim {
                let g = hs_dot(&basis[p], &basis[q], n);
                let target = if p == q { Complex64::ONE } else { Complex64::ZERO };
                gram_res = gram_res.max((g - target).norm());
            }
        }
        if gram_res > tol.check_tol {
            return Err(Error::validation(
                "algebra basis is not HS-orthonormal",
                gram_res,
                tol.check_tol,
            ));
        }

        let coords_of = |m: &CMatrix| -> CVector {
            CVector::from_iterator(dim, basis.iter().map(|b| hs_dot(b, m, n)))
        };
        let from_coords = |v: &CVector| -> CMatrix {
            let mut acc = linalg::zeros(n, n);
            for (p, b) in basis.iter().enumerate() {
                acc += b.map(|z| z * v[p]);
            }
            acc
        };

        // ambient identity in the span
        let id = linalg::identity(n);
        let unit_coords = coords_of(&id);
        let unit_res = fro_diff(&from_coords(&unit_coords), &id);
        if unit_res > tol.check_tol * (n as f64).sqrt() {
            return Err(Error::validation(
                "algebra does not contain the ambient identity",
                unit_res,
                tol.check_tol,
            ));
        }

        // *-closure and the adjoint table
        let mut star = linalg::zeros(dim, dim);
        for p in 0..dim {
            let adj = basis[p].adjoint();
            let coords = coords_of(&adj);
            let res = fro_diff(&from_coords(&coords), &adj);
            if res > tol.check_tol * (1.0 + fro(&adj)) {
                return Err(Error::validation(
                    format!("algebra span is not *-closed at basis element {p}"),
                    res,
                    tol.check_tol,
                ));
            }
            star.set_column(p, &coords);
        }

        // multiplicative closure and the left-multiplication table
        let mut left_mult = Vec::with_capacity(dim);
        for p in 0..dim {
            let mut lp = linalg::zeros(dim, dim);
            for q in 0..dim {
                let prod = &basis[p] * &basis[q];
                let coords = coords_of(&prod);
                let res = fro_diff(&from_coords(&coords), &prod);
                if res > tol.check_tol * (1.0 + fro(&prod)) {
                    return Err(Error::validation(
                        format!("algebra span is not multiplicatively closed at pair ({p},{q})"),
                        res,
                        tol.check_tol,
                    ));
                }
                lp.set_column(q, &coords);
            }
            left_mult.push(lp);
        }
        let mut right_mult = Vec::with_capacity(dim);
        for q in 0..dim {
            let mut rq = linalg::zeros(dim, dim);
            for p in 0..dim {
                rq.set_column(p, &left_mult[p].column(q).into_owned());
            }
            right_mult.push(rq);
        }

        Ok(Arc::new(FiniteCStarAlgebra {
            ambient_dim: n,
            basis,
            left_mult,
            right_mult,
            star,
            unit_coords,
        }))
    }

    /// Smallest *-closed, multiplicatively closed unital span containing
    /// `spanning`, computed by iterating products and adjoints until the
    /// dimension stabilizes. Rejected once the dimension exceeds `cap`.
    pub fn generate(
        ambient_dim: usize,
        spanning: &[CMatrix],
        cap: usize,
        tol: &TolerancePolicy,
    ) -> Result<Arc<Self>> {
        let n = ambient_dim;
        if spanning.is_empty() {
            return Err(Error::Shape(
                "algebra generation needs a nonempty spanning set".into(),
            ));
        }
        for m in spanning {
            if m.shape() != (n, n) {
                return Err(Error::Shape(format!(
                    "spanning matrix is {}x{}, ambient is {n}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            check_finite(m, "spanning set")?;
        }
        let mut seed: Vec<CMatrix> = vec![linalg::identity(n)];
        seed.extend(spanning.iter().cloned());
        let mut basis = hs_orthonormal_span(&seed, n, tol);
        loop {
            if basis.len() > cap {
                return Err(Error::DimensionCap {
                    context: "algebra closure".into(),
                    dim: basis.len(),
                    cap,
                });
            }
            let mut candidates = basis.clone();
            for b in &basis {
                candidates.push(b.adjoint());
            }
            for a in &basis {
                for b in &basis {
                    candidates.push(a * b);
                }
            }
            let next = hs_orthonormal_span(&candidates, n, tol);
            if next.len() == basis.len() {
                return Self::from_basis(n, next, tol);
            }
            basis = next;
        }
    }

    /// Block-diagonal algebra `M_{d_1} ⊕ … ⊕ M_{d_k}` inside `M_{Σ d_j}`,
    /// with the deterministic basis `√n · E^{(l)}_{jk}` ordered block by
    /// block, row-major inside each block.
    pub fn block_diagonal(block_dims: &[usize], tol: &TolerancePolicy) -> Result<Arc<Self>> {
        if block_dims.is_empty() || block_dims.iter().any(|&d| d == 0) {
            return Err(Error::Shape("block algebra needs positive block sizes".into()));
        }
        let n: usize = block_dims.iter().sum();
        let s = Complex64::new((n as f64).sqrt(), 0.0);
        let mut basis = Vec::new();
        let mut offset = 0;
        for &d in block_dims {
            for j in 0..d {
                for k in 0..d {
                    let mut m = linalg::zeros(n, n);
                    m[(offset + j, offset + k)] = s;
                    basis.push(m);
                }
            }
            offset += d;
        }
        Self::from_basis(n, basis, tol)
    }

    /// Full matrix algebra `M_n`.
    pub fn full_matrix(n: usize, tol: &TolerancePolicy) -> Result<Arc<Self>> {
        Self::block_diagonal(&[n], tol)
    }

    /// The scalars `M_1`.
    pub fn scalars(tol: &TolerancePolicy) -> Result<Arc<Self>> {
        Self::block_diagonal(&[1], tol)
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[CMatrix] {
        &self.basis
    }

    pub fn unit_coords(&self) -> &CVector {
        &self.unit_coords
    }

    /// HS coordinates (no span check).
    pub fn coords_of(&self, m: &CMatrix) -> CVector {
        CVector::from_iterator(
            self.dim(),
            self.basis.iter().map(|b| hs_dot(b, m, self.ambient_dim)),
        )
    }

    /// Distance from `m` to the span.
    pub fn span_residual(&self, m: &CMatrix) -> f64 {
        fro_diff(&self.from_coords(&self.coords_of(m)), m)
    }

    /// HS coordinates, rejecting matrices outside the span.
    pub fn coords_checked(&self, m: &CMatrix, tol: &TolerancePolicy) -> Result<CVector> {
        if m.shape() != (self.ambient_dim, self.ambient_dim) {
            return Err(Error::Shape(format!(
                "element is {}x{}, ambient is {}",
                m.nrows(),
                m.ncols(),
                self.ambient_dim
            )));
        }
        let res = self.span_residual(m);
        if res > tol.check_tol * (1.0 + fro(m)) {
            return Err(Error::validation(
                "element lies outside the algebra span",
                res,
                tol.check_tol,
            ));
        }
        Ok(self.coords_of(m))
    }

    pub fn from_coords(&self, v: &CVector) -> CMatrix {
        let mut acc = linalg::zeros(self.ambient_dim, self.ambient_dim);
        for (p, b) in self.basis.iter().enumerate() {
            acc += b.map(|z| z * v[p]);
        }
        acc
    }

    /// Left multiplication by the element with coordinates `v`, as a matrix
    /// acting on coordinates.
    pub fn lm(&self, v: &CVector) -> CMatrix {
        let d = self.dim();
        let mut acc = linalg::zeros(d, d);
        for p in 0..d {
            acc += self.left_mult[p].map(|z| z * v[p]);
        }
        acc
    }

    /// Right multiplication analogue of [`Self::lm`].
    pub fn rm(&self, v: &CVector) -> CMatrix {
        let d = self.dim();
        let mut acc = linalg::zeros(d, d);
        for q in 0..d {
            acc += self.right_mult[q].map(|z| z * v[q]);
        }
        acc
    }

    /// Coordinates of the product `x · y`.
    pub fn mult(&self, x: &CVector, y: &CVector) -> CVector {
        self.lm(x) * y
    }

    /// Coordinates of the adjoint `x*`.
    pub fn star(&self, v: &CVector) -> CVector {
        &self.star * v.map(|z| z.conj())
    }

    /// Left-multiplication table entry for basis element `p`.
    pub fn left_mult_table(&self, p: usize) -> &CMatrix {
        &self.left_mult[p]
    }
}

/// Normalized HS inner product `tr(a* b)/n`.
fn hs_dot(a: &CMatrix, b: &CMatrix, n: usize) -> Complex64 {
    let mut acc = Complex64::ZERO;
    for (x, y) in a.iter().zip(b.iter()) {
        acc += x.conj() * y;
    }
    acc / n as f64
}

/// A validated unital *-embedding `ε : B → A` between two concrete algebras,
/// stored as the linear map on coordinates.
#[derive(Debug, Clone)]
pub struct StarEmbedding {
    source: Arc<FiniteCStarAlgebra>,
    target: Arc<FiniteCStarAlgebra>,
    matrix: CMatrix,
}

impl StarEmbedding {
    /// Builds and validates an embedding from one ambient image per source
    /// basis element.
    pub fn new(
        source: Arc<FiniteCStarAlgebra>,
        target: Arc<FiniteCStarAlgebra>,
        images: &[CMatrix],
        tol: &TolerancePolicy,
    ) -> Result<Self> {
        if images.len() != source.dim() {
            return Err(Error::Shape(format!(
                "embedding needs {} images, got {}",
                source.dim(),
                images.len()
            )));
        }
        let mut matrix = linalg::zeros(target.dim(), source.dim());
        for (p, img) in images.iter().enumerate() {
            let coords = target.coords_checked(img, tol).map_err(|_| {
                Error::validation(
                    format!("embedding image of basis element {p} lies outside the target span"),
                    target.span_residual(img),
                    tol.check_tol,
                )
            })?;
            matrix.set_column(p, &coords);
        }
        let emb = StarEmbedding {
            source,
            target,
            matrix,
        };
        emb.validate(tol)?;
        Ok(emb)
    }

    /// The identity embedding of an algebra into itself.
    pub fn identity(algebra: Arc<FiniteCStarAlgebra>, tol: &TolerancePolicy) -> Result<Self> {
        let images: Vec<CMatrix> = algebra.basis().to_vec();
        StarEmbedding::new(algebra.clone(), algebra, &images, tol)
    }

    /// Composition `outer ∘ inner` (inner: B → C, outer: C → A), revalidated.
    pub fn compose(
        outer: &StarEmbedding,
        inner: &StarEmbedding,
        tol: &TolerancePolicy,
    ) -> Result<Self> {
        if inner.target.dim() != outer.source.dim()
            || inner.target.ambient_dim() != outer.source.ambient_dim()
        {
            return Err(Error::Shape(
                "embedding composition: middle algebras differ".into(),
            ));
        }
        let matrix = &outer.matrix * &inner.matrix;
        let images: Vec<CMatrix> = (0..inner.source.dim())
            .map(|p| outer.target.from_coords(&matrix.column(p).into_owned()))
            .collect();
        StarEmbedding::new(inner.source.clone(), outer.target.clone(), &images, tol)
    }

    fn validate(&self, tol: &TolerancePolicy) -> Result<()> {
        let b = &self.source;
        let a = &self.target;
        let m = &self.matrix;

        // unital
        let unital_res = (m * b.unit_coords() - a.unit_coords()).norm();
        if unital_res > tol.check_tol {
            return Err(Error::validation(
                "embedding is not unital",
                unital_res,
                tol.check_tol,
            ));
        }
        // multiplicative on all basis pairs
        for p in 0..b.dim() {
            let ep = m.column(p).into_owned();
            for q in 0..b.dim() {
                let eq = m.column(q).into_owned();
                let lhs = a.mult(&ep, &eq);
                let rhs = m * b.mult(&basis_vec(b.dim(), p), &basis_vec(b.dim(), q));
                let res = (lhs - rhs).norm();
                if res > tol.check_tol {
                    return Err(Error::validation(
                        format!("embedding is not multiplicative at basis pair ({p},{q})"),
                        res,
                        tol.check_tol,
                    ));
                }
            }
        }
        // *-preserving
        for p in 0..b.dim() {
            let ep = m.column(p).into_owned();
            let lhs = m * b.star(&basis_vec(b.dim(), p));
            let rhs = a.star(&ep);
            let res = (lhs - rhs).norm();
            if res > tol.check_tol {
                return Err(Error::validation(
                    format!("embedding is not *-preserving at basis element {p}"),
                    res,
                    tol.check_tol,
                ));
            }
        }
        // injective
        let (_, rank) = orthonormal_columns(m, tol);
        if rank != b.dim() {
            return Err(Error::validation(
                format!("embedding is rank-deficient (rank {rank} < {})", b.dim()),
                rank as f64,
                tol.rank_tol,
            ));
        }
        Ok(())
    }

    pub fn source(&self) -> &Arc<FiniteCStarAlgebra> {
        &self.source
    }

    pub fn target(&self) -> &Arc<FiniteCStarAlgebra> {
        &self.target
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// Target coordinates of `ε(x)` for source coordinates `x`.
    pub fn apply(&self, v: &CVector) -> CVector {
        &self.matrix * v
    }

    /// Ambient image of the `p`-th source basis element.
    pub fn image_of_basis(&self, p: usize) -> CMatrix {
        self.target.from_coords(&self.matrix.column(p).into_owned())
    }
}

/// A conditional expectation `E : A → ε(B)`, stored as a linear map on
/// A-coordinates together with the pull-back to B-coordinates.
#[derive(Debug, Clone)]
pub struct ConditionalExpectation {
    embedding: StarEmbedding,
    /// `matrix · coords_A(x) = coords_A(E(x))`
    matrix: CMatrix,
    /// `to_b · coords_A(x) = coords_B(ε⁻¹ E(x))`
    to_b: CMatrix,
}

impl ConditionalExpectation {
    /// The canonical trace-preserving conditional expectation: orthogonal
    /// projection of `A` onto `ε(B)` in the normalized HS inner product.
    pub fn canonical(embedding: &StarEmbedding, tol: &TolerancePolicy) -> Result<Self> {
        let (q, rank) = orthonormal_columns(embedding.matrix(), tol);
        if rank != embedding.source().dim() {
            return Err(Error::internal(
                "canonical expectation: embedded copy has deficient rank",
                rank as f64,
            ));
        }
        let matrix = &q * q.adjoint();
        Self::from_matrix(embedding.clone(), matrix, tol)
    }

    /// Validates a user-supplied expectation given as a coordinate map.
    pub fn from_matrix(
        embedding: StarEmbedding,
        matrix: CMatrix,
        tol: &TolerancePolicy,
    ) -> Result<Self> {
        let a = embedding.target().clone();
        let b = embedding.source().clone();
        let da = a.dim();
        let db = b.dim();
        if matrix.shape() != (da, da) {
            return Err(Error::Shape(format!(
                "expectation matrix is {}x{}, expected {da}x{da}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }

        // idempotent
        let idem_res = fro_diff(&(&matrix * &matrix), &matrix);
        if idem_res > tol.check_tol * (1.0 + fro(&matrix)) {
            return Err(Error::validation(
                "expectation is not idempotent",
                idem_res,
                tol.check_tol,
            ));
        }

        // range inside ε(B): E = P_{ε(B)} E must hold
        let (q, _) = orthonormal_columns(embedding.matrix(), tol);
        let range_res = fro_diff(&(&q * (q.adjoint() * &matrix)), &matrix);
        if range_res > tol.check_tol * (1.0 + fro(&matrix)) {
            return Err(Error::validation(
                "expectation range is not contained in the embedded subalgebra",
                range_res,
                tol.check_tol,
            ));
        }

        // pull-back through ε: to_b = (M*M)⁻¹ M* E
        let m = embedding.matrix();
        let gram = m.adjoint() * m;
        let gram_inv = gram
            .try_inverse()
            .ok_or_else(|| Error::internal("expectation: embedding gram not invertible", 0.0))?;
        let to_b = gram_inv * m.adjoint() * &matrix;

        // E ∘ ε = identity on B
        let eps_res = fro_diff(&(&to_b * m), &linalg::identity(db));
        if eps_res > tol.check_tol {
            return Err(Error::validation(
                "expectation does not restrict to the identity on B",
                eps_res,
                tol.check_tol,
            ));
        }

        let exp = ConditionalExpectation {
            embedding,
            matrix,
            to_b,
        };
        exp.validate_bimodule(tol)?;
        exp.validate_ucp(tol)?;
        Ok(exp)
    }

    /// B-bimodule property `E(ε(b₁) a ε(b₂)) = ε(b₁) E(a) ε(b₂)` on all
    /// basis triples.
    fn validate_bimodule(&self, tol: &TolerancePolicy) -> Result<()> {
        let a = self.embedding.target();
        let b = self.embedding.source();
        let m = self.embedding.matrix();
        for p in 0..b.dim() {
            let left = a.lm(&m.column(p).into_owned());
            for r in 0..b.dim() {
                let right = a.rm(&m.column(r).into_owned());
                let wrap = &left * &right;
                for q in 0..a.dim() {
                    let eq = basis_vec(a.dim(), q);
                    let lhs = &self.matrix * (&wrap * &eq);
                    let rhs = &wrap * (&self.matrix * &eq);
                    let res = (lhs - rhs).norm();
                    if res > tol.check_tol {
                        return Err(Error::validation(
                            format!(
                                "expectation bimodule property fails at triple ({p},{q},{r})"
                            ),
                            res,
                            tol.check_tol,
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// Unitality plus complete positivity via the Gram–Choi test, with the
    /// expectation viewed as a map into operators on the ambient space.
    fn validate_ucp(&self, tol: &TolerancePolicy) -> Result<()> {
        let a = self.embedding.target();
        let unital_res = (&self.matrix * a.unit_coords() - a.unit_coords()).norm();
        if unital_res > tol.check_tol {
            return Err(Error::validation(
                "expectation is not unital",
                unital_res,
                tol.check_tol,
            ));
        }
        let action: Vec<CMatrix> = (0..a.dim())
            .map(|p| a.from_coords(&(&self.matrix * basis_vec(a.dim(), p))))
            .collect();
        let (min_eig, scale) = crate::cpmap::gram_choi_min_eig(a, &action, tol)?;
        if min_eig < -tol.check_tol * scale.max(1.0) {
            return Err(Error::validation(
                "expectation is not completely positive",
                min_eig,
                tol.check_tol,
            ));
        }
        Ok(())
    }

    pub fn embedding(&self) -> &StarEmbedding {
        &self.embedding
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// A-coordinates of `E(x)`.
    pub fn apply(&self, v: &CVector) -> CVector {
        &self.matrix * v
    }

    /// B-coordinates of `ε⁻¹(E(x))`.
    pub fn to_b(&self, v: &CVector) -> CVector {
        &self.to_b * v
    }

    /// How far the element with A-coordinates `v` sits from `ker E`.
    pub fn kernel_residual(&self, v: &CVector) -> f64 {
        (&self.matrix * v).norm()
    }

    /// HS-orthonormal basis of `ker E` inside `A`; dimension
    /// `dim A − dim B`.
    pub fn kernel_basis(&self, tol: &TolerancePolicy) -> Result<Vec<CMatrix>> {
        let a = self.embedding.target();
        let w = self.kernel_coords(tol)?;
        Ok((0..w.ncols())
            .map(|j| a.from_coords(&w.column(j).into_owned()))
            .collect())
    }

    /// Coordinate columns of the kernel basis.
    pub fn kernel_coords(&self, tol: &TolerancePolicy) -> Result<CMatrix> {
        let (q, _) = orthonormal_columns(self.embedding.matrix(), tol);
        complete_isometry(&q, tol)
    }
}

/// Basis of the intertwiner space `{X : X ρ(b) = π(b) X for all b}` for two
/// representations of the same algebra, given by their action matrices over
/// a shared basis. The empty basis is a legal answer.
pub fn rep_intertwiners(
    rho: &[CMatrix],
    pi: &[CMatrix],
    tol: &TolerancePolicy,
) -> Result<Vec<CMatrix>> {
    if rho.len() != pi.len() {
        return Err(Error::Shape(
            "intertwiners: action lists differ in length".into(),
        ));
    }
    let h1 = rho.first().map_or(0, |m| m.nrows());
    let h2 = pi.first().map_or(0, |m| m.nrows());
    if h1 == 0 || h2 == 0 {
        return Ok(Vec::new());
    }
    let nv = h1 * h2;
    // stack the constraints (ρ(b)ᵀ ⊗ I − I ⊗ π(b)) vec(X) = 0
    let i1 = linalg::identity(h1);
    let i2 = linalg::identity(h2);
    let mut stacked = linalg::zeros(rho.len() * nv, nv);
    for (k, (r, p)) in rho.iter().zip(pi.iter()).enumerate() {
        let blk = r.transpose().kronecker(&i2) - i1.kronecker(p);
        stacked.view_mut((k * nv, 0), (nv, nv)).copy_from(&blk);
    }
    // null(M) = orthogonal complement of range(M*); the rank decision is
    // taken relative to the size of the representations, not to the
    // residual noise (the constraint matrix is legitimately zero when the
    // two actions commute with everything)
    let scale = rho
        .iter()
        .chain(pi.iter())
        .map(crate::linalg::fro)
        .fold(0.0_f64, f64::max);
    let (range_q, _) = crate::linalg::orthonormal_columns_floor(&stacked.adjoint(), scale, tol);
    let null_basis = complete_isometry(&range_q, tol)?;
    Ok((0..null_basis.ncols())
        .map(|j| CMatrix::from_fn(h2, h1, |k, l| null_basis[(l * h2 + k, j)]))
        .collect())
}
