//! Shared fixtures for the benchmark targets.

use num_complex::Complex64;

use amalgam_core::algebra::{FiniteCStarAlgebra, StarEmbedding};
use amalgam_core::cpmap::CpMap;
use amalgam_core::extend::{boca_extend_canonical, UcpExtension};
use amalgam_core::linalg::{identity, CMatrix};
use amalgam_core::TolerancePolicy;

/// B = scalars, A₁ = A₂ = M₂, Φ_i the vector state: the smallest instance
/// with a nontrivial tower (dimensions triple per level).
pub fn pauli_maps() -> (Vec<CpMap>, Vec<StarEmbedding>, TolerancePolicy) {
    let t = TolerancePolicy::default();
    let b = FiniteCStarAlgebra::scalars(&t).unwrap();
    let m2 = FiniteCStarAlgebra::full_matrix(2, &t).unwrap();
    let mut maps = Vec::new();
    let mut embs = Vec::new();
    for _ in 0..2 {
        embs.push(StarEmbedding::new(b.clone(), m2.clone(), &[identity(2)], &t).unwrap());
        let action: Vec<CMatrix> = m2
            .basis()
            .iter()
            .map(|bm| CMatrix::from_row_slice(1, 1, &[bm[(0, 0)]]))
            .collect();
        maps.push(CpMap::new(m2.clone(), 1, action, &t).unwrap());
    }
    (maps, embs, t)
}

pub fn pauli_extension(depth: usize) -> UcpExtension {
    let (maps, embs, t) = pauli_maps();
    boca_extend_canonical(maps, embs, depth, &t).unwrap()
}

/// Tracial state of M_n, whose Gram form is full rank: the worst case for
/// the GNS dilation at a given ambient dimension.
pub fn tracial_state(n: usize) -> CpMap {
    let t = TolerancePolicy::default();
    let a = FiniteCStarAlgebra::full_matrix(n, &t).unwrap();
    let action: Vec<CMatrix> = a
        .basis()
        .iter()
        .map(|b| CMatrix::from_row_slice(1, 1, &[b.trace() / n as f64]))
        .collect();
    CpMap::new(a, 1, action, &t).unwrap()
}

/// σ_z ⊗ σ_x alternating word of the given length as a free element.
pub fn alternating_word(ext: &UcpExtension, len: usize) -> amalgam_core::freeprod::FreeElement {
    let am = ext.amalgam();
    let t = TolerancePolicy::default();
    let sz = CMatrix::from_row_slice(
        2,
        2,
        &[
            Complex64::ONE,
            Complex64::ZERO,
            Complex64::ZERO,
            -Complex64::ONE,
        ],
    );
    let sx = CMatrix::from_row_slice(
        2,
        2,
        &[
            Complex64::ZERO,
            Complex64::ONE,
            Complex64::ONE,
            Complex64::ZERO,
        ],
    );
    let mut x = am.letter(0, &sz, &t).unwrap();
    for k in 1..len {
        let (i, m) = if k % 2 == 1 { (1, &sx) } else { (0, &sz) };
        x = am.multiply(&x, &am.letter(i, m, &t).unwrap()).unwrap();
    }
    x
}
