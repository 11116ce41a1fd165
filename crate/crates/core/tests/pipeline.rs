//! End-to-end construction through the public API only, on instances small
//! enough to reason about by hand.

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use amalgam_core::algebra::{FiniteCStarAlgebra, StarEmbedding};
use amalgam_core::cpmap::CpMap;
use amalgam_core::extend::{boca_extend_canonical, UcpExtension};
use amalgam_core::freeprod::{FreeElement, FreeLetter, FreeTerm};
use amalgam_core::linalg::{fro_diff, identity, CMatrix, CVector};
use amalgam_core::TolerancePolicy;

fn tol() -> TolerancePolicy {
    TolerancePolicy::default()
}

/// B = scalars, A₁ = A₂ = M₂, Φ_i the vector state at e₁.
fn pauli_extension(depth: usize) -> UcpExtension {
    let t = tol();
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
    boca_extend_canonical(maps, embs, depth, &t).unwrap()
}

fn random_element(ext: &UcpExtension, rng: &mut ChaCha8Rng, max_len: usize) -> FreeElement {
    let am = ext.amalgam();
    let mut c = |rng: &mut ChaCha8Rng| {
        Complex64::new(rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0)
    };
    let terms = (0..(1 + rng.random_range(0..3)))
        .map(|_| {
            let len = 1 + rng.random_range(0..max_len);
            let letters = (0..len)
                .map(|_| {
                    let index = rng.random_range(0..am.num_indices());
                    let dim = am.algebras()[index].dim();
                    FreeLetter {
                        index,
                        coords: CVector::from_fn(dim, |_, _| c(rng)),
                    }
                })
                .collect();
            FreeTerm {
                coeff: c(rng),
                letters,
            }
        })
        .collect();
    let b_part = CVector::from_fn(am.base().dim(), |_, _| c(rng));
    am.element(b_part, terms).unwrap()
}

#[test]
fn tower_dimensions_follow_the_gram_ranks() {
    // seeds are 1-dimensional, the tracial Gram form on M₂ has rank 4, so
    // each level multiplies the space count by 3: dims 1,1,3,3,9,9
    let ext = pauli_extension(3);
    let dims: Vec<usize> = (0..ext.tower().words().len())
        .map(|w| ext.tower().dim(w))
        .collect();
    assert_eq!(dims, vec![1, 1, 3, 3, 9, 9]);
    assert_eq!(ext.tower().total_dim(), 26);
}

#[test]
fn evaluation_respects_star_and_linearity() {
    let ext = pauli_extension(3);
    let am = ext.amalgam().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..20 {
        let x = random_element(&ext, &mut rng, 3);
        let y = random_element(&ext, &mut rng, 3);
        // linearity
        let sum = x.plus(&y);
        let vx = ext.evaluate(&x).unwrap().value;
        let vy = ext.evaluate(&y).unwrap().value;
        let vsum = ext.evaluate(&sum).unwrap().value;
        assert!(fro_diff(&vsum, &(&vx + &vy)) < 1e-10);
        // hermiticity
        assert!(ext.hermiticity_residual(&x).unwrap() < 1e-8);
        // multiplicativity is NOT expected of Φ, but Φ(x*x) must be PSD
        let xx = am.multiply(&am.adjoint(&x).unwrap(), &x);
        if let Ok(xx) = xx {
            if xx.max_word_len() <= ext.depth() {
                let v = ext.evaluate(&xx).unwrap().value;
                assert!(v[(0, 0)].re > -1e-8);
            }
        }
    }
}

#[test]
fn b_part_evaluates_through_rho0() {
    let t = tol();
    let ext = pauli_extension(2);
    let am = ext.amalgam().clone();
    // B = scalars: Φ(λ·1) = λ·I_h
    let x = am
        .from_b(CVector::from_vec(vec![Complex64::new(0.25, -2.0)]))
        .unwrap();
    let v = ext.evaluate(&x).unwrap().value;
    assert!((v[(0, 0)] - Complex64::new(0.25, -2.0)).norm() < 1e-12);
    let _ = t;
}

#[test]
fn deep_rebuilds_are_reproducible() {
    let e1 = pauli_extension(3);
    let e2 = pauli_extension(3);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..5 {
        let x = random_element(&e1, &mut rng, 3);
        let v1 = e1.evaluate(&x).unwrap().value;
        let v2 = e2.evaluate(&x).unwrap().value;
        assert_eq!(v1, v2); // bit-identical, not merely close
    }
}

#[test]
fn degenerate_base_algebra_round_trip() {
    // B = A_i = D₂ with a 2-dimensional seed representation: the extension
    // is ρ₀ itself and every element evaluates through it
    let t = tol();
    let b = FiniteCStarAlgebra::block_diagonal(&[1, 1], &t).unwrap();
    let emb = StarEmbedding::identity(b.clone(), &t).unwrap();
    let rep = CpMap::representation(b.clone(), 2, b.basis().to_vec(), &t).unwrap();
    let ext = boca_extend_canonical(
        vec![rep.clone(), rep.clone()],
        vec![emb.clone(), emb],
        2,
        &t,
    )
    .unwrap();
    let am = ext.amalgam().clone();
    let x = am.letter(0, &b.basis()[0].clone(), &t).unwrap();
    let v = ext.evaluate(&x).unwrap().value;
    assert!(fro_diff(&v, &rep.action()[0]) < 1e-12);
    // words evaluate to products under ρ₀
    let w = am
        .multiply(
            &am.letter(0, &b.basis()[0].clone(), &t).unwrap(),
            &am.letter(1, &b.basis()[1].clone(), &t).unwrap(),
        )
        .unwrap();
    let v = ext.evaluate(&w).unwrap().value;
    let expected = &rep.action()[0] * &rep.action()[1];
    assert!(fro_diff(&v, &expected) < 1e-12);
}

#[test]
fn arc_sharing_is_cheap_and_safe() {
    let ext = Arc::new(pauli_extension(3));
    let am = ext.amalgam().clone();
    let t = tol();
    let sz = am
        .letter(
            0,
            &CMatrix::from_row_slice(
                2,
                2,
                &[
                    Complex64::ONE,
                    Complex64::ZERO,
                    Complex64::ZERO,
                    -Complex64::ONE,
                ],
            ),
            &t,
        )
        .unwrap();
    // concurrent read-only evaluation
    let handles: Vec<_> = (0..4)
        .map(|_| {
            let ext = ext.clone();
            let sz = sz.clone();
            std::thread::spawn(move || ext.evaluate(&sz).unwrap().value)
        })
        .collect();
    let values: Vec<CMatrix> = handles.into_iter().map(|h| h.join().unwrap()).collect();
    for v in &values[1..] {
        assert_eq!(values[0], *v);
    }
}
