//! Formal elements of the *-algebraic amalgamated free product.
//!
//! An element is a `B`-part plus a finite sum of coefficient-weighted words
//! of index-tagged letters; words need not be reduced and letters need not
//! be centered. The normal form rewrites an element so that every word
//! alternates between algebras and every letter lies in the kernel of its
//! algebra's conditional expectation — the linear-space decomposition of the
//! free product into `B` plus tensor words of expectation kernels.
//!
//! Tensor-word representatives are stored as letter lists, not as
//! equivalence classes modulo the `⊗_B` relations; equality of elements is
//! observational (agreement under evaluation), which is what every check in
//! this crate needs.

use std::sync::Arc;

use num_complex::Complex64;

use crate::algebra::{ConditionalExpectation, FiniteCStarAlgebra, StarEmbedding};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector};
use crate::tol::TolerancePolicy;

/// One letter: an element of `A_index` in coordinates.
#[derive(Debug, Clone)]
pub struct FreeLetter {
    pub index: usize,
    pub coords: CVector,
}

/// One word with its coefficient.
#[derive(Debug, Clone)]
pub struct FreeTerm {
    pub coeff: Complex64,
    pub letters: Vec<FreeLetter>,
}

/// A formal element: `b ⊕ Σ c_w · w`. The empty word is the unit and its
/// contributions live in `b_part`.
#[derive(Debug, Clone)]
pub struct FreeElement {
    pub b_part: CVector,
    pub terms: Vec<FreeTerm>,
}

impl FreeElement {
    /// Longest word length appearing in the element.
    pub fn max_word_len(&self) -> usize {
        self.terms.iter().map(|t| t.letters.len()).max().unwrap_or(0)
    }

    pub fn scale(&self, z: Complex64) -> FreeElement {
        FreeElement {
            b_part: self.b_part.map(|x| x * z),
            terms: self
                .terms
                .iter()
                .map(|t| FreeTerm {
                    coeff: t.coeff * z,
                    letters: t.letters.clone(),
                })
                .collect(),
        }
    }

    pub fn plus(&self, other: &FreeElement) -> FreeElement {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        FreeElement {
            b_part: &self.b_part + &other.b_part,
            terms,
        }
    }
}

/// The shared context: a base algebra `B` and the family `A_i` with
/// embeddings `ε_i : B → A_i`.
#[derive(Debug, Clone)]
pub struct Amalgam {
    base: Arc<FiniteCStarAlgebra>,
    algebras: Vec<Arc<FiniteCStarAlgebra>>,
    embeddings: Vec<StarEmbedding>,
}

impl Amalgam {
    pub fn new(
        algebras: Vec<Arc<FiniteCStarAlgebra>>,
        embeddings: Vec<StarEmbedding>,
    ) -> Result<Self> {
        if algebras.is_empty() || algebras.len() != embeddings.len() {
            return Err(Error::Shape(
                "amalgam needs one embedding per algebra".into(),
            ));
        }
        let base = embeddings[0].source().clone();
        for (i, emb) in embeddings.iter().enumerate() {
            if emb.source().dim() != base.dim()
                || emb.source().ambient_dim() != base.ambient_dim()
            {
                return Err(Error::Shape(format!(
                    "embedding {i} does not start from the common base algebra"
                )));
            }
            if emb.target().dim() != algebras[i].dim()
                || emb.target().ambient_dim() != algebras[i].ambient_dim()
            {
                return Err(Error::Shape(format!(
                    "embedding {i} does not target algebra {i}"
                )));
            }
        }
        Ok(Amalgam {
            base,
            algebras,
            embeddings,
        })
    }

    pub fn base(&self) -> &Arc<FiniteCStarAlgebra> {
        &self.base
    }

    pub fn algebras(&self) -> &[Arc<FiniteCStarAlgebra>] {
        &self.algebras
    }

    pub fn embeddings(&self) -> &[StarEmbedding] {
        &self.embeddings
    }

    pub fn num_indices(&self) -> usize {
        self.algebras.len()
    }

    pub fn zero(&self) -> FreeElement {
        FreeElement {
            b_part: CVector::zeros(self.base.dim()),
            terms: Vec::new(),
        }
    }

    /// The multiplicative unit (the unit of `B` in the empty word).
    pub fn unit(&self) -> FreeElement {
        FreeElement {
            b_part: self.base.unit_coords().clone(),
            terms: Vec::new(),
        }
    }

    /// An element of `B` as a free element.
    pub fn from_b(&self, b_coords: CVector) -> Result<FreeElement> {
        if b_coords.len() != self.base.dim() {
            return Err(Error::Shape("b-part has wrong length".into()));
        }
        Ok(FreeElement {
            b_part: b_coords,
            terms: Vec::new(),
        })
    }

    /// A single ambient matrix of `A_index` as a one-letter element.
    pub fn letter(&self, index: usize, m: &CMatrix, tol: &TolerancePolicy) -> Result<FreeElement> {
        let coords = self.letter_coords(index, m, tol)?;
        Ok(self.letter_from_coords(index, coords))
    }

    pub fn letter_coords(
        &self,
        index: usize,
        m: &CMatrix,
        tol: &TolerancePolicy,
    ) -> Result<CVector> {
        if index >= self.algebras.len() {
            return Err(Error::Shape(format!("letter index {index} out of range")));
        }
        self.algebras[index].coords_checked(m, tol)
    }

    pub fn letter_from_coords(&self, index: usize, coords: CVector) -> FreeElement {
        FreeElement {
            b_part: CVector::zeros(self.base.dim()),
            terms: vec![FreeTerm {
                coeff: Complex64::ONE,
                letters: vec![FreeLetter { index, coords }],
            }],
        }
    }

    /// Builds an element from raw terms; empty words fold into the B-part.
    pub fn element(&self, b_part: CVector, terms: Vec<FreeTerm>) -> Result<FreeElement> {
        if b_part.len() != self.base.dim() {
            return Err(Error::Shape("b-part has wrong length".into()));
        }
        let mut out = FreeElement {
            b_part,
            terms: Vec::new(),
        };
        for t in terms {
            self.check_term(&t)?;
            if t.letters.is_empty() {
                out.b_part += self.base.unit_coords().map(|z| z * t.coeff);
            } else {
                out.terms.push(t);
            }
        }
        Ok(out)
    }

    fn check_term(&self, t: &FreeTerm) -> Result<()> {
        for l in &t.letters {
            if l.index >= self.algebras.len() {
                return Err(Error::Shape(format!("letter index {} out of range", l.index)));
            }
            if l.coords.len() != self.algebras[l.index].dim() {
                return Err(Error::Shape(format!(
                    "letter coordinates have length {}, algebra {} has dimension {}",
                    l.coords.len(),
                    l.index + 1,
                    self.algebras[l.index].dim()
                )));
            }
        }
        Ok(())
    }

    /// Shape validation of an element against this context.
    pub fn validate_element(&self, x: &FreeElement) -> Result<()> {
        if x.b_part.len() != self.base.dim() {
            return Err(Error::Shape("element b-part has wrong length".into()));
        }
        for t in &x.terms {
            self.check_term(t)?;
        }
        Ok(())
    }

    /// Bilinear concatenation product. Adjacent same-index letters are left
    /// unmerged (the normal form does that); B-parts multiply into the
    /// neighbouring letter through the embeddings.
    pub fn multiply(&self, x: &FreeElement, y: &FreeElement) -> Result<FreeElement> {
        self.validate_element(x)?;
        self.validate_element(y)?;
        let mut out = self.zero();
        out.b_part = self.base.mult(&x.b_part, &y.b_part);
        let b_left_nonzero = x.b_part.norm_squared() > 0.0;
        let b_right_nonzero = y.b_part.norm_squared() > 0.0;
        for t in &y.terms {
            if !b_left_nonzero {
                break;
            }
            let mut letters = t.letters.clone();
            let first = &mut letters[0];
            let eps_b = self.embeddings[first.index].apply(&x.b_part);
            first.coords = self.algebras[first.index].mult(&eps_b, &first.coords);
            out.terms.push(FreeTerm {
                coeff: t.coeff,
                letters,
            });
        }
        for t in &x.terms {
            if !b_right_nonzero {
                break;
            }
            let mut letters = t.letters.clone();
            let last = letters.last_mut().unwrap();
            let eps_b = self.embeddings[last.index].apply(&y.b_part);
            last.coords = self.algebras[last.index].mult(&last.coords, &eps_b);
            out.terms.push(FreeTerm {
                coeff: t.coeff,
                letters,
            });
        }
        for tx in &x.terms {
            for ty in &y.terms {
                let mut letters = tx.letters.clone();
                letters.extend(ty.letters.iter().cloned());
                out.terms.push(FreeTerm {
                    coeff: tx.coeff * ty.coeff,
                    letters,
                });
            }
        }
        Ok(out)
    }

    /// The involution: reverse each word, adjoint each letter, conjugate
    /// every coefficient.
    pub fn adjoint(&self, x: &FreeElement) -> Result<FreeElement> {
        self.validate_element(x)?;
        let terms = x
            .terms
            .iter()
            .map(|t| FreeTerm {
                coeff: t.coeff.conj(),
                letters: t
                    .letters
                    .iter()
                    .rev()
                    .map(|l| FreeLetter {
                        index: l.index,
                        coords: self.algebras[l.index].star(&l.coords),
                    })
                    .collect(),
            })
            .collect();
        Ok(FreeElement {
            b_part: self.base.star(&x.b_part),
            terms,
        })
    }

    /// Rewrites an element into its kernel-centered normal form: every word
    /// alternates between algebras and every letter lies in `ker E_i`.
    ///
    /// Each pass merges adjacent same-index letters, splits every letter
    /// into its expectation part and centered remainder, expands
    /// multilinearly, and migrates the B-factors into a neighbouring letter
    /// (or into the B-part when a word empties). A merge strictly shortens
    /// a word, so the letter count bounds the passes; exceeding that bound
    /// is an internal error.
    pub fn normal_form(
        &self,
        x: &FreeElement,
        expectations: &[ConditionalExpectation],
    ) -> Result<FreeElement> {
        self.validate_element(x)?;
        if expectations.len() != self.algebras.len() {
            return Err(Error::Shape(
                "normal form needs one expectation per algebra".into(),
            ));
        }
        let mut out = FreeElement {
            b_part: x.b_part.clone(),
            terms: Vec::new(),
        };
        // worklist with a per-term pass budget
        let mut queue: std::collections::VecDeque<(Vec<FreeLetter>, Complex64, usize)> = x
            .terms
            .iter()
            .map(|t| (t.letters.clone(), t.coeff, t.letters.len() + 1))
            .collect();
        while let Some((letters, coeff, budget)) = queue.pop_front() {
            if budget == 0 {
                return Err(Error::internal(
                    "normal form failed to terminate within its pass budget",
                    letters.len() as f64,
                ));
            }
            // merge adjacent same-index letters
            let mut merged: Vec<FreeLetter> = Vec::with_capacity(letters.len());
            for l in letters {
                match merged.last_mut() {
                    Some(prev) if prev.index == l.index => {
                        prev.coords = self.algebras[l.index].mult(&prev.coords, &l.coords);
                    }
                    _ => merged.push(l),
                }
            }
            if merged.is_empty() {
                out.b_part += self.base.unit_coords().map(|z| z * coeff);
                continue;
            }
            // a merged word with a numerically zero letter is zero
            let scale = merged
                .iter()
                .map(|l| l.coords.norm())
                .fold(0.0_f64, f64::max);
            if merged.iter().any(|l| l.coords.norm() <= 1e-14 * (1.0 + scale)) {
                continue;
            }

            // expectation split of each letter
            let splits: Vec<(CVector, CVector, f64, f64)> = merged
                .iter()
                .map(|l| {
                    let b = expectations[l.index].to_b(&l.coords);
                    let centered = &l.coords - self.embeddings[l.index].apply(&b);
                    let bn = b.norm();
                    let cn = centered.norm();
                    (b, centered, bn, cn)
                })
                .collect();
            let split_tol = |l: &FreeLetter| 1e-12 * (1.0 + l.coords.norm());
            let all_centered = merged
                .iter()
                .zip(splits.iter())
                .all(|(l, s)| s.2 <= split_tol(l));
            if all_centered {
                // already alternating (merge ran) with centered letters
                out.terms.push(FreeTerm {
                    coeff,
                    letters: merged,
                });
                continue;
            }

            // expand over the B-/centered choice at every letter
            let k = merged.len();
            let mut stack: Vec<(usize, CVector, Vec<FreeLetter>)> =
                vec![(0, self.base.unit_coords().clone(), Vec::new())];
            while let Some((pos, pending_b, word)) = stack.pop() {
                if pos == k {
                    let pending_is_unit =
                        (&pending_b - self.base.unit_coords()).norm() <= 1e-14;
                    let mut word = word;
                    if word.is_empty() {
                        out.b_part += pending_b.map(|z| z * coeff);
                    } else {
                        if !pending_is_unit {
                            let last = word.last_mut().unwrap();
                            let eps_b = self.embeddings[last.index].apply(&pending_b);
                            last.coords =
                                self.algebras[last.index].mult(&last.coords, &eps_b);
                        }
                        let alternating =
                            word.windows(2).all(|w| w[0].index != w[1].index);
                        if alternating {
                            out.terms.push(FreeTerm {
                                coeff,
                                letters: word,
                            });
                        } else {
                            queue.push_back((word, coeff, budget - 1));
                        }
                    }
                    continue;
                }
                let letter = &merged[pos];
                let (b, centered, bn, cn) = &splits[pos];
                // centered choice
                if *cn > split_tol(letter) {
                    let mut next_word = word.clone();
                    let mut coords = centered.clone();
                    let pending_is_unit =
                        (&pending_b - self.base.unit_coords()).norm() <= 1e-14;
                    if !pending_is_unit {
                        let eps_b = self.embeddings[letter.index].apply(&pending_b);
                        coords = self.algebras[letter.index].mult(&eps_b, &coords);
                    }
                    next_word.push(FreeLetter {
                        index: letter.index,
                        coords,
                    });
                    stack.push((pos + 1, self.base.unit_coords().clone(), next_word));
                }
                // B choice
                if *bn > split_tol(letter) {
                    let next_pending = self.base.mult(&pending_b, b);
                    stack.push((pos + 1, next_pending, word));
                }
            }
        }
        Ok(out)
    }

    /// Residual of the normal-form invariant: worst expectation-kernel
    /// residual over all letters, or infinity when some word fails to
    /// alternate.
    pub fn normalized_residual(
        &self,
        x: &FreeElement,
        expectations: &[ConditionalExpectation],
    ) -> f64 {
        let mut worst = 0.0_f64;
        for t in &x.terms {
            if t.letters.windows(2).any(|w| w[0].index == w[1].index) {
                return f64::INFINITY;
            }
            for l in &t.letters {
                worst = worst.max(expectations[l.index].kernel_residual(&l.coords));
            }
        }
        worst
    }
}

/// True when adjacent letters always carry different indices.
pub fn is_alternating(letters: &[FreeLetter]) -> bool {
    letters.windows(2).all(|w| w[0].index != w[1].index)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{fro_diff, identity, ONE, ZERO};

    fn tol() -> TolerancePolicy {
        TolerancePolicy::default()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// B = scalars, A₁ = A₂ = M₂.
    fn pauli_amalgam() -> Amalgam {
        let t = tol();
        let b = FiniteCStarAlgebra::scalars(&t).unwrap();
        let m2 = FiniteCStarAlgebra::full_matrix(2, &t).unwrap();
        let e1 = StarEmbedding::new(b.clone(), m2.clone(), &[identity(2)], &t).unwrap();
        let e2 = StarEmbedding::new(b, m2.clone(), &[identity(2)], &t).unwrap();
        Amalgam::new(vec![m2.clone(), m2], vec![e1, e2]).unwrap()
    }

    fn expectations(am: &Amalgam) -> Vec<ConditionalExpectation> {
        am.embeddings()
            .iter()
            .map(|e| ConditionalExpectation::canonical(e, &tol()).unwrap())
            .collect()
    }

    fn sigma_x() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
    }

    fn sigma_z() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, c(-1.0, 0.0)])
    }

    #[test]
    fn unit_is_neutral() {
        let am = pauli_amalgam();
        let t = tol();
        let x = am.letter(0, &sigma_z(), &t).unwrap();
        let ux = am.multiply(&am.unit(), &x).unwrap();
        let xu = am.multiply(&x, &am.unit()).unwrap();
        for y in [&ux, &xu] {
            assert_eq!(y.terms.len(), 1);
            assert!((&y.terms[0].letters[0].coords - &x.terms[0].letters[0].coords).norm() < 1e-12);
            assert!(y.b_part.norm() < 1e-14);
        }
    }

    #[test]
    fn cross_product_concatenates() {
        let am = pauli_amalgam();
        let t = tol();
        let a = am.letter(0, &sigma_z(), &t).unwrap();
        let b = am.letter(1, &sigma_x(), &t).unwrap();
        let ab = am.multiply(&a, &b).unwrap();
        assert_eq!(ab.terms.len(), 1);
        assert_eq!(ab.terms[0].letters.len(), 2);
        assert_eq!(ab.terms[0].letters[0].index, 0);
        assert_eq!(ab.terms[0].letters[1].index, 1);
    }

    #[test]
    fn same_index_square_normalizes_to_unit() {
        // (σ_x)·(σ_x) in A₁: stays a two-letter word under multiply, and the
        // normal form turns it into b_part = 1 with no words (σ_x² = I)
        let am = pauli_amalgam();
        let t = tol();
        let x = am.letter(0, &sigma_x(), &t).unwrap();
        let xx = am.multiply(&x, &x).unwrap();
        assert_eq!(xx.terms[0].letters.len(), 2);
        let nf = am.normal_form(&xx, &expectations(&am)).unwrap();
        assert!(nf.terms.is_empty());
        assert!((nf.b_part[0] - ONE).norm() < 1e-12);
    }

    #[test]
    fn adjoint_reverses_and_stars() {
        let am = pauli_amalgam();
        let t = tol();
        let a = am.letter(0, &sigma_z(), &t).unwrap();
        let b = am.letter(1, &sigma_x(), &t).unwrap();
        let ab = am.multiply(&a, &b).unwrap();
        let adj = am.adjoint(&ab).unwrap();
        assert_eq!(adj.terms[0].letters[0].index, 1);
        assert_eq!(adj.terms[0].letters[1].index, 0);
        // both letters are self-adjoint
        assert!(
            (&adj.terms[0].letters[1].coords - &ab.terms[0].letters[0].coords).norm() < 1e-12
        );
    }

    #[test]
    fn adjoint_is_involutive() {
        let am = pauli_amalgam();
        let t = tol();
        let mut x = am.letter(0, &sigma_z(), &t).unwrap().scale(c(0.3, 0.7));
        x = x.plus(&am.letter(1, &sigma_x(), &t).unwrap().scale(c(-1.0, 0.2)));
        x = x.plus(
            &am.multiply(
                &am.letter(0, &sigma_x(), &t).unwrap(),
                &am.letter(1, &sigma_z(), &t).unwrap(),
            )
            .unwrap(),
        );
        let twice = am.adjoint(&am.adjoint(&x).unwrap()).unwrap();
        assert!((&twice.b_part - &x.b_part).norm() < 1e-13);
        assert_eq!(twice.terms.len(), x.terms.len());
        for (s, t2) in x.terms.iter().zip(twice.terms.iter()) {
            assert!((s.coeff - t2.coeff).norm() < 1e-13);
            for (l1, l2) in s.letters.iter().zip(t2.letters.iter()) {
                assert!((&l1.coords - &l2.coords).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn normal_form_splits_single_letter() {
        // diag(2,0) = I + σ_z: b_part picks up 1, one σ_z word remains
        let am = pauli_amalgam();
        let t = tol();
        let mut d = CMatrix::zeros(2, 2);
        d[(0, 0)] = c(2.0, 0.0);
        let x = am.letter(0, &d, &t).unwrap();
        let nf = am.normal_form(&x, &expectations(&am)).unwrap();
        assert!((nf.b_part[0] - ONE).norm() < 1e-12);
        assert_eq!(nf.terms.len(), 1);
        let letter_mat = am.algebras()[0].from_coords(&nf.terms[0].letters[0].coords);
        assert!(fro_diff(&letter_mat, &sigma_z()) < 1e-12);
    }

    #[test]
    fn normal_form_expands_mixed_word() {
        // [σ_z ∈ A₁, diag(2,0) ∈ A₂] → [σ_z] + [σ_z, σ_z in A₂]
        let am = pauli_amalgam();
        let t = tol();
        let mut d = CMatrix::zeros(2, 2);
        d[(0, 0)] = c(2.0, 0.0);
        let x = am
            .multiply(
                &am.letter(0, &sigma_z(), &t).unwrap(),
                &am.letter(1, &d, &t).unwrap(),
            )
            .unwrap();
        let nf = am.normal_form(&x, &expectations(&am)).unwrap();
        assert!(nf.b_part.norm() < 1e-13);
        assert_eq!(nf.terms.len(), 2);
        let mut lens: Vec<usize> = nf.terms.iter().map(|t| t.letters.len()).collect();
        lens.sort();
        assert_eq!(lens, vec![1, 2]);
        for term in &nf.terms {
            assert!((term.coeff - ONE).norm() < 1e-12);
            let first = am.algebras()[0].from_coords(&term.letters[0].coords);
            assert!(fro_diff(&first, &sigma_z()) < 1e-12);
            if term.letters.len() == 2 {
                let second = am.algebras()[1].from_coords(&term.letters[1].coords);
                assert!(fro_diff(&second, &sigma_z()) < 1e-12);
            }
        }
    }

    #[test]
    fn normal_form_is_idempotent() {
        let am = pauli_amalgam();
        let t = tol();
        let exps = expectations(&am);
        let mut d = CMatrix::zeros(2, 2);
        d[(0, 0)] = c(2.0, 1.0);
        d[(1, 0)] = c(0.5, -0.25);
        let x = am
            .multiply(
                &am.letter(0, &d, &t).unwrap(),
                &am.multiply(
                    &am.letter(1, &d, &t).unwrap(),
                    &am.letter(0, &sigma_x(), &t).unwrap(),
                )
                .unwrap(),
            )
            .unwrap();
        let nf1 = am.normal_form(&x, &exps).unwrap();
        assert!(am.normalized_residual(&nf1, &exps) < 1e-10);
        let nf2 = am.normal_form(&nf1, &exps).unwrap();
        assert!((&nf1.b_part - &nf2.b_part).norm() < 1e-10);
        assert_eq!(nf1.terms.len(), nf2.terms.len());
        for (t1, t2) in nf1.terms.iter().zip(nf2.terms.iter()) {
            assert!((t1.coeff - t2.coeff).norm() < 1e-10);
            assert_eq!(t1.letters.len(), t2.letters.len());
            for (l1, l2) in t1.letters.iter().zip(t2.letters.iter()) {
                assert!((&l1.coords - &l2.coords).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn rejects_out_of_range_letter() {
        let am = pauli_amalgam();
        let bad = FreeElement {
            b_part: CVector::zeros(1),
            terms: vec![FreeTerm {
                coeff: ONE,
                letters: vec![FreeLetter {
                    index: 5,
                    coords: CVector::zeros(4),
                }],
            }],
        };
        assert!(am.multiply(&bad, &bad).is_err());
    }
}
