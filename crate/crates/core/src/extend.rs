//! The assembled UCP extension `Φ = P_H τ(·)|_H` and its verifiers.
//!
//! Given UCP maps `Φ_i : A_i → B(H)` whose restrictions to `B` agree as a
//! *-representation, each `Φ_i` is dilated to `σ_i` on `H ⊕ H_i`, the seeds
//! `ρ_i` are split off, and the tower supplies `π_i` so that
//! `τ_i = σ_i ⊕ π_i` agree on `B`. Words evaluate by applying the `τ`
//! letters right to left to block vectors seeded in `H` and compressing
//! back; at sufficient depth the truncation is exact, so insufficient depth
//! is an error rather than an approximation.
//!
//! When the restrictions agree merely as linear maps, the maps are first
//! rewritten through their minimal `B`-reducing subspaces `M_i` and the
//! minimal-dilation unitaries: `Ψ_i = U_i* P_{M_i} σ_i(·) U_i` share a
//! genuine representation on `B`, the construction above applies to them,
//! and the final value is compressed from `M_{i_0}` back to `H`.

use std::collections::BTreeSet;

use num_complex::Complex64;

use crate::algebra::{basis_vec, ConditionalExpectation, StarEmbedding};
use crate::cpmap::{
    minimal_b_restriction_dilation, minimal_dilation_unitary, reducing_split, CpMap,
    StinespringDilation,
};
use crate::error::{Error, Result};
use crate::freeprod::{Amalgam, FreeElement, FreeLetter, FreeTerm};
use crate::linalg::{self, eigh_hermitian, fro, fro_diff, CMatrix, CVector};
use crate::tol::TolerancePolicy;
use crate::tower::{BlockVector, DilationTower, DEFAULT_TOWER_CAP};

/// Result of one evaluation, with enough diagnostics to audit it.
#[derive(Debug, Clone)]
pub struct EvalReport {
    /// The compressed value `P_H τ(x)|_H`.
    pub value: CMatrix,
    /// Longest word length in the evaluated element.
    pub depth_used: usize,
    /// Number of distinct tower blocks that carried amplitude.
    pub blocks_touched: usize,
    /// Coefficient-weighted norm left outside `H` after the last letter.
    pub outside_norm: f64,
}

/// Outcome of the complete-positivity witness.
#[derive(Debug, Clone, Copy)]
pub struct GramWitness {
    pub min_eig: f64,
    pub herm_residual: f64,
}

/// The extension `Φ` of a family `{Φ_i}` to the amalgamated free product,
/// together with everything needed to evaluate and verify it.
#[derive(Debug)]
pub struct UcpExtension {
    amalgam: Amalgam,
    /// The maps the extension restricts to (target `output_dim`).
    maps: Vec<CpMap>,
    /// The maps that were dilated (identical to `maps` unless the
    /// linear-agreement path rewrote them).
    inner_maps: Vec<CpMap>,
    dilations: Vec<StinespringDilation>,
    rho0: CpMap,
    tower: DilationTower,
    inner_dim: usize,
    output_dim: usize,
    tol: TolerancePolicy,
}

/// Extends UCP maps with a common *-representation restriction on `B`.
///
/// `user_expectations[i]` forces the expectation used along index `i`; the
/// canonical trace-preserving expectation is the default, so the product
/// formula on expectation kernels holds on every index.
pub fn boca_extend(
    maps: Vec<CpMap>,
    embeddings: Vec<StarEmbedding>,
    user_expectations: Vec<Option<ConditionalExpectation>>,
    depth: usize,
    dim_cap: usize,
    tol: &TolerancePolicy,
) -> Result<UcpExtension> {
    tol.validate()?;
    let n = maps.len();
    if n == 0 || embeddings.len() != n || user_expectations.len() != n {
        return Err(Error::Shape(
            "extension needs matching map/embedding/expectation lists".into(),
        ));
    }
    let h = maps[0].target_dim();
    for (i, m) in maps.iter().enumerate() {
        if m.target_dim() != h {
            return Err(Error::Shape(format!(
                "map {} targets dimension {}, map 1 targets {h}",
                i + 1,
                m.target_dim()
            )));
        }
        if m.domain().dim() != embeddings[i].target().dim() {
            return Err(Error::Shape(format!(
                "map {} domain does not match embedding {} target",
                i + 1,
                i + 1
            )));
        }
    }

    // hypothesis: every restriction is multiplicative and they all agree
    let mut restrictions = Vec::with_capacity(n);
    for (i, m) in maps.iter().enumerate() {
        let (ok, res) = m.is_rep_on_b(&embeddings[i], tol)?;
        if !ok {
            return Err(Error::hypothesis(
                format!("Φ_{}∘ε_{} is not multiplicative", i + 1, i + 1),
                res,
            ));
        }
        restrictions.push(m.restrict(&embeddings[i])?);
    }
    for i in 1..n {
        let dist = restrictions[0].action_distance(&restrictions[i]);
        if dist > tol.check_tol {
            return Err(Error::hypothesis(
                format!("restrictions of Φ_1 and Φ_{} to B disagree", i + 1),
                dist,
            ));
        }
    }
    let rho0 = restrictions.swap_remove(0);

    let mut dilations = Vec::with_capacity(n);
    let mut seeds = Vec::with_capacity(n);
    for (i, m) in maps.iter().enumerate() {
        let dilation = StinespringDilation::stinespring_gns(m, tol)?;
        let (rho_top, rho_i) = reducing_split(&dilation, &embeddings[i], tol)?;
        let res = rho_top.action_distance(&rho0);
        if res > tol.check_tol {
            return Err(Error::internal(
                format!("split of σ_{} does not reproduce ρ₀", i + 1),
                res,
            ));
        }
        dilations.push(dilation);
        seeds.push(rho_i);
    }

    let algebras: Vec<_> = maps.iter().map(|m| m.domain().clone()).collect();
    let amalgam = Amalgam::new(algebras.clone(), embeddings.clone())?;
    let tower = DilationTower::build(
        algebras,
        embeddings,
        seeds,
        user_expectations,
        depth,
        dim_cap,
        tol,
    )?;

    let ext = UcpExtension {
        amalgam,
        inner_maps: maps.clone(),
        maps,
        dilations,
        rho0,
        tower,
        inner_dim: h,
        output_dim: h,
        tol: *tol,
    };
    let res = ext.restriction_residual()?;
    if res > tol.check_tol {
        return Err(Error::internal(
            "restriction identity fails on the constructed extension",
            res,
        ));
    }
    Ok(ext)
}

/// Extends UCP maps whose restrictions to `B` agree only as linear maps.
///
/// Fixes `i₀` as the first index, identifies every minimal `B`-reducing
/// dilation `M_i` with `M_{i₀}` through the unitaries `U_i` fixing `H`,
/// extends the rewritten maps `Ψ_i = U_i* P_{M_i} σ_i(·) U_i`, and
/// compresses the result back to `H`.
pub fn boca_extend_linear(
    maps: Vec<CpMap>,
    embeddings: Vec<StarEmbedding>,
    depth: usize,
    dim_cap: usize,
    tol: &TolerancePolicy,
) -> Result<UcpExtension> {
    tol.validate()?;
    let n = maps.len();
    if n == 0 || embeddings.len() != n {
        return Err(Error::Shape(
            "extension needs matching map/embedding lists".into(),
        ));
    }
    let h = maps[0].target_dim();
    let mut restrictions = Vec::with_capacity(n);
    for (i, m) in maps.iter().enumerate() {
        if m.target_dim() != h {
            return Err(Error::Shape(format!(
                "map {} targets dimension {}, map 1 targets {h}",
                i + 1,
                m.target_dim()
            )));
        }
        restrictions.push(m.restrict(&embeddings[i])?);
    }
    for i in 1..n {
        let dist = restrictions[0].action_distance(&restrictions[i]);
        if dist > tol.check_tol {
            return Err(Error::hypothesis(
                format!("restrictions of Φ_1 and Φ_{} to B differ as linear maps", i + 1),
                dist,
            ));
        }
    }

    let mut rewritten = Vec::with_capacity(n);
    let mut rho_min0: Option<CpMap> = None;
    for (i, m) in maps.iter().enumerate() {
        let dilation = StinespringDilation::stinespring_gns(m, tol)?;
        let (q, rho_min) = minimal_b_restriction_dilation(&dilation, &embeddings[i], tol)?;
        let u = match &rho_min0 {
            None => {
                let dim = rho_min.target_dim();
                rho_min0 = Some(rho_min.clone());
                linalg::identity(dim)
            }
            Some(rho0) => minimal_dilation_unitary(rho0, &rho_min, h, tol)?,
        };
        let action: Vec<CMatrix> = dilation
            .rep()
            .iter()
            .map(|pi| u.adjoint() * (q.adjoint() * pi * &q) * &u)
            .collect();
        let psi = CpMap::new(
            m.domain().clone(),
            rho_min0.as_ref().unwrap().target_dim(),
            action,
            tol,
        )
        .map_err(|e| match e {
            Error::Hypothesis { context, residual } | Error::Validation { context, residual, .. } => {
                Error::internal(format!("rewritten map Ψ_{} invalid: {context}", i + 1), residual)
            }
            other => other,
        })?;
        let res = psi
            .restrict(&embeddings[i])?
            .action_distance(rho_min0.as_ref().unwrap());
        if res > tol.check_tol {
            return Err(Error::internal(
                format!("Ψ_{} does not restrict to the common minimal dilation", i + 1),
                res,
            ));
        }
        rewritten.push(psi);
    }

    let user_expectations = vec![None; n];
    let mut ext = boca_extend(rewritten, embeddings, user_expectations, depth, dim_cap, tol)?;
    ext.maps = maps;
    ext.output_dim = h;
    let res = ext.restriction_residual()?;
    if res > tol.check_tol {
        return Err(Error::internal(
            "restriction identity fails after compressing to H",
            res,
        ));
    }
    Ok(ext)
}

impl UcpExtension {
    pub fn amalgam(&self) -> &Amalgam {
        &self.amalgam
    }

    pub fn maps(&self) -> &[CpMap] {
        &self.maps
    }

    pub fn inner_maps(&self) -> &[CpMap] {
        &self.inner_maps
    }

    pub fn dilations(&self) -> &[StinespringDilation] {
        &self.dilations
    }

    pub fn rho0(&self) -> &CpMap {
        &self.rho0
    }

    pub fn tower(&self) -> &DilationTower {
        &self.tower
    }

    pub fn depth(&self) -> usize {
        self.tower.depth()
    }

    /// Dimension of the space the extension maps into.
    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    /// Dimension of the internal evaluation space (`M_{i₀}` on the
    /// linear-agreement path, `H` otherwise).
    pub fn inner_dim(&self) -> usize {
        self.inner_dim
    }

    pub fn tolerances(&self) -> &TolerancePolicy {
        &self.tol
    }

    fn word_string(letters: &[FreeLetter]) -> String {
        letters
            .iter()
            .map(|l| (l.index + 1).to_string())
            .collect::<Vec<_>>()
            .join("")
    }

    /// Applies `τ_i(a)` to the block state `(H-block, word blocks)`.
    fn apply_tau(
        &self,
        i: usize,
        coords: &CVector,
        h_block: CMatrix,
        words: BlockVector,
    ) -> Result<(CMatrix, BlockVector)> {
        let cols = h_block.ncols();
        let extra = self.dilations[i].extra_dim();
        let seed = self.tower.seed_id(i);
        let mut stacked = linalg::zeros(self.inner_dim + extra, cols);
        stacked
            .view_mut((0, 0), (self.inner_dim, cols))
            .copy_from(&h_block);
        if let Some(b) = words.block(seed) {
            stacked.view_mut((self.inner_dim, 0), (extra, cols)).copy_from(b);
        }
        let sigma_applied = self.dilations[i].apply_rep(coords) * stacked;

        let mut rest = BlockVector::new(cols);
        for (&k, v) in &words.blocks {
            if k != seed {
                rest.add_block(k, v.clone());
            }
        }
        let mut out_words = self.tower.apply_pi(i, coords, &rest)?;
        out_words.add_block(
            seed,
            sigma_applied
                .view((self.inner_dim, 0), (extra, cols))
                .into_owned(),
        );
        let out_h = sigma_applied
            .view((0, 0), (self.inner_dim, cols))
            .into_owned();
        Ok((out_h, out_words))
    }

    /// Evaluates `Φ(x)` exactly at the constructed depth.
    ///
    /// Words apply their letters right to left (the rightmost letter acts
    /// first); the B-part evaluates through `ρ₀`. Elements with words longer
    /// than the depth are rejected, never truncated.
    pub fn evaluate(&self, x: &FreeElement) -> Result<EvalReport> {
        self.amalgam.validate_element(x)?;
        let max_len = x.max_word_len();
        if max_len > self.tower.depth() {
            let offending = x
                .terms
                .iter()
                .find(|t| t.letters.len() > self.tower.depth())
                .unwrap();
            return Err(Error::InsufficientDepth {
                word: Self::word_string(&offending.letters),
                needed: offending.letters.len(),
                depth: self.tower.depth(),
            });
        }
        let mut value = self.rho0.apply(&x.b_part);
        let mut touched: BTreeSet<usize> = BTreeSet::new();
        let mut outside = 0.0_f64;
        for term in &x.terms {
            let mut h_block = linalg::identity(self.inner_dim);
            let mut words = BlockVector::new(self.inner_dim);
            for letter in term.letters.iter().rev() {
                let (h2, w2) = self.apply_tau(letter.index, &letter.coords, h_block, words)?;
                h_block = h2;
                words = w2;
                touched.extend(words.blocks.keys().copied());
            }
            value += h_block.map(|z| z * term.coeff);
            outside += term.coeff.norm() * words.norm();
        }
        Ok(EvalReport {
            value: value
                .view((0, 0), (self.output_dim, self.output_dim))
                .into_owned(),
            depth_used: max_len,
            blocks_touched: touched.len(),
            outside_norm: outside,
        })
    }

    /// `‖Φ(a_1 ⋯ a_n) − Φ_{i_1}(a_1) ⋯ Φ_{i_n}(a_n)‖` for an alternating
    /// word of expectation-kernel letters (the operator product is taken in
    /// the same left-to-right order as the word).
    pub fn verify_product_formula(&self, letters: &[FreeLetter]) -> Result<f64> {
        if letters.is_empty() {
            return Err(Error::Shape("product formula needs a nonempty word".into()));
        }
        if !crate::freeprod::is_alternating(letters) {
            return Err(Error::validation(
                "product formula word is not alternating",
                f64::INFINITY,
                0.0,
            ));
        }
        for (k, l) in letters.iter().enumerate() {
            let res = self.tower.expectations()[l.index].kernel_residual(&l.coords);
            if res > self.tol.check_tol * (1.0 + l.coords.norm()) {
                return Err(Error::hypothesis(
                    format!(
                        "letter {} is not in the kernel of the expectation on index {}",
                        k + 1,
                        l.index + 1
                    ),
                    res,
                ));
            }
        }
        let element = FreeElement {
            b_part: CVector::zeros(self.amalgam.base().dim()),
            terms: vec![FreeTerm {
                coeff: Complex64::ONE,
                letters: letters.to_vec(),
            }],
        };
        let lhs = self.evaluate(&element)?.value;
        let mut rhs = linalg::identity(self.output_dim);
        for l in letters {
            rhs *= self.maps[l.index].apply(&l.coords);
        }
        Ok(fro_diff(&lhs, &rhs))
    }

    /// Assembles the block matrix `[Φ(w_p* w_q)]` over a word family and
    /// returns its minimum eigenvalue; a nonnegative result witnesses
    /// complete positivity of `Φ` on the spanned operator system.
    pub fn ucp_gram_check(&self, words: &[FreeElement]) -> Result<GramWitness> {
        if words.is_empty() {
            return Err(Error::Shape("gram check needs at least one word".into()));
        }
        let n = words.len();
        let h = self.output_dim;
        let mut g = linalg::zeros(n * h, n * h);
        for p in 0..n {
            let adj = self.amalgam.adjoint(&words[p])?;
            for q in 0..n {
                let prod = self.amalgam.multiply(&adj, &words[q])?;
                let val = self.evaluate(&prod)?.value;
                g.view_mut((p * h, q * h), (h, h)).copy_from(&val);
            }
        }
        let herm_residual = fro_diff(&g, &g.adjoint());
        let sym = (&g + g.adjoint()).map(|z| z * 0.5);
        let (vals, _) = eigh_hermitian(&sym, &self.tol)?;
        Ok(GramWitness {
            min_eig: vals.first().copied().unwrap_or(0.0),
            herm_residual,
        })
    }

    /// `max_i max_p ‖Φ(b_p^{A_i}) − Φ_i(b_p^{A_i})‖`: the restriction
    /// identity over every algebra basis element.
    pub fn restriction_residual(&self) -> Result<f64> {
        let mut worst = 0.0_f64;
        for (i, map) in self.maps.iter().enumerate() {
            let d = map.domain().dim();
            for p in 0..d {
                let element = self.amalgam.letter_from_coords(i, basis_vec(d, p));
                let got = self.evaluate(&element)?.value;
                worst = worst.max(fro_diff(&got, &map.action()[p]));
            }
        }
        Ok(worst)
    }

    /// `‖Φ(1) − I‖`.
    pub fn unitality_residual(&self) -> Result<f64> {
        let got = self.evaluate(&self.amalgam.unit())?.value;
        Ok(fro_diff(&got, &linalg::identity(self.output_dim)))
    }

    /// `‖Φ(x*) − Φ(x)*‖`.
    pub fn hermiticity_residual(&self, x: &FreeElement) -> Result<f64> {
        let lhs = self.evaluate(&self.amalgam.adjoint(x)?)?.value;
        let rhs = self.evaluate(x)?.value.adjoint();
        Ok(fro_diff(&lhs, &rhs))
    }

    /// Worst residual of the seed splits
    /// `σ_i(ε_i(b)) = ρ₀(b) ⊕ ρ_i(b)` over all `i` and B-basis elements.
    pub fn seed_split_residual(&self) -> f64 {
        let mut worst = 0.0_f64;
        for (i, dilation) in self.dilations.iter().enumerate() {
            let emb = &self.tower.embeddings()[i];
            let extra = dilation.extra_dim();
            for p in 0..emb.source().dim() {
                let m = dilation.apply_rep(&emb.matrix().column(p).into_owned());
                let mut expected = linalg::zeros(self.inner_dim + extra, self.inner_dim + extra);
                expected
                    .view_mut((0, 0), (self.inner_dim, self.inner_dim))
                    .copy_from(&self.rho0.action()[p]);
                expected
                    .view_mut((self.inner_dim, self.inner_dim), (extra, extra))
                    .copy_from(&self.tower.rho(self.tower.seed_id(i)).action()[p]);
                worst = worst.max(fro_diff(&m, &expected));
            }
        }
        worst
    }

    /// Blockwise agreement of the `τ_i` on `B`: every σ-split and every
    /// tower edge must reproduce the shared block representations `ρ_w`.
    pub fn blockwise_agreement_residual(&self) -> f64 {
        self.seed_split_residual()
            .max(self.tower.recursion_identity_residual())
    }
}

/// The representation-level extension: restrictions `σ_i` of a common
/// representation of the inner family `C_i` extend to representations
/// `τ_i = σ̃_i ⊕ π_i` of the outer family `A_i` agreeing on `B`, with `H`
/// reducing `τ_i(C_i)`.
#[derive(Debug)]
pub struct RepresentationExtension {
    pub ext: UcpExtension,
    pub sigmas: Vec<CpMap>,
    pub inclusions: Vec<StarEmbedding>,
    /// Worst off-diagonal block of `σ̃_i(ι(c))`: how far `H` is from
    /// reducing `τ_i(C_i)`.
    pub c_reduction_residual: f64,
    /// Worst `‖P_H σ̃_i(ι(c))|_H − σ_i(c)‖`.
    pub c_compression_residual: f64,
    /// Blockwise agreement of `τ_i ∘ ε_i` across indices.
    pub agreement_residual: f64,
}

/// Extends representations `σ_i` of intermediate algebras `B ⊂ C_i ⊂ A_i`
/// on a common `H` to representations of the `A_i` that agree on `B`.
///
/// Each `σ_i` is first extended to the UCP map `σ_i ∘ E^{A_i → C_i}` with
/// the canonical expectation onto `C_i`, then dilated and towered exactly
/// like the UCP extension; multiplicativity of `σ_i` makes `H` reducing for
/// the `C_i`-action, which is verified along with the blockwise agreement.
pub fn extend_representations(
    sigmas: Vec<CpMap>,
    inclusions: Vec<StarEmbedding>,
    eps_b: Vec<StarEmbedding>,
    depth: usize,
    dim_cap: usize,
    tol: &TolerancePolicy,
) -> Result<RepresentationExtension> {
    let n = sigmas.len();
    if n == 0 || inclusions.len() != n || eps_b.len() != n {
        return Err(Error::Shape(
            "representation extension needs matching σ/inclusion/embedding lists".into(),
        ));
    }
    let h = sigmas[0].target_dim();
    for (i, s) in sigmas.iter().enumerate() {
        if s.target_dim() != h {
            return Err(Error::Shape(format!(
                "σ_{} acts on dimension {}, σ_1 acts on {h}",
                i + 1,
                s.target_dim()
            )));
        }
        if s.domain().dim() != inclusions[i].source().dim() {
            return Err(Error::Shape(format!(
                "σ_{} is not defined on the source of inclusion {}",
                i + 1,
                i + 1
            )));
        }
        if eps_b[i].target().dim() != inclusions[i].source().dim() {
            return Err(Error::Shape(format!(
                "embedding {} does not land in the source of inclusion {}",
                i + 1,
                i + 1
            )));
        }
        let res = s.representation_residual();
        if res > tol.check_tol {
            return Err(Error::hypothesis(
                format!("σ_{} is not a *-representation", i + 1),
                res,
            ));
        }
    }
    // common restriction to B
    let mut restrictions = Vec::with_capacity(n);
    for (i, s) in sigmas.iter().enumerate() {
        restrictions.push(s.restrict(&eps_b[i])?);
    }
    for i in 1..n {
        let dist = restrictions[0].action_distance(&restrictions[i]);
        if dist > tol.check_tol {
            return Err(Error::hypothesis(
                format!("σ_1∘ε_1 and σ_{}∘ε_{} disagree on B", i + 1, i + 1),
                dist,
            ));
        }
    }

    // UCP extensions σ_i ∘ E^{A_i → C_i} and the composed embeddings B → A_i
    let mut xi_maps = Vec::with_capacity(n);
    let mut composed = Vec::with_capacity(n);
    for i in 0..n {
        let exp = ConditionalExpectation::canonical(&inclusions[i], tol)?;
        let a_dim = inclusions[i].target().dim();
        let action: Vec<CMatrix> = (0..a_dim)
            .map(|p| sigmas[i].apply(&exp.to_b(&basis_vec(a_dim, p))))
            .collect();
        xi_maps.push(CpMap::new(
            inclusions[i].target().clone(),
            h,
            action,
            tol,
        )?);
        composed.push(StarEmbedding::compose(&inclusions[i], &eps_b[i], tol)?);
    }

    let ext = boca_extend(
        xi_maps,
        composed,
        vec![None; n],
        depth,
        dim_cap,
        tol,
    )?;

    // H reduces τ_i(C_i) and compresses onto σ_i
    let mut reduction = 0.0_f64;
    let mut compression = 0.0_f64;
    for i in 0..n {
        let dilation = &ext.dilations[i];
        let extra = dilation.extra_dim();
        for c in 0..inclusions[i].source().dim() {
            let m = dilation.apply_rep(&inclusions[i].matrix().column(c).into_owned());
            reduction = reduction
                .max(fro(&m.view((0, h), (h, extra)).into_owned()))
                .max(fro(&m.view((h, 0), (extra, h)).into_owned()));
            compression = compression.max(fro_diff(
                &m.view((0, 0), (h, h)).into_owned(),
                &sigmas[i].action()[c],
            ));
        }
    }
    let agreement = ext.blockwise_agreement_residual();
    for (name, res) in [
        ("H does not reduce τ_i(C_i)", reduction),
        ("compression to H does not reproduce σ_i", compression),
        ("blockwise agreement on B fails", agreement),
    ] {
        if res > tol.check_tol {
            return Err(Error::internal(name, res));
        }
    }
    Ok(RepresentationExtension {
        ext,
        sigmas,
        inclusions,
        c_reduction_residual: reduction,
        c_compression_residual: compression,
        agreement_residual: agreement,
    })
}

/// Convenience: extends with every expectation canonical.
pub fn boca_extend_canonical(
    maps: Vec<CpMap>,
    embeddings: Vec<StarEmbedding>,
    depth: usize,
    tol: &TolerancePolicy,
) -> Result<UcpExtension> {
    let n = maps.len();
    boca_extend(maps, embeddings, vec![None; n], depth, DEFAULT_TOWER_CAP, tol)
}
