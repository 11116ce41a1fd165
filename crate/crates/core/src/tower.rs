//! The word-indexed dilation tower.
//!
//! For seeds `ρ_i : B → B(H_i)` the tower recursively attaches, to every
//! reduced word `w` and every index `i ≠ s(w)`, a space `H_{wi}` and a
//! *-representation `π_{i,w} : A_i → B(H_w ⊕ H_{wi})` with
//! `π_{i,w} ∘ ε_i = ρ_w ⊕ ρ_{wi}`. The UCP map dilated at each edge is
//! `ρ_w ∘ E_i` for a conditional expectation `E_i`, which kills `ker E_i` in
//! the `H_w → H_w` corner; evaluation of centered words therefore moves
//! strictly "outward" through the tower, and truncation at depth `L` is
//! exact for words of length at most `L`.
//!
//! Construction is level by level; levels depend on their predecessors but
//! edges within a level are independent. A built tower is immutable.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use crate::algebra::{ConditionalExpectation, FiniteCStarAlgebra, StarEmbedding};
use crate::cpmap::{reducing_split, CpMap, StinespringDilation};
use crate::error::{Error, Result};
use crate::linalg::{self, fro, CMatrix};
use crate::tol::TolerancePolicy;

/// Default cap on the summed dimension of all tower spaces.
pub const DEFAULT_TOWER_CAP: usize = 20_000;

/// A reduced word over the index set `{0, …, n−1}`: nonempty, no equal
/// adjacent letters.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word(Vec<usize>);

impl Word {
    pub fn new(letters: Vec<usize>, num_indices: usize) -> Result<Self> {
        if letters.is_empty() {
            return Err(Error::Shape("empty word".into()));
        }
        if letters.iter().any(|&l| l >= num_indices) {
            return Err(Error::Shape(format!("word {letters:?} uses an index out of range")));
        }
        if letters.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Shape(format!("word {letters:?} has equal adjacent letters")));
        }
        Ok(Word(letters))
    }

    pub fn seed(i: usize) -> Self {
        Word(vec![i])
    }

    pub fn letters(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// The last letter `s(w)`.
    pub fn last(&self) -> usize {
        *self.0.last().unwrap()
    }

    /// `w` extended by `i` (requires `i ≠ s(w)`).
    pub fn child(&self, i: usize) -> Word {
        debug_assert_ne!(self.last(), i);
        let mut v = self.0.clone();
        v.push(i);
        Word(v)
    }

    pub fn parent(&self) -> Option<Word> {
        if self.0.len() <= 1 {
            None
        } else {
            Some(Word(self.0[..self.0.len() - 1].to_vec()))
        }
    }
}

impl fmt::Display for Word {
    /// 1-based digit string, e.g. `121` for the word (0,1,0).
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.0 {
            write!(f, "{}", l + 1)?;
        }
        Ok(())
    }
}

/// All reduced words of length ≤ `depth` in length-lexicographic order.
pub fn reduced_words(num_indices: usize, depth: usize) -> Vec<Word> {
    let mut all: Vec<Word> = Vec::new();
    let mut level: Vec<Word> = (0..num_indices).map(Word::seed).collect();
    for _ in 0..depth {
        if level.is_empty() {
            break;
        }
        all.extend(level.iter().cloned());
        let mut next = Vec::new();
        for w in &level {
            for i in 0..num_indices {
                if i != w.last() {
                    next.push(w.child(i));
                }
            }
        }
        level = next;
    }
    all
}

/// Block map `π_{i,w}` on `H_w ⊕ H_{wi}`, one matrix per `A_i` basis element.
#[derive(Debug, Clone)]
pub struct TowerEdge {
    pi: Vec<CMatrix>,
    top_dim: usize,
    bottom_dim: usize,
}

impl TowerEdge {
    pub fn pi(&self) -> &[CMatrix] {
        &self.pi
    }

    pub fn top_dim(&self) -> usize {
        self.top_dim
    }

    pub fn bottom_dim(&self) -> usize {
        self.bottom_dim
    }

    /// `π_{i,w}(a)` for A_i-coordinates `a`.
    pub fn apply(&self, a: &crate::linalg::CVector) -> CMatrix {
        let n = self.top_dim + self.bottom_dim;
        let mut acc = linalg::zeros(n, n);
        for (p, m) in self.pi.iter().enumerate() {
            let z = a[p];
            if z.norm_sqr() > 0.0 {
                acc += m.map(|x| x * z);
            }
        }
        acc
    }
}

/// Sparse block vector (or block of columns) over the tower's word spaces.
#[derive(Debug, Clone)]
pub struct BlockVector {
    pub cols: usize,
    pub blocks: BTreeMap<usize, CMatrix>,
}

impl BlockVector {
    pub fn new(cols: usize) -> Self {
        BlockVector {
            cols,
            blocks: BTreeMap::new(),
        }
    }

    pub fn add_block(&mut self, word_id: usize, m: CMatrix) {
        if m.nrows() == 0 {
            return;
        }
        match self.blocks.get_mut(&word_id) {
            Some(b) => *b += m,
            None => {
                self.blocks.insert(word_id, m);
            }
        }
    }

    pub fn block(&self, word_id: usize) -> Option<&CMatrix> {
        self.blocks.get(&word_id)
    }

    pub fn norm(&self) -> f64 {
        self.blocks
            .values()
            .map(|m| fro(m).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// The truncated dilation tower `{H_w, ρ_w, π_{i,w}}`.
#[derive(Debug)]
pub struct DilationTower {
    algebras: Vec<Arc<FiniteCStarAlgebra>>,
    embeddings: Vec<StarEmbedding>,
    expectations: Vec<ConditionalExpectation>,
    user_expectation: Vec<bool>,
    depth: usize,
    words: Vec<Word>,
    index: HashMap<Word, usize>,
    /// `ρ_w`, one per word, aligned with `words`
    nodes: Vec<CpMap>,
    /// kernel coordinate columns per index, cached for the block checks
    kernel_cols: Vec<CMatrix>,
    edges: HashMap<(usize, usize), TowerEdge>,
    total_dim: usize,
}

impl DilationTower {
    /// Builds the tower of depth `depth` from seed representations of `B`.
    ///
    /// `user_expectations[i]` supplies the expectation for index `i`; every
    /// other index gets the canonical trace-preserving expectation. Each
    /// edge is verified as it is built: the recursion identity
    /// `π_{i,w} ∘ ε_i = ρ_w ⊕ ρ_{wi}`, the *-representation property, and
    /// the kernel block condition `P_{H_w} π_{i,w}(ker E_i)|_{H_w} = 0`.
    pub fn build(
        algebras: Vec<Arc<FiniteCStarAlgebra>>,
        embeddings: Vec<StarEmbedding>,
        seeds: Vec<CpMap>,
        user_expectations: Vec<Option<ConditionalExpectation>>,
        depth: usize,
        dim_cap: usize,
        tol: &TolerancePolicy,
    ) -> Result<Self> {
        let n = algebras.len();
        if n == 0 || embeddings.len() != n || seeds.len() != n || user_expectations.len() != n {
            return Err(Error::Shape(
                "tower needs matching algebra/embedding/seed/expectation lists".into(),
            ));
        }
        if depth == 0 {
            return Err(Error::Shape("tower depth must be at least 1".into()));
        }
        let b_dim = embeddings[0].source().dim();
        for (i, emb) in embeddings.iter().enumerate() {
            if emb.source().dim() != b_dim {
                return Err(Error::Shape(format!(
                    "embedding {i} has a different base algebra"
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
        for (i, seed) in seeds.iter().enumerate() {
            if seed.domain().dim() != b_dim {
                return Err(Error::Shape(format!("seed {i} is not defined on B")));
            }
            let res = seed.representation_residual();
            if res > tol.check_tol {
                return Err(Error::hypothesis(
                    format!("seed {i} is not a *-representation of B"),
                    res,
                ));
            }
        }

        let mut expectations = Vec::with_capacity(n);
        let mut user_flag = Vec::with_capacity(n);
        for (i, user) in user_expectations.into_iter().enumerate() {
            match user {
                Some(e) => {
                    expectations.push(e);
                    user_flag.push(true);
                }
                None => {
                    expectations.push(ConditionalExpectation::canonical(&embeddings[i], tol)?);
                    user_flag.push(false);
                }
            }
        }
        let kernel_cols: Vec<CMatrix> = expectations
            .iter()
            .map(|e| e.kernel_coords(tol))
            .collect::<Result<_>>()?;

        let words = reduced_words(n, depth);
        let mut index = HashMap::new();
        for (id, w) in words.iter().enumerate() {
            index.insert(w.clone(), id);
        }

        let mut nodes: Vec<Option<CpMap>> = vec![None; words.len()];
        let mut total_dim = 0usize;
        for (i, seed) in seeds.into_iter().enumerate() {
            total_dim += seed.target_dim();
            nodes[i] = Some(seed);
        }
        let mut edges = HashMap::new();

        for wid in 0..words.len() {
            let w = words[wid].clone();
            if w.len() >= depth {
                continue;
            }
            let rho_w = nodes[wid].clone().expect("parent node built");
            let h_w = rho_w.target_dim();
            for i in 0..n {
                if i == w.last() {
                    continue;
                }
                let child = w.child(i);
                let child_id = index[&child];
                let edge_name = format!("edge (i={}, w={})", i + 1, w);

                if h_w == 0 {
                    nodes[child_id] =
                        Some(CpMap::unchecked(embeddings[i].source().clone(), 0, vec![
                            linalg::zeros(0, 0);
                            b_dim
                        ]));
                    edges.insert(
                        (wid, i),
                        TowerEdge {
                            pi: vec![linalg::zeros(0, 0); algebras[i].dim()],
                            top_dim: 0,
                            bottom_dim: 0,
                        },
                    );
                    continue;
                }

                // hard stop before attempting an absurdly large dilation
                let gram_dim = algebras[i].dim() * h_w;
                if gram_dim > 4 * dim_cap {
                    return Err(Error::DimensionCap {
                        context: format!("tower {edge_name}: Gram form of size {gram_dim}"),
                        dim: gram_dim,
                        cap: 4 * dim_cap,
                    });
                }

                // Ψ = ρ_w ∘ E_i, the UCP map dilated at this edge
                let exp = &expectations[i];
                let action: Vec<CMatrix> = (0..algebras[i].dim())
                    .map(|p| rho_w.apply(&exp.to_b(&crate::algebra::basis_vec(algebras[i].dim(), p))))
                    .collect();
                let psi = CpMap::unchecked(algebras[i].clone(), h_w, action);

                let dilation = StinespringDilation::stinespring_gns(&psi, tol).map_err(|e| {
                    match e {
                        Error::Hypothesis { context, residual } => Error::Hypothesis {
                            context: format!("tower {edge_name}: {context}"),
                            residual,
                        },
                        other => other,
                    }
                })?;
                let (rho_top, rho_child) = reducing_split(&dilation, &embeddings[i], tol)?;

                // the split must reproduce the parent representation
                let top_res = rho_top.action_distance(&rho_w);
                if top_res > tol.check_tol {
                    return Err(Error::internal(
                        format!("tower {edge_name}: split does not reproduce ρ_w"),
                        top_res,
                    ));
                }

                // kernel block property: ker E_i acts as 0 on the H_w corner
                let kc = &kernel_cols[i];
                for col in 0..kc.ncols() {
                    let pi_a = dilation.apply_rep(&kc.column(col).into_owned());
                    let corner = pi_a.view((0, 0), (h_w, h_w)).into_owned();
                    let res = fro(&corner);
                    if res > tol.check_tol {
                        return Err(Error::internal(
                            format!("tower {edge_name}: kernel block does not vanish"),
                            res,
                        ));
                    }
                }

                total_dim += rho_child.target_dim();
                if total_dim > dim_cap {
                    return Err(Error::DimensionCap {
                        context: format!("tower total dimension at word {child}"),
                        dim: total_dim,
                        cap: dim_cap,
                    });
                }
                nodes[child_id] = Some(rho_child);
                edges.insert(
                    (wid, i),
                    TowerEdge {
                        pi: dilation.rep().to_vec(),
                        top_dim: h_w,
                        bottom_dim: dilation.extra_dim(),
                    },
                );
            }
        }

        let nodes: Vec<CpMap> = nodes.into_iter().map(|n| n.expect("all nodes built")).collect();
        Ok(DilationTower {
            algebras,
            embeddings,
            expectations,
            user_expectation: user_flag,
            depth,
            words,
            index,
            nodes,
            kernel_cols,
            edges,
            total_dim,
        })
    }

    pub fn num_indices(&self) -> usize {
        self.algebras.len()
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn words(&self) -> &[Word] {
        &self.words
    }

    pub fn word_id(&self, w: &Word) -> Option<usize> {
        self.index.get(w).copied()
    }

    /// Word id of the seed word `[i]`.
    pub fn seed_id(&self, i: usize) -> usize {
        i
    }

    pub fn dim(&self, word_id: usize) -> usize {
        self.nodes[word_id].target_dim()
    }

    pub fn rho(&self, word_id: usize) -> &CpMap {
        &self.nodes[word_id]
    }

    pub fn edge(&self, word_id: usize, i: usize) -> Option<&TowerEdge> {
        self.edges.get(&(word_id, i))
    }

    pub fn algebras(&self) -> &[Arc<FiniteCStarAlgebra>] {
        &self.algebras
    }

    pub fn embeddings(&self) -> &[StarEmbedding] {
        &self.embeddings
    }

    pub fn expectations(&self) -> &[ConditionalExpectation] {
        &self.expectations
    }

    pub fn is_user_expectation(&self, i: usize) -> bool {
        self.user_expectation[i]
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    /// Applies `π_i(a) = ⊕_{s(w)≠i} π_{i,w}(a)` blockwise to a sparse block
    /// vector over the word spaces.
    ///
    /// Blocks on the seed word `[i]` belong to the `σ_i` component of
    /// `τ_i = σ_i ⊕ π_i` and pass through unchanged. A block on a word `u`
    /// with `s(u) = i` is the bottom half of the edge `(parent(u), i)`; a
    /// block with `s(u) ≠ i` is the top half of `(u, i)`. Needing an edge
    /// out of a depth-`L` word is an error: the tower must be rebuilt
    /// deeper.
    pub fn apply_pi(
        &self,
        i: usize,
        a: &crate::linalg::CVector,
        v: &BlockVector,
    ) -> Result<BlockVector> {
        if i >= self.algebras.len() {
            return Err(Error::Shape(format!("index {i} out of range")));
        }
        if a.len() != self.algebras[i].dim() {
            return Err(Error::Shape(format!(
                "coordinates have length {}, algebra {} has dimension {}",
                a.len(),
                i + 1,
                self.algebras[i].dim()
            )));
        }
        let mut out = BlockVector::new(v.cols);
        let mut touched_edges: BTreeMap<usize, ()> = BTreeMap::new();
        for (&wid, block) in &v.blocks {
            if block.nrows() != self.dim(wid) || block.ncols() != v.cols {
                return Err(Error::Shape(format!(
                    "block on word {} has shape {}x{}, expected {}x{}",
                    self.words[wid],
                    block.nrows(),
                    block.ncols(),
                    self.dim(wid),
                    v.cols
                )));
            }
            let w = &self.words[wid];
            if w.len() == 1 && w.last() == i {
                // seed block of the σ_i component
                out.add_block(wid, block.clone());
                continue;
            }
            if w.last() != i {
                if w.len() == self.depth {
                    return Err(Error::InsufficientDepth {
                        word: w.child(i).to_string(),
                        needed: w.len() + 1,
                        depth: self.depth,
                    });
                }
                touched_edges.insert(wid, ());
            } else {
                let parent = w.parent().expect("non-seed word has a parent");
                touched_edges.insert(self.index[&parent], ());
            }
        }
        for (&wid, _) in &touched_edges {
            let edge = self
                .edges
                .get(&(wid, i))
                .expect("edge exists for touched word");
            let child_id = self.index[&self.words[wid].child(i)];
            let (dw, dc) = (edge.top_dim, edge.bottom_dim);
            let mut stacked = linalg::zeros(dw + dc, v.cols);
            if let Some(top) = v.block(wid) {
                stacked.view_mut((0, 0), (dw, v.cols)).copy_from(top);
            }
            if let Some(bottom) = v.block(child_id) {
                stacked.view_mut((dw, 0), (dc, v.cols)).copy_from(bottom);
            }
            let applied = edge.apply(a) * stacked;
            out.add_block(wid, applied.view((0, 0), (dw, v.cols)).into_owned());
            out.add_block(child_id, applied.view((dw, 0), (dc, v.cols)).into_owned());
        }
        Ok(out)
    }

    /// Worst residual of the recursion identity
    /// `π_{i,w}(ε_i(b)) = ρ_w(b) ⊕ ρ_{wi}(b)` over all stored edges.
    pub fn recursion_identity_residual(&self) -> f64 {
        let mut worst = 0.0_f64;
        for wid in 0..self.words.len() {
            for i in 0..self.algebras.len() {
                let Some(edge) = self.edges.get(&(wid, i)) else {
                    continue;
                };
                let child_id = self.index[&self.words[wid].child(i)];
                let m = self.embeddings[i].matrix();
                for p in 0..m.ncols() {
                    let pi_b = edge.apply(&m.column(p).into_owned());
                    let mut expected = linalg::zeros(edge.top_dim + edge.bottom_dim, edge.top_dim + edge.bottom_dim);
                    expected
                        .view_mut((0, 0), (edge.top_dim, edge.top_dim))
                        .copy_from(&self.nodes[wid].action()[p]);
                    expected
                        .view_mut(
                            (edge.top_dim, edge.top_dim),
                            (edge.bottom_dim, edge.bottom_dim),
                        )
                        .copy_from(&self.nodes[child_id].action()[p]);
                    worst = worst.max(crate::linalg::fro_diff(&pi_b, &expected));
                }
            }
        }
        worst
    }

    /// Worst `H_w → H_w` corner norm of `π_{i,w}(a)` over all edges whose
    /// expectation kernel contains `a` (all of them, by construction).
    pub fn kernel_block_residual(&self) -> f64 {
        let mut worst = 0.0_f64;
        for wid in 0..self.words.len() {
            for i in 0..self.algebras.len() {
                let Some(edge) = self.edges.get(&(wid, i)) else {
                    continue;
                };
                let kc = &self.kernel_cols[i];
                for col in 0..kc.ncols() {
                    let pi_a = edge.apply(&kc.column(col).into_owned());
                    let corner = pi_a.view((0, 0), (edge.top_dim, edge.top_dim)).into_owned();
                    worst = worst.max(fro(&corner));
                }
            }
        }
        worst
    }

    /// Worst violation of the *-representation property over all edges.
    pub fn edge_representation_residual(&self) -> f64 {
        let mut worst = 0.0_f64;
        for ((_, i), edge) in &self.edges {
            let rep = CpMap::unchecked(
                self.algebras[*i].clone(),
                edge.top_dim + edge.bottom_dim,
                edge.pi.clone(),
            );
            worst = worst.max(rep.representation_residual());
        }
        worst
    }

    /// Per-word dimensions in word order, for reports.
    pub fn dims_by_word(&self) -> Vec<(String, usize)> {
        self.words
            .iter()
            .zip(self.nodes.iter())
            .map(|(w, n)| (w.to_string(), n.target_dim()))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::basis_vec;
    use crate::linalg::{identity, CVector};
    use num_complex::Complex64;

    fn tol() -> TolerancePolicy {
        TolerancePolicy::default()
    }

    #[test]
    fn reduced_words_two_indices() {
        let words = reduced_words(2, 3);
        let rendered: Vec<String> = words.iter().map(|w| w.to_string()).collect();
        assert_eq!(rendered, vec!["1", "2", "12", "21", "121", "212"]);
    }

    #[test]
    fn reduced_words_single_index() {
        let words = reduced_words(1, 3);
        assert_eq!(words.len(), 1);
        assert_eq!(words[0].to_string(), "1");
    }

    #[test]
    fn reduced_words_three_indices_depth_two() {
        assert_eq!(reduced_words(3, 2).len(), 9);
    }

    #[test]
    fn word_rejects_unreduced() {
        assert!(Word::new(vec![0, 0], 2).is_err());
        assert!(Word::new(vec![], 2).is_err());
        assert!(Word::new(vec![0, 2], 2).is_err());
    }

    /// Pauli-states setup: B = scalars, A₁ = A₂ = M₂, Φ_i the vector state.
    fn pauli_states_seeds() -> (
        Vec<Arc<FiniteCStarAlgebra>>,
        Vec<StarEmbedding>,
        Vec<CpMap>,
    ) {
        let t = tol();
        let b = FiniteCStarAlgebra::scalars(&t).unwrap();
        let m2 = FiniteCStarAlgebra::full_matrix(2, &t).unwrap();
        let mut algebras = Vec::new();
        let mut embeddings = Vec::new();
        let mut seeds = Vec::new();
        for _ in 0..2 {
            let emb = StarEmbedding::new(b.clone(), m2.clone(), &[identity(2)], &t).unwrap();
            let action: Vec<CMatrix> = m2
                .basis()
                .iter()
                .map(|m| CMatrix::from_row_slice(1, 1, &[m[(0, 0)]]))
                .collect();
            let phi = CpMap::new(m2.clone(), 1, action, &t).unwrap();
            let dil = StinespringDilation::stinespring_gns(&phi, &t).unwrap();
            let (_, rho) = reducing_split(&dil, &emb, &t).unwrap();
            algebras.push(m2.clone());
            embeddings.push(emb);
            seeds.push(rho);
        }
        (algebras, embeddings, seeds)
    }

    #[test]
    fn pauli_states_tower_dimensions() {
        let t = tol();
        let (algebras, embeddings, seeds) = pauli_states_seeds();
        let tower = DilationTower::build(
            algebras,
            embeddings,
            seeds,
            vec![None, None],
            2,
            DEFAULT_TOWER_CAP,
            &t,
        )
        .unwrap();
        // the tracial-state Gram form on M₂ has rank 4, so H_{12} and H_{21}
        // have dimension 4·1 − 1 = 3
        let w12 = Word::new(vec![0, 1], 2).unwrap();
        let w21 = Word::new(vec![1, 0], 2).unwrap();
        assert_eq!(tower.dim(tower.word_id(&w12).unwrap()), 3);
        assert_eq!(tower.dim(tower.word_id(&w21).unwrap()), 3);
        assert!(tower.recursion_identity_residual() < 1e-8);
        assert!(tower.kernel_block_residual() < 1e-8);
        assert!(tower.edge_representation_residual() < 1e-8);
    }

    #[test]
    fn degenerate_inclusion_gives_zero_dimensional_levels() {
        // A_i = B: ρ_w∘E = ρ_w is already a representation, all higher H_w
        // vanish
        let t = tol();
        let b = FiniteCStarAlgebra::block_diagonal(&[1, 1], &t).unwrap();
        let emb = StarEmbedding::identity(b.clone(), &t).unwrap();
        let seed = CpMap::representation(b.clone(), 2, b.basis().to_vec(), &t).unwrap();
        let tower = DilationTower::build(
            vec![b.clone(), b.clone()],
            vec![emb.clone(), emb.clone()],
            vec![seed.clone(), seed],
            vec![None, None],
            3,
            DEFAULT_TOWER_CAP,
            &t,
        )
        .unwrap();
        for wid in 0..tower.words().len() {
            if tower.words()[wid].len() > 1 {
                assert_eq!(tower.dim(wid), 0);
            }
        }
    }

    #[test]
    fn single_index_tower_is_just_the_seed() {
        let t = tol();
        let b = FiniteCStarAlgebra::scalars(&t).unwrap();
        let m2 = FiniteCStarAlgebra::full_matrix(2, &t).unwrap();
        let emb = StarEmbedding::new(b, m2.clone(), &[identity(2)], &t).unwrap();
        let seed = CpMap::unchecked(
            emb.source().clone(),
            1,
            vec![identity(1)],
        );
        let tower = DilationTower::build(
            vec![m2],
            vec![emb],
            vec![seed],
            vec![None],
            3,
            DEFAULT_TOWER_CAP,
            &t,
        )
        .unwrap();
        assert_eq!(tower.words().len(), 1);
        assert_eq!(tower.total_dim(), 1);
    }

    #[test]
    fn apply_pi_unit_acts_as_identity() {
        let t = tol();
        let (algebras, embeddings, seeds) = pauli_states_seeds();
        let tower = DilationTower::build(
            algebras.clone(),
            embeddings,
            seeds,
            vec![None, None],
            2,
            DEFAULT_TOWER_CAP,
            &t,
        )
        .unwrap();
        let mut v = BlockVector::new(1);
        v.add_block(0, identity(1)); // seed vector in H_1
        let out = tower
            .apply_pi(1, &algebras[1].unit_coords().clone(), &v)
            .unwrap();
        // unit acts as the identity on the acted blocks
        assert!((out.block(0).unwrap()[(0, 0)] - Complex64::ONE).norm() < 1e-10);
    }

    #[test]
    fn apply_pi_kernel_letter_moves_outward() {
        // v in H₁, a = σ_x ∈ A₂ (traceless): H₁-component of π₂(a)v is
        // ρ₁(E₂(σ_x))v = 0 and the output lands in H₁₂
        let t = tol();
        let (algebras, embeddings, seeds) = pauli_states_seeds();
        let tower = DilationTower::build(
            algebras.clone(),
            embeddings,
            seeds,
            vec![None, None],
            2,
            DEFAULT_TOWER_CAP,
            &t,
        )
        .unwrap();
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
        let a = algebras[1].coords_of(&sx);
        let mut v = BlockVector::new(1);
        v.add_block(0, identity(1));
        let out = tower.apply_pi(1, &a, &v).unwrap();
        let top = out.block(0).map(fro).unwrap_or(0.0);
        assert!(top < 1e-10);
        let w12 = Word::new(vec![0, 1], 2).unwrap();
        let child = tower.word_id(&w12).unwrap();
        assert!(out.block(child).map(fro).unwrap_or(0.0) > 0.1);
    }

    #[test]
    fn apply_pi_depth_error() {
        let t = tol();
        let (algebras, embeddings, seeds) = pauli_states_seeds();
        let tower = DilationTower::build(
            algebras.clone(),
            embeddings,
            seeds,
            vec![None, None],
            2,
            DEFAULT_TOWER_CAP,
            &t,
        )
        .unwrap();
        // a block on the depth-2 word 12 with i = 1 (0-based 0) would need
        // the missing edge (12, 1)
        let w12 = Word::new(vec![0, 1], 2).unwrap();
        let wid = tower.word_id(&w12).unwrap();
        let mut v = BlockVector::new(1);
        v.add_block(wid, CMatrix::zeros(3, 1).map(|_| Complex64::ONE));
        let a = CVector::from_fn(4, |p, _| basis_vec(4, 0)[p]);
        let err = tower.apply_pi(0, &a, &v).unwrap_err();
        assert!(matches!(err, Error::InsufficientDepth { .. }));
    }

    #[test]
    fn tower_dimension_cap_trips() {
        let t = tol();
        let (algebras, embeddings, seeds) = pauli_states_seeds();
        let err = DilationTower::build(
            algebras,
            embeddings,
            seeds,
            vec![None, None],
            4,
            10,
            &t,
        )
        .unwrap_err();
        assert!(matches!(err, Error::DimensionCap { .. }));
    }

    #[test]
    fn deterministic_rebuild_is_bit_identical() {
        let t = tol();
        let (algebras, embeddings, seeds) = pauli_states_seeds();
        let build = || {
            DilationTower::build(
                algebras.clone(),
                embeddings.clone(),
                seeds.clone(),
                vec![None, None],
                3,
                DEFAULT_TOWER_CAP,
                &t,
            )
            .unwrap()
        };
        let t1 = build();
        let t2 = build();
        assert_eq!(t1.total_dim(), t2.total_dim());
        for wid in 0..t1.words().len() {
            assert_eq!(t1.dim(wid), t2.dim(wid));
            for (a, b) in t1.nodes[wid].action().iter().zip(t2.nodes[wid].action()) {
                assert!(a.iter().zip(b.iter()).all(|(x, y)| x == y));
            }
        }
        for (k, e1) in &t1.edges {
            let e2 = &t2.edges[k];
            for (a, b) in e1.pi.iter().zip(e2.pi.iter()) {
                assert!(a.iter().zip(b.iter()).all(|(x, y)| x == y));
            }
        }
    }
}
