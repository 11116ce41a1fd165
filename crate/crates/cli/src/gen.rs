//! Seeded instance generation.
//!
//! The default profile draws block-type algebras `A_i` over a common
//! subalgebra `B`, a representation `ρ₀` of `B` on `ℂʰ`, and builds each
//! `Φ_i = V_i* (id_{A_i} ⊗ I_h)(·) V_i` from a `B`-intertwining isometry
//! `V_i`, so `Φ_i ∘ ε_i = ρ₀` holds exactly and the strong extension
//! hypothesis is satisfied by construction. The linear-only profile instead
//! pushes a non-multiplicative UCP mixture `Ψ₀` on `B` through the
//! canonical expectations (`Φ_i = Ψ₀ ∘ E_i`), producing restrictions that
//! agree only as linear maps. The corollary profile draws chains
//! `B ⊂ C_i ⊂ A_i` with representations of the `C_i` aligned to share their
//! restriction to `B`.
//!
//! Output is deterministic in the seed, byte for byte. Shapes are rejected
//! and redrawn (deterministically) until a growth estimate fits a depth-4
//! tower into a fixed budget, so generated instances stay usable for every
//! verification depth at desk scale.

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use amalgam_core::algebra::{
    basis_vec, rep_intertwiners, ConditionalExpectation, FiniteCStarAlgebra, StarEmbedding,
};
use amalgam_core::cpmap::{reducing_split, CpMap, StinespringDilation};
use amalgam_core::linalg::{self, polar_unitary, CMatrix, CVector};
use amalgam_core::tower::reduced_words;
use amalgam_core::TolerancePolicy;

use crate::error::{CliError, CliResult};
use crate::instance::{
    matrix_to_json, AlgebraSpec, CorollarySpec, ElementSpec, InstanceFile,
    LetterSpec, MapsSpec, Mode, TermSpec, SCHEMA_VERSION,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    Default,
    LinearOnly,
    Corollary,
}

impl std::str::FromStr for Profile {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "default" => Ok(Profile::Default),
            "linear-only" => Ok(Profile::LinearOnly),
            "corollary" => Ok(Profile::Corollary),
            other => Err(format!(
                "unknown profile {other:?} (expected default, linear-only or corollary)"
            )),
        }
    }
}

impl std::fmt::Display for Profile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Profile::Default => write!(f, "default"),
            Profile::LinearOnly => write!(f, "linear-only"),
            Profile::Corollary => write!(f, "corollary"),
        }
    }
}

/// Budget for the depth-4 growth estimate of generated default instances.
const TOTAL_DIM_BUDGET: usize = 2500;
const MAX_GRAM_BUDGET: usize = 700;

/// One inclusion step: block structure of the bigger algebra plus the
/// multiplicity of each smaller-algebra block inside each bigger block.
#[derive(Debug, Clone)]
struct Shape {
    blocks: Vec<usize>,
    /// `mult[l][k]`: copies of small block `k` inside big block `l`.
    mult: Vec<Vec<usize>>,
}

impl Shape {
    fn identity(blocks: &[usize]) -> Shape {
        let k = blocks.len();
        Shape {
            blocks: blocks.to_vec(),
            mult: (0..k)
                .map(|l| (0..k).map(|kk| usize::from(kk == l)).collect())
                .collect(),
        }
    }
}

/// Candidate shapes of an algebra containing the block algebra `small`.
///
/// Hand-weighted tables for the common bases, a uniform enumeration (all
/// unital containing shapes with ambient dimension at most 4) otherwise.
fn shapes_over(small: &[usize], include_degenerate: bool) -> Vec<(f64, Shape)> {
    let mut out: Vec<(f64, Shape)> = Vec::new();
    match small {
        [1] => {
            out.push((0.35, Shape { blocks: vec![2], mult: vec![vec![2]] }));
            out.push((0.20, Shape { blocks: vec![3], mult: vec![vec![3]] }));
            out.push((0.20, Shape { blocks: vec![1, 2], mult: vec![vec![1], vec![2]] }));
            out.push((0.15, Shape { blocks: vec![1, 1], mult: vec![vec![1], vec![1]] }));
        }
        [1, 1] => {
            out.push((0.45, Shape { blocks: vec![2], mult: vec![vec![1, 1]] }));
            out.push((0.15, Shape { blocks: vec![3], mult: vec![vec![1, 2]] }));
            out.push((0.10, Shape { blocks: vec![3], mult: vec![vec![2, 1]] }));
            out.push((0.15, Shape { blocks: vec![1, 2], mult: vec![vec![1, 0], vec![1, 1]] }));
        }
        [2] => {
            out.push((0.60, Shape { blocks: vec![2, 2], mult: vec![vec![1], vec![1]] }));
            out.push((0.25, Shape { blocks: vec![4], mult: vec![vec![2]] }));
        }
        other => {
            let all = enumerate_shapes(other, 4);
            let proper: Vec<&Shape> = all.iter().filter(|sh| !is_identity(other, sh)).collect();
            if proper.is_empty() {
                return vec![(1.0, Shape::identity(other))];
            }
            let w = 0.88 / proper.len() as f64;
            for sh in proper {
                out.push((w, sh.clone()));
            }
        }
    }
    if include_degenerate {
        out.push((0.12, Shape::identity(small)));
    }
    out
}

fn is_identity(small: &[usize], shape: &Shape) -> bool {
    shape.blocks == small
        && shape
            .mult
            .iter()
            .enumerate()
            .all(|(l, row)| row.iter().enumerate().all(|(k, &m)| m == usize::from(k == l)))
}

/// Every unital containing block structure with ambient dimension at most
/// `max_ambient`: choices of big blocks `a_l = Σ_k m[l][k] d_k` with every
/// small block appearing somewhere.
fn enumerate_shapes(small: &[usize], max_ambient: usize) -> Vec<Shape> {
    // nonzero multiplicity rows that fit the ambient budget
    let mut rows: Vec<Vec<usize>> = Vec::new();
    fn rows_rec(
        dims: &[usize],
        budget: usize,
        prefix: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if dims.is_empty() {
            if prefix.iter().any(|&c| c > 0) {
                out.push(prefix.clone());
            }
            return;
        }
        for c in 0..=(budget / dims[0]) {
            prefix.push(c);
            rows_rec(&dims[1..], budget - c * dims[0], prefix, out);
            prefix.pop();
        }
    }
    rows_rec(small, max_ambient, &mut Vec::new(), &mut rows);
    rows.sort();

    let row_dim = |r: &[usize]| -> usize { r.iter().zip(small.iter()).map(|(c, d)| c * d).sum() };
    let mut shapes = Vec::new();
    // non-decreasing row sequences, so each multiset appears once
    fn seq_rec(
        rows: &[Vec<usize>],
        small: &[usize],
        start: usize,
        budget: usize,
        seq: &mut Vec<Vec<usize>>,
        shapes: &mut Vec<Shape>,
    ) {
        if !seq.is_empty() {
            let covered =
                (0..small.len()).all(|k| seq.iter().any(|r| r[k] > 0));
            if covered {
                shapes.push(Shape {
                    blocks: seq
                        .iter()
                        .map(|r| r.iter().zip(small.iter()).map(|(c, d)| c * d).sum())
                        .collect(),
                    mult: seq.clone(),
                });
            }
        }
        for idx in start..rows.len() {
            let d: usize = rows[idx].iter().zip(small.iter()).map(|(c, dd)| c * dd).sum();
            if d <= budget {
                seq.push(rows[idx].clone());
                seq_rec(rows, small, idx, budget - d, seq, shapes);
                seq.pop();
            }
        }
    }
    let _ = row_dim;
    seq_rec(&rows, small, 0, max_ambient, &mut Vec::new(), &mut shapes);
    shapes
}

struct Gen {
    rng: ChaCha8Rng,
    tol: TolerancePolicy,
}

impl Gen {
    fn new(seed: u64) -> Self {
        Gen {
            rng: ChaCha8Rng::seed_from_u64(seed),
            tol: TolerancePolicy::default(),
        }
    }

    fn complex(&mut self) -> Complex64 {
        Complex64::new(
            self.rng.random::<f64>() * 2.0 - 1.0,
            self.rng.random::<f64>() * 2.0 - 1.0,
        )
    }

    fn matrix(&mut self, r: usize, c: usize) -> CMatrix {
        CMatrix::from_fn(r, c, |_, _| self.complex())
    }

    fn unitary(&mut self, n: usize) -> CMatrix {
        if n == 0 {
            return linalg::zeros(0, 0);
        }
        loop {
            let x = self.matrix(n, n);
            if let Ok(u) = polar_unitary(&x, &self.tol) {
                return u;
            }
        }
    }

    /// Block-diagonal unitary respecting a block algebra's structure.
    fn block_unitary(&mut self, blocks: &[usize]) -> CMatrix {
        let n: usize = blocks.iter().sum();
        let mut u = linalg::zeros(n, n);
        let mut off = 0;
        for &d in blocks {
            let ub = self.unitary(d);
            u.view_mut((off, off), (d, d)).copy_from(&ub);
            off += d;
        }
        u
    }

    fn pick<T: Clone>(&mut self, options: &[(f64, T)]) -> T {
        let total: f64 = options.iter().map(|(w, _)| w).sum();
        let mut x = self.rng.random::<f64>() * total;
        for (w, v) in options {
            if x < *w {
                return v.clone();
            }
            x -= w;
        }
        options.last().unwrap().1.clone()
    }
}

/// Canonical placement of a small-algebra ambient matrix inside the big
/// algebra: inside big block `l`, copies of small block `k` sit in order of
/// `k`, then copy index.
fn place_ambient(small_blocks: &[usize], shape: &Shape, x: &CMatrix) -> CMatrix {
    let nb: usize = small_blocks.iter().sum();
    debug_assert_eq!(x.nrows(), nb);
    let na: usize = shape.blocks.iter().sum();
    let small_offsets: Vec<usize> = small_blocks
        .iter()
        .scan(0usize, |acc, &d| {
            let o = *acc;
            *acc += d;
            Some(o)
        })
        .collect();
    let mut out = linalg::zeros(na, na);
    let mut big_off = 0;
    for (l, &a_l) in shape.blocks.iter().enumerate() {
        let mut sub = 0;
        for (k, &b_k) in small_blocks.iter().enumerate() {
            for _ in 0..shape.mult[l][k] {
                for r in 0..b_k {
                    for c in 0..b_k {
                        out[(big_off + sub + r, big_off + sub + c)] =
                            x[(small_offsets[k] + r, small_offsets[k] + c)];
                    }
                }
                sub += b_k;
            }
        }
        debug_assert_eq!(sub, a_l);
        big_off += a_l;
    }
    out
}

/// Extracts the `k`-th diagonal block of a block-algebra ambient matrix.
fn block_of(blocks: &[usize], k: usize, x: &CMatrix) -> CMatrix {
    let off: usize = blocks[..k].iter().sum();
    x.view((off, off), (blocks[k], blocks[k])).into_owned()
}

/// The irreducible representations of a block algebra: one block compression
/// per block, as action lists over the algebra basis.
fn irreps_of(
    algebra: &Arc<FiniteCStarAlgebra>,
    blocks: &[usize],
    tol: &TolerancePolicy,
) -> CliResult<Vec<CpMap>> {
    (0..blocks.len())
        .map(|k| {
            let action: Vec<CMatrix> = algebra
                .basis()
                .iter()
                .map(|b| block_of(blocks, k, b))
                .collect();
            Ok(CpMap::representation(algebra.clone(), blocks[k], action, tol)?)
        })
        .collect()
}

/// Multiplicity of each irrep inside a representation, via intertwiner
/// dimensions.
fn irrep_multiplicities(
    rep: &CpMap,
    irreps: &[CpMap],
    tol: &TolerancePolicy,
) -> CliResult<Vec<usize>> {
    irreps
        .iter()
        .map(|ir| Ok(rep_intertwiners(ir.action(), rep.action(), tol)?.len()))
        .collect()
}

/// A drawn amalgam structure before maps are attached.
struct Structure {
    b_blocks: Vec<usize>,
    base: Arc<FiniteCStarAlgebra>,
    shapes: Vec<Shape>,
    algebras: Vec<Arc<FiniteCStarAlgebra>>,
    embeddings: Vec<StarEmbedding>,
    embedding_images: Vec<Vec<CMatrix>>,
}

fn draw_structure(
    g: &mut Gen,
    b_options: &[(f64, Vec<usize>)],
    allow_degenerate: bool,
) -> CliResult<Structure> {
    let num = g.pick(&[(0.75, 2usize), (0.25, 3)]);
    let b_blocks = g.pick(b_options);
    let base = FiniteCStarAlgebra::block_diagonal(&b_blocks, &g.tol)?;
    let mut shapes = Vec::new();
    let mut algebras = Vec::new();
    let mut embeddings = Vec::new();
    let mut embedding_images = Vec::new();
    for _ in 0..num {
        let shape = g.pick(&shapes_over(&b_blocks, allow_degenerate));
        let algebra = FiniteCStarAlgebra::block_diagonal(&shape.blocks, &g.tol)?;
        let u = g.block_unitary(&shape.blocks);
        let images: Vec<CMatrix> = base
            .basis()
            .iter()
            .map(|b| &u * place_ambient(&b_blocks, &shape, b) * u.adjoint())
            .collect();
        let embedding = StarEmbedding::new(base.clone(), algebra.clone(), &images, &g.tol)?;
        shapes.push(shape);
        algebras.push(algebra);
        embeddings.push(embedding);
        embedding_images.push(images);
    }
    Ok(Structure {
        b_blocks,
        base,
        shapes,
        algebras,
        embeddings,
        embedding_images,
    })
}

/// All multiplicity vectors `c ≥ 0` with `Σ c_k dims_k = target`.
fn mult_vectors(dims: &[usize], target: usize) -> Vec<Vec<usize>> {
    fn rec(dims: &[usize], target: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if dims.is_empty() {
            if target == 0 {
                out.push(prefix.clone());
            }
            return;
        }
        for c in 0..=(target / dims[0]) {
            prefix.push(c);
            rec(&dims[1..], target - c * dims[0], prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(dims, target, &mut Vec::new(), &mut out);
    out
}

/// Block-diagonal representation of a block algebra with the given irrep
/// multiplicities, conjugated by `w`.
fn rep_from_multiplicities(
    algebra: &Arc<FiniteCStarAlgebra>,
    blocks: &[usize],
    mult: &[usize],
    w: &CMatrix,
    tol: &TolerancePolicy,
) -> CliResult<CpMap> {
    let h: usize = mult.iter().zip(blocks.iter()).map(|(c, d)| c * d).sum();
    let action: Vec<CMatrix> = algebra
        .basis()
        .iter()
        .map(|b| {
            let mut m = linalg::zeros(h, h);
            let mut off = 0;
            for (k, &c) in mult.iter().enumerate() {
                let blk = block_of(blocks, k, b);
                for _ in 0..c {
                    m.view_mut((off, off), (blocks[k], blocks[k])).copy_from(&blk);
                    off += blocks[k];
                }
            }
            w * m * w.adjoint()
        })
        .collect();
    Ok(CpMap::representation(algebra.clone(), h, action, tol)?)
}

/// A random element of the intertwiner space, polished to an isometry.
fn random_intertwining_isometry(
    g: &mut Gen,
    rho: &CpMap,
    pi: &CpMap,
) -> CliResult<CMatrix> {
    let basis = rep_intertwiners(rho.action(), pi.action(), &g.tol)?;
    if basis.is_empty() {
        return Err(CliError::Schema(
            "internal generator error: empty intertwiner space".into(),
        ));
    }
    for _ in 0..16 {
        let mut x = linalg::zeros(pi.target_dim(), rho.target_dim());
        for b in &basis {
            let z = g.complex();
            x += b.map(|v| v * z);
        }
        if let Ok(v) = polar_unitary(&x, &g.tol) {
            return Ok(v);
        }
    }
    Err(CliError::Schema(
        "internal generator error: no invertible intertwiner found".into(),
    ))
}

/// Depth-4 growth estimate `(total_dim, max_gram)` for the tower a set of
/// maps would build, via irrep-multiplicity bookkeeping.
fn estimate_growth(
    s: &Structure,
    maps: &[CpMap],
    depth: usize,
    tol: &TolerancePolicy,
) -> CliResult<(usize, usize)> {
    let irreps = irreps_of(&s.base, &s.b_blocks, tol)?;
    let block_dims = &s.b_blocks;
    let dim_of = |v: &[usize]| -> usize {
        v.iter().zip(block_dims.iter()).map(|(c, d)| c * d).sum()
    };

    // per-index transition: mult vector of H_w ↦ mult vector of H_{wi}
    let mut transitions: Vec<Vec<Vec<usize>>> = Vec::new();
    for i in 0..s.algebras.len() {
        let exp = ConditionalExpectation::canonical(&s.embeddings[i], tol)?;
        let mut t_i = Vec::new();
        for irrep in &irreps {
            let d = s.algebras[i].dim();
            let action: Vec<CMatrix> = (0..d)
                .map(|p| irrep.apply(&exp.to_b(&basis_vec(d, p))))
                .collect();
            let psi = CpMap::new(s.algebras[i].clone(), irrep.target_dim(), action, tol)?;
            let dilation = StinespringDilation::stinespring_gns(&psi, tol)?;
            let (_, child) = reducing_split(&dilation, &s.embeddings[i], tol)?;
            t_i.push(irrep_multiplicities(&child, &irreps, tol)?);
        }
        transitions.push(t_i);
    }
    let step = |i: usize, v: &[usize]| -> Vec<usize> {
        let mut out = vec![0usize; block_dims.len()];
        for (k, &c) in v.iter().enumerate() {
            for (j, &t) in transitions[i][k].iter().enumerate() {
                out[j] += c * t;
            }
        }
        out
    };

    // seed multiplicities from the actual dilation splits
    let mut seed_mults = Vec::new();
    for (i, map) in maps.iter().enumerate() {
        let dilation = StinespringDilation::stinespring_gns(map, tol)?;
        let (_, rho_i) = reducing_split(&dilation, &s.embeddings[i], tol)?;
        seed_mults.push(irrep_multiplicities(&rho_i, &irreps, tol)?);
    }

    let mut total = 0usize;
    let mut max_gram = 0usize;
    for word in reduced_words(s.algebras.len(), depth) {
        let letters = word.letters();
        let mut v = seed_mults[letters[0]].clone();
        for &i in &letters[1..] {
            v = step(i, &v);
        }
        let d = dim_of(&v);
        total += d;
        if word.len() < depth {
            for i in 0..s.algebras.len() {
                if i != word.last() {
                    max_gram = max_gram.max(s.algebras[i].dim() * d);
                }
            }
        }
    }
    Ok((total, max_gram))
}

/// Random elements over the drawn structure, with words of length ≤ 2.
fn random_elements(g: &mut Gen, s: &Structure, count: usize) -> Vec<ElementSpec> {
    let n = s.algebras.len();
    (0..count)
        .map(|e| {
            let num_terms = 1 + g.rng.random_range(0..3);
            let terms: Vec<TermSpec> = (0..num_terms)
                .map(|_| {
                    let len = 1 + g.rng.random_range(0..2);
                    let letters: Vec<LetterSpec> = (0..len)
                        .map(|_| {
                            let idx = g.rng.random_range(0..n);
                            let coords =
                                CVector::from_fn(s.algebras[idx].dim(), |_, _| g.complex());
                            LetterSpec {
                                algebra: idx + 1,
                                matrix: matrix_to_json(&s.algebras[idx].from_coords(&coords)),
                            }
                        })
                        .collect();
                    let z = g.complex();
                    TermSpec {
                        coeff: [z.re, z.im],
                        letters,
                    }
                })
                .collect();
            let b_part = if g.rng.random::<f64>() < 0.5 {
                let coords = CVector::from_fn(s.base.dim(), |_, _| g.complex());
                Some(matrix_to_json(&s.base.from_coords(&coords)))
            } else {
                None
            };
            ElementSpec {
                name: format!("x{}", e + 1),
                b_part,
                terms,
            }
        })
        .collect()
}

fn algebra_spec(name: &str, blocks: &[usize]) -> AlgebraSpec {
    AlgebraSpec {
        name: Some(name.to_string()),
        blocks: Some(blocks.to_vec()),
        ambient_dim: None,
        basis: None,
    }
}

/// Deterministically generates an instance file for the given profile.
pub fn gen_instance(seed: u64, profile: Profile) -> CliResult<InstanceFile> {
    match profile {
        Profile::Default => gen_default(seed),
        Profile::LinearOnly => gen_linear_only(seed),
        Profile::Corollary => gen_corollary(seed),
    }
}

fn gen_default(seed: u64) -> CliResult<InstanceFile> {
    let mut g = Gen::new(seed);
    let b_options: Vec<(f64, Vec<usize>)> =
        vec![(0.5, vec![1]), (0.3, vec![1, 1]), (0.2, vec![2])];
    for _attempt in 0..50 {
        let s = draw_structure(&mut g, &b_options, true)?;

        // ρ₀: a random multiplicity pattern conjugated by a random unitary
        let h_options: Vec<(f64, usize)> = vec![(0.4, 1), (0.4, 2), (0.2, 3)];
        let mut candidates = Vec::new();
        for (w, h) in &h_options {
            for c in mult_vectors(&s.b_blocks, *h) {
                candidates.push((*w, c));
            }
        }
        if candidates.is_empty() {
            continue;
        }
        let c = g.pick(&candidates);
        let h: usize = c.iter().zip(s.b_blocks.iter()).map(|(c, d)| c * d).sum();
        let w = g.unitary(h);
        let rho0 = rep_from_multiplicities(&s.base, &s.b_blocks, &c, &w, &g.tol)?;

        // Φ_i = V_i*(a ⊗ I_h)V_i with a B-intertwining isometry V_i
        let mut maps = Vec::new();
        let mut ok = true;
        for i in 0..s.algebras.len() {
            let na = s.algebras[i].ambient_dim();
            let ih = linalg::identity(h);
            let pi_on_b: Vec<CMatrix> = s.embedding_images[i]
                .iter()
                .map(|img| img.kronecker(&ih))
                .collect();
            let Ok(pi_b_map) = CpMap::representation(s.base.clone(), na * h, pi_on_b, &g.tol)
            else {
                ok = false;
                break;
            };
            let v = match random_intertwining_isometry(&mut g, &rho0, &pi_b_map) {
                Ok(v) => v,
                Err(_) => {
                    ok = false;
                    break;
                }
            };
            let action: Vec<CMatrix> = s.algebras[i]
                .basis()
                .iter()
                .map(|a| v.adjoint() * a.kronecker(&ih) * &v)
                .collect();
            match CpMap::new(s.algebras[i].clone(), h, action, &g.tol) {
                Ok(m) => maps.push(m),
                Err(_) => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            continue;
        }

        // keep depth-4 towers affordable
        let (total, max_gram) = estimate_growth(&s, &maps, 4, &g.tol)?;
        if total > TOTAL_DIM_BUDGET || max_gram > MAX_GRAM_BUDGET {
            continue;
        }

        let elements = random_elements(&mut g, &s, 2);
        return Ok(assemble_file(
            seed,
            format!("gen-default-{seed}"),
            Mode::Boca,
            &s,
            Some(MapsSpec {
                target_dim: h,
                actions: maps
                    .iter()
                    .map(|m| m.action().iter().map(matrix_to_json).collect())
                    .collect(),
            }),
            None,
            elements,
        ));
    }
    Err(CliError::Schema(format!(
        "generator failed to draw an admissible default instance for seed {seed}"
    )))
}

fn gen_linear_only(seed: u64) -> CliResult<InstanceFile> {
    let mut g = Gen::new(seed);
    // a non-multiplicative common restriction needs dim B ≥ 2
    let b_options: Vec<(f64, Vec<usize>)> = vec![(0.7, vec![1, 1]), (0.3, vec![2])];
    for _attempt in 0..50 {
        let s = draw_structure(&mut g, &b_options, false)?;

        // Ψ₀: an even mixture of two representations of B that is far from
        // multiplicative
        let h_opts: Vec<usize> = match s.b_blocks.as_slice() {
            [1, 1] => vec![1, 2],
            [2] => vec![2],
            _ => vec![1],
        };
        let h = g.pick(&h_opts.iter().map(|&h| (1.0, h)).collect::<Vec<_>>());
        let cands = mult_vectors(&s.b_blocks, h);
        if cands.len() < 2 && s.b_blocks != vec![2] {
            continue;
        }
        let mut psi0 = None;
        for _ in 0..16 {
            let (c1, c2) = if s.b_blocks == vec![2] {
                (cands[0].clone(), cands[0].clone())
            } else {
                let i = g.rng.random_range(0..cands.len());
                let mut j = g.rng.random_range(0..cands.len());
                if i == j {
                    j = (j + 1) % cands.len();
                }
                (cands[i].clone(), cands[j].clone())
            };
            let w1 = g.unitary(h);
            let w2 = g.unitary(h);
            let Ok(r1) = rep_from_multiplicities(&s.base, &s.b_blocks, &c1, &w1, &g.tol) else { continue };
            let Ok(r2) = rep_from_multiplicities(&s.base, &s.b_blocks, &c2, &w2, &g.tol) else { continue };
            let action: Vec<CMatrix> = r1
                .action()
                .iter()
                .zip(r2.action().iter())
                .map(|(a, b)| (a + b).map(|z| z * 0.5))
                .collect();
            let Ok(mix) = CpMap::new(s.base.clone(), h, action, &g.tol) else {
                continue;
            };
            if mix.representation_residual() > 1e-3 {
                psi0 = Some(mix);
                break;
            }
        }
        let Some(psi0) = psi0 else { continue };

        // Φ_i = Ψ₀ ∘ E_i through the canonical expectations
        let mut maps = Vec::new();
        let mut ok = true;
        for i in 0..s.algebras.len() {
            let exp = match ConditionalExpectation::canonical(&s.embeddings[i], &g.tol) {
                Ok(e) => e,
                Err(_) => {
                    ok = false;
                    break;
                }
            };
            let d = s.algebras[i].dim();
            let action: Vec<CMatrix> = (0..d)
                .map(|p| psi0.apply(&exp.to_b(&basis_vec(d, p))))
                .collect();
            match CpMap::new(s.algebras[i].clone(), h, action, &g.tol) {
                Ok(m) => maps.push(m),
                Err(_) => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            continue;
        }

        let elements = random_elements(&mut g, &s, 2);
        return Ok(assemble_file(
            seed,
            format!("gen-linear-only-{seed}"),
            Mode::BocaLinear,
            &s,
            Some(MapsSpec {
                target_dim: h,
                actions: maps
                    .iter()
                    .map(|m| m.action().iter().map(matrix_to_json).collect())
                    .collect(),
            }),
            None,
            elements,
        ));
    }
    Err(CliError::Schema(format!(
        "generator failed to draw an admissible linear-only instance for seed {seed}"
    )))
}

fn gen_corollary(seed: u64) -> CliResult<InstanceFile> {
    let mut g = Gen::new(seed);
    let b_options: Vec<(f64, Vec<usize>)> = vec![(0.6, vec![1]), (0.4, vec![1, 1])];
    for attempt in 0..50 {
        let num = g.pick(&[(0.8, 2usize), (0.2, 3)]);
        let b_blocks = g.pick(&b_options);
        let base = FiniteCStarAlgebra::block_diagonal(&b_blocks, &g.tol)?;

        // chains B ⊂ C_i ⊂ A_i; late attempts force C_i = B, which always
        // admits a common restriction
        let mut c_shapes = Vec::new();
        let mut a_shapes = Vec::new();
        for _ in 0..num {
            let c_shape = if attempt >= 25 {
                Shape::identity(&b_blocks)
            } else {
                g.pick(&{
                    let mut opts = shapes_over(&b_blocks, true);
                    opts.push((0.25, Shape::identity(&b_blocks)));
                    opts
                })
            };
            let a_shape = g.pick(&shapes_over(&c_shape.blocks, true));
            c_shapes.push(c_shape);
            a_shapes.push(a_shape);
        }

        // find a common (h, B-multiplicity) pattern for the σ_i
        let mut per_index: Vec<Vec<(usize, Vec<usize>, Vec<usize>)>> = Vec::new();
        for c_shape in &c_shapes {
            let c_dims = &c_shape.blocks;
            let mut opts = Vec::new();
            for h in 1..=3usize {
                for c_mult in mult_vectors(c_dims, h) {
                    let mut v = vec![0usize; b_blocks.len()];
                    for (l, &cl) in c_mult.iter().enumerate() {
                        for (k, vb) in v.iter_mut().enumerate() {
                            *vb += cl * c_shape.mult[l][k];
                        }
                    }
                    opts.push((h, v, c_mult));
                }
            }
            per_index.push(opts);
        }
        let mut common: Vec<(usize, Vec<usize>, Vec<Vec<usize>>)> = Vec::new();
        for (h, v, c0) in &per_index[0] {
            if v.iter().all(|&x| x == 0) {
                continue;
            }
            let mut picks = vec![c0.clone()];
            let mut found = true;
            for opts in &per_index[1..] {
                match opts.iter().find(|(h2, v2, _)| h2 == h && v2 == v) {
                    Some((_, _, c)) => picks.push(c.clone()),
                    None => {
                        found = false;
                        break;
                    }
                }
            }
            if found {
                common.push((*h, v.clone(), picks));
            }
        }
        if common.is_empty() {
            continue;
        }
        let weighted: Vec<(f64, (usize, Vec<usize>, Vec<Vec<usize>>))> = common
            .iter()
            .map(|c| ((1.0 / c.0 as f64).powi(2), c.clone()))
            .collect();
        let (h, v, c_mults) = g.pick(&weighted);

        // build the concrete chain and aligned σ_i
        let w = g.unitary(h);
        let rho_b = rep_from_multiplicities(&base, &b_blocks, &v, &w, &g.tol)?;
        let mut inner_algebras = Vec::new();
        let mut inner_embeddings = Vec::new();
        let mut inner_images = Vec::new();
        let mut algebras = Vec::new();
        let mut inclusions = Vec::new();
        let mut inclusion_images = Vec::new();
        let mut embeddings = Vec::new();
        let mut embedding_images = Vec::new();
        let mut sigmas = Vec::new();
        let mut ok = true;
        for i in 0..num {
            let c_alg = FiniteCStarAlgebra::block_diagonal(&c_shapes[i].blocks, &g.tol)?;
            let uc = g.block_unitary(&c_shapes[i].blocks);
            let imgs: Vec<CMatrix> = base
                .basis()
                .iter()
                .map(|b| &uc * place_ambient(&b_blocks, &c_shapes[i], b) * uc.adjoint())
                .collect();
            let eps = StarEmbedding::new(base.clone(), c_alg.clone(), &imgs, &g.tol)?;

            let a_alg = FiniteCStarAlgebra::block_diagonal(&a_shapes[i].blocks, &g.tol)?;
            let ua = g.block_unitary(&a_shapes[i].blocks);
            let incl_imgs: Vec<CMatrix> = c_alg
                .basis()
                .iter()
                .map(|cb| &ua * place_ambient(&c_shapes[i].blocks, &a_shapes[i], cb) * ua.adjoint())
                .collect();
            let incl = StarEmbedding::new(c_alg.clone(), a_alg.clone(), &incl_imgs, &g.tol)?;
            let composed = StarEmbedding::compose(&incl, &eps, &g.tol)?;
            let composed_images: Vec<CMatrix> = (0..base.dim())
                .map(|p| composed.image_of_basis(p))
                .collect();

            // σ̂_i with the agreed multiplicities, aligned so σ_i∘ε_i = ρ_B
            let Ok(sigma_hat) = rep_from_multiplicities(
                &c_alg,
                &c_shapes[i].blocks,
                &c_mults[i],
                &linalg::identity(h),
                &g.tol,
            ) else {
                ok = false;
                break;
            };
            let restricted = match sigma_hat.restrict(&eps) {
                Ok(r) => r,
                Err(_) => {
                    ok = false;
                    break;
                }
            };
            let u = match random_intertwining_isometry(&mut g, &rho_b, &restricted) {
                Ok(u) => u,
                Err(_) => {
                    ok = false;
                    break;
                }
            };
            let action: Vec<CMatrix> = sigma_hat
                .action()
                .iter()
                .map(|m| u.adjoint() * m * &u)
                .collect();
            let sigma = match CpMap::representation(c_alg.clone(), h, action, &g.tol) {
                Ok(sg) => sg,
                Err(_) => {
                    ok = false;
                    break;
                }
            };
            if sigma
                .restrict(&eps)
                .map(|r| r.action_distance(&rho_b))
                .unwrap_or(f64::INFINITY)
                > 1e-10
            {
                ok = false;
                break;
            }

            inner_algebras.push(algebra_spec(&format!("C{}", i + 1), &c_shapes[i].blocks));
            inner_embeddings.push(eps);
            inner_images.push(imgs);
            algebras.push(a_alg);
            inclusions.push(incl);
            inclusion_images.push(incl_imgs);
            embeddings.push(composed);
            embedding_images.push(composed_images);
            sigmas.push(sigma);
        }
        if !ok {
            continue;
        }

        let s = Structure {
            b_blocks: b_blocks.clone(),
            base,
            shapes: a_shapes.clone(),
            algebras,
            embeddings,
            embedding_images,
        };
        let elements = random_elements(&mut g, &s, 1);
        let corollary = CorollarySpec {
            inner_algebras,
            inner_embeddings: inner_images
                .iter()
                .map(|imgs| imgs.iter().map(matrix_to_json).collect())
                .collect(),
            inclusions: inclusion_images
                .iter()
                .map(|imgs| imgs.iter().map(matrix_to_json).collect())
                .collect(),
            sigma_target_dim: h,
            sigmas: sigmas
                .iter()
                .map(|sg| sg.action().iter().map(matrix_to_json).collect())
                .collect(),
        };
        return Ok(assemble_file(
            seed,
            format!("gen-corollary-{seed}"),
            Mode::Corollary,
            &s,
            None,
            Some(corollary),
            elements,
        ));
    }
    Err(CliError::Schema(format!(
        "generator failed to draw an admissible corollary instance for seed {seed}"
    )))
}

fn assemble_file(
    seed: u64,
    name: String,
    mode: Mode,
    s: &Structure,
    maps: Option<MapsSpec>,
    corollary: Option<CorollarySpec>,
    elements: Vec<ElementSpec>,
) -> InstanceFile {
    InstanceFile {
        schema_version: SCHEMA_VERSION.to_string(),
        name,
        mode,
        depth: 2,
        seed: Some(seed),
        tolerances: None,
        dimension_cap: None,
        base: algebra_spec("B", &s.b_blocks),
        algebras: s
            .shapes
            .iter()
            .enumerate()
            .map(|(i, sh)| algebra_spec(&format!("A{}", i + 1), &sh.blocks))
            .collect(),
        embeddings: s
            .embedding_images
            .iter()
            .map(|imgs| imgs.iter().map(matrix_to_json).collect())
            .collect(),
        maps,
        expectations: None,
        corollary,
        elements,
    }
}
