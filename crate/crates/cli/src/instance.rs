//! Instance file schema and its translation into core objects.
//!
//! Files are UTF-8 JSON. Complex entries are `[re, im]` pairs and matrices
//! are row-major nested arrays. Algebras come either as explicit
//! HS-orthonormal bases or as block-type shorthand (`"blocks": [2]` is
//! `M₂`, `[1,1]` the diagonal algebra, and so on). Letter and embedding
//! indices are 1-based, matching the `A_1, A_2, …` naming used in reports.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use amalgam_core::algebra::{ConditionalExpectation, FiniteCStarAlgebra, StarEmbedding};
use amalgam_core::cpmap::CpMap;
use amalgam_core::freeprod::{Amalgam, FreeElement, FreeLetter, FreeTerm};
use amalgam_core::linalg::{CMatrix, CVector};
use amalgam_core::TolerancePolicy;

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: &str = "1";

pub type JsonMatrix = Vec<Vec<[f64; 2]>>;

pub fn matrix_to_json(m: &CMatrix) -> JsonMatrix {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect())
        .collect()
}

pub fn matrix_from_json(j: &JsonMatrix, what: &str) -> CliResult<CMatrix> {
    let rows = j.len();
    if rows == 0 {
        return Err(CliError::Schema(format!("{what}: empty matrix")));
    }
    let cols = j[0].len();
    if cols == 0 || j.iter().any(|r| r.len() != cols) {
        return Err(CliError::Schema(format!("{what}: ragged or empty matrix rows")));
    }
    let mut m = DMatrix::zeros(rows, cols);
    for (r, row) in j.iter().enumerate() {
        for (c, &[re, im]) in row.iter().enumerate() {
            if !re.is_finite() || !im.is_finite() {
                return Err(CliError::Schema(format!("{what}: non-finite entry")));
            }
            m[(r, c)] = Complex64::new(re, im);
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgebraSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Block-type shorthand: `M_{d_1} ⊕ … ⊕ M_{d_k}`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub blocks: Option<Vec<usize>>,
    /// Explicit form: ambient dimension plus an HS-orthonormal basis.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ambient_dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub basis: Option<Vec<JsonMatrix>>,
}

impl AlgebraSpec {
    pub fn build(&self, tol: &TolerancePolicy) -> CliResult<Arc<FiniteCStarAlgebra>> {
        match (&self.blocks, &self.ambient_dim, &self.basis) {
            (Some(blocks), None, None) => {
                Ok(FiniteCStarAlgebra::block_diagonal(blocks, tol)?)
            }
            (None, Some(n), Some(basis)) => {
                let mats: CliResult<Vec<CMatrix>> = basis
                    .iter()
                    .enumerate()
                    .map(|(k, j)| matrix_from_json(j, &format!("basis element {k}")))
                    .collect();
                Ok(FiniteCStarAlgebra::from_basis(*n, mats?, tol)?)
            }
            _ => Err(CliError::Schema(
                "algebra needs either blocks or ambient_dim+basis".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ExpectationSpec {
    /// `"canonical"`: the trace-preserving expectation.
    Keyword(String),
    /// Explicit images `E(b_p)` per target-algebra basis element.
    Images { images: Vec<JsonMatrix> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapsSpec {
    pub target_dim: usize,
    /// One action list per algebra; each action list holds one `h×h` matrix
    /// per basis element of that algebra.
    pub actions: Vec<Vec<JsonMatrix>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorollarySpec {
    /// The intermediate algebras `C_i`.
    pub inner_algebras: Vec<AlgebraSpec>,
    /// Images of the B-basis inside each `C_i`.
    pub inner_embeddings: Vec<Vec<JsonMatrix>>,
    /// Images of each `C_i`-basis inside `A_i`.
    pub inclusions: Vec<Vec<JsonMatrix>>,
    pub sigma_target_dim: usize,
    /// One action list per `C_i`.
    pub sigmas: Vec<Vec<JsonMatrix>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LetterSpec {
    /// 1-based algebra index.
    pub algebra: usize,
    pub matrix: JsonMatrix,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub coeff: [f64; 2],
    pub letters: Vec<LetterSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementSpec {
    pub name: String,
    /// Ambient matrix in `B`, optional.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b_part: Option<JsonMatrix>,
    pub terms: Vec<TermSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eig_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rank_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub check_tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Boca,
    BocaLinear,
    Corollary,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Mode::Boca => write!(f, "boca"),
            Mode::BocaLinear => write!(f, "boca-linear"),
            Mode::Corollary => write!(f, "corollary"),
        }
    }
}

/// The on-disk instance format.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub schema_version: String,
    pub name: String,
    pub mode: Mode,
    pub depth: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<ToleranceSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dimension_cap: Option<usize>,
    pub base: AlgebraSpec,
    pub algebras: Vec<AlgebraSpec>,
    /// Images of the B-basis inside each `A_i`.
    pub embeddings: Vec<Vec<JsonMatrix>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub maps: Option<MapsSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expectations: Option<Vec<ExpectationSpec>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corollary: Option<CorollarySpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub elements: Vec<ElementSpec>,
}

/// Fully validated core objects built from an instance file.
pub struct BuiltInstance {
    pub tol: TolerancePolicy,
    pub depth: usize,
    pub dim_cap: usize,
    pub base: Arc<FiniteCStarAlgebra>,
    pub algebras: Vec<Arc<FiniteCStarAlgebra>>,
    pub embeddings: Vec<StarEmbedding>,
    pub maps: Option<Vec<CpMap>>,
    pub expectations: Vec<Option<ConditionalExpectation>>,
    pub corollary: Option<BuiltCorollary>,
    pub elements: Vec<(String, FreeElement)>,
}

pub struct BuiltCorollary {
    pub sigmas: Vec<CpMap>,
    pub inclusions: Vec<StarEmbedding>,
    pub inner_embeddings: Vec<StarEmbedding>,
}

impl InstanceFile {
    pub fn from_path(path: &std::path::Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_str(&text)
    }

    pub fn from_str(text: &str) -> CliResult<Self> {
        let file: InstanceFile =
            serde_json::from_str(text).map_err(|e| CliError::Schema(e.to_string()))?;
        if file.schema_version != SCHEMA_VERSION {
            return Err(CliError::Schema(format!(
                "unsupported schema version {} (expected {SCHEMA_VERSION})",
                file.schema_version
            )));
        }
        if file.algebras.is_empty() {
            return Err(CliError::Schema("no algebras given".into()));
        }
        if file.embeddings.len() != file.algebras.len() {
            return Err(CliError::Schema(
                "need exactly one embedding image list per algebra".into(),
            ));
        }
        if file.depth == 0 {
            return Err(CliError::Schema("depth must be at least 1".into()));
        }
        match file.mode {
            Mode::Boca | Mode::BocaLinear => {
                if file.maps.is_none() {
                    return Err(CliError::Schema(format!(
                        "mode {} needs the maps section",
                        file.mode
                    )));
                }
            }
            Mode::Corollary => {
                if file.corollary.is_none() {
                    return Err(CliError::Schema(
                        "mode corollary needs the corollary section".into(),
                    ));
                }
            }
        }
        Ok(file)
    }

    pub fn tolerance_policy(&self, override_check_tol: Option<f64>) -> CliResult<TolerancePolicy> {
        let mut tol = TolerancePolicy::default();
        if let Some(spec) = &self.tolerances {
            if let Some(v) = spec.eig_tol {
                tol.eig_tol = v;
            }
            if let Some(v) = spec.rank_tol {
                tol.rank_tol = v;
            }
            if let Some(v) = spec.check_tol {
                tol.check_tol = v;
            }
        }
        if let Some(v) = override_check_tol {
            tol.check_tol = v;
        }
        tol.validate()?;
        Ok(tol)
    }

    /// Builds and validates every core object the file describes.
    pub fn build(
        &self,
        depth_override: Option<usize>,
        check_tol_override: Option<f64>,
    ) -> CliResult<BuiltInstance> {
        let tol = self.tolerance_policy(check_tol_override)?;
        let depth = depth_override.unwrap_or(self.depth);
        if depth == 0 {
            return Err(CliError::Schema("depth must be at least 1".into()));
        }
        let dim_cap = self
            .dimension_cap
            .unwrap_or(amalgam_core::tower::DEFAULT_TOWER_CAP);
        let base = self.base.build(&tol)?;
        let mut algebras = Vec::new();
        for spec in &self.algebras {
            algebras.push(spec.build(&tol)?);
        }
        let mut embeddings = Vec::new();
        for (i, images) in self.embeddings.iter().enumerate() {
            let mats = json_matrices(images, &format!("embedding {}", i + 1))?;
            embeddings.push(StarEmbedding::new(
                base.clone(),
                algebras[i].clone(),
                &mats,
                &tol,
            )?);
        }

        let maps = match &self.maps {
            None => None,
            Some(spec) => {
                if spec.actions.len() != algebras.len() {
                    return Err(CliError::Schema(
                        "need exactly one action list per algebra".into(),
                    ));
                }
                let mut maps = Vec::new();
                for (i, action) in spec.actions.iter().enumerate() {
                    let mats = json_matrices(action, &format!("map {}", i + 1))?;
                    maps.push(CpMap::new(
                        algebras[i].clone(),
                        spec.target_dim,
                        mats,
                        &tol,
                    )?);
                }
                Some(maps)
            }
        };

        let mut expectations: Vec<Option<ConditionalExpectation>> =
            vec![None; algebras.len()];
        if let Some(specs) = &self.expectations {
            if specs.len() != algebras.len() {
                return Err(CliError::Schema(
                    "need exactly one expectation entry per algebra".into(),
                ));
            }
            for (i, spec) in specs.iter().enumerate() {
                match spec {
                    ExpectationSpec::Keyword(k) if k == "canonical" => {}
                    ExpectationSpec::Keyword(k) => {
                        return Err(CliError::Schema(format!(
                            "unknown expectation keyword {k:?} (expected \"canonical\")"
                        )));
                    }
                    ExpectationSpec::Images { images } => {
                        let mats =
                            json_matrices(images, &format!("expectation {}", i + 1))?;
                        if mats.len() != algebras[i].dim() {
                            return Err(CliError::Schema(format!(
                                "expectation {} needs {} images",
                                i + 1,
                                algebras[i].dim()
                            )));
                        }
                        let mut matrix =
                            DMatrix::zeros(algebras[i].dim(), algebras[i].dim());
                        for (p, img) in mats.iter().enumerate() {
                            let coords = algebras[i].coords_checked(img, &tol)?;
                            matrix.set_column(p, &coords);
                        }
                        expectations[i] = Some(ConditionalExpectation::from_matrix(
                            embeddings[i].clone(),
                            matrix,
                            &tol,
                        )?);
                    }
                }
            }
        }

        let corollary = match &self.corollary {
            None => None,
            Some(spec) => {
                let n = algebras.len();
                if spec.inner_algebras.len() != n
                    || spec.inner_embeddings.len() != n
                    || spec.inclusions.len() != n
                    || spec.sigmas.len() != n
                {
                    return Err(CliError::Schema(
                        "corollary section needs one entry of each kind per algebra".into(),
                    ));
                }
                let mut sigmas = Vec::new();
                let mut inclusions = Vec::new();
                let mut inner_embeddings = Vec::new();
                for i in 0..n {
                    let c = spec.inner_algebras[i].build(&tol)?;
                    let inner_images = json_matrices(
                        &spec.inner_embeddings[i],
                        &format!("inner embedding {}", i + 1),
                    )?;
                    inner_embeddings.push(StarEmbedding::new(
                        base.clone(),
                        c.clone(),
                        &inner_images,
                        &tol,
                    )?);
                    let incl_images =
                        json_matrices(&spec.inclusions[i], &format!("inclusion {}", i + 1))?;
                    inclusions.push(StarEmbedding::new(
                        c.clone(),
                        algebras[i].clone(),
                        &incl_images,
                        &tol,
                    )?);
                    let action =
                        json_matrices(&spec.sigmas[i], &format!("sigma {}", i + 1))?;
                    sigmas.push(CpMap::representation(
                        c,
                        spec.sigma_target_dim,
                        action,
                        &tol,
                    )?);
                }
                Some(BuiltCorollary {
                    sigmas,
                    inclusions,
                    inner_embeddings,
                })
            }
        };

        // elements to evaluate
        let amalgam = Amalgam::new(algebras.clone(), embeddings.clone())?;
        let mut elements = Vec::new();
        for spec in &self.elements {
            let b_part: CVector = match &spec.b_part {
                None => CVector::zeros(base.dim()),
                Some(j) => {
                    let m = matrix_from_json(j, &format!("element {} b_part", spec.name))?;
                    base.coords_checked(&m, &tol)?
                }
            };
            let mut terms = Vec::new();
            for t in &spec.terms {
                let mut letters = Vec::new();
                for l in &t.letters {
                    if l.algebra == 0 || l.algebra > algebras.len() {
                        return Err(CliError::Schema(format!(
                            "element {}: algebra index {} out of range (1..{})",
                            spec.name,
                            l.algebra,
                            algebras.len()
                        )));
                    }
                    let idx = l.algebra - 1;
                    let m = matrix_from_json(
                        &l.matrix,
                        &format!("element {} letter", spec.name),
                    )?;
                    letters.push(FreeLetter {
                        index: idx,
                        coords: algebras[idx].coords_checked(&m, &tol)?,
                    });
                }
                terms.push(FreeTerm {
                    coeff: Complex64::new(t.coeff[0], t.coeff[1]),
                    letters,
                });
            }
            elements.push((spec.name.clone(), amalgam.element(b_part, terms)?));
        }

        Ok(BuiltInstance {
            tol,
            depth,
            dim_cap,
            base,
            algebras,
            embeddings,
            maps,
            expectations,
            corollary,
            elements,
        })
    }
}

fn json_matrices(list: &[JsonMatrix], what: &str) -> CliResult<Vec<CMatrix>> {
    list.iter()
        .enumerate()
        .map(|(k, j)| matrix_from_json(j, &format!("{what} entry {k}")))
        .collect()
}
