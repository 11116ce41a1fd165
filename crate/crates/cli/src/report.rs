//! Machine-readable run reports.
//!
//! A report is deterministic for identical inputs: check records appear in
//! execution order, tower dimensions in word order, and the digest is the
//! SHA-256 of the report serialized with the timing fields (and the digest
//! itself) blanked, so reruns compare equal even though wall-clock numbers
//! differ.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::instance::{JsonMatrix, Mode};

pub const REPORT_SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TowerStats {
    pub total_dim: usize,
    /// `(word, dim)` pairs in length-lexicographic word order.
    pub dims: Vec<(String, usize)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluatedValue {
    pub name: String,
    pub matrix: JsonMatrix,
    pub blocks_touched: usize,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Timings {
    pub construction_ms: f64,
    pub checks_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: String,
    pub artifact_version: String,
    pub name: String,
    pub mode: Mode,
    pub depth: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub pass: bool,
    pub checks: Vec<CheckRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tower: Option<TowerStats>,
    pub values: Vec<EvaluatedValue>,
    pub timings: Timings,
    pub digest: String,
}

impl Report {
    pub fn new(name: String, mode: Mode, depth: usize, seed: Option<u64>) -> Self {
        Report {
            schema_version: REPORT_SCHEMA_VERSION.to_string(),
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            name,
            mode,
            depth,
            seed,
            pass: true,
            checks: Vec::new(),
            tower: None,
            values: Vec::new(),
            timings: Timings::default(),
            digest: String::new(),
        }
    }

    pub fn record(&mut self, name: impl Into<String>, residual: f64, tolerance: f64) -> bool {
        let pass = residual.is_finite() && residual <= tolerance;
        self.checks.push(CheckRecord {
            name: name.into(),
            residual,
            tolerance,
            pass,
        });
        self.pass &= pass;
        pass
    }

    /// Records an outright rejection (construction refused to run).
    pub fn record_rejection(&mut self, name: impl Into<String>, detail: &str) {
        self.checks.push(CheckRecord {
            name: format!("{}: {detail}", name.into()),
            residual: f64::INFINITY,
            tolerance: 0.0,
            pass: false,
        });
        self.pass = false;
    }

    /// Fills in the digest over the timing-free serialization.
    pub fn finalize(&mut self) {
        let mut canonical = self.clone();
        canonical.timings = Timings::default();
        canonical.digest = String::new();
        let bytes = serde_json::to_vec(&canonical).expect("report serializes");
        let mut hasher = Sha256::new();
        hasher.update(&bytes);
        let digest = hasher.finalize();
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        self.digest = format!("sha256:{hex}");
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
