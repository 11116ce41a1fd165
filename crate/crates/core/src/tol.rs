use crate::error::{Error, Result};

/// Global numerical policy threaded through every module.
///
/// Dilation dimensions are decided by numerical rank, so one shared policy
/// keeps rank decisions consistent across the whole tower.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TolerancePolicy {
    /// Relative magnitude cutoff for eigenvalues in matrix functions
    /// (inverse square roots and friends).
    pub eig_tol: f64,
    /// Rank cutoff relative to the largest singular value.
    pub rank_tol: f64,
    /// Residual bound for identity verification.
    pub check_tol: f64,
}

impl Default for TolerancePolicy {
    fn default() -> Self {
        TolerancePolicy {
            eig_tol: 1e-10,
            rank_tol: 1e-9,
            check_tol: 1e-8,
        }
    }
}

impl TolerancePolicy {
    /// All tolerances must be strictly positive and below 1e-3.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("eig_tol", self.eig_tol),
            ("rank_tol", self.rank_tol),
            ("check_tol", self.check_tol),
        ] {
            if !(v > 0.0 && v < 1e-3) {
                return Err(Error::Validation {
                    context: format!("tolerance {name} = {v:e} outside (0, 1e-3)"),
                    residual: v,
                    tol: 1e-3,
                });
            }
        }
        Ok(())
    }
}
