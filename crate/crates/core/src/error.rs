use thiserror::Error;

/// Errors shared by every layer of the construction.
///
/// The split matters to callers: [`Error::Hypothesis`] means the *inputs*
/// violate a theorem hypothesis (a UCP map that is not completely positive,
/// restrictions that disagree, a letter outside an expectation kernel), while
/// [`Error::Internal`] flags identities that the construction itself
/// guarantees and that therefore indicate a tolerance misconfiguration or a
/// bug rather than bad data.
#[derive(Debug, Error)]
pub enum Error {
    /// Input data fails a structural validation (shape, span membership,
    /// closure, orthonormality, ...).
    #[error("validation failed: {context} (residual {residual:.3e}, tolerance {tol:.3e})")]
    Validation {
        context: String,
        residual: f64,
        tol: f64,
    },

    /// A theorem hypothesis is violated by the inputs.
    #[error("hypothesis violated: {context} (residual {residual:.3e})")]
    Hypothesis { context: String, residual: f64 },

    /// Requested matrix operation is not defined for the given data.
    #[error("{0}")]
    Shape(String),

    /// A tower or closure grew past its configured cap.
    #[error("dimension cap exceeded: {context} ({dim} > {cap})")]
    DimensionCap {
        context: String,
        dim: usize,
        cap: usize,
    },

    /// Evaluation touched a word longer than the constructed depth.
    #[error("insufficient depth: word {word} needs depth {needed} but tower was built at {depth}")]
    InsufficientDepth {
        word: String,
        needed: usize,
        depth: usize,
    },

    /// An identity the construction guarantees failed; indicates a bug or a
    /// tolerance misconfiguration, not bad input.
    #[error("internal invariant failed: {context} (residual {residual:.3e})")]
    Internal { context: String, residual: f64 },
}

impl Error {
    pub(crate) fn validation(context: impl Into<String>, residual: f64, tol: f64) -> Self {
        Error::Validation {
            context: context.into(),
            residual,
            tol,
        }
    }

    pub(crate) fn hypothesis(context: impl Into<String>, residual: f64) -> Self {
        Error::Hypothesis {
            context: context.into(),
            residual,
        }
    }

    pub(crate) fn internal(context: impl Into<String>, residual: f64) -> Self {
        Error::Internal {
            context: context.into(),
            residual,
        }
    }

    /// True for rejections caused by the caller's data rather than by bugs.
    pub fn is_rejection(&self) -> bool {
        matches!(
            self,
            Error::Validation { .. }
                | Error::Hypothesis { .. }
                | Error::Shape(_)
                | Error::DimensionCap { .. }
                | Error::InsufficientDepth { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
