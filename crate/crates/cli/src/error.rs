use thiserror::Error;

/// CLI-level errors carry the exit-code split: I/O and schema problems exit
/// with 1, mathematical rejections (hypothesis violations, validation
/// failures, overflows) with 2.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("io error: {0}")]
    Io(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error(transparent)]
    Core(#[from] amalgam_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) | CliError::Schema(_) => 1,
            CliError::Core(_) => 2,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
