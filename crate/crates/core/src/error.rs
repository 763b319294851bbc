use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid objective: {0}")]
    InvalidObjective(String),

    #[error("matrix A is not full row rank (gamma = {gamma:e})")]
    RankDeficient { gamma: f64 },

    #[error("unsupported variant: {0}")]
    UnsupportedVariant(String),

    #[error("singular linear system: {0}")]
    SingularSystem(String),

    #[error("Lyapunov value became non-finite at inner iteration {iteration}")]
    Diverged { iteration: usize },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn check_len(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        })
    }
}
