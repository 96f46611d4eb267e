use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("rank-deficient least-squares system ({rows} samples for {cols} unknowns)")]
    RankDeficient { rows: usize, cols: usize },

    #[error("missing moment entry (j={j}, alpha={alpha}, beta={beta})")]
    MissingMoment { j: usize, alpha: usize, beta: usize },

    #[error("field spec: {message} at line {line}, column {column}")]
    FieldSpec {
        message: String,
        line: usize,
        column: usize,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
