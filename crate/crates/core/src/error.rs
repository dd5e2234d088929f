use thiserror::Error;

/// Errors shared by all modules of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("matrix is not symmetric within tolerance")]
    NotSymmetric,

    #[error("singular pencil: symmetric factorization failed after jitter")]
    SingularPencil,

    #[error("degenerate rank-1 factorization")]
    DegenerateRankOne,

    #[error("kernel matrix is not positive semidefinite (diagonal residual {residual:.3e})")]
    NotPsd { residual: f64 },

    #[error("degenerate bandwidth: data spread is zero")]
    DegenerateBandwidth,

    #[error("factor is already centered")]
    AlreadyCentered,

    #[error("factor must be centered first")]
    NotCentered,

    #[error("signal too short: need at least {need} samples, got {got}")]
    TooShort { need: usize, got: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("unequalizable: stacked channel operator is rank-deficient")]
    Unequalizable,

    #[error("degenerate input: {0}")]
    Degenerate(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
