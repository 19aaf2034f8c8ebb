use thiserror::Error;

/// Errors raised by both simulation backends, the protocol layer and the harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension {0}: every oscillator needs at least 2 Fock levels")]
    InvalidDimension(usize),

    #[error("truncation inadequate: {0}")]
    Truncation(String),

    #[error("operator is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("subsystem index {index} out of range ({count} available)")]
    IndexOutOfRange { index: usize, count: usize },

    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),

    #[error("parameter out of range: {0}")]
    ParameterOutOfRange(String),

    #[error("state has zero norm")]
    ZeroVector,

    #[error("Gram matrix has no singular value above the rank tolerance")]
    DegenerateBasis,

    #[error("projection has zero success probability")]
    ZeroProbability,

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
