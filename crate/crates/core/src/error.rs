use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension must be at least {min}, got {got}")]
    InvalidDimension { min: usize, got: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("history holds {have} records, at least 2 are required")]
    InsufficientHistory { have: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("expected a block of {expected} records, got {found}")]
    BlockSize { expected: usize, found: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("importance weight overflows f64 (ln weight = {ln_weight})")]
    WeightOverflow { ln_weight: f64 },

    #[error("i/o error: {0}")]
    Io(String),

    #[error("malformed csv at line {line}: {msg}")]
    Csv { line: u64, msg: String },
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
