use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("singular system: pivot {pivot:e} below tolerance {tolerance:e}")]
    SingularSystem { pivot: f64, tolerance: f64 },

    #[error("labels contain a single class")]
    OneClassOnly,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("symmetric eigendecomposition did not converge")]
    EigFailure,

    #[error("degenerate statistics: {0}")]
    DegenerateStats(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("bad magic number {found:#010x}, expected {expected:#010x}")]
    BadMagic { expected: u32, found: u32 },

    #[error("truncated file: expected {expected} bytes, found {found}")]
    TruncatedFile { expected: usize, found: usize },

    #[error("image count {images} does not match label count {labels}")]
    CountMismatch { images: usize, labels: usize },

    #[error("no samples of class {0}")]
    ClassMissing(u8),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Numerical failures are distinguished from bad input by the CLI.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularSystem { .. } | Error::EigFailure | Error::DegenerateStats(_)
        )
    }
}
