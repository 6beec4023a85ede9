use thiserror::Error;

/// Error type shared by the whole crate.
///
/// Variants split into two families, mirrored by the CLI exit codes:
/// configuration problems (bad arguments, malformed files) and numerical
/// failures (domain violations, non-convergence, non-finite values).
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("matrix not symmetric: max|A - A'| = {max_abs:.3e}")]
    Asymmetric { max_abs: f64 },

    #[error("{what} did not converge: residual {residual:.3e} after {iters} iterations")]
    Convergence {
        what: String,
        residual: f64,
        iters: usize,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by user input (arguments, config files, paths)
    /// rather than by numerics. The CLI maps these to exit code 2 and
    /// everything else to exit code 3.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_)
                | Error::Config(_)
                | Error::Io(_)
                | Error::Json(_)
                | Error::InvalidDimension(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
