use thiserror::Error;

/// Errors raised by the toolkit.
///
/// `Config` and `Domain` map to the CLI's configuration exit code; the rest
/// are runtime failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected} queues, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("out-of-order step record: expected slot {expected}, got {got}")]
    OutOfOrder { expected: u64, got: u64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for errors caused by invalid input rather than a failed run.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Domain(_) | Error::Dimension { .. } | Error::Precondition(_)
        ) || matches!(self, Error::Json(e) if e.is_data() || e.is_syntax() || e.is_eof())
    }

    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Domain(_) => "domain",
            Error::Dimension { .. } => "dimension",
            Error::OutOfOrder { .. } => "out_of_order",
            Error::Precondition(_) => "precondition",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
