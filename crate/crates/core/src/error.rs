use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("coefficient-domain oracle capped at n = {cap}, requested n = {n}")]
    CapExceeded { n: usize, cap: usize },

    #[error("memory budget exceeded: need {needed_mb} MiB, cap is {cap_mb} MiB")]
    MemoryBudget { needed_mb: usize, cap_mb: usize },

    #[error("no snapshot recorded at step {0}")]
    MissingSnapshot(usize),

    #[error("step {0} is not a power of two")]
    NonDyadic(usize),

    #[error("mesh incompatible: {0}")]
    MeshIncompatible(String),

    #[error("decoration window [{lo}, {hi}] exceeds the available mesh")]
    WindowOutOfRange { lo: f64, hi: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
