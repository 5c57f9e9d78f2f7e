use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter or configuration value violates its documented range.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// An input vector or argument is malformed (wrong dimension, not unit norm, ...).
    #[error("invalid input: {0}")]
    Input(String),

    /// A data row could not be used.
    #[error("data error at row {row}: {message}")]
    Data { row: usize, message: String },

    /// SGD on the OCSVM objective left the monitored region.
    #[error("sgd-ocsvm diverged at step {step}: |w| = {norm:.4} exceeds {limit}")]
    Diverged { step: u64, norm: f64, limit: f64 },

    /// Every candidate threshold fired on the calibration streams.
    #[error("threshold tuning failed; restarts per candidate: {}", format_counts(.counts))]
    Tuning { counts: Vec<(f64, usize)> },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
}

fn format_counts(counts: &[(f64, usize)]) -> String {
    counts
        .iter()
        .map(|(c, n)| format!("C={c:e}: {n}"))
        .collect::<Vec<_>>()
        .join(", ")
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }
}
