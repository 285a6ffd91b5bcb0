use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error)]
pub enum SimError {
    /// A configuration value is out of range or inconsistent. The string
    /// names the offending key.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Arguments passed to a numerical routine do not agree (length
    /// mismatch, negative power, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The requested SNR cannot be met under the per-node power cap, or the
    /// allocation has no valid solution.
    #[error("infeasible allocation: {0}")]
    Infeasible(String),

    /// No alive node is left to compute statistics over.
    #[error("cluster is dead: no alive nodes")]
    ClusterDead,

    /// A ratio whose denominator is zero.
    #[error("undefined ratio: {0}")]
    UndefinedRatio(String),

    #[error("config parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = SimError> = std::result::Result<T, E>;
