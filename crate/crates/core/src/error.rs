use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("input rate {lambda_hat} exceeds the maximum throughput {lambda_max}")]
    NoStableRate { lambda_hat: f64, lambda_max: f64 },

    #[error("HOL chain is not positive recurrent: p + q = {sum} must exceed 1")]
    NotErgodic { sum: f64 },

    #[error("singular parameters: {0}")]
    SingularParameters(String),

    #[error("mean delay is unbounded: second moment of service time diverges")]
    UnboundedDelay,

    #[error("queue is unstable: utilization {utilization} >= 1")]
    Unstable { utilization: f64 },

    #[error("retransmission factor {value} lies outside (0, 1)")]
    OutOfRange { value: f64 },

    #[error("no attempt-rate fixed point for q = {q}")]
    NoFixedPoint { q: f64 },

    #[error("singular linear system")]
    SingularSystem,

    #[error("attempt trace is empty")]
    EmptyTrace,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
