use crate::types::Ensemble;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("division by zero: {0}")]
    DivisionByZero(&'static str),

    #[error("protocol violation: herald on gated ensemble {0}")]
    ProtocolViolation(Ensemble),

    #[error("rejection sampler gave up after {rounds} rounds")]
    RejectionBudgetExceeded { rounds: u32 },

    #[error("invalid config key `{key}`: {reason}")]
    InvalidConfig { key: String, reason: String },

    #[error("shard merge mismatch: {0}")]
    ShardMergeMismatch(String),

    #[error("event log contains no trials")]
    EmptyLog,

    #[error("fit did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("degenerate Jacobian: parameter `{parameter}` does not affect the residuals")]
    DegenerateJacobian { parameter: String },

    #[error("paired logs differ in `{0}`")]
    MismatchedConfigs(String),

    #[error("parse error on line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn parse(line: usize, reason: impl Into<String>) -> Self {
        Error::Parse {
            line,
            reason: reason.into(),
        }
    }
}
