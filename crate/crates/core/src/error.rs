use thiserror::Error;

pub type Result<T, E = KcmError> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KcmError {
    /// An input object violates its invariants. `index` is 1-based when present.
    #[error("invalid {what}{}: {reason}", index.map(|i| format!(" at index {i}")).unwrap_or_default())]
    Validation {
        what: &'static str,
        index: Option<usize>,
        reason: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    /// A computation was refused because its size exceeds a guard.
    #[error("size guard exceeded: {0}")]
    Size(String),

    #[error("strategy `{strategy}` violated its contract at t={t}: {reason}")]
    Contract {
        strategy: String,
        t: usize,
        reason: String,
    },

    #[error("parse error{}: {reason}", line.map(|l| format!(" on line {l}")).unwrap_or_default())]
    Parse { line: Option<usize>, reason: String },

    #[error("unknown strategy `{0}`")]
    UnknownStrategy(String),

    #[error("statistic error: {0}")]
    Statistic(String),
}

impl KcmError {
    pub(crate) fn validation(what: &'static str, index: Option<usize>, reason: impl Into<String>) -> Self {
        KcmError::Validation {
            what,
            index,
            reason: reason.into(),
        }
    }
}
