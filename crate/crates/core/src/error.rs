use thiserror::Error;

#[derive(Debug, Error)]
pub enum BraceError {
    /// A caller broke an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid environment: {0}")]
    InvalidEnvironment(String),

    #[error("unknown scenario `{name}`; valid scenarios: {valid}")]
    UnknownScenario { name: String, valid: String },

    #[error("unknown algorithm `{name}`; valid algorithms: {valid}")]
    UnknownAlgorithm { name: String, valid: String },

    #[error("policy class too large: {actions}^{contexts} exceeds {limit}")]
    PolicySpaceTooLarge {
        actions: usize,
        contexts: usize,
        limit: usize,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, BraceError>;

pub(crate) fn contract(msg: impl Into<String>) -> BraceError {
    BraceError::Contract(msg.into())
}
