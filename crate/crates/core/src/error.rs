use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// The characteristic function failed on a specific coalition.
    #[error("evaluating coalition {coalition:#x} failed: {message}")]
    Evaluation { coalition: u64, message: String },

    /// Player count exceeds what an enumeration route can handle.
    #[error("{method} supports at most {max} players, got {n}; use {alternative}")]
    Capacity {
        method: &'static str,
        n: usize,
        max: usize,
        alternative: &'static str,
    },

    /// Enumeration would visit more coalitions than the per-call budget.
    #[error("{what} needs {required} coalitions, budget is {budget}")]
    Budget {
        what: String,
        required: u128,
        budget: u128,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Normal equations could not be factored.
    #[error("singular least-squares system (condition estimate {condition:.3e})")]
    Singular { condition: f64 },

    #[error("estimate for player {player} is not finite")]
    NonFinite { player: usize },

    #[error("non-finite loss at epoch {epoch}")]
    Divergence { epoch: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
