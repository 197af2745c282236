use thiserror::Error;

/// Errors raised by the toolkit.
///
/// The CLI maps [`Error::NonConvergence`] to exit code 2 and everything else to 1.
#[derive(Debug, Error)]
pub enum Error {
    #[error("group kind mismatch: {left} vs {right}")]
    KindMismatch { left: String, right: String },

    #[error("invalid group element: {0}")]
    InvalidElement(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid chain: {0}")]
    InvalidChain(String),

    #[error("chain is not reversible: detailed-balance violation {violation:e}")]
    NotReversible { violation: f64 },

    #[error("chain is disconnected: no path between state {from} and state {to}")]
    Disconnected { from: usize, to: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable code used in CLI diagnostics.
    pub fn code(&self) -> &'static str {
        match self {
            Error::KindMismatch { .. } => "kind_mismatch",
            Error::InvalidElement(_) => "invalid_element",
            Error::InvalidMeasure(_) => "invalid_measure",
            Error::InvalidChain(_) => "invalid_chain",
            Error::NotReversible { .. } => "not_reversible",
            Error::Disconnected { .. } => "disconnected",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::BudgetExceeded(_) => "budget_exceeded",
            Error::Unsupported(_) => "unsupported",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::NonConvergence { .. } => "non_convergence",
            Error::InvalidGraph(_) => "invalid_graph",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
