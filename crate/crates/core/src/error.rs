use thiserror::Error;

pub type Result<T> = std::result::Result<T, MvgError>;

#[derive(Error, Debug)]
pub enum MvgError {
    /// A scalar argument is outside the domain of the formula.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape error: {0}")]
    Shape(String),

    /// Σ or Ψ is singular, or a factored design is malformed.
    #[error("degenerate noise design: {0}")]
    DegenerateDesign(String),

    #[error("invalid precision allocation: {0}")]
    Allocation(String),

    /// The caller's claims about the data (bounds, γ) are false.
    #[error("contract violation: {0}")]
    ContractViolation(String),

    /// A design produced by this crate failed the privacy condition.
    #[error("privacy condition check failed: lhs={lhs} rhs={rhs}")]
    ConditionFailed { lhs: f64, rhs: f64 },

    #[error("format error: {0}")]
    Format(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl MvgError {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            MvgError::ContractViolation(_) => 3,
            MvgError::ConditionFailed { .. } => 4,
            _ => 2,
        }
    }
}
