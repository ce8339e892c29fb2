use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors surfaced by model construction, solvers, samplers, and evaluators.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("joint expansion needs {required} table entries, cap is {cap}")]
    CapExceeded { required: u128, cap: u128 },

    #[error("infeasible model: {0}")]
    InfeasibleModel(String),

    #[error("permutation is not a bijection on [0, {0})")]
    BadPermutation(usize),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("spec is not symmetric: {0}")]
    NotSymmetric(String),

    #[error("infeasible count action: {0}")]
    InfeasibleAction(String),

    #[error("linear program is infeasible (phase-one residual {0})")]
    Infeasible(f64),

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("numeric failure in LP solve: {0}")]
    NumericFailure(String),

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("Whittle indices require a binary action space, got {0} actions")]
    NotBinaryAction(usize),

    #[error("sub-MDP failed the indexability sweep at subsidy {0}")]
    NotIndexable(f64),

    #[error("all priorities masked while machines remain unassigned")]
    DegeneratePriorities,

    #[error("trace replay diverged: {0}")]
    TraceMismatch(String),

    #[error("policy emitted an action violating resource budgets: {0}")]
    PolicyInfeasibleAction(String),

    #[error("non-finite loss during training at update {update}: {detail}")]
    NonFiniteLoss { update: usize, detail: String },

    #[error("instance file rejected: {0}")]
    BadInstanceFile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
