use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("input-Hessian unavailable: activation `{activation}` is not twice differentiable")]
    UnsupportedHessian { activation: String },

    #[error("non-finite value in {context} at point {point:?}")]
    NonFinite { context: String, point: Vec<f64> },

    #[error("unknown problem id `{0}` (expected one of motivation, ex1, ex2, ex3, ex4)")]
    UnknownProblem(String),

    #[error("invalid problem definition: {0}")]
    InvalidProblem(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parameter layout mismatch: {0}")]
    LayoutMismatch(String),

    #[error("input map is degenerate (b = 0)")]
    DegenerateInputMap,

    #[error("explicit scheme unstable with nt = {given_nt}; need nt >= {required_nt}")]
    FdUnstable { given_nt: usize, required_nt: usize },

    #[error("checkpoint does not match network: {0}")]
    CheckpointMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
