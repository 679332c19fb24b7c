use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("matrix data invalid: {0}")]
    InvalidMatrix(String),
    #[error("Jacobi eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    NonConvergence { sweeps: usize, off_norm: f64 },
    #[error("Schatten exponent must satisfy p >= 1, got {0}")]
    InvalidP(f64),
    #[error("derivative of order {requested} requested but the model is exact only up to order {max}")]
    OrderExceeded { requested: usize, max: usize },
    #[error("function evaluation failed at x = {x}: {reason}")]
    EvalError { x: f64, reason: String },
    #[error("order {0} is not supported by this routine")]
    UnsupportedOrder(usize),
    #[error("operand {index} does not commute with A (commutator norm {norm:e})")]
    NotCommuting { index: usize, norm: f64 },
    #[error("ratio denominator is numerically zero ({0:e})")]
    DivisionDegenerate(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
