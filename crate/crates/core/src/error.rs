use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("order {requested} is not supported (largest available order is {max})")]
    UnsupportedOrder { requested: usize, max: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("forward tail diverges: mu * |eta| = {0} >= 1")]
    DivergentTail(f64),

    #[error("linear term is not invertible: {0}")]
    NonInvertibleLinearization(String),

    #[error("composition domain is empty: cannot split {total} into {parts} positive parts")]
    EmptyDomain { total: usize, parts: usize },

    #[error("order {requested} exceeds the cost guard of {limit}")]
    CostGuard { requested: usize, limit: usize },

    #[error("{value} is outside the convergence radius {radius}")]
    OutsideRadius { value: f64, radius: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("Green's function is singular at coincident points")]
    Singular,

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
