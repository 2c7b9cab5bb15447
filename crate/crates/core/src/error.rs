use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch on {axis}: expected {expected}, got {got}")]
    DimensionMismatch {
        axis: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("constant polynomial")]
    ConstantPolynomial,
    #[error("covariance update singular")]
    SingularUpdate,
    #[error("covariance not positive definite")]
    NotPositiveDefinite,
    #[error("infeasible step")]
    InfeasibleStep,
    #[error("eigendecomposition failed")]
    Eigen,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("no schemes requested")]
    NoSchemes,
    #[error("trial {index}: {source}")]
    Trial {
        index: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("decode error: {0}")]
    Decode(String),
    #[error("config error on line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
