use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("singular filter: bin ({m}, {n}) has zero magnitude")]
    SingularFilter { m: usize, n: usize },

    #[error("singular reference: {0}")]
    SingularReference(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("power constraint violated: trace {trace} exceeds budget {p_max}")]
    ConstraintViolation { trace: f64, p_max: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
