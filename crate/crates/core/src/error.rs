use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("singular basis: |det| = {0:e}")]
    SingularBasis(f64),

    #[error("not a sublattice: {0}")]
    NotSublattice(String),

    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    #[error("series tail not certifiable: {0}")]
    Uncertified(String),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
