use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BsftError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("filter construction failed: {0}")]
    Construction(String),
    #[error("tolerance {zeta:e} is infeasible in double precision for n = {n}")]
    InfeasibleTolerance { n: usize, zeta: f64 },
    #[error("no energy estimate: all energies are zero")]
    NoEnergy,
    #[error("non-finite sample value read at index {0}")]
    NonFiniteSample(i64),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, BsftError>;

pub(crate) fn invalid(msg: impl Into<String>) -> BsftError {
    BsftError::InvalidInput(msg.into())
}
