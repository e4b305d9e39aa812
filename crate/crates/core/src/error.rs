use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("direction is not unit norm: |n| = {0}")]
    NonUnitDirection(f64),
    #[error("point at the origin is singular")]
    SingularPoint,
    #[error("normalization {0} is not available for spin {1}/2")]
    UnsupportedNormalization(&'static str, u32),
    #[error("not derived in paper: {0}")]
    NotDerived(String),
    #[error("invalid angular channel: {0}")]
    InvalidChannel(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("wrong spin for {what}: expected twice_s = {expected}, got {got}")]
    WrongSpin {
        what: &'static str,
        expected: u32,
        got: u32,
    },
    #[error("series did not converge: {0}")]
    NonConvergent(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;
