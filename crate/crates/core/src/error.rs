use thiserror::Error;

/// Errors raised by the scheduling library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    /// Conditioning on a point the scheduler never selects.
    #[error("Palm kernel undefined at index {index}: [K]_zz = {value:e}")]
    PalmUndefined { index: usize, value: f64 },

    #[error("numeric failure: {0}")]
    NumericFailure(String),

    #[error("integral diverges: integrand still {integrand:e} at upper limit {upper:e}")]
    DivergingIntegral { upper: f64, integrand: f64 },

    #[error("infeasible start: utility is -inf at the initial point and at w = 0")]
    InfeasibleStart,

    #[error("size limit exceeded: n = {n}, maximum is {max}")]
    SizeLimit { n: usize, max: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
