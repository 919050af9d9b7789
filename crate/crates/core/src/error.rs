use thiserror::Error;

/// Errors produced by the simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate steady state: two singular values below threshold ({first:e}, {second:e})")]
    DegenerateSteadyState { first: f64, second: f64 },

    #[error("stationary state validation failed: {0}")]
    InvalidSteadyState(String),

    #[error("step size underflow at t = {t:e} (h = {step:e}, after {steps} steps)")]
    Stiffness { t: f64, step: f64, steps: usize },

    #[error("level tracking failed on nu interval [{nu_lo:e}, {nu_hi:e}] (overlap {overlap:.3})")]
    TrackingFailure { nu_lo: f64, nu_hi: f64, overlap: f64 },

    #[error("spectrum is identically zero; width undefined")]
    UndefinedWidth,

    #[error("shifted Liouvillian singular at omega_s = {omega_s}")]
    SingularShift { omega_s: f64 },

    #[error("truncation not converged by n_max = {n_max} (last change {change:e})")]
    TruncationFailure { n_max: usize, change: f64 },

    #[error("linear algebra failure: {0}")]
    LinearAlgebra(String),
}

impl Error {
    /// True for errors caused by bad input rather than by a numerical failure.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::InvalidArgument(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
