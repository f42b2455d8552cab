use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("undamped resonance: response is unbounded at omega = omega0 with gamma = 0")]
    UndampedResonance,

    #[error("operation requires gamma > 0 (formula divides by the friction coefficient)")]
    ZeroFriction,

    #[error("non-finite state at t = {t}: {what}")]
    NonFinite { t: f64, what: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("window of {periods} periods ({length}) is not an integer number of samples at dt = {dt}")]
    WindowNotIntegerPeriod { periods: usize, length: f64, dt: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("ensemble needs {required} bytes of recorded samples, budget is {budget}")]
    ResourceLimit { required: u64, budget: u64 },

    #[error("work window of {requested} exceeds recorded span {available}")]
    WindowExceedsTrajectory { requested: f64, available: f64 },

    #[error("duration mismatch: bouncer window {bouncer} vs walker window {walker}")]
    DurationMismatch { bouncer: f64, walker: f64 },

    #[error("not in a driven steady state: {0}")]
    NotSteadyState(String),

    #[error("non-uniform sampling grid: {0}")]
    NonUniformGrid(String),

    #[error("grid too small: axis {axis} has {points} points, need at least {required}")]
    GridTooSmall { axis: usize, points: usize, required: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("probability field is not strictly positive (min {min:e} at index {index})")]
    NonPositiveProbability { min: f64, index: usize },

    #[error("probability field is not normalized: integral = {integral}")]
    Unnormalized { integral: f64 },

    #[error("spin direction undefined: e_u and e_v are parallel")]
    ParallelVectors,

    #[error("field format: {0}")]
    Format(String),
}

pub(crate) fn ensure(cond: bool, name: &'static str, reason: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name, reason: reason() })
    }
}
