use alloc::string::String;

/// Everything that can go wrong in the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A model parameter is outside its admissible range.
    #[error("configuration error: {0}")]
    Config(String),
    /// A time argument lies outside the kernel's domain.
    #[error("time {time} outside the domain [{lo}, {hi}]")]
    Domain { time: f64, lo: f64, hi: f64 },
    /// Arguments inconsistent with the operation's contract.
    #[error("usage error: {0}")]
    Usage(String),
    /// A normalizing variance vanished.
    #[error("degenerate kernel: {0}")]
    DegenerateKernel(String),
    /// Malformed or non-finite input data.
    #[error("data error: {0}")]
    Data(String),
    #[error("matrix is not positive semidefinite: eigenvalue {eigenvalue:e} below threshold {threshold:e}")]
    NotPsd { eigenvalue: f64, threshold: f64 },
    #[error("dimension {n} exceeds the capacity limit {max}")]
    Capacity { n: usize, max: usize },
    #[error("iteration did not converge: {0}")]
    Convergence(String),
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! usage {
    ($($arg:tt)*) => { $crate::Error::Usage(alloc::format!($($arg)*)) };
}
macro_rules! config {
    ($($arg:tt)*) => { $crate::Error::Config(alloc::format!($($arg)*)) };
}
macro_rules! data {
    ($($arg:tt)*) => { $crate::Error::Data(alloc::format!($($arg)*)) };
}
pub(crate) use {config, data, usage};
