use alloc::string::String;

/// Errors produced by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An argument or configuration value is outside its allowed domain.
    #[error("config error: {0}")]
    Config(String),
    /// A data structure violates one of its invariants.
    #[error("validation error: {0}")]
    Validation(String),
    /// A byte stream does not follow the expected layout.
    #[error("format error: {0}")]
    Format(String),
    /// No configuration satisfies the latency and power constraints.
    #[error("infeasible: {0}")]
    Infeasible(String),
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! config_err {
    ($($arg:tt)*) => { $crate::error::Error::Config(alloc::format!($($arg)*)) };
}
macro_rules! validation_err {
    ($($arg:tt)*) => { $crate::error::Error::Validation(alloc::format!($($arg)*)) };
}
pub(crate) use config_err;
pub(crate) use validation_err;
