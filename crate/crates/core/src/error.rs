use alloc::string::String;
use core::fmt;

/// Errors reported by the simulation library.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument violates the documented precondition of an operation.
    InvalidArgument(String),
    /// A dense reference computation was asked for more modes/parties than it supports.
    SizeLimit { requested: usize, limit: usize },
    /// A numerical self-check failed (e.g. a physical expectation value came out complex).
    Consistency(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::SizeLimit { requested, limit } => {
                write!(f, "size limit exceeded: requested {requested}, limit {limit}")
            }
            Error::Consistency(msg) => write!(f, "numerical consistency failure: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! invalid {
    ($($arg:tt)*) => {
        $crate::error::Error::InvalidArgument(alloc::format!($($arg)*))
    };
}
pub(crate) use invalid;
