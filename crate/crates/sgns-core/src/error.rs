use alloc::string::String;
use core::fmt;

/// Errors surfaced by the library.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A constructor or operation received an invalid argument.
    InvalidArgument(String),
    /// Truncation levels of two operands do not match.
    DimensionMismatch { expected: usize, got: usize },
    /// The state became nonfinite during time stepping.
    BlowUp {
        step: usize,
        time: f64,
        norm: f64,
    },
    /// A diagnostic cannot be computed on the given input (e.g. a
    /// degenerate path).
    Degenerate(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            Error::BlowUp { step, time, norm } => write!(
                f,
                "numerical blow-up at step {step} (t = {time}): |state| = {norm}"
            ),
            Error::Degenerate(msg) => write!(f, "degenerate input: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
