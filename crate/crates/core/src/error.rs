use alloc::string::String;
use core::fmt;

/// Errors raised by the factorization library.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Two operands have incompatible shapes or dimensions.
    ShapeMismatch(String),
    /// A mode index is not smaller than the tensor order.
    ModeOutOfRange { mode: usize, order: usize },
    /// An argument violates a documented precondition.
    InvalidArgument(String),
    /// A value that must be finite is NaN or infinite.
    NonFinite,
    /// The operation is not available for the requested configuration.
    Unsupported(String),
    /// A mode has a positive penalty weight but no seminorm.
    MissingSeminorm { mode: usize },
    /// The weight mask has no positive entry.
    AllMissing,
    /// Fewer observed entries than requested folds.
    TooFewObserved { observed: usize, folds: usize },
    /// A normalizing reference has zero norm.
    ZeroNorm,
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ShapeMismatch(msg) => write!(f, "shape mismatch: {msg}"),
            Error::ModeOutOfRange { mode, order } => {
                write!(f, "mode {mode} out of range for an order-{order} tensor")
            }
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::NonFinite => f.write_str("non-finite value"),
            Error::Unsupported(msg) => write!(f, "unsupported operation: {msg}"),
            Error::MissingSeminorm { mode } => {
                write!(f, "mode {mode} is penalized but has no seminorm")
            }
            Error::AllMissing => f.write_str("weight mask has no observed entry"),
            Error::TooFewObserved { observed, folds } => {
                write!(f, "{observed} observed entries cannot be split into {folds} folds")
            }
            Error::ZeroNorm => f.write_str("reference has zero norm"),
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn shape_mismatch(msg: impl Into<String>) -> Error {
    Error::ShapeMismatch(msg.into())
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
