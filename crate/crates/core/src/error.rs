use alloc::string::String;
use core::fmt;

/// Errors shared by all engine modules.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Invalid construction parameter (divergent nome, bad rank, ...).
    Construction(String),
    /// A truncated series ran out of terms before reaching the requested
    /// tolerance; carries the magnitude of the last term.
    Accuracy { last_term: f64 },
    /// Evaluation hit a pole / theta zero / ill-conditioned inverse.  The
    /// sampling layer treats this as a resample signal.
    Singularity(String),
    /// A variable needed during evaluation was not assigned.
    Unassigned(VarName),
    /// Requested an operation the value cannot support, e.g.
    /// differentiating an opaque callback.
    Capability(String),
    /// Mixed shift- and diff-flavor ring elements.
    FlavorMismatch,
    /// Tensor legs / matrix dimensions do not line up.
    Dimension(String),
    /// Too many consecutive singular points while sampling.
    SamplingExhausted { retries: u32 },
    /// Generic usage error.
    Usage(String),
}

/// Variable name carried by [`Error::Unassigned`]; avoids a module cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarName(pub &'static str, pub usize);

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Construction(m) => write!(f, "construction error: {m}"),
            Error::Accuracy { last_term } => {
                write!(f, "series did not converge; last term magnitude {last_term:e}")
            }
            Error::Singularity(m) => write!(f, "singular evaluation: {m}"),
            Error::Unassigned(v) => write!(f, "unassigned variable {}{}", v.0, v.1),
            Error::Capability(m) => write!(f, "unsupported operation: {m}"),
            Error::FlavorMismatch => write!(f, "mixed shift/diff ring flavors"),
            Error::Dimension(m) => write!(f, "dimension mismatch: {m}"),
            Error::SamplingExhausted { retries } => {
                write!(f, "sampling exhausted after {retries} singular retries")
            }
            Error::Usage(m) => write!(f, "usage error: {m}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
