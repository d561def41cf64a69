use core::fmt;

use crate::distributions::SeverityFamily;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A parameter is outside the family's domain.
    Domain { what: &'static str, value: f64 },
    InsufficientData { n: usize, required: usize },
    DegenerateSample,
    /// A loss lies outside the model support (below the threshold, or below 1 for LogGamma).
    Support { value: f64 },
    InfiniteMean,
    Unsupported { family: SeverityFamily, what: &'static str },
    DegenerateCovariance,
    /// A numerical routine failed to converge or produced an unusable result.
    Numeric(&'static str),
    EstimationFailure(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain { what, value } => write!(f, "parameter out of domain: {what} = {value}"),
            Error::InsufficientData { n, required } => {
                write!(f, "insufficient data: {n} observations, need at least {required}")
            }
            Error::DegenerateSample => f.write_str("degenerate sample: all losses are equal"),
            Error::Support { value } => write!(f, "loss {value} lies outside the model support"),
            Error::InfiniteMean => {
                f.write_str("severity mean is infinite; use the degen or isla approximation")
            }
            Error::Unsupported { family, what } => write!(f, "{family} does not support {what}"),
            Error::DegenerateCovariance => f.write_str("parameter correlation is +/-1"),
            Error::Numeric(msg) => write!(f, "numerical failure: {msg}"),
            Error::EstimationFailure(msg) => write!(f, "estimation failed: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
