use alloc::string::String;
use core::fmt;

/// Errors raised by the ensemble model, the abstract domain and the engine.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Two vectors or boxes that must agree in length do not.
    DimensionMismatch { expected: usize, found: usize },
    /// An abstract transformer or the engine was handed an empty region.
    EmptyRegion,
    /// `from_points` was called with no points.
    NoPoints,
    /// A model failed structural validation.
    InvalidModel(String),
    /// A property or checker argument is out of range.
    InvalidProperty(String),
    /// The perturbation radius must be strictly positive.
    NonPositiveEpsilon,
    /// Cell enumeration was asked to walk more leaf combinations than allowed.
    CellCapExceeded { combinations: u128, cap: u128 },
    /// The checker returned `Unsure` on a fully refined (singleton) output.
    UndecidedAtSingleton,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::EmptyRegion => f.write_str("region is empty"),
            Error::NoPoints => f.write_str("cannot abstract an empty point set"),
            Error::InvalidModel(msg) => write!(f, "invalid model: {msg}"),
            Error::InvalidProperty(msg) => write!(f, "invalid property: {msg}"),
            Error::NonPositiveEpsilon => f.write_str("epsilon must be strictly positive"),
            Error::CellCapExceeded { combinations, cap } => write!(
                f,
                "cell enumeration refused: {combinations} leaf combinations exceed cap {cap}"
            ),
            Error::UndecidedAtSingleton => f.write_str("checker contract violated: Unsure on a singleton output"),
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<(), Error> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
