use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the domain of the function.
    #[error("invalid {name}: {value} ({reason})")]
    Domain {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("invalid antenna {id:?}: {reason}")]
    InvalidAntenna { id: String, reason: String },

    #[error("missing pair {0}")]
    MissingPair(String),

    #[error("pair {0} appears more than once")]
    DuplicatePair(String),

    #[error("pair {pair}: gain product must be positive, got {value}")]
    NonPositiveProduct { pair: String, value: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("config: {0}")]
    Config(String),

    #[error("segments do not overlap: gap between {lower_end} m and {upper_start} m")]
    StitchGap { lower_end: f64, upper_start: f64 },

    #[error("least-squares design matrix is rank deficient (order {order}, {points} points)")]
    RankDeficient { order: usize, points: usize },

    #[error(
        "quadrature under-resolved: {density} points per wavelength, at least {required} required"
    )]
    UnderResolved { density: f64, required: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(name: &'static str, value: f64, reason: &'static str) -> Self {
        Error::Domain {
            name,
            value,
            reason,
        }
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::RankDeficient { .. } | Error::UnderResolved { .. } | Error::Numerical(_)
        )
    }
}

pub(crate) fn require_positive(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::domain(name, value, "must be positive and finite"))
    }
}

pub(crate) fn require_non_negative(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value >= 0.0 {
        Ok(value)
    } else {
        Err(Error::domain(name, value, "must be non-negative and finite"))
    }
}
