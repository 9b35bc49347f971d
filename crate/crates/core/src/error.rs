use thiserror::Error;

/// Errors raised by the solver laboratory.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid mode index {0}: modes are numbered from 1")]
    InvalidMode(i64),

    #[error("{what} = {value} lies outside {range}")]
    Domain {
        what: &'static str,
        value: f64,
        range: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("slab {slab} out of range 1..={slabs}")]
    SlabOutOfRange { slab: usize, slabs: usize },

    #[error("step {step} out of range 0..={steps}")]
    StepOutOfRange { step: usize, steps: usize },

    #[error("unsupported spline degree {0}; expected 2 or 3")]
    Degree(usize),

    #[error("factorization failed at pivot {pivot}: {reason}")]
    Factorization { pivot: usize, reason: &'static str },

    #[error("rate fit needs at least {needed} positive points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("Monte Carlo needs at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_range(what: &'static str, value: f64, lo: f64, hi: f64) -> Result<()> {
    if value.is_finite() && value >= lo && value <= hi {
        Ok(())
    } else {
        Err(Error::Domain {
            what,
            value,
            range: format!("[{lo}, {hi}]"),
        })
    }
}
