use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("frequency {f} Hz outside tabulated range [{lo}, {hi}] Hz")]
    OutOfRange { f: f64, lo: f64, hi: f64 },

    #[error("frequency {f} Hz is at or below the waveguide cutoff {cutoff} Hz")]
    BelowCutoff { f: f64, cutoff: f64 },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("unsupported {family} ruler order {order}")]
    UnsupportedOrder { order: usize, family: String },

    #[error("measurement of line {line} has a singular T-matrix")]
    DegenerateMeasurement { line: usize },

    #[error("degenerate frequency point: eigenvalue {lambda:e} is numerically zero")]
    DegenerateFrequency { lambda: f64 },

    #[error("eigenvector index {0} does not belong to a simple eigenvalue")]
    UnsupportedIndex(usize),
}

impl Error {
    /// True for errors caused by numerically degenerate data rather than bad input.
    pub fn is_degenerate(&self) -> bool {
        matches!(
            self,
            Error::DegenerateMeasurement { .. } | Error::DegenerateFrequency { .. }
        )
    }
}
