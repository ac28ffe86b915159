//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A closing price was zero or negative; log-returns are undefined.
    #[error("price at index {index} is not strictly positive (got {value})")]
    NonPositivePrice { index: usize, value: f64 },

    /// A precondition on an operation's inputs was violated.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A statistic was requested on a sample that cannot support it,
    /// e.g. kurtosis of a zero-variance sample.
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    /// The transform denominator vanished (all relevant history zero).
    #[error("degenerate window: transform denominator is zero at t={t}")]
    DegenerateWindow { t: usize },

    /// An innovation fell outside the admissible range of the inverse
    /// transform; cannot occur when draws come from a matching source.
    #[error("innovation w={w} outside admissible range |w| < {bound}")]
    InnovationOutOfRange { w: f64, bound: f64 },

    /// No grid point satisfied the calibration constraints even after the
    /// maximum number of order escalations.
    #[error(
        "calibration failed after {escalations} order escalations \
         (best objective found: {best_objective})"
    )]
    CalibrationFailed {
        escalations: usize,
        best_objective: f64,
    },

    /// Input data cannot identify the model (e.g. constant returns).
    #[error("degenerate data: {0}")]
    DegenerateData(String),

    /// A rolling-window plan does not fit the series.
    #[error("invalid window plan: {0}")]
    PlanError(String),

    /// The benchmark's metric is zero, so relative values are undefined.
    #[error("degenerate benchmark: benchmark metric P is zero")]
    DegenerateBenchmark,

    /// The adjusted loss differentials are identically zero; the test
    /// statistic carries no information.
    #[error("degenerate test: adjusted loss differentials are identically zero")]
    DegenerateCwTest,

    /// Invalid experiment configuration.
    #[error("configuration error: {0}")]
    Config(String),
}
