use thiserror::Error;

/// Record field names used in validation errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    Arm,
    Outcome,
    Delta,
    Pi,
    /// Predicted risk under treatment, `pi - delta`.
    TreatedRisk,
    OrderKey,
}

impl std::fmt::Display for Field {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Field::Arm => "arm",
            Field::Outcome => "outcome",
            Field::Delta => "delta",
            Field::Pi => "pi",
            Field::TreatedRisk => "pi - delta",
            Field::OrderKey => "order_key",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain: sample is empty")]
    EmptySample,

    #[error("domain: field `{field}` out of range at record {index}: {value}")]
    FieldOutOfRange {
        field: Field,
        index: usize,
        value: f64,
    },

    #[error("domain: every subject is in the same arm; both arms need at least one subject")]
    SingleArmSample,

    #[error("domain: ordering key missing at record {index}")]
    MissingOrderKey { index: usize },

    #[error("calibration: predicted baseline risk missing at record {index}")]
    MissingBaselineRisk { index: usize },

    #[error("calibration: degenerate variance ({reason})")]
    DegenerateVariance { reason: String },

    #[error("inference: argument must be a finite non-negative number, got {0}")]
    NegativeArgument(f64),

    #[error("simulation: invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("simulation: unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("io: required column `{0}` is missing")]
    MissingColumn(String),

    #[error("io: bad value at row {row}, column `{column}`: {value:?}")]
    BadValue {
        row: usize,
        column: String,
        value: String,
    },

    #[error("io: dataset has no data rows")]
    EmptyFile,

    #[error("io: {0}")]
    Io(String),

    #[error("plot: nothing to draw")]
    EmptyPath,
}

impl Error {
    pub(crate) fn degenerate(reason: impl Into<String>) -> Self {
        Error::DegenerateVariance {
            reason: reason.into(),
        }
    }

    /// True for errors that come from the statistics rather than the input.
    pub fn is_degenerate(&self) -> bool {
        matches!(self, Error::DegenerateVariance { .. })
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
