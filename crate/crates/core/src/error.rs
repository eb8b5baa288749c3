use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input violated a documented precondition.
    #[error("domain error: {0}")]
    Domain(String),

    /// The OLS design lost rank at the given column of the (possibly
    /// intercept-augmented) design matrix.
    #[error("singular design: column {column} is linearly dependent on earlier columns (|R_jj| = {diagonal:e}, threshold {threshold:e})")]
    Singular {
        column: usize,
        diagonal: f64,
        threshold: f64,
    },

    #[error("no external prediction for unit index {index}")]
    MissingPrediction { index: usize },

    #[error("numerical failure: {what} (achieved error {achieved:e}, requested {requested:e})")]
    Numerical {
        what: String,
        achieved: f64,
        requested: f64,
    },

    /// Malformed input file; `row` is 1-based and counts data rows after the header.
    #[error("invalid data{}: {message}", row.map(|r| format!(" at row {r}")).unwrap_or_default())]
    Data { row: Option<usize>, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn data(row: Option<usize>, msg: impl Into<String>) -> Self {
        Error::Data {
            row,
            message: msg.into(),
        }
    }
}

pub(crate) fn ensure_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be finite, got {value}")))
    }
}
