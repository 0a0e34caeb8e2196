use thiserror::Error;

/// Errors raised by the library.
///
/// The variants fall into two families: input validation (bad domain,
/// bad configuration, malformed data) and numerical failure (an algorithm
/// could not deliver its contract). The CLI maps the first family to exit
/// status 1 and the second to exit status 2.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("degenerate integration domain: {0}")]
    DegenerateDomain(String),

    #[error("not a minimum: {0}")]
    NotAMinimum(String),

    #[error("step size underflow at t = {t} s (h = {h} s)")]
    StepUnderflow { t: f64, h: f64 },

    #[error("model violation: {0}")]
    ModelViolation(String),

    #[error("fit did not converge after {iterations} iterations (best objective {best_objective})")]
    NoConvergence {
        iterations: usize,
        best_objective: f64,
        best_parameters: Vec<f64>,
    },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerical machinery, as opposed to bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::DegenerateDomain(_)
                | Error::NotAMinimum(_)
                | Error::StepUnderflow { .. }
                | Error::ModelViolation(_)
                | Error::NoConvergence { .. }
        )
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
