use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("input outside the function domain: {0}")]
    Domain(String),

    #[error("coordinate descent did not converge after {sweeps} sweeps (last max change in fitted values {last_change:e}, tolerance {tol:e})")]
    Convergence {
        sweeps: usize,
        last_change: f64,
        tol: f64,
    },

    #[error("integration failed at t = {t}: step size {step:e} underflowed after {steps} steps")]
    Integration { t: f64, step: f64, steps: usize },

    #[error("basis size {requested} exceeds the configured cap {cap}")]
    Capacity { requested: u128, cap: usize },

    #[error("surrogate training failed on fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    /// Whether this error stems from the experiment description rather than
    /// from a numerical failure while running it.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Parameter(_) | Error::Config(_) | Error::Shape(_))
    }
}
