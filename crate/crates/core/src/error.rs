use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the core algorithms.
#[derive(Debug, Error)]
pub enum Error {
    /// Argument outside the domain where the quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// Malformed argument (bad order, too few samples, empty ladder...).
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Evaluation at a point where the quantity blows up.
    #[error("singularity: {0}")]
    Singularity(String),

    /// Parameters that violate a standing hypothesis (t0 too large, eps >= t0...).
    #[error("configuration error: {0}")]
    Configuration(String),

    /// The nonlinearity fails one of its structural hypotheses.
    #[error("invalid nonlinearity: {0}")]
    InvalidNonlinearity(String),

    /// No initial datum satisfies the compatibility constraints.
    #[error("infeasible initial datum: {0}")]
    InfeasibleDatum(String),

    /// Newton failed even at the smallest admissible time step.
    #[error("nonlinear solve failed in {region} at t = {t:e} after {iterations} iterations (residual {residual:e})")]
    NonlinearSolve {
        region: String,
        t: f64,
        iterations: usize,
        residual: f64,
    },

    /// The discrete residual stayed above tolerance after step rejection.
    #[error("accuracy error in {region} at t = {t:e}: residual {residual:e} > {tolerance:e}")]
    Accuracy {
        region: String,
        t: f64,
        residual: f64,
        tolerance: f64,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerical machinery rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonlinearSolve { .. } | Error::Accuracy { .. } | Error::Singularity(_)
        )
    }
}
