use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("eigensolver failure: {0}")]
    Eigen(String),

    #[error("positivity violated at t = {time} us (det = {det:.3e})")]
    Positivity { time: f64, det: f64 },

    #[error("steady state is not unique: null space dimension {0}")]
    NullSpace(usize),

    #[error("invalid protocol: {0}")]
    Protocol(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics (eigensolver, integrator, null space),
    /// as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Eigen(_) | Error::Positivity { .. } | Error::NullSpace(_)
        )
    }
}
