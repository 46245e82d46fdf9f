use thiserror::Error;

use crate::ode::OdeError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error("unknown system `{0}`")]
    UnknownSystem(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite value in {0}")]
    NonFiniteValue(&'static str),
    #[error("quadrature needs an odd node count >= 3, got {0}")]
    InvalidK(usize),
    #[error("Gramian is singular: residual {residual:.3e} exceeds {limit:.3e}")]
    SingularGramian { residual: f64, limit: f64 },
    #[error("Picard iteration diverged at iteration {iteration} (err_end = {err_end:.3e})")]
    Diverged { iteration: usize, err_end: f64 },
    #[error("system is not fully actuated: {0}")]
    NotFullyActuated(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serialization(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}

impl From<toml::de::Error> for Error {
    fn from(e: toml::de::Error) -> Self {
        Error::InvalidConfig(e.to_string())
    }
}
