use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("value {value} outside label range [{min}, {max}]")]
    Range { value: f64, min: f64, max: f64 },

    #[error("invalid label space: {0}")]
    Labels(String),

    #[error("invalid data at pixel {pixel}: {msg}")]
    Data { pixel: usize, msg: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("inner prox solver did not converge at pixel {pixel}")]
    Prox { pixel: usize },

    #[error("bregman step {k}: {source}")]
    Step {
        k: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid scene: {0}")]
    Scene(String),

    #[error("parse error at byte {offset}: {msg}")]
    Parse { offset: usize, msg: String },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Usage(String),
}

impl Error {
    pub(crate) fn at_step(self, k: usize) -> Error {
        Error::Step {
            k,
            source: Box::new(self),
        }
    }

    /// True for failures originating in one of the numerical solvers.
    pub fn is_solver_failure(&self) -> bool {
        match self {
            Error::Solver(_) | Error::Prox { .. } => true,
            Error::Step { source, .. } => source.is_solver_failure(),
            _ => false,
        }
    }
}
