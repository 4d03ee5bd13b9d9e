use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller broke an operation's precondition (shape, range, sign).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("algebra rejected: {0}")]
    Algebra(String),

    #[error("configuration error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("eigensolver did not converge (achieved residual {residual:.3e}, tolerance {tolerance:.3e})")]
    Eigen { residual: f64, tolerance: f64 },

    #[error("time step failed at t = {t}: {message}")]
    Step { t: f64, message: String },

    /// A runtime identity monitored by the flow was breached.
    #[error("ledger assertion `{check}` breached at t = {t}: {message}")]
    Assertion {
        check: String,
        t: f64,
        message: String,
    },

    /// One run of a parameter sweep failed.
    #[error("run with {parameter} = {value} failed: {source}")]
    Run {
        parameter: String,
        value: f64,
        #[source]
        source: Box<Error>,
    },

    /// Every failed run of a sweep.
    #[error("{} sweep run(s) failed: {}", .0.len(), .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
    Sweep(Vec<Error>),

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Usage problems (exit status 2) as opposed to failed computations.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Contract(_) | Error::Algebra(_) | Error::Config { .. } | Error::Format { .. } | Error::Io { .. }
        )
    }

    pub fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}
