use std::path::PathBuf;

/// Errors raised by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid `{field}`: {reason}")]
    Validation { field: String, reason: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is numerically singular (pivot {pivot:.3e} at column {column})")]
    Singular { column: usize, pivot: f64 },

    #[error("time {t} lies outside the horizon [{a}, {b}]")]
    OutsideHorizon { t: f64, a: f64, b: f64 },

    #[error("control value {value:?} is not admissible")]
    NotAdmissible { value: Vec<f64> },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("non-finite state encountered at t = {t}")]
    Blowup { t: f64 },

    #[error("linear program ended with status {0:?}")]
    Lp(crate::lp::LpStatus),

    #[error("problem is infeasible: minimum transfer time {min_time} exceeds horizon {horizon}")]
    Infeasible { min_time: f64, horizon: f64 },

    #[error("no feasible bang-off-bang structure with at most {k_max} segments; try a larger K_max")]
    NoFeasibleStructure { k_max: usize },
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
