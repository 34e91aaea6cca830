use thiserror::Error;

use crate::graph::GraphError;

/// Errors raised by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Graph(#[from] GraphError),

    #[error("shape mismatch in {what}: expected {expected} values, found {found}")]
    Shape {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid scenario field `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("scenario parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("unknown preset `{name}` (available: {})", available.join(", "))]
    UnknownPreset {
        name: String,
        available: Vec<&'static str>,
    },

    #[error("step size {h} is not an integer multiple of reference step {h_ref}")]
    NonDivisibleStep { h: f64, h_ref: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate convergence data: {0}")]
    DegenerateConvergence(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn shape(what: &'static str, expected: usize, found: usize) -> Self {
        Error::Shape {
            what,
            expected,
            found,
        }
    }

    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }
}
