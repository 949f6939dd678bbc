use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("topology error: {0}")]
    Topology(String),

    #[error("periodic matching error: no partner for boundary node {node} at ({x}, {y})")]
    Matching { node: usize, x: f64, y: f64 },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("assembly error: {0}")]
    Assembly(String),

    #[error("constraint error: {0}")]
    Constraint(String),

    #[error("solver did not converge after {iterations} iterations (relative residual {residual:.3e}, target {tolerance:.1e})")]
    Solver {
        iterations: usize,
        residual: f64,
        tolerance: f64,
    },

    #[error("matrix is not positive definite (pivot {pivot:.3e} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("input error: {0}")]
    Input(String),

    #[error("size mismatch: expected {expected}, got {actual}")]
    SizeMismatch { expected: usize, actual: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid value for `{key}`: {message}")]
    Invalid { key: String, message: String },

    #[error("step {step}: non-finite value in {species} at node {node}")]
    Step {
        step: usize,
        species: &'static str,
        node: usize,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Validation-type failures (bad input, bad config) as opposed to runtime failures.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::InvalidMesh(_)
                | Error::Config(_)
                | Error::Invalid { .. }
                | Error::Input(_)
                | Error::Geometry(_)
                | Error::Topology(_)
                | Error::Matching { .. }
        )
    }

    /// Short stable code used in the CLI's `error[<code>]:` prefix.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Geometry(_) => "geometry",
            Error::Topology(_) => "topology",
            Error::Matching { .. } => "matching",
            Error::Parse { .. } => "parse",
            Error::InvalidMesh(_) => "mesh",
            Error::Assembly(_) => "assembly",
            Error::Constraint(_) => "constraint",
            Error::Solver { .. } => "solver",
            Error::NotPositiveDefinite { .. } => "spd",
            Error::Input(_) => "input",
            Error::SizeMismatch { .. } => "size",
            Error::Config(_) => "config",
            Error::Invalid { .. } => "invalid",
            Error::Step { .. } => "step",
            Error::Io { .. } => "io",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(key: &str, message: impl Into<String>) -> Self {
        Error::Invalid {
            key: key.to_string(),
            message: message.into(),
        }
    }
}
