use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    Shape {
        context: &'static str,
        expected: String,
        actual: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },

    #[error("x̃ impossible under both branches (index {index})")]
    Unreachable { index: usize },

    #[error("training diverged: non-finite loss at epoch {epoch}, step {step}")]
    Diverged { epoch: usize, step: usize },

    #[error("svd failed to converge after {iterations} sweeps")]
    SvdNoConvergence { iterations: usize },

    #[error("target prevalence exceeds clean prevalence in {} dimension(s): {}", .0.len(), format_dims(.0))]
    PrevalenceExceeded(Vec<(usize, f64, f64)>),

    #[error("metric undefined on {invalid} of {reps} bootstrap replicates")]
    TooManyInvalidReplicates { invalid: usize, reps: usize },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn format_dims(dims: &[(usize, f64, f64)]) -> String {
    dims.iter()
        .map(|(d, target, clean)| format!("dim {d} target={target} clean={clean}"))
        .collect::<Vec<_>>()
        .join(", ")
}

impl Error {
    pub(crate) fn shape(
        context: &'static str,
        expected: impl std::fmt::Debug,
        actual: impl std::fmt::Debug,
    ) -> Self {
        Error::Shape {
            context,
            expected: format!("{expected:?}"),
            actual: format!("{actual:?}"),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
