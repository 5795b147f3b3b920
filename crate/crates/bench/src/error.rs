use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("{0}")]
    Usage(String),
    /// `--help` or `--version` output; not a failure.
    #[error("{0}")]
    Help(String),
    #[error("{kernel} verification failed: max relative error {max_error:e} exceeds {tolerance:e}")]
    Verification {
        kernel: &'static str,
        max_error: f64,
        tolerance: f64,
    },
    #[error("{}: {1}", .0.display())]
    Io(PathBuf, #[source] std::io::Error),
    #[error(transparent)]
    Mesh(#[from] tilemesh::Error),
}

impl BenchError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Help(_) => 0,
            BenchError::Usage(_) | BenchError::Mesh(_) => 1,
            BenchError::Verification { .. } => 2,
            BenchError::Io(..) => 3,
        }
    }
}
