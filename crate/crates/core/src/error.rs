use thiserror::Error;

/// Errors produced anywhere in the reconstruction pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("matrix is not positive definite (smallest eigenvalue estimate {min_eigenvalue:.6e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("conjugate gradient did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("post-selection probability {probability:.3e} is too small to sample from")]
    PostSelection { probability: f64 },

    #[error("problem needs {required} qubits but the simulator budget is {limit}")]
    Budget { required: usize, limit: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the classical linear algebra (solver, PD checks).
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveDefinite { .. } | Error::NoConvergence { .. }
        )
    }

    /// True for quantum budget and post-selection failures.
    pub fn is_quantum_failure(&self) -> bool {
        matches!(self, Error::PostSelection { .. } | Error::Budget { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
