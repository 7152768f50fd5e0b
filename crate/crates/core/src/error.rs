use thiserror::Error;

use crate::estimators::EstimatorResult;

/// Errors raised by the estimation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A scale gauge (trace) was zero or negative.
    #[error("degenerate scale: trace {0} is not positive")]
    DegenerateScale(f64),

    #[error("shape matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    InvalidShape { min_eigenvalue: f64 },

    #[error("sample {index} is the zero vector")]
    DegenerateSample { index: usize },

    #[error("invalid structure: {0}")]
    InvalidSpec(String),

    #[error("operation not supported for structure {0}")]
    UnsupportedSpec(String),

    #[error("matrix is singular or not positive definite")]
    SingularMatrix,

    /// Tyler's estimator is undefined when the sample count does not exceed the dimension.
    #[error("estimator does not exist for n = {n}, p = {p}")]
    NotExist { n: usize, p: usize },

    #[error("no convergence after {iterations} iterations")]
    NoConvergence {
        iterations: usize,
        best: Box<EstimatorResult>,
    },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("conic program is infeasible")]
    Infeasible,

    #[error("conic solver stopped with status {0:?}")]
    SolverFailure(crate::conic::SolveStatus),
}

pub type Result<T> = std::result::Result<T, Error>;
