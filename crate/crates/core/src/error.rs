use thiserror::Error;

/// Failures reported by the numerical kernels and solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NonSquare { rows: usize, cols: usize },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        found: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix contains non-finite entries ({0})")]
    NonFinite(&'static str),

    #[error("1-norm of the matrix exponential is {norm:e} > {guard:e}, decrease the step size")]
    NormGuardExceeded { norm: f64, guard: f64 },

    #[error("matrix is numerically singular (estimated condition {condition:e})")]
    SingularMatrix { condition: f64 },

    #[error("{what} did not converge within {iterations} iterations")]
    ConvergenceFailure {
        what: &'static str,
        iterations: usize,
    },

    #[error("Lyapunov operator is singular: eigenvalues of F and -F overlap (min |l_i + l_j| = {min_gap:e})")]
    SpectrumOverlap { min_gap: f64 },

    #[error("order {n} exceeds the dense solver limit {max}")]
    SizeExceeded { n: usize, max: usize },

    #[error("could not construct a stabilizing initial feedback for the Newton iteration")]
    NoStabilizingStart,

    #[error("Newton iteration stopped after {iterations} iterations with relative residual {residual:e}")]
    MaxItersExceeded { iterations: usize, residual: f64 },

    #[error("U is numerically singular at step {step} (condition {condition:e})")]
    SingularU { step: usize, condition: f64 },

    #[error("iterates overflowed at step {step}")]
    NormOverflow { step: usize },

    #[error("solution formula bracket is singular (condition {condition:e})")]
    SingularBracket { condition: f64 },

    #[error("integration produced non-finite values at step {step}")]
    BlowUp { step: usize },

    #[error("nonlinear splitting flow is singular")]
    SingularNonlinearFlow,

    #[error("reference matrix is zero, relative error undefined")]
    ZeroReference,
}

pub type Result<T> = std::result::Result<T, Error>;
