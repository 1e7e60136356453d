use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected} values, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("density must be positive, got m = {0}")]
    NonPositiveDensity(f64),

    #[error("Hessian in p is singular at p = 0 for r = {r} < 2")]
    SingularHessian { r: f64 },

    #[error("coupling `{name}` is not nondecreasing in m: value {upper} at m = {m_hi} is below {lower} at m = {m_lo}")]
    MonotonicityViolation {
        name: String,
        m_lo: f64,
        m_hi: f64,
        lower: f64,
        upper: f64,
    },

    #[error("singular pivot in banded LU at row {0}")]
    SingularMatrix(usize),

    #[error("linear solver did not converge: relative residual {residual:.3e} after {iterations} iterations")]
    LinearSolver { iterations: usize, residual: f64 },

    #[error("{solver} step failed at time index {time_index}: {reason} (residual {residual:.3e}, iterate sup {iterate_norm:.3e})")]
    StepFailure {
        solver: &'static str,
        time_index: usize,
        reason: String,
        residual: f64,
        iterate_norm: f64,
    },

    #[error("outer iteration {iteration}: {source}")]
    OuterIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("Newton stagnated after {iterations} iterations; residual history {history:?}")]
    NewtonStagnation { iterations: usize, history: Vec<f64> },

    #[error("direction is not tangent to the constraint set: residual {0:.3e}")]
    InfeasibleDirection(f64),
}
