use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("number of sites must be even and at least 2, got {0}")]
    OddSites(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("coupling matrix is not symmetric at ({i}, {j}): {a} vs {b}")]
    AsymmetricCouplings { i: usize, j: usize, a: f64, b: f64 },

    #[error("coupling matrix is not reflection symmetric: J[{i}][{j}] = {a} but J[{ri}][{rj}] = {b}")]
    NotReflectionSymmetric {
        i: usize,
        j: usize,
        ri: usize,
        rj: usize,
        a: f64,
        b: f64,
    },

    #[error("detuning {mu} is within {gap} of normal mode {mode} (frequency {omega})")]
    Resonance {
        mu: f64,
        mode: usize,
        omega: f64,
        gap: f64,
    },

    #[error("equilibrium solver did not converge after {iterations} iterations (gradient norm {residual:e})")]
    EquilibriumNotConverged { iterations: usize, residual: f64 },

    #[error("eigensolver did not converge after {iterations} applications (best residual {residual:e})")]
    EigNotConverged { iterations: usize, residual: f64 },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("trace drift {drift:e} at t = {time} exceeds 1e-6; reduce the step size (current dt = {dt})")]
    TraceDrift { drift: f64, time: f64, dt: f64 },

    #[error("linear program failed: {0}")]
    Lp(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("inconsistent measurement for {name}: |{value}| exceeds operator norm {norm}")]
    InconsistentMeasurement { name: String, value: f64, norm: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
