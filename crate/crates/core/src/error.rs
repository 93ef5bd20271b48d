use thiserror::Error;

/// Errors raised by the solvers and experiment pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A geometry, grid or experiment parameter violates a precondition.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// An input field or coefficient violates a structural requirement.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("linear solver did not converge after {iterations} iterations (relative residual {residual:.3e}); history tail: {history:?}")]
    LinearSolve {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("Newton iteration failed: {0}")]
    Newton(String),

    #[error("parametrix evaluated at its singularity (|x - y| = {0:.3e})")]
    Singularity(f64),

    #[error("eigenvalue iteration stagnated: {0}")]
    Stagnation(String),

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("size guard: {0}")]
    SizeGuard(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config parse error: {0}")]
    ConfigParse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
