use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("field is incompatible with grid: {0}")]
    GridMismatch(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("cutoff property violated at r = {radius}: {what} (margin {margin:e})")]
    CutoffViolation { what: String, radius: f64, margin: f64 },
    #[error("ground state iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("resolution exhausted at t = {t}: {reason}")]
    ResolutionExhausted { t: f64, reason: String },
    #[error("time step underflow at t = {t} (dt = {dt:e})")]
    StepUnderflow { t: f64, dt: f64 },
    #[error("criterion not applicable: {0}")]
    NotApplicable(String),
    #[error("missing input: {0}")]
    MissingInput(String),
    #[error("fit failed: {0}")]
    Fit(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
