use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("initial-data construction failed at r = {radius}: {message}")]
    ConstructionFailed { radius: f64, message: String },
    #[error("profile ingestion failed: {0}")]
    Ingestion(String),
    #[error("time step rejected: Newton did not converge (dt = {dt}, residual = {residual})")]
    StepRejected { dt: f64, residual: f64 },
    #[error("blow-up detected at t_u = {t_u} (min u = {min_u})")]
    BlowUp { t_u: f64, min_u: f64 },
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
