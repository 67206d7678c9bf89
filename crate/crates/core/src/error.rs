use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid of {grid} points cannot hold truncation N = {truncation} (need at least {required})")]
    Sizing {
        grid: usize,
        truncation: usize,
        required: usize,
    },

    #[error("enumeration of radius {radius} needs {required} quadruple evaluations, budget is {budget}")]
    Budget {
        radius: i64,
        required: u128,
        budget: u128,
    },

    #[error("enumeration radius {radius} does not cover mode support up to |j| = {support}")]
    Coverage { radius: i64, support: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate orbit: gamma = {gamma} is within {gap:e} of 1/2")]
    DegenerateOrbit { gamma: f64, gap: f64 },

    #[error("diagnostic unavailable: {0}")]
    DiagnosticUnavailable(String),

    #[error("numerical blow-up at step {step}")]
    BlowUp { step: u64 },

    #[error("potential recorded at stride {stride}; full step resolution is required")]
    Resolution { stride: u64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
