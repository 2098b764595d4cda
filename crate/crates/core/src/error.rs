use thiserror::Error;

/// Errors surfaced by the simulator, learner, planners and harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// The drift matrix has an eigenvalue with nonnegative real part, so no
    /// quadratic Lyapunov certificate exists.
    #[error("stability certificate unavailable: spectral abscissa {spectral_abscissa:.3e} >= 0")]
    NotHurwitz { spectral_abscissa: f64 },

    #[error("model evaluation fault: {0}")]
    ModelFault(String),

    #[error("{solver} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("grid too small: quadrature point {point:.3e} outside 3R = {limit:.3e}")]
    GridTooSmall { point: f64, limit: f64 },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("toml: {0}")]
    Toml(String),

    #[error("plot: {0}")]
    Plot(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidConfig(msg.into()))
}
