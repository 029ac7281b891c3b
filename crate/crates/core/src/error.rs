use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Domain(String),

    #[error("singular evaluation: {0}")]
    Singular(String),

    #[error("shooting did not converge after {iterations} iterations, last bracket [{lo}, {hi}]")]
    Shooting { iterations: usize, lo: f64, hi: f64 },

    #[error("ring-parameter solve failed: {0}")]
    RingParameters(String),

    #[error("seed too weak: {0}")]
    Seed(String),

    #[error("fixed-point iteration failed after {} iterations (last defect {:e})", history.len(), history.last().copied().unwrap_or(f64::NAN))]
    Divergence { history: Vec<f64> },

    #[error("linear solve stagnated, residual history {history:?}")]
    Stagnation { history: Vec<f64> },

    #[error("insufficient resolution: {0}")]
    Resolution(String),

    #[error("level set topology: {0}")]
    Topology(String),

    #[error("CFL violation: dt*max|v|/h = {courant:.4} exceeds 0.5")]
    Cfl { courant: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by invalid input rather than numerical failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Domain(_) | Error::Precondition(_) | Error::Format(_) | Error::Io(_) | Error::Json(_)
        )
    }
}
