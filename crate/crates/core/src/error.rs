use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FppError {
    /// An input violates an operation's domain (wrong root, vertex outside a
    /// half-plane, non-adjacent endpoints, ...).
    #[error("domain error: {0}")]
    Domain(String),
    /// A coordinate or vertex falls outside the supported range or window.
    #[error("bounds error: {0}")]
    Bounds(String),
    /// Input is structurally valid but too degenerate for the estimator.
    #[error("degenerate input: {0}")]
    Degenerate(String),
    /// The Voronoi site set is empty in the window; retry with a larger
    /// window or a smaller level.
    #[error("level {level} has {sites} sites in the window; retry with a larger window or smaller level")]
    RetryNeeded { level: u32, sites: usize },
    #[error("cost guard: {0}")]
    CostGuard(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("malformed data: {0}")]
    Format(String),
    /// A Monte Carlo trial failed or panicked; the seed replays it.
    #[error("trial {index} (seed {seed}) failed: {message}")]
    Trial { index: u64, seed: u64, message: String },
    /// A broken internal invariant; indicates a bug.
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T, E = FppError> = std::result::Result<T, E>;
