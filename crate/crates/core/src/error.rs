use thiserror::Error;

/// Errors raised by the physics and numerics layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An evaluation point or integration volume touches a point mass.
    #[error("singular potential: point {point:?} coincides with point-mass body {body}")]
    Singularity { body: usize, point: [f64; 3] },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Quadrature or Monte Carlo failed to reach the requested accuracy.
    #[error("no convergence: relative error estimate {estimate:e} exceeds {limit:e} after {evaluations} evaluations")]
    NonConvergence {
        estimate: f64,
        limit: f64,
        evaluations: usize,
    },

    /// Formula used outside the parameter regime where it holds.
    #[error("regime error: {0}")]
    Regime(String),

    #[error("order {requested} exceeds the supported maximum {max}")]
    Overflow { requested: usize, max: usize },

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
