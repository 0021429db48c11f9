use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid boundary: {0}")]
    InvalidBoundary(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("point lies outside the tubular neighborhood (mu = {mu:.6e}, R_min = {r_min:.6e})")]
    PointOutsideTube { mu: f64, r_min: f64 },

    #[error("point lies outside the domain (signed normal distance {mu:.6e})")]
    OutsideDomain { mu: f64 },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("characteristic does not reach eta' = {eta_prime} (turning point at {eta_plus})")]
    EnergyOutOfRange { eta_prime: f64, eta_plus: f64 },

    #[error("boundary datum is constant; no decomposition needed")]
    DegenerateDatum,

    #[error("grazing sign condition violated: f1 - mean f1 = {d1:.3e}, f2 - mean f2 = {d2:.3e}")]
    SignViolation { d1: f64, d2: f64 },

    #[error("collocation matrix is ill-conditioned (condition number {condition:.3e})")]
    IllConditioned { condition: f64 },

    #[error("Poisson right-hand side does not vanish (L2 norm {norm:.3e})")]
    NonzeroRhs { norm: f64 },

    #[error("ray starts on the boundary in a grazing direction")]
    DegenerateRay,

    #[error("run at epsilon = {epsilon} failed its self-convergence check (ratio {ratio:.3})")]
    UnresolvedRun { epsilon: f64, ratio: f64 },
}
