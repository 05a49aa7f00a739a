use thiserror::Error;

/// Errors raised across the simulator and the analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid wall profile: {0}")]
    InvalidProfile(String),

    #[error("quadrature did not converge on [{a}, {b}] within {evals} evaluations")]
    QuadratureNonConvergence { a: f64, b: f64, evals: usize },

    #[error("state (phase {phase}, v {v}) is outside the collision space")]
    Inadmissible { phase: f64, v: f64 },

    #[error("no wall collision found within elapsed time {horizon}")]
    NoCollision { horizon: f64 },

    #[error("flight-time iteration did not contract for v = {v}")]
    NonContraction { v: f64 },

    #[error("finite-difference stencil straddles the discontinuity at t = 0 (phase {phase}, h {h})")]
    StencilStraddlesJump { phase: f64, h: f64 },

    #[error("evaluation exactly at the discontinuity t = 0 is undefined")]
    AtDiscontinuity,

    #[error("point is outside the return strip: {0}")]
    OutsideStrip(String),

    #[error("step budget of {0} collisions exhausted")]
    BudgetExhausted(u64),

    #[error("regime precondition violated: {0}")]
    Regime(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("itinerary enumeration exceeded the budget of {0} branches")]
    ItineraryExplosion(usize),

    #[error("no elliptic fixed point found: {0}")]
    NoFixedPoint(String),
}

pub type Result<T> = std::result::Result<T, Error>;
