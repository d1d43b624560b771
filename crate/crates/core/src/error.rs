use thiserror::Error;

use crate::spacetime::GeodesicTrajectory;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point {point:?} lies outside the domain of chart `{chart}`")]
    OutOfDomain { chart: String, point: Vec<f64> },

    #[error("metric is degenerate at {point:?}")]
    DegenerateMetric { point: Vec<f64> },

    #[error("warping function is not positive at {point:?} (beta = {value})")]
    NonPositiveBeta { point: Vec<f64>, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("step size underflow ({step:e}) at s = {s}")]
    Stiffness {
        s: f64,
        step: f64,
        partial: Option<Box<GeodesicTrajectory>>,
    },

    #[error("trajectory has lambda = 0; it is a slice geodesic and has no classical reduction")]
    NotReducible,

    #[error("E - V = {margin:e} below floor at s = {s}; Jacobi metric check not applicable")]
    NearTurningPoint { s: f64, margin: f64 },

    #[error("endpoints cannot be joined inside the domain (no admissible seed curve)")]
    Unreachable,

    #[error("no seed curve stays inside the domain")]
    SeedFailure,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unknown catalog entry `{0}`")]
    UnknownSpacetime(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for failures caused by the numerics rather than by bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Stiffness { .. }
                | Error::SeedFailure
                | Error::DegenerateMetric { .. }
                | Error::NearTurningPoint { .. }
                | Error::NotReducible
        )
    }
}
