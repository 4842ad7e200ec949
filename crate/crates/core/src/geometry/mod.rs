//! Ambient lp spaces, convex bodies, metric projections and the
//! distance / proximal-set machinery.

mod body;
mod distance;
mod instance;
mod polyhedral;
mod project;
mod sample;
mod space;

use thiserror::Error;

pub use body::{BodyKind, ConvexBody, LinearConstraint};
pub use distance::{distance_between, DistanceResult};
pub use instance::{ProximityInstance, Side, DEFAULT_MAX_ITER, DEFAULT_TOL};
pub use project::ProjectionSettings;
pub use sample::{sample_body, sample_proximal, seeded_rng, SAMPLE_RADIUS};
pub use space::{point, LpSpace, Point};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("exponent p must lie strictly between 1 and infinity, got {0}")]
    InvalidExponent(f64),
    #[error("dimension must be positive")]
    ZeroDimension,
    #[error("dimension mismatch: expected {expected} coordinates, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("bodies live in different spaces")]
    SpaceMismatch,
    #[error("invalid `{field}`: {reason}")]
    InvalidBody { field: String, reason: String },
    #[error("tolerance must be positive and finite, got {0}")]
    InvalidTolerance(f64),
    #[error("projection onto {variant} is not supported for p = {p}")]
    Unsupported { variant: &'static str, p: f64 },
    #[error("iteration did not converge after {iterations} iterations (last change {achieved:.3e})")]
    NotConverged { iterations: usize, achieved: f64 },
    #[error("point is not in {side} (distance {distance:.3e})")]
    NotOnSide { side: Side, distance: f64 },
}
