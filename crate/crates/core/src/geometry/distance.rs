use super::body::ConvexBody;
use super::space::Point;
use super::GeometryError;

/// Outcome of alternating projections between two bodies.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceResult {
    pub dist: f64,
    pub a: Point,
    pub b: Point,
    pub converged: bool,
    pub iterations: usize,
}

/// Distance between two convex bodies by alternating projections
/// `a <- P_A(b)`, `b <- P_B(a)`, started from the witness of `b`.
///
/// Stops once successive `a` iterates move less than `tol`. On hitting
/// `max_iter` the last pair is returned with `converged = false`.
pub fn distance_between(
    a_body: &ConvexBody,
    b_body: &ConvexBody,
    tol: f64,
    max_iter: usize,
) -> Result<DistanceResult, GeometryError> {
    if a_body.space() != b_body.space() {
        return Err(GeometryError::SpaceMismatch);
    }
    let space = *a_body.space();
    let mut b = b_body.witness();
    let mut a = a_body.project(&b)?;
    b = b_body.project(&a)?;
    for k in 1..=max_iter {
        let a_next = a_body.project(&b)?;
        let b_next = b_body.project(&a_next)?;
        let moved = space.dist_unchecked(&a, &a_next);
        a = a_next;
        b = b_next;
        if moved < tol {
            return Ok(DistanceResult {
                dist: space.dist_unchecked(&a, &b),
                a,
                b,
                converged: true,
                iterations: k,
            });
        }
    }
    Ok(DistanceResult {
        dist: space.dist_unchecked(&a, &b),
        a,
        b,
        converged: false,
        iterations: max_iter,
    })
}
