//! Metric projections onto convex bodies.
//!
//! Closed forms cover balls (radial, valid for every norm), boxes (separable
//! clamp) and single halfspaces or hyperplanes (Hölder dual direction).
//! Polytopes and intersections go through Dykstra's algorithm at `p = 2` and
//! through dual coordinate ascent on the halfspace form otherwise.

use super::body::{BodyKind, ConvexBody, LinearConstraint};
use super::polyhedral::project_polyhedral;
use super::space::{LpSpace, Point};
use super::GeometryError;

/// Stopping rule for the iterative projections.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionSettings {
    /// Per-cycle displacement threshold, relative to `1 + |x|_inf`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ProjectionSettings {
    fn default() -> Self {
        Self {
            tol: 1e-13,
            max_iter: 100_000,
        }
    }
}

impl ConvexBody {
    /// Nearest point of the body to `x`.
    pub fn project(&self, x: &Point) -> Result<Point, GeometryError> {
        self.project_with(x, &ProjectionSettings::default())
    }

    pub fn project_with(&self, x: &Point, settings: &ProjectionSettings) -> Result<Point, GeometryError> {
        let space = *self.space();
        space.check(x)?;
        match self.kind() {
            BodyKind::Ball { center, radius } => Ok(project_ball(&space, center, *radius, x)),
            BodyKind::Box { lo, hi } => Ok(x.sup(lo).inf(hi)),
            BodyKind::Halfspace { normal, offset } => Ok(project_linear(
                &space,
                &LinearConstraint::le(normal.clone(), *offset),
                x,
            )),
            BodyKind::Hyperplane { normal, offset } => Ok(project_linear(
                &space,
                &LinearConstraint::eq(normal.clone(), *offset),
                x,
            )),
            BodyKind::Polytope { constraints, .. } => {
                if space.is_euclidean() {
                    dykstra(x, constraints.len(), settings, |i, y| {
                        Ok(project_linear(&space, &constraints[i], y))
                    })
                } else {
                    project_polyhedral(&space, x, constraints, settings)
                }
            }
            BodyKind::Intersection { bodies, .. } => {
                if space.is_euclidean() {
                    dykstra(x, bodies.len(), settings, |i, y| bodies[i].project_with(y, settings))
                } else if let Some(constraints) = self.linear_constraints() {
                    project_polyhedral(&space, x, &constraints, settings)
                } else {
                    Err(GeometryError::Unsupported {
                        variant: "intersection with non-polyhedral members",
                        p: space.p(),
                    })
                }
            }
        }
    }

    /// `|x - project(x)| <= tol`.
    pub fn contains(&self, x: &Point, tol: f64) -> Result<bool, GeometryError> {
        Ok(self.distance_to(x)? <= tol)
    }

    /// Distance from `x` to the body.
    pub fn distance_to(&self, x: &Point) -> Result<f64, GeometryError> {
        let y = self.project(x)?;
        Ok(self.space().dist_unchecked(x, &y))
    }
}

fn project_ball(space: &LpSpace, center: &Point, radius: f64, x: &Point) -> Point {
    let d = x - center;
    let n = space.norm_unchecked(&d);
    if n <= radius {
        x.clone()
    } else {
        center + d * (radius / n)
    }
}

/// Projection onto `<n, y> <= c` (or `= c`) in lp.
///
/// The minimizer of `|y - x|_p` on the hyperplane moves along
/// `w_i = sign(n_i) |n_i|^(q-1) / |n|_q^q`, which satisfies `<n, w> = 1`.
pub(crate) fn project_linear(space: &LpSpace, c: &LinearConstraint, x: &Point) -> Point {
    let s = c.normal.dot(x) - c.offset;
    if s == 0.0 || (!c.equality && s < 0.0) {
        return x.clone();
    }
    if space.is_euclidean() {
        return x - &c.normal * (s / c.normal.norm_squared());
    }
    let q = space.conjugate();
    let nq: f64 = c.normal.iter().map(|v| v.abs().powf(q)).sum();
    let w = c.normal.map(|v| v.signum() * v.abs().powf(q - 1.0) / nq);
    x - w * s
}

/// Dykstra's alternating projection scheme for an intersection of `count`
/// closed convex sets in Euclidean space.
pub(crate) fn dykstra<F>(
    x: &Point,
    count: usize,
    settings: &ProjectionSettings,
    mut project: F,
) -> Result<Point, GeometryError>
where
    F: FnMut(usize, &Point) -> Result<Point, GeometryError>,
{
    let scale = 1.0 + x.amax();
    let tol = settings.tol * scale;
    let mut current = x.clone();
    let mut increments = vec![Point::zeros(x.len()); count];
    let mut last_change = f64::INFINITY;
    for _ in 0..settings.max_iter {
        let start = current.clone();
        let mut increment_change = 0.0;
        for (i, inc) in increments.iter_mut().enumerate() {
            let shifted = &current + &*inc;
            let next = project(i, &shifted)?;
            let new_inc = shifted - &next;
            increment_change += (&new_inc - &*inc).norm_squared();
            *inc = new_inc;
            current = next;
        }
        last_change = (&current - start).norm().max(increment_change.sqrt());
        if last_change <= tol {
            return Ok(current);
        }
    }
    Err(GeometryError::NotConverged {
        iterations: settings.max_iter,
        achieved: last_change,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::point;

    fn close(a: &Point, b: &Point, tol: f64) -> bool {
        (a - b).amax() <= tol
    }

    #[test]
    fn ball_radial_projection() {
        let s = LpSpace::euclidean(2).unwrap();
        let ball = ConvexBody::ball(s, point(&[2.0, 0.0]), 1.0).unwrap();
        assert_eq!(ball.project(&point(&[0.0, 0.0])).unwrap(), point(&[1.0, 0.0]));
        assert_eq!(ball.project(&point(&[2.5, 0.0])).unwrap(), point(&[2.5, 0.0]));
    }

    #[test]
    fn box_clamp_for_every_p() {
        for p in [1.5, 2.0, 3.0, 6.0] {
            let s = LpSpace::new(2, p).unwrap();
            let b = ConvexBody::cuboid(s, point(&[0.0, 0.0]), point(&[1.0, 1.0])).unwrap();
            assert_eq!(b.project(&point(&[2.0, -1.0])).unwrap(), point(&[1.0, 0.0]));
        }
    }

    #[test]
    fn triangle_projection_matches_active_halfspace() {
        let s = LpSpace::euclidean(2).unwrap();
        let tri = ConvexBody::polytope(s, vec![point(&[0.0, 0.0]), point(&[2.0, 0.0]), point(&[0.0, 2.0])]).unwrap();
        // single active halfspace x1 + x2 <= 2: (2,2) - ((2+2-2)/2)(1,1) = (1,1)
        let y = tri.project(&point(&[2.0, 2.0])).unwrap();
        assert!(close(&y, &point(&[1.0, 1.0]), 1e-10), "{y}");
    }

    #[test]
    fn triangle_vertex_region() {
        let s = LpSpace::euclidean(2).unwrap();
        let tri = ConvexBody::polytope(s, vec![point(&[0.0, 0.0]), point(&[2.0, 0.0]), point(&[0.0, 2.0])]).unwrap();
        let y = tri.project(&point(&[-1.0, -3.0])).unwrap();
        assert!(close(&y, &point(&[0.0, 0.0]), 1e-10), "{y}");
    }

    #[test]
    fn halfspace_projection_lp_is_holder_direction() {
        // Oracle: minimize |x - y|_p over the line y1 + 2 y2 = 1 by golden section on y1.
        let p = 3.0;
        let s = LpSpace::new(2, p).unwrap();
        let h = ConvexBody::halfspace(s, point(&[1.0, 2.0]), 1.0).unwrap();
        let x = point(&[2.0, 3.0]);
        let y = h.project(&x).unwrap();
        let f = |t: f64| {
            let z = point(&[t, (1.0 - t) / 2.0]);
            s.distance(&x, &z).unwrap()
        };
        let (mut lo, mut hi) = (-10.0_f64, 10.0_f64);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let m1 = hi - g * (hi - lo);
            let m2 = lo + g * (hi - lo);
            if f(m1) < f(m2) {
                hi = m2
            } else {
                lo = m1
            }
        }
        let t = 0.5 * (lo + hi);
        assert!(close(&y, &point(&[t, (1.0 - t) / 2.0]), 1e-7), "{y} vs {t}");
    }

    #[test]
    fn segment_projection() {
        let s = LpSpace::euclidean(2).unwrap();
        let seg = ConvexBody::polytope(s, vec![point(&[1.0, 1.0]), point(&[2.0, 1.0])]).unwrap();
        let y = seg.project(&point(&[1.5, 0.0])).unwrap();
        assert!(close(&y, &point(&[1.5, 1.0]), 1e-12));
        let y = seg.project(&point(&[5.0, 3.0])).unwrap();
        assert!(close(&y, &point(&[2.0, 1.0]), 1e-12));
    }

    #[test]
    fn intersection_of_balls_dykstra() {
        let s = LpSpace::euclidean(2).unwrap();
        let a = ConvexBody::ball(s, point(&[0.0, 0.0]), 1.0).unwrap();
        let b = ConvexBody::ball(s, point(&[1.0, 0.0]), 1.0).unwrap();
        let lens = ConvexBody::intersection(s, vec![a, b], point(&[0.5, 0.0])).unwrap();
        // the lens tip nearest to (0.5, 5) is (0.5, sqrt(3)/2)
        let y = lens.project(&point(&[0.5, 5.0])).unwrap();
        assert!(close(&y, &point(&[0.5, 3f64.sqrt() / 2.0]), 1e-9), "{y}");
    }

    #[test]
    fn intersection_of_balls_rejected_off_euclidean() {
        let s = LpSpace::new(2, 3.0).unwrap();
        let a = ConvexBody::ball(s, point(&[0.0, 0.0]), 1.0).unwrap();
        let b = ConvexBody::ball(s, point(&[1.0, 0.0]), 1.0).unwrap();
        let lens = ConvexBody::intersection(s, vec![a, b], point(&[0.5, 0.0])).unwrap();
        assert!(matches!(
            lens.project(&point(&[0.5, 5.0])),
            Err(GeometryError::Unsupported { .. })
        ));
    }

    #[test]
    fn dykstra_reports_cap() {
        let s = LpSpace::euclidean(2).unwrap();
        let a = ConvexBody::ball(s, point(&[0.0, 0.0]), 1.0).unwrap();
        let b = ConvexBody::ball(s, point(&[1.9, 0.0]), 1.0).unwrap();
        let lens = ConvexBody::intersection(s, vec![a, b], point(&[0.95, 0.0])).unwrap();
        let tight = ProjectionSettings {
            tol: 1e-15,
            max_iter: 2,
        };
        let err = lens.project_with(&point(&[0.95, 4.0]), &tight).unwrap_err();
        assert!(matches!(err, GeometryError::NotConverged { iterations: 2, .. }));
    }

    #[test]
    fn contains_examples() {
        let s = LpSpace::euclidean(2).unwrap();
        let ball = ConvexBody::ball(s, point(&[0.0, 0.0]), 1.0).unwrap();
        assert!(ball.contains(&point(&[0.0, 0.0]), 1e-9).unwrap());
        assert!(!ball.contains(&point(&[2.0, 0.0]), 1e-9).unwrap());
        let unit = ConvexBody::cuboid(s, point(&[0.0, 0.0]), point(&[1.0, 1.0])).unwrap();
        assert!(unit.contains(&point(&[1.0 + 1e-12, 0.5]), 1e-9).unwrap());
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let s = LpSpace::euclidean(2).unwrap();
        let ball = ConvexBody::ball(s, point(&[0.0, 0.0]), 1.0).unwrap();
        assert!(matches!(
            ball.project(&point(&[1.0, 2.0, 3.0])),
            Err(GeometryError::DimensionMismatch { expected: 2, got: 3 })
        ));
    }
}
