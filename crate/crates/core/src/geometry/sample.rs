//! Seeded sampling of points inside bodies and proximal sets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::body::{BodyKind, ConvexBody};
use super::instance::{ProximityInstance, Side};
use super::space::Point;
use super::GeometryError;

/// Half-width of the sampling window around the witness of an unbounded body.
pub const SAMPLE_RADIUS: f64 = 4.0;
const REJECTION_TRIES: usize = 64;
const PROXIMAL_ROUNDS: usize = 500;

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn uniform_in_box<R: Rng + ?Sized>(lo: &Point, hi: &Point, rng: &mut R) -> Point {
    Point::from_fn(lo.len(), |i, _| {
        if lo[i] == hi[i] {
            lo[i]
        } else {
            rng.gen_range(lo[i]..=hi[i])
        }
    })
}

/// A random point of `body`.
///
/// Boxes are sampled uniformly and polytopes as random convex combinations
/// of their vertices. Everything else is rejection-sampled from its bounding
/// box (or a window around the witness), falling back to projecting the
/// candidate onto the body.
pub fn sample_body<R: Rng + ?Sized>(body: &ConvexBody, rng: &mut R) -> Result<Point, GeometryError> {
    match body.kind() {
        BodyKind::Box { lo, hi } => Ok(uniform_in_box(lo, hi, rng)),
        BodyKind::Polytope { vertices, .. } => {
            let weights: Vec<f64> = vertices.iter().map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
            let total: f64 = weights.iter().sum();
            let mut x = Point::zeros(body.space().dim());
            for (w, v) in weights.iter().zip(vertices) {
                x += v * (w / total);
            }
            Ok(x)
        }
        _ => {
            let (lo, hi) = body.bounding_box().unwrap_or_else(|| {
                let w = body.witness();
                (w.add_scalar(-SAMPLE_RADIUS), w.add_scalar(SAMPLE_RADIUS))
            });
            let mut candidate = uniform_in_box(&lo, &hi, rng);
            for _ in 0..REJECTION_TRIES {
                if body.contains(&candidate, 0.0)? {
                    return Ok(candidate);
                }
                candidate = uniform_in_box(&lo, &hi, rng);
            }
            body.project(&candidate)
        }
    }
}

/// A random point of the proximal set on `side` (`A0` or `B0`), reached by
/// alternating projections from a random point of the side's body.
/// Returns `None` when the walk does not settle on a proximal point.
pub fn sample_proximal<R: Rng + ?Sized>(
    inst: &ProximityInstance,
    side: Side,
    rng: &mut R,
) -> Result<Option<Point>, GeometryError> {
    let own = inst.body(side);
    let other = inst.body(side.opposite());
    let mut x = sample_body(own, rng)?;
    for _ in 0..PROXIMAL_ROUNDS {
        let next = own.project(&other.project(&x)?)?;
        let moved = (&next - &x).amax();
        x = next;
        if moved <= 1e-14 * (1.0 + x.amax()) {
            break;
        }
    }
    if inst.proximal_excess(&x, side)? <= inst.tol() {
        Ok(Some(x))
    } else {
        Ok(None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{point, LpSpace};

    #[test]
    fn samples_land_in_bodies() {
        let mut rng = seeded_rng(7);
        for p in [1.5, 2.0, 3.0] {
            let s = LpSpace::new(3, p).unwrap();
            let bodies = [
                ConvexBody::ball(s, point(&[1.0, 2.0, 3.0]), 0.5).unwrap(),
                ConvexBody::cuboid(s, point(&[0.0, 0.0, 0.0]), point(&[1.0, 0.0, 2.0])).unwrap(),
                ConvexBody::halfspace(s, point(&[1.0, 1.0, 1.0]), -2.0).unwrap(),
                ConvexBody::hyperplane(s, point(&[0.0, 1.0, 1.0]), 1.0).unwrap(),
            ];
            for body in &bodies {
                for _ in 0..50 {
                    let x = sample_body(body, &mut rng).unwrap();
                    assert!(body.contains(&x, 1e-9).unwrap(), "{} {x}", body.variant_name());
                }
            }
        }
    }

    #[test]
    fn proximal_samples_on_ball_pair_hit_the_singleton() {
        let s = LpSpace::euclidean(2).unwrap();
        let a = ConvexBody::ball(s, point(&[-2.0, 0.0]), 1.0).unwrap();
        let b = ConvexBody::ball(s, point(&[2.0, 0.0]), 1.0).unwrap();
        let inst = ProximityInstance::new(a, b, 1e-9).unwrap();
        let mut rng = seeded_rng(3);
        for _ in 0..20 {
            let x = sample_proximal(&inst, Side::A, &mut rng).unwrap().unwrap();
            assert!((&x - point(&[-1.0, 0.0])).amax() < 1e-6, "{x}");
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let s = LpSpace::new(2, 3.0).unwrap();
        let b = ConvexBody::ball(s, point(&[0.0, 0.0]), 1.0).unwrap();
        let xs: Vec<_> = (0..5)
            .map(|_| ())
            .scan(seeded_rng(11), |r, _| sample_body(&b, r).ok())
            .collect();
        let ys: Vec<_> = (0..5)
            .map(|_| ())
            .scan(seeded_rng(11), |r, _| sample_body(&b, r).ok())
            .collect();
        assert_eq!(xs, ys);
    }
}
