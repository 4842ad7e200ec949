//! lp projection onto a polyhedron by cyclic coordinate ascent on the dual.
//!
//! For `min (1/p) |y - x|_p^p` subject to `G y <= h`, the Lagrangian
//! minimizer for multipliers `lambda` is separable:
//! `y_i = x_i - psi(z_i)` with `z = G^T lambda` and
//! `psi(t) = sign(t) |t|^(q-1)`. Each dual coordinate is maximized exactly
//! by a scalar root find on the (monotone) constraint residual. At `p = 2`
//! this is Hildreth's method. Periodically, Newton's method on the
//! multipliers that are currently positive tries to finish the job; its
//! result is kept only when it is a KKT point.

use nalgebra::DMatrix;

use super::body::LinearConstraint;
use super::project::ProjectionSettings;
use super::space::{LpSpace, Point};
use super::GeometryError;

pub(crate) fn project_polyhedral(
    space: &LpSpace,
    x: &Point,
    constraints: &[LinearConstraint],
    settings: &ProjectionSettings,
) -> Result<Point, GeometryError> {
    let scale = 1.0 + x.amax();
    let tol = settings.tol * scale;
    let ftol = 1e-3 * tol;
    if constraints.iter().all(|c| c.violation(x) <= 0.0) {
        return Ok(x.clone());
    }
    let expo = space.conjugate() - 1.0;
    let psi = |t: f64| t.signum() * t.abs().powf(expo);
    let primal = |z: &Point| Point::from_fn(x.len(), |i, _| x[i] - psi(z[i]));

    let mut lambda = vec![0.0; constraints.len()];
    let mut z = Point::zeros(x.len());
    let mut y = x.clone();
    let mut last_change = f64::INFINITY;
    for sweep in 0..settings.max_iter {
        for (j, c) in constraints.iter().enumerate() {
            // residual of constraint j as a function of its multiplier; decreasing
            let residual = |mu: f64| {
                let shift = mu - lambda[j];
                let mut s = -c.offset;
                for i in 0..x.len() {
                    s += c.normal[i] * (x[i] - psi(z[i] + shift * c.normal[i]));
                }
                s
            };
            let mu = if c.equality {
                solve_decreasing(&residual, lambda[j], f64::NEG_INFINITY, ftol)
            } else if residual(0.0) <= 0.0 {
                0.0
            } else {
                solve_decreasing(&residual, lambda[j].max(0.0), 0.0, ftol)
            };
            z += &c.normal * (mu - lambda[j]);
            lambda[j] = mu;
        }
        let next = primal(&z);
        last_change = (&next - &y).amax();
        y = next;
        let violation = constraints.iter().map(|c| c.violation(&y)).fold(0.0_f64, f64::max);
        if last_change <= tol && violation <= tol {
            return Ok(y);
        }
        if sweep % 8 == 4 {
            if let Some(polished) = polish(x, constraints, &lambda, expo, tol, ftol) {
                return Ok(polished);
            }
        }
    }
    Err(GeometryError::NotConverged {
        iterations: settings.max_iter,
        achieved: last_change,
    })
}

const NEWTON_STEPS: usize = 50;

/// Newton iteration on the multipliers of the constraints that are active
/// under `lambda`. Returns the primal point if it satisfies the KKT
/// conditions of the full problem.
fn polish(
    x: &Point,
    constraints: &[LinearConstraint],
    lambda: &[f64],
    expo: f64,
    tol: f64,
    ftol: f64,
) -> Option<Point> {
    let active: Vec<usize> = (0..constraints.len())
        .filter(|&j| constraints[j].equality || lambda[j] > 0.0)
        .collect();
    if active.is_empty() {
        return None;
    }
    let n = x.len();
    let psi = |t: f64| t.signum() * t.abs().powf(expo);
    let evaluate = |lam: &[f64]| {
        let mut z = Point::zeros(n);
        for (k, &j) in active.iter().enumerate() {
            z += &constraints[j].normal * lam[k];
        }
        let y = Point::from_fn(n, |i, _| x[i] - psi(z[i]));
        let g: Vec<f64> = active
            .iter()
            .map(|&j| constraints[j].normal.dot(&y) - constraints[j].offset)
            .collect();
        let worst = g.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        (z, y, g, worst)
    };
    let mut lam: Vec<f64> = active.iter().map(|&j| lambda[j]).collect();
    let (mut z, mut y, mut g, mut worst) = evaluate(&lam);
    for _ in 0..NEWTON_STEPS {
        if worst <= ftol {
            break;
        }
        let dpsi: Vec<f64> = z.iter().map(|&t| expo * t.abs().powf(expo - 1.0)).collect();
        let m = active.len();
        let h = DMatrix::from_fn(m, m, |a, b| {
            let (u, v) = (&constraints[active[a]].normal, &constraints[active[b]].normal);
            (0..n)
                .filter(|&i| u[i] * v[i] != 0.0)
                .map(|i| u[i] * v[i] * dpsi[i])
                .sum::<f64>()
        });
        if h.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let rhs = DMatrix::from_column_slice(m, 1, &g);
        let delta = h.svd(true, true).solve(&rhs, 1e-14).ok()?;
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..30 {
            let trial: Vec<f64> = (0..m).map(|k| lam[k] + t * delta[k]).collect();
            let feasible = active
                .iter()
                .zip(&trial)
                .all(|(&j, &l)| constraints[j].equality || l >= 0.0);
            if feasible {
                let next = evaluate(&trial);
                if next.3 < worst {
                    lam = trial;
                    (z, y, g, worst) = next;
                    improved = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    let kkt = worst <= tol && constraints.iter().all(|c| c.violation(&y) <= tol);
    kkt.then_some(y)
}

/// Root of a nonincreasing scalar function, bracketed outward from `start`
/// and never below `floor`. Illinois regula falsi with bisection fallback;
/// stops once `|f| <= ftol` or the bracket is at machine resolution.
fn solve_decreasing(f: &dyn Fn(f64) -> f64, start: f64, floor: f64, ftol: f64) -> f64 {
    let f0 = f(start);
    if f0.abs() <= ftol {
        return start;
    }
    let mut step = start.abs().max(1e-3);
    let (mut lo, mut hi, mut flo, mut fhi);
    if f0 > 0.0 {
        lo = start;
        flo = f0;
        loop {
            hi = lo + step;
            fhi = f(hi);
            if fhi <= 0.0 {
                break;
            }
            lo = hi;
            flo = fhi;
            step *= 2.0;
        }
    } else {
        hi = start;
        fhi = f0;
        loop {
            lo = (hi - step).max(floor);
            flo = f(lo);
            if flo >= 0.0 || lo == floor {
                break;
            }
            hi = lo;
            fhi = flo;
            step *= 2.0;
        }
        if flo <= 0.0 {
            return lo;
        }
    }
    if fhi == 0.0 {
        return hi;
    }
    let mut side = 0i8;
    for k in 0..200 {
        let mid = if k % 4 == 3 {
            0.5 * (lo + hi)
        } else {
            let t = hi - fhi * (hi - lo) / (fhi - flo);
            if t > lo && t < hi {
                t
            } else {
                0.5 * (lo + hi)
            }
        };
        let fm = f(mid);
        if fm.abs() <= ftol {
            return mid;
        }
        if fm > 0.0 {
            lo = mid;
            flo = fm;
            if side == 1 {
                fhi *= 0.5;
            }
            side = 1;
        } else {
            hi = mid;
            fhi = fm;
            if side == -1 {
                flo *= 0.5;
            }
            side = -1;
        }
        if hi - lo <= 4.0 * f64::EPSILON * lo.abs().max(hi.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::project::project_linear;
    use crate::geometry::{point, ConvexBody};

    fn settings() -> ProjectionSettings {
        ProjectionSettings::default()
    }

    #[test]
    fn prism_at_p3_with_a_nearly_tight_facet() {
        let s = LpSpace::new(5, 3.0).unwrap();
        let axis = |i: usize, v: f64| {
            let mut n = Point::zeros(5);
            n[i] = v;
            n
        };
        let cons = vec![
            LinearConstraint::le(axis(0, -1.0), -0.09686193313555956),
            LinearConstraint::le(axis(1, -1.0), -0.5785016133600269),
            LinearConstraint::le(axis(2, -1.0), -0.7146821246625055),
            LinearConstraint::le(axis(3, -1.0), 0.5558272003280953),
            LinearConstraint::le(point(&[0.5, 0.5, 0.5, 0.5, 0.0]), 1.1739505133772759),
            LinearConstraint::le(axis(4, -1.0), -0.863324564942999),
            LinearConstraint::le(axis(4, 1.0), 1.3881448237821767),
        ];
        let x = point(&[
            1.6588760343710791,
            0.5356102269360908,
            0.714678296659596,
            -0.5535893345486166,
            1.381925362307018,
        ]);
        let y = project_polyhedral(&s, &x, &cons, &settings()).unwrap();
        assert!(cons.iter().all(|c| c.violation(&y) < 1e-12), "{y}");
    }

    #[test]
    fn single_halfspace_matches_closed_form() {
        for p in [1.3, 1.5, 2.0, 3.0, 5.0] {
            let s = LpSpace::new(3, p).unwrap();
            let c = LinearConstraint::le(point(&[0.3, -1.2, 0.7]), 0.4);
            let x = point(&[2.0, -1.0, 3.0]);
            let dual = project_polyhedral(&s, &x, std::slice::from_ref(&c), &settings()).unwrap();
            let closed = project_linear(&s, &c, &x);
            assert!((&dual - &closed).amax() < 1e-10, "p={p}: {dual} vs {closed}");
        }
    }

    #[test]
    fn box_constraints_reduce_to_clamp() {
        for p in [1.5, 3.0] {
            let s = LpSpace::new(3, p).unwrap();
            let b = ConvexBody::cuboid(s, point(&[0.0, -1.0, 2.0]), point(&[1.0, 1.0, 4.0])).unwrap();
            let cons = b.linear_constraints().unwrap();
            let x = point(&[3.0, -2.5, 3.0]);
            let y = project_polyhedral(&s, &x, &cons, &settings()).unwrap();
            assert!((&y - point(&[1.0, -1.0, 3.0])).amax() < 1e-10, "{y}");
        }
    }

    #[test]
    fn euclidean_case_agrees_with_dykstra() {
        let s = LpSpace::euclidean(2).unwrap();
        let poly = ConvexBody::polytope(
            s,
            vec![
                point(&[0.0, 0.0]),
                point(&[3.0, 0.5]),
                point(&[2.0, 2.0]),
                point(&[-0.5, 1.5]),
            ],
        )
        .unwrap();
        let cons = poly.linear_constraints().unwrap();
        for x in [
            point(&[4.0, 4.0]),
            point(&[-2.0, -1.0]),
            point(&[1.0, 5.0]),
            point(&[5.0, 0.0]),
        ] {
            let a = poly.project(&x).unwrap();
            let b = project_polyhedral(&s, &x, &cons, &settings()).unwrap();
            assert!((&a - &b).amax() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn lp_polygon_projection_beats_grid() {
        // brute-force oracle: dense grid of convex combinations
        let verts = [point(&[0.0, 0.0]), point(&[2.0, 0.0]), point(&[0.5, 1.5])];
        for p in [1.5, 3.0] {
            let s = LpSpace::new(2, p).unwrap();
            let poly = ConvexBody::polytope(s, verts.to_vec()).unwrap();
            let x = point(&[2.5, 2.0]);
            let y = poly.project(&x).unwrap();
            let dy = s.distance(&x, &y).unwrap();
            let n = 400;
            let mut best = f64::INFINITY;
            for i in 0..=n {
                for j in 0..=(n - i) {
                    let (a, b) = (i as f64 / n as f64, j as f64 / n as f64);
                    let z = &verts[0] * (1.0 - a - b) + &verts[1] * a + &verts[2] * b;
                    best = best.min(s.distance(&x, &z).unwrap());
                }
            }
            assert!(dy <= best + 1e-12, "p={p}: {dy} > {best}");
            assert!(best - dy < 1e-4);
        }
    }

    #[test]
    fn equality_constraints_are_honoured() {
        let s = LpSpace::new(2, 1.5).unwrap();
        let seg = ConvexBody::polytope(s, vec![point(&[1.0, 1.0]), point(&[2.0, 1.0])]).unwrap();
        let y = seg.project(&point(&[1.4, -3.0])).unwrap();
        assert!((&y - point(&[1.4, 1.0])).amax() < 1e-10, "{y}");
    }
}
