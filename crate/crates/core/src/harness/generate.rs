//! Seeded random instances whose distance is known by construction.
//!
//! Every family separates `A` and `B` along one coordinate axis by a gap
//! `g` and ships two side-affine contractions toward a realizing pair
//! `(a*, b*)`: a noncyclic one scaling each side about its own realizing
//! point, and a cyclic one sending `a* + u` to `b* + alpha R u` (and back),
//! where `R` reflects the gap axis.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use super::file::{AffineSpec, BodySpec, HalfspaceSpec, InstanceFile, MapEntry, MapKindSpec, RunConfig, SpaceSpec};
use super::HarnessError;
use crate::geometry::{seeded_rng, LpSpace};
use crate::mappings::Mode;
use crate::solvers::SolverKind;

pub const MAX_POLYTOPE_DIM: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    SeparatedBoxes,
    SeparatedBalls,
    ParallelPolytopes,
}

impl Family {
    pub const ALL: [Family; 3] = [
        Family::SeparatedBoxes,
        Family::SeparatedBalls,
        Family::ParallelPolytopes,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::SeparatedBoxes => "separated-boxes",
            Family::SeparatedBalls => "separated-balls",
            Family::ParallelPolytopes => "parallel-polytopes",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Family::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| HarnessError::Generate(format!("unknown family `{s}`")))
    }
}

/// Realizing pair, the cyclic-map bound on `alpha`, and two starting points
/// (one in `A0`, one elsewhere in `A`).
struct Construction {
    a: BodySpec,
    b: BodySpec,
    a_star: Vec<f64>,
    b_star: Vec<f64>,
    alpha_bound: f64,
    start_proximal: Vec<f64>,
    start_far: Vec<f64>,
}

fn unit(dim: usize, k: usize, scale: f64) -> Vec<f64> {
    (0..dim).map(|j| if j == k { scale } else { 0.0 }).collect()
}

fn add(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| a + b).collect()
}

fn boxes<R: Rng>(rng: &mut R, dim: usize, gap: f64) -> Construction {
    let k = rng.gen_range(0..dim);
    let (mut lo_a, mut hi_a, mut lo_b, mut hi_b) = (vec![0.0; dim], vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]);
    let (mut a_star, mut b_star, mut start) = (vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]);
    let mut bound = f64::INFINITY;
    let mut tighten = |room: f64, need: f64| {
        if need > 0.0 {
            bound = bound.min(room / need);
        }
    };
    for j in 0..dim {
        let wa = rng.gen_range(0.5..2.0);
        let wb = rng.gen_range(0.5..2.0);
        lo_a[j] = rng.gen_range(-1.0..1.0);
        hi_a[j] = lo_a[j] + wa;
        if j == k {
            lo_b[j] = hi_a[j] + gap;
            hi_b[j] = lo_b[j] + wb;
            a_star[j] = hi_a[j];
            b_star[j] = lo_b[j];
            start[j] = hi_a[j];
            tighten(wb, wa);
            tighten(wa, wb);
        } else {
            let mid = rng.gen_range(lo_a[j] + 0.25 * wa..hi_a[j] - 0.25 * wa);
            lo_b[j] = mid - wb / 2.0;
            hi_b[j] = mid + wb / 2.0;
            let (l, h) = (lo_a[j].max(lo_b[j]), hi_a[j].min(hi_b[j]));
            let c = 0.5 * (l + h);
            a_star[j] = c;
            b_star[j] = c;
            start[j] = l;
            tighten(c - lo_b[j], c - lo_a[j]);
            tighten(hi_b[j] - c, hi_a[j] - c);
            tighten(c - lo_a[j], c - lo_b[j]);
            tighten(hi_a[j] - c, hi_b[j] - c);
        }
    }
    Construction {
        start_far: lo_a.clone(),
        a: BodySpec::Box { lo: lo_a, hi: hi_a },
        b: BodySpec::Box { lo: lo_b, hi: hi_b },
        a_star,
        b_star,
        alpha_bound: bound,
        start_proximal: start,
    }
}

fn balls<R: Rng>(rng: &mut R, dim: usize, gap: f64) -> Construction {
    let k = rng.gen_range(0..dim);
    let r1 = rng.gen_range(0.5..2.0);
    let r2 = rng.gen_range(0.5..2.0);
    let ca: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let cb = add(&ca, &unit(dim, k, r1 + gap + r2));
    let a_star = add(&ca, &unit(dim, k, r1));
    let b_star = add(&cb, &unit(dim, k, -r2));
    Construction {
        start_far: add(&ca, &unit(dim, k, -r1)),
        start_proximal: a_star.clone(),
        a: BodySpec::Ball { center: ca, radius: r1 },
        b: BodySpec::Ball { center: cb, radius: r2 },
        a_star,
        b_star,
        alpha_bound: (r1 / r2).min(r2 / r1),
    }
}

/// `Q x [t0, t0 + h]` and `Q x [t0 + h + g, t0 + h + g + h2]`, with `Q` the
/// corner simplex `{z >= o, sum(z - o) <= s}` in the first `dim - 1`
/// coordinates.
fn prisms<R: Rng>(rng: &mut R, dim: usize, gap: f64) -> Construction {
    let m = dim - 1;
    let o: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let s = rng.gen_range(0.5..2.0);
    let t0 = rng.gen_range(-1.0..1.0);
    let h = rng.gen_range(0.5..2.0);
    let h2 = rng.gen_range(0.5..2.0);
    let mut base = vec![o.clone()];
    for i in 0..m {
        let mut v = o.clone();
        v[i] += s;
        base.push(v);
    }
    let lift = |z: &Vec<f64>, t: f64| {
        let mut v = z.clone();
        v.push(t);
        v
    };
    let (top_a, bot_b) = (t0 + h, t0 + h + gap);
    let slab = |lo: f64, hi: f64| -> BodySpec {
        let vertices = base.iter().flat_map(|z| [lift(z, lo), lift(z, hi)]).collect();
        let halfspaces = (dim >= 3).then(|| {
            let mut hs: Vec<HalfspaceSpec> = (0..m)
                .map(|i| HalfspaceSpec {
                    normal: unit(dim, i, -1.0),
                    offset: -o[i],
                    equality: false,
                })
                .collect();
            let mut sum = vec![1.0; dim];
            sum[m] = 0.0;
            hs.push(HalfspaceSpec {
                normal: sum,
                offset: s + o.iter().sum::<f64>(),
                equality: false,
            });
            hs.push(HalfspaceSpec {
                normal: unit(dim, m, -1.0),
                offset: -lo,
                equality: false,
            });
            hs.push(HalfspaceSpec {
                normal: unit(dim, m, 1.0),
                offset: hi,
                equality: false,
            });
            hs
        });
        BodySpec::Polytope { vertices, halfspaces }
    };
    let centroid: Vec<f64> = o.iter().map(|x| x + s / (m as f64 + 1.0)).collect();
    Construction {
        a: slab(t0, top_a),
        b: slab(bot_b, bot_b + h2),
        a_star: lift(&centroid, top_a),
        b_star: lift(&centroid, bot_b),
        alpha_bound: (h2 / h).min(h / h2),
        start_proximal: lift(&o, top_a),
        start_far: lift(&o, t0),
    }
}

fn gap_axis(a_star: &[f64], b_star: &[f64]) -> usize {
    a_star
        .iter()
        .zip(b_star)
        .enumerate()
        .max_by(|x, y| (x.1 .0 - x.1 .1).abs().total_cmp(&(y.1 .0 - y.1 .1).abs()))
        .map(|(k, _)| k)
        .unwrap_or(0)
}

/// `x -> to + scale * R (x - from)`.
fn scaled_reflection(dim: usize, k: Option<usize>, scale: f64, from: &[f64], to: &[f64]) -> AffineSpec {
    let diag: Vec<f64> = (0..dim).map(|j| if Some(j) == k { -scale } else { scale }).collect();
    let matrix = (0..dim)
        .map(|i| (0..dim).map(|j| if i == j { diag[i] } else { 0.0 }).collect())
        .collect();
    let offset = (0..dim).map(|i| to[i] - diag[i] * from[i]).collect();
    AffineSpec { matrix, offset }
}

/// Builds a random instance of `family`. The gap is drawn from `[0.5, 3)`
/// unless given.
pub fn generate_instance(
    family: Family,
    seed: u64,
    dim: usize,
    p: f64,
    gap: Option<f64>,
) -> Result<InstanceFile, HarnessError> {
    LpSpace::new(dim, p).map_err(|e| HarnessError::Generate(e.to_string()))?;
    if family == Family::ParallelPolytopes && !(2..=MAX_POLYTOPE_DIM).contains(&dim) {
        return Err(HarnessError::Generate(format!(
            "parallel-polytopes needs 2 <= dim <= {MAX_POLYTOPE_DIM}, got {dim}"
        )));
    }
    if let Some(g) = gap {
        if !(g.is_finite() && g > 0.0) {
            return Err(HarnessError::Generate(format!("gap must be positive, got {g}")));
        }
    }
    let mut rng = seeded_rng(seed);
    let g = gap.unwrap_or_else(|| rng.gen_range(0.5..3.0));
    let c = match family {
        Family::SeparatedBoxes => boxes(&mut rng, dim, g),
        Family::SeparatedBalls => balls(&mut rng, dim, g),
        Family::ParallelPolytopes => prisms(&mut rng, dim, g),
    };
    let beta = rng.gen_range(0.3..0.7);
    let alpha = (0.9 * c.alpha_bound).min(0.6);
    let k = gap_axis(&c.a_star, &c.b_star);
    let maps = vec![
        MapEntry {
            name: "contract".into(),
            mode: Mode::Noncyclic,
            kind: MapKindSpec::SideAffine {
                on_a: scaled_reflection(dim, None, beta, &c.a_star, &c.a_star),
                on_b: scaled_reflection(dim, None, beta, &c.b_star, &c.b_star),
            },
        },
        MapEntry {
            name: "contract-cyclic".into(),
            mode: Mode::Cyclic,
            kind: MapKindSpec::SideAffine {
                on_a: scaled_reflection(dim, Some(k), alpha, &c.a_star, &c.b_star),
                on_b: scaled_reflection(dim, Some(k), alpha, &c.b_star, &c.a_star),
            },
        },
    ];
    let run = |name: &str, solver, map: &str, x0: &[f64]| RunConfig {
        name: name.into(),
        solver,
        map: map.into(),
        x0: x0.to_vec(),
        tol: None,
        max_iter: None,
        seed: None,
    };
    let runs = vec![
        run(
            "projection",
            SolverKind::ProjectionIteration,
            "contract",
            &c.start_proximal,
        ),
        run(
            "reduction-noncyclic",
            SolverKind::NoncyclicReduction,
            "contract",
            &c.start_proximal,
        ),
        run("picard", SolverKind::Picard, "contract-cyclic", &c.start_far),
        run(
            "reduction-cyclic",
            SolverKind::CyclicReduction,
            "contract-cyclic",
            &c.start_proximal,
        ),
    ];
    Ok(InstanceFile {
        name: format!("{family}-seed{seed}-d{dim}-p{p}"),
        space: SpaceSpec { dim, p },
        a: c.a,
        b: c.b,
        tol: 1e-9,
        expected_dist: Some(g),
        maps,
        runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boxes_with_fixed_gap() {
        let file = generate_instance(Family::SeparatedBoxes, 1, 2, 2.0, Some(3.0)).unwrap();
        assert_eq!(file.expected_dist, Some(3.0));
        let inst = file.build_instance().unwrap();
        assert!((inst.dist() - 3.0).abs() < 1e-9);
    }

    #[test]
    fn generation_is_deterministic() {
        for family in Family::ALL {
            let a = generate_instance(family, 42, 3, 1.5, None).unwrap();
            let b = generate_instance(family, 42, 3, 1.5, None).unwrap();
            assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        }
    }

    #[test]
    fn ball_distance_is_radial() {
        let file = generate_instance(Family::SeparatedBalls, 5, 3, 2.0, None).unwrap();
        let BodySpec::Ball { center: ca, radius: r1 } = &file.a else {
            panic!()
        };
        let BodySpec::Ball { center: cb, radius: r2 } = &file.b else {
            panic!()
        };
        let centre_gap = ca.iter().zip(cb).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let inst = file.build_instance().unwrap();
        assert!((inst.dist() - (centre_gap - r1 - r2)).abs() < 1e-8);
    }

    #[test]
    fn every_family_loads_with_certified_modes() {
        for family in Family::ALL {
            for p in [1.5, 2.0, 3.0] {
                let file = generate_instance(family, 9, 3, p, None).unwrap();
                let loaded = file.load(200, 0).unwrap();
                assert!((loaded.instance.dist() - file.expected_dist.unwrap()).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn rejects_bad_requests() {
        assert!(generate_instance(Family::ParallelPolytopes, 0, 9, 2.0, None).is_err());
        assert!(generate_instance(Family::SeparatedBoxes, 0, 2, 1.0, None).is_err());
        assert!(generate_instance(Family::SeparatedBoxes, 0, 2, 2.0, Some(-1.0)).is_err());
        assert!("hexagons".parse::<Family>().is_err());
    }
}
