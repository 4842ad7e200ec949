//! The cyclic proximal projection `P` on `A0 ∪ B0`, compositions `T∘P`,
//! and numerical checks of the properties `P` is known to have.
//!
//! `P` sends a point of `A0` to its nearest point in `B` (which lies in
//! `B0` at distance exactly `dist(A, B)`), and symmetrically for `B0`.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::geometry::{sample_proximal, seeded_rng, GeometryError, Point, ProximityInstance, Side};
use crate::mappings::{
    certify_relatively_nonexpansive, check_proximal_preservation, side_tol, Domain, MapError, Mode,
    NonexpansiveCertificate, SelfMap,
};

/// Threshold for the projector property checks.
pub const PROPERTY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OperatorError {
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("map `{name}` is not relatively nonexpansive (excess {excess:.3e} at {x} / {y})")]
    NotNonexpansive {
        name: String,
        excess: f64,
        x: Point,
        y: Point,
    },
    #[error("map `{name}` does not preserve proximal sets ({point} maps to {image}, excess {excess:.3e})")]
    NotPreserving {
        name: String,
        excess: f64,
        point: Point,
        image: Point,
    },
}

/// The operator `P` of a proximity instance.
#[derive(Debug, Clone)]
pub struct ProximalProjector {
    instance: Arc<ProximityInstance>,
}

impl ProximalProjector {
    pub fn new(instance: Arc<ProximityInstance>) -> Self {
        Self { instance }
    }

    pub fn instance(&self) -> &Arc<ProximityInstance> {
        &self.instance
    }

    /// Points are accepted when within `dist + 10 tol` of the opposite body.
    pub fn acceptance(&self) -> f64 {
        self.instance.dist() + side_tol(&self.instance)
    }

    /// `P(x)`, detecting whether `x` is on `A` or `B`.
    pub fn project(&self, x: &Point) -> Result<Point, MapError> {
        let side = crate::mappings::locate(&self.instance, x)?;
        self.project_from(x, side)
    }

    /// `P(x)` for `x` on `side`; rejects points outside the proximal set.
    pub fn project_from(&self, x: &Point, side: Side) -> Result<Point, MapError> {
        let y = self.project_unchecked(x, side)?;
        let distance = self.instance.space().distance(x, &y)?;
        if distance > self.acceptance() {
            return Err(MapError::OffProximal {
                side,
                distance,
                allowed: self.acceptance(),
            });
        }
        Ok(y)
    }

    /// Nearest point of the body opposite `side`, without the domain check.
    pub fn project_unchecked(&self, x: &Point, side: Side) -> Result<Point, MapError> {
        Ok(self.instance.body(side.opposite()).project(x)?)
    }
}

/// Outcome of one property check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyCheck {
    pub holds: bool,
    pub worst_deviation: f64,
    pub witness: Option<(Vec<f64>, Vec<f64>)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl PropertyCheck {
    fn new() -> Self {
        Self {
            holds: true,
            worst_deviation: 0.0,
            witness: None,
            note: None,
        }
    }

    fn record(&mut self, deviation: f64, x: &Point, y: &Point) {
        if deviation > self.worst_deviation || deviation.is_nan() {
            self.worst_deviation = deviation;
            self.witness = Some((x.as_slice().to_vec(), y.as_slice().to_vec()));
        }
    }

    fn finish(mut self, tol: f64) -> Self {
        self.holds = self.worst_deviation <= tol;
        if self.holds {
            self.witness = None;
        }
        self
    }
}

/// Report of [`verify_projector_properties`], keyed by property name.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectorReport {
    pub properties: BTreeMap<String, PropertyCheck>,
    /// The proximal sets collapsed to single points.
    pub degenerate: bool,
    pub samples: usize,
}

impl ProjectorReport {
    pub fn all_hold(&self) -> bool {
        self.properties.values().all(|c| c.holds)
    }

    pub fn worst_deviation(&self) -> f64 {
        self.properties.values().map(|c| c.worst_deviation).fold(0.0, f64::max)
    }
}

pub const CYCLIC_DISTANCE: &str = "cyclic_distance";
pub const ISOMETRY: &str = "isometry";
pub const AFFINE: &str = "affine";
pub const INVOLUTION: &str = "involution";
pub const CONTINUITY: &str = "continuity";

fn spread(points: &[Point]) -> f64 {
    points.iter().map(|p| (p - &points[0]).amax()).fold(0.0, f64::max)
}

/// Checks on sampled points of `A0` and `B0` that `P`
/// 1. maps each proximal set into the other at distance `dist(A, B)`,
/// 2. preserves cross distances exactly,
/// 3. commutes with convex combinations,
/// 4. is an involution,
/// 5. is continuous (reported as a consequence of 2, probed on nearby pairs).
pub fn verify_projector_properties(
    projector: &ProximalProjector,
    samples: usize,
    seed: u64,
) -> Result<ProjectorReport, MapError> {
    let inst = projector.instance();
    let space = inst.space();
    let mut rng = seeded_rng(seed);
    let mut sets: [Vec<Point>; 2] = [Vec::new(), Vec::new()];
    for (k, side) in [Side::A, Side::B].into_iter().enumerate() {
        sets[k].push(inst.realizing_point(side).clone());
        for _ in 0..4 * samples {
            if sets[k].len() >= samples.max(1) {
                break;
            }
            if let Some(x) = sample_proximal(inst, side, &mut rng)? {
                sets[k].push(x);
            }
        }
    }
    let degenerate = spread(&sets[0]) < 1e-7 && spread(&sets[1]) < 1e-7;
    let sides = [Side::A, Side::B];
    let mut images: [Vec<Point>; 2] = [Vec::new(), Vec::new()];
    for k in 0..2 {
        for x in &sets[k] {
            images[k].push(projector.project_from(x, sides[k])?);
        }
    }

    let mut cyclic = PropertyCheck::new();
    let mut involution = PropertyCheck::new();
    for k in 0..2 {
        let target = sides[k].opposite();
        for (x, px) in sets[k].iter().zip(&images[k]) {
            let gap = (space.distance(x, px)? - inst.dist()).abs();
            let excess = inst.proximal_excess(px, target)?.max(0.0);
            cyclic.record(gap.max(excess), x, px);
            let back = projector.project_from(px, target)?;
            involution.record(space.distance(&back, x)?, x, &back);
        }
    }

    let mut isometry = PropertyCheck::new();
    let n = sets[0].len().max(sets[1].len());
    for i in 0..n {
        let (ia, ib) = (i % sets[0].len(), i % sets[1].len());
        let (x, y) = (&sets[0][ia], &sets[1][ib]);
        let before = space.distance(x, y)?;
        let after = space.distance(&images[0][ia], &images[1][ib])?;
        isometry.record((after - before).abs(), x, y);
    }

    let mut affine = PropertyCheck::new();
    let mut continuity = PropertyCheck::new();
    continuity.note = Some("implied by the isometry check".into());
    for k in 0..2 {
        let pts = &sets[k];
        for i in 0..pts.len() {
            let j = (i + 1) % pts.len();
            let lambda: f64 = rng.gen();
            let mix = &pts[i] * lambda + &pts[j] * (1.0 - lambda);
            let expected = &images[k][i] * lambda + &images[k][j] * (1.0 - lambda);
            let got = projector.project_from(&mix, sides[k])?;
            affine.record(space.distance(&got, &expected)?, &pts[i], &pts[j]);

            let eps = 1e-3;
            let near = &pts[i] * (1.0 - eps) + &pts[j] * eps;
            let pnear = projector.project_from(&near, sides[k])?;
            let stretch = space.distance(&images[k][i], &pnear)? - space.distance(&pts[i], &near)?;
            continuity.record(stretch.max(0.0), &pts[i], &near);
        }
    }

    let mut properties = BTreeMap::new();
    properties.insert(CYCLIC_DISTANCE.to_string(), cyclic.finish(PROPERTY_TOL));
    properties.insert(ISOMETRY.to_string(), isometry.finish(PROPERTY_TOL));
    properties.insert(AFFINE.to_string(), affine.finish(PROPERTY_TOL));
    properties.insert(INVOLUTION.to_string(), involution.finish(PROPERTY_TOL));
    properties.insert(CONTINUITY.to_string(), continuity.finish(PROPERTY_TOL));
    Ok(ProjectorReport {
        properties,
        degenerate,
        samples: sets[0].len() + sets[1].len(),
    })
}

/// `x ↦ outer(P x)` on `A0 ∪ B0`. Its mode is the opposite of the outer map's.
#[derive(Debug, Clone)]
pub struct ComposedMap<M> {
    name: String,
    outer: M,
    projector: ProximalProjector,
    mode: Mode,
    nonexpansive: NonexpansiveCertificate,
}

impl<M: SelfMap> ComposedMap<M> {
    pub fn outer(&self) -> &M {
        &self.outer
    }

    pub fn projector(&self) -> &ProximalProjector {
        &self.projector
    }

    /// Sampled relative nonexpansiveness of the composition.
    pub fn nonexpansive_certificate(&self) -> &NonexpansiveCertificate {
        &self.nonexpansive
    }
}

impl<M: SelfMap> SelfMap for ComposedMap<M> {
    fn name(&self) -> &str {
        &self.name
    }

    fn mode(&self) -> Mode {
        self.mode
    }

    fn instance(&self) -> &Arc<ProximityInstance> {
        self.projector.instance()
    }

    fn domain(&self) -> Domain {
        Domain::ProximalSets
    }

    fn apply_on(&self, x: &Point, side: Side) -> Result<Point, MapError> {
        let px = self.projector.project_from(x, side)?;
        self.outer.apply_on(&px, side.opposite())
    }
}

/// Builds `outer ∘ P` after checking that `outer` is relatively
/// nonexpansive and sends proximal points to proximal points.
pub fn compose_with_projector<M: SelfMap>(
    outer: M,
    projector: ProximalProjector,
    samples: usize,
    seed: u64,
) -> Result<ComposedMap<M>, OperatorError> {
    let cert = certify_relatively_nonexpansive(&outer, samples, seed)?;
    if !cert.holds {
        let (x, y) = cert.witness.clone().unwrap_or_default();
        return Err(OperatorError::NotNonexpansive {
            name: outer.name().to_string(),
            excess: cert.worst_excess,
            x: Point::from_vec(x),
            y: Point::from_vec(y),
        });
    }
    let landing = check_proximal_preservation(&outer, samples, seed)?;
    if !landing.holds {
        let (x, img) = landing.witness.clone().unwrap_or_default();
        return Err(OperatorError::NotPreserving {
            name: outer.name().to_string(),
            excess: landing.worst_excess,
            point: Point::from_vec(x),
            image: Point::from_vec(img),
        });
    }
    let mut composed = ComposedMap {
        name: format!("{}P", outer.name()),
        mode: outer.mode().flipped(),
        outer,
        projector,
        nonexpansive: cert,
    };
    composed.nonexpansive = certify_relatively_nonexpansive(&composed, samples, seed)?;
    Ok(composed)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommutationReport {
    pub max_deviation: f64,
    pub checked: usize,
    /// Point where `|T(Px) - P(Tx)|` was largest.
    pub witness: Option<Vec<f64>>,
}

/// `max |T(P x) - P(T x)|` over sampled `x ∈ A0 ∪ B0`.
pub fn check_commutation(
    map: &dyn SelfMap,
    projector: &ProximalProjector,
    samples: usize,
    seed: u64,
) -> Result<CommutationReport, MapError> {
    let inst = projector.instance();
    let space = inst.space();
    let mut rng = seeded_rng(seed);
    let mut worst = 0.0_f64;
    let mut witness = None;
    let mut checked = 0;
    for side in [Side::A, Side::B] {
        let mut points = vec![inst.realizing_point(side).clone()];
        for _ in 0..samples {
            if let Some(x) = sample_proximal(inst, side, &mut rng)? {
                points.push(x);
            }
        }
        for x in points {
            checked += 1;
            let tpx = map.apply_on(&projector.project_from(&x, side)?, side.opposite())?;
            let tx = map.apply_on(&x, side)?;
            let ptx = projector.project_unchecked(&tx, map.mode().target(side))?;
            let dev = space.distance(&tpx, &ptx)?;
            if dev > worst || dev.is_nan() {
                worst = dev;
                witness = Some(x.as_slice().to_vec());
            }
        }
    }
    Ok(CommutationReport {
        max_deviation: worst,
        checked,
        witness,
    })
}
