//! Self-maps of `A ∪ B` and their certification as cyclic / noncyclic
//! contractions or relatively nonexpansive maps.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{sample_body, sample_proximal, seeded_rng, GeometryError, Point, ProximityInstance, Side};

/// Default number of sampled pairs used by the certifiers.
pub const DEFAULT_SAMPLES: usize = 10_000;
/// Cap on structured vertex-pair candidates.
const MAX_VERTEX_PAIRS: usize = 4096;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MapError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid affine map: {0}")]
    InvalidAffine(String),
    #[error("point lies in neither A nor B")]
    OffDomain,
    #[error("point of {side} is not proximal: distance {distance:.6e} to the opposite set exceeds {allowed:.6e}")]
    OffProximal { side: Side, distance: f64, allowed: f64 },
    #[error("map `{name}` is not {declared}: {point} maps to {image}")]
    ModeViolation {
        name: String,
        declared: Mode,
        point: Point,
        image: Point,
    },
    #[error("map `{name}` is not a contraction (alpha_hat = {alpha_hat:.6})")]
    NotAContraction { name: String, alpha_hat: f64 },
}

/// Whether a map swaps or preserves the two sides.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Cyclic,
    Noncyclic,
}

impl Mode {
    /// Side that points of `side` are mapped into.
    pub fn target(self, side: Side) -> Side {
        match self {
            Mode::Cyclic => side.opposite(),
            Mode::Noncyclic => side,
        }
    }

    pub fn flipped(self) -> Mode {
        match self {
            Mode::Cyclic => Mode::Noncyclic,
            Mode::Noncyclic => Mode::Cyclic,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Cyclic => "cyclic",
            Mode::Noncyclic => "noncyclic",
        })
    }
}

/// Where a map is defined: on the whole of `A ∪ B`, or only on `A0 ∪ B0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Sets,
    ProximalSets,
}

/// `x ↦ M x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinePiece {
    pub matrix: DMatrix<f64>,
    pub offset: Point,
}

impl AffinePiece {
    pub fn new(matrix: DMatrix<f64>, offset: Point) -> Result<Self, MapError> {
        if !matrix.is_square() {
            return Err(MapError::InvalidAffine(format!(
                "matrix is {}x{}, expected square",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.nrows() != offset.len() {
            return Err(MapError::InvalidAffine(format!(
                "matrix has {} rows but offset has {} entries",
                matrix.nrows(),
                offset.len()
            )));
        }
        if matrix.iter().chain(offset.iter()).any(|v| !v.is_finite()) {
            return Err(MapError::InvalidAffine("entries must be finite".into()));
        }
        Ok(Self { matrix, offset })
    }

    pub fn from_rows(rows: &[Vec<f64>], offset: &[f64]) -> Result<Self, MapError> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(MapError::InvalidAffine("matrix rows must all have length n".into()));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::new(DMatrix::from_row_slice(n, n, &flat), Point::from_column_slice(offset))
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: DMatrix::identity(dim, dim),
            offset: Point::zeros(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.offset.len()
    }

    pub fn apply(&self, x: &Point) -> Point {
        &self.matrix * x + &self.offset
    }
}

/// Pure evaluation procedure of a blackbox map. Receives the side the
/// argument was found on.
pub type Procedure = Arc<dyn Fn(&Point, Side) -> Point + Send + Sync>;

#[derive(Clone)]
pub enum MapKind {
    /// One affine map on the whole space.
    Affine(AffinePiece),
    /// Separate affine maps on `A` and on `B`.
    SideAffine {
        on_a: AffinePiece,
        on_b: AffinePiece,
    },
    Blackbox {
        label: String,
        procedure: Procedure,
    },
}

impl fmt::Debug for MapKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MapKind::Affine(a) => f.debug_tuple("Affine").field(a).finish(),
            MapKind::SideAffine { on_a, on_b } => f
                .debug_struct("SideAffine")
                .field("on_a", on_a)
                .field("on_b", on_b)
                .finish(),
            MapKind::Blackbox { label, .. } => f.debug_struct("Blackbox").field("label", label).finish_non_exhaustive(),
        }
    }
}

/// Anything that can be iterated on a proximity pair.
pub trait SelfMap: Send + Sync {
    fn name(&self) -> &str;
    fn mode(&self) -> Mode;
    fn instance(&self) -> &Arc<ProximityInstance>;
    fn domain(&self) -> Domain;

    /// Evaluates the map at a point already known to lie on `side`.
    fn apply_on(&self, x: &Point, side: Side) -> Result<Point, MapError>;

    /// Affine form of the map restricted to `side`, when it has one.
    fn affine_on(&self, _side: Side) -> Option<&AffinePiece> {
        None
    }

    /// Evaluates the map, detecting the side of `x` first.
    fn apply(&self, x: &Point) -> Result<Point, MapError> {
        let side = locate(self.instance(), x)?;
        self.apply_on(x, side)
    }
}

/// Membership tolerance used when deciding which side a point is on.
pub(crate) fn side_tol(inst: &ProximityInstance) -> f64 {
    10.0 * inst.tol()
}

pub(crate) fn locate(inst: &ProximityInstance, x: &Point) -> Result<Side, MapError> {
    inst.space().check(x)?;
    inst.side_of(x, side_tol(inst))?.ok_or(MapError::OffDomain)
}

/// A self-map of `A ∪ B` with its declared mode.
#[derive(Clone, Debug)]
pub struct MapSpec {
    name: String,
    kind: MapKind,
    mode: Mode,
    instance: Arc<ProximityInstance>,
}

impl MapSpec {
    pub fn new(
        name: impl Into<String>,
        kind: MapKind,
        mode: Mode,
        instance: Arc<ProximityInstance>,
    ) -> Result<Self, MapError> {
        let dim = instance.space().dim();
        let check = |a: &AffinePiece| {
            if a.dim() == dim {
                Ok(())
            } else {
                Err(MapError::InvalidAffine(format!(
                    "map acts on dimension {}, space has dimension {dim}",
                    a.dim()
                )))
            }
        };
        match &kind {
            MapKind::Affine(a) => check(a)?,
            MapKind::SideAffine { on_a, on_b } => {
                check(on_a)?;
                check(on_b)?;
            }
            MapKind::Blackbox { .. } => {}
        }
        Ok(Self {
            name: name.into(),
            kind,
            mode,
            instance,
        })
    }

    pub fn affine(
        name: impl Into<String>,
        piece: AffinePiece,
        mode: Mode,
        instance: Arc<ProximityInstance>,
    ) -> Result<Self, MapError> {
        Self::new(name, MapKind::Affine(piece), mode, instance)
    }

    pub fn blackbox<F>(name: impl Into<String>, mode: Mode, instance: Arc<ProximityInstance>, procedure: F) -> Self
    where
        F: Fn(&Point, Side) -> Point + Send + Sync + 'static,
    {
        let name = name.into();
        Self {
            kind: MapKind::Blackbox {
                label: name.clone(),
                procedure: Arc::new(procedure),
            },
            name,
            mode,
            instance,
        }
    }

    pub fn kind(&self) -> &MapKind {
        &self.kind
    }
}

impl SelfMap for MapSpec {
    fn name(&self) -> &str {
        &self.name
    }

    fn mode(&self) -> Mode {
        self.mode
    }

    fn instance(&self) -> &Arc<ProximityInstance> {
        &self.instance
    }

    fn domain(&self) -> Domain {
        Domain::Sets
    }

    fn apply_on(&self, x: &Point, side: Side) -> Result<Point, MapError> {
        self.instance.space().check(x)?;
        Ok(match &self.kind {
            MapKind::Affine(a) => a.apply(x),
            MapKind::SideAffine { on_a, on_b } => match side {
                Side::A => on_a.apply(x),
                Side::B => on_b.apply(x),
            },
            MapKind::Blackbox { procedure, .. } => procedure(x, side),
        })
    }

    fn affine_on(&self, side: Side) -> Option<&AffinePiece> {
        match &self.kind {
            MapKind::Affine(a) => Some(a),
            MapKind::SideAffine { on_a, on_b } => Some(match side {
                Side::A => on_a,
                Side::B => on_b,
            }),
            MapKind::Blackbox { .. } => None,
        }
    }

    fn apply(&self, x: &Point) -> Result<Point, MapError> {
        match &self.kind {
            MapKind::Affine(a) => {
                self.instance.space().check(x)?;
                Ok(a.apply(x))
            }
            _ => {
                let side = locate(&self.instance, x)?;
                self.apply_on(x, side)
            }
        }
    }
}

/// Draws a point from the map's domain on `side`.
pub(crate) fn sample_domain<R: Rng + ?Sized>(
    map: &dyn SelfMap,
    side: Side,
    rng: &mut R,
) -> Result<Option<Point>, MapError> {
    let inst = map.instance();
    Ok(match map.domain() {
        Domain::Sets => Some(sample_body(inst.body(side), rng)?),
        Domain::ProximalSets => sample_proximal(inst, side, rng)?,
    })
}

/// Distance from `image` to where it should land (`target` body, or its
/// proximal set for proximal-domain maps).
fn landing_error(map: &dyn SelfMap, image: &Point, target: Side) -> Result<f64, MapError> {
    let inst = map.instance();
    let off = inst.body(target).distance_to(image)?;
    Ok(match map.domain() {
        Domain::Sets => off,
        Domain::ProximalSets => off.max(inst.proximal_excess(image, target)?),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeCertificate {
    pub holds: bool,
    pub exact: bool,
    pub checked: usize,
    /// Offending point and its image.
    pub witness: Option<(Vec<f64>, Vec<f64>)>,
}

/// Checks that the map sends each side where its declared mode says.
///
/// Affine maps on polytopal pairs are checked exactly through vertex images
/// (the image of a polytope is the hull of the vertex images). Otherwise
/// `samples` random points per side are tested.
pub fn certify_mode(map: &dyn SelfMap, samples: usize, seed: u64) -> Result<ModeCertificate, MapError> {
    let inst = map.instance();
    let tol = side_tol(inst);
    let mode = map.mode();
    let exact_vertices = match map.domain() {
        Domain::Sets => [Side::A, Side::B]
            .iter()
            .map(|&s| Some((s, map.affine_on(s)?, inst.body(s).vertices()?)))
            .collect::<Option<Vec<_>>>(),
        Domain::ProximalSets => None,
    };
    let mut checked = 0;
    if let Some(groups) = exact_vertices {
        for (side, piece, verts) in groups {
            for v in verts {
                checked += 1;
                let img = piece.apply(&v);
                if landing_error(map, &img, mode.target(side))? > tol {
                    return Ok(ModeCertificate {
                        holds: false,
                        exact: true,
                        checked,
                        witness: Some((v.as_slice().to_vec(), img.as_slice().to_vec())),
                    });
                }
            }
        }
        return Ok(ModeCertificate {
            holds: true,
            exact: true,
            checked,
            witness: None,
        });
    }
    let mut rng = seeded_rng(seed);
    for side in [Side::A, Side::B] {
        let mut candidates = vec![inst.realizing_point(side).clone()];
        for _ in 0..samples {
            if let Some(x) = sample_domain(map, side, &mut rng)? {
                candidates.push(x);
            }
        }
        for x in candidates {
            checked += 1;
            let img = map.apply_on(&x, side)?;
            if landing_error(map, &img, mode.target(side))? > tol {
                return Ok(ModeCertificate {
                    holds: false,
                    exact: false,
                    checked,
                    witness: Some((x.as_slice().to_vec(), img.as_slice().to_vec())),
                });
            }
        }
    }
    Ok(ModeCertificate {
        holds: true,
        exact: false,
        checked,
        witness: None,
    })
}

/// Empirical contraction modulus.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractionCertificate {
    /// `sup (d(Tx,Ty) - dist) / (d(x,y) - dist)` over tested cross pairs.
    /// Values of 1 or more mean the map is not a contraction.
    pub alpha_hat: f64,
    /// Number of pairs that entered the supremum.
    pub samples: usize,
    pub worst_pair: Option<(Vec<f64>, Vec<f64>)>,
    pub exact: bool,
    /// No pair had `d(x,y) > dist + tol`.
    pub degenerate: bool,
}

/// Structured and random cross pairs `(x, y) ∈ A × B` from the map's domain.
fn cross_pairs(map: &dyn SelfMap, samples: usize, seed: u64) -> Result<Vec<(Point, Point)>, MapError> {
    let inst = map.instance();
    let mut rng = seeded_rng(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut pairs = Vec::new();
    let (ra, rb) = inst.realizing_pair();
    pairs.push((ra.clone(), rb.clone()));
    if map.domain() == Domain::Sets {
        // pairs pulled apart along the realizing direction
        let dir = rb - ra;
        let len = dir.amax();
        if len > 0.0 {
            let dir = dir / len;
            for scale in [0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0] {
                let x = inst.a().project(&(ra - &dir * scale))?;
                let y = inst.b().project(&(rb + &dir * scale))?;
                pairs.push((x, y));
            }
        }
        if let (Some(va), Some(vb)) = (inst.a().vertices(), inst.b().vertices()) {
            if va.len() * vb.len() <= MAX_VERTEX_PAIRS {
                for x in &va {
                    for y in &vb {
                        pairs.push((x.clone(), y.clone()));
                    }
                }
            } else {
                for _ in 0..MAX_VERTEX_PAIRS {
                    let x = &va[rng.gen_range(0..va.len())];
                    let y = &vb[rng.gen_range(0..vb.len())];
                    pairs.push((x.clone(), y.clone()));
                }
            }
        }
    }
    for _ in 0..samples {
        let x = sample_domain(map, Side::A, &mut rng)?;
        let y = sample_domain(map, Side::B, &mut rng)?;
        if let (Some(x), Some(y)) = (x, y) {
            pairs.push((x, y));
        }
    }
    Ok(pairs)
}

fn ratio(map: &dyn SelfMap, x: &Point, y: &Point) -> Result<Option<f64>, MapError> {
    let inst = map.instance();
    let space = inst.space();
    let before = space.distance(x, y)? - inst.dist();
    if before <= inst.tol() {
        return Ok(None);
    }
    let tx = map.apply_on(x, Side::A)?;
    let ty = map.apply_on(y, Side::B)?;
    Ok(Some((space.distance(&tx, &ty)? - inst.dist()) / before))
}

/// Estimates the contraction modulus over cross pairs, then refines the
/// worst pairs by a local pattern search inside the bodies.
pub fn certify_contraction(map: &dyn SelfMap, samples: usize, seed: u64) -> Result<ContractionCertificate, MapError> {
    let inst = map.instance();
    let pairs = cross_pairs(map, samples, seed)?;
    let mut scored = Vec::new();
    for (x, y) in pairs {
        if let Some(r) = ratio(map, &x, &y)? {
            scored.push((r, x, y));
        }
    }
    if scored.is_empty() {
        return Ok(ContractionCertificate {
            alpha_hat: 0.0,
            samples: 0,
            worst_pair: None,
            exact: false,
            degenerate: true,
        });
    }
    let count = scored.len();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    scored.truncate(4);
    let polytopal = inst.a().vertices().is_some() && inst.b().vertices().is_some();
    let affine = map.affine_on(Side::A).is_some() && map.affine_on(Side::B).is_some();
    if map.domain() == Domain::Sets {
        let mut rng = seeded_rng(seed.wrapping_add(1));
        for entry in scored.iter_mut() {
            refine(map, entry, &mut rng)?;
        }
    }
    let (alpha_hat, x, y) = scored.into_iter().max_by(|a, b| a.0.total_cmp(&b.0)).expect("nonempty");
    Ok(ContractionCertificate {
        alpha_hat,
        samples: count,
        worst_pair: Some((x.as_slice().to_vec(), y.as_slice().to_vec())),
        exact: affine && polytopal && map.domain() == Domain::Sets,
        degenerate: false,
    })
}

fn refine<R: Rng + ?Sized>(map: &dyn SelfMap, entry: &mut (f64, Point, Point), rng: &mut R) -> Result<(), MapError> {
    let inst = map.instance();
    let dim = inst.space().dim();
    let mut step = 0.1 * (1.0 + inst.space().distance(&entry.1, &entry.2)?);
    for _ in 0..200 {
        let jitter = |rng: &mut R| Point::from_fn(dim, |_, _| rng.gen_range(-1.0..=1.0));
        let x = inst.a().project(&(&entry.1 + jitter(rng) * step))?;
        let y = inst.b().project(&(&entry.2 + jitter(rng) * step))?;
        match ratio(map, &x, &y)? {
            Some(r) if r > entry.0 => *entry = (r, x, y),
            _ => step *= 0.9,
        }
        if step < 1e-9 {
            break;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonexpansiveCertificate {
    pub holds: bool,
    /// Largest `d(Tx,Ty) - d(x,y)` seen.
    pub worst_excess: f64,
    pub witness: Option<(Vec<f64>, Vec<f64>)>,
}

/// `d(Tx,Ty) <= d(x,y) + tol` on sampled cross pairs.
pub fn certify_relatively_nonexpansive(
    map: &dyn SelfMap,
    samples: usize,
    seed: u64,
) -> Result<NonexpansiveCertificate, MapError> {
    let inst = map.instance();
    let space = inst.space();
    let mut worst = f64::NEG_INFINITY;
    let mut witness = None;
    for (x, y) in cross_pairs(map, samples, seed)? {
        let tx = map.apply_on(&x, Side::A)?;
        let ty = map.apply_on(&y, Side::B)?;
        let excess = space.distance(&tx, &ty)? - space.distance(&x, &y)?;
        if excess > worst {
            worst = excess;
            witness = Some((x.as_slice().to_vec(), y.as_slice().to_vec()));
        }
    }
    let holds = worst <= inst.tol();
    Ok(NonexpansiveCertificate {
        holds,
        worst_excess: worst,
        witness: if holds { None } else { witness },
    })
}

/// Result of a sampled "image lands in the right place" check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LandingReport {
    pub holds: bool,
    pub worst_excess: f64,
    pub checked: usize,
    pub witness: Option<(Vec<f64>, Vec<f64>)>,
}

fn landing_check<F>(map: &dyn SelfMap, samples: usize, seed: u64, mut evaluate: F) -> Result<LandingReport, MapError>
where
    F: FnMut(&Point, Side) -> Result<(Point, f64), MapError>,
{
    let inst = map.instance();
    let mut rng = seeded_rng(seed);
    let mut worst = f64::NEG_INFINITY;
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
            let (img, excess) = evaluate(&x, side)?;
            if excess > worst {
                worst = excess;
                witness = Some((x.as_slice().to_vec(), img.as_slice().to_vec()));
            }
        }
    }
    let holds = worst <= side_tol(inst);
    Ok(LandingReport {
        holds,
        worst_excess: worst,
        checked,
        witness: if holds { None } else { witness },
    })
}

/// For sampled `x ∈ A0 ∪ B0`, checks that `Tx` lands in the proximal set of
/// the side it is mapped to.
pub fn check_proximal_preservation(map: &dyn SelfMap, samples: usize, seed: u64) -> Result<LandingReport, MapError> {
    let inst = map.instance();
    let mode = map.mode();
    landing_check(map, samples, seed, |x, side| {
        let img = map.apply_on(x, side)?;
        let target = mode.target(side);
        let excess = inst
            .body(target)
            .distance_to(&img)?
            .max(inst.proximal_excess(&img, target)?);
        Ok((img, excess))
    })
}

/// For a cyclic map, checks that `T²` sends each side back into itself on
/// sampled points of the map's domain.
pub fn check_square_returns(map: &dyn SelfMap, samples: usize, seed: u64) -> Result<LandingReport, MapError> {
    let inst = map.instance();
    let mut rng = seeded_rng(seed);
    let mut worst = f64::NEG_INFINITY;
    let mut witness = None;
    let mut checked = 0;
    for side in [Side::A, Side::B] {
        for _ in 0..samples {
            let Some(x) = sample_domain(map, side, &mut rng)? else {
                continue;
            };
            checked += 1;
            let once = map.apply_on(&x, side)?;
            let twice = map.apply_on(&once, map.mode().target(side))?;
            let target = map.mode().target(map.mode().target(side));
            let excess = landing_error(map, &twice, target)?;
            if excess > worst {
                worst = excess;
                witness = Some((x.as_slice().to_vec(), twice.as_slice().to_vec()));
            }
        }
    }
    let holds = worst <= side_tol(inst);
    Ok(LandingReport {
        holds,
        worst_excess: worst.max(0.0),
        checked,
        witness: if holds { None } else { witness },
    })
}

/// A map certified to be a contraction of its declared mode.
#[derive(Debug, Clone)]
pub struct Contraction<M> {
    map: M,
    mode_certificate: ModeCertificate,
    certificate: ContractionCertificate,
}

impl<M: SelfMap> Contraction<M> {
    /// Certifies mode and contraction modulus; fails when the mode is
    /// violated or `alpha_hat >= 1`.
    pub fn certify(map: M, samples: usize, seed: u64) -> Result<Self, MapError> {
        let mode_certificate = certify_mode(&map, samples, seed)?;
        if !mode_certificate.holds {
            let (p, img) = mode_certificate.witness.clone().unwrap_or_default();
            return Err(MapError::ModeViolation {
                name: map.name().to_string(),
                declared: map.mode(),
                point: Point::from_vec(p),
                image: Point::from_vec(img),
            });
        }
        let certificate = certify_contraction(&map, samples, seed)?;
        if certificate.alpha_hat >= 1.0 {
            return Err(MapError::NotAContraction {
                name: map.name().to_string(),
                alpha_hat: certificate.alpha_hat,
            });
        }
        Ok(Self {
            map,
            mode_certificate,
            certificate,
        })
    }

    /// Wraps certificates obtained elsewhere (e.g. inherited through a
    /// composition with the proximal projection).
    pub(crate) fn from_certificates(
        map: M,
        mode_certificate: ModeCertificate,
        certificate: ContractionCertificate,
    ) -> Self {
        Self {
            map,
            mode_certificate,
            certificate,
        }
    }

    pub fn map(&self) -> &M {
        &self.map
    }

    pub fn alpha_hat(&self) -> f64 {
        self.certificate.alpha_hat
    }

    pub fn certificate(&self) -> &ContractionCertificate {
        &self.certificate
    }

    pub fn mode_certificate(&self) -> &ModeCertificate {
        &self.mode_certificate
    }
}
