//! Picard iteration for cyclic contractions, the projection-augmented
//! iteration for noncyclic ones, and the two reduction solvers that trade
//! one problem for the other through `P`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GeometryError, Point, Side};
use crate::mappings::{certify_contraction, certify_mode, side_tol, Contraction, Domain, MapError, Mode, SelfMap};
use crate::operators::{compose_with_projector, ComposedMap, OperatorError, ProximalProjector};

/// Number of even steps over which the reduction identities are checked.
pub const IDENTITY_HORIZON: usize = 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error("solver needs a {expected} map, `{name}` is {got}")]
    WrongMode { name: String, expected: Mode, got: Mode },
    #[error("starting point is not in A (distance {distance:.3e})")]
    StartNotInA { distance: f64 },
    #[error("starting point is not in A0 (excess distance {excess:.3e})")]
    StartNotProximal { excess: f64 },
    #[error("invalid solver options: {0}")]
    InvalidOptions(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    Picard,
    ProjectionIteration,
    CyclicReduction,
    NoncyclicReduction,
}

impl SolverKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SolverKind::Picard => "picard",
            SolverKind::ProjectionIteration => "projection-iteration",
            SolverKind::CyclicReduction => "cyclic-reduction",
            SolverKind::NoncyclicReduction => "noncyclic-reduction",
        }
    }

    /// Mode of the map this solver takes.
    pub fn required_mode(self) -> Mode {
        match self {
            SolverKind::Picard | SolverKind::CyclicReduction => Mode::Cyclic,
            SolverKind::ProjectionIteration | SolverKind::NoncyclicReduction => Mode::Noncyclic,
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Samples used when certifying composed maps.
    pub certify_samples: usize,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 10_000,
            certify_samples: 1000,
            seed: 0,
        }
    }
}

impl SolverOptions {
    fn check(&self) -> Result<(), SolveError> {
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(SolveError::InvalidOptions(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(SolveError::InvalidOptions("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub index: usize,
    pub side: Side,
    pub point: Point,
    /// `x_{n+1}` for cyclic runs, `P x_n` for projection runs.
    pub companion: Option<Point>,
    /// `d(x_n, companion) - dist`.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace {
    pub entries: Vec<TraceEntry>,
    pub converged: bool,
    /// Number of map evaluations.
    pub iterations_used: usize,
    /// `log(tol / gap_0) / log(alpha_hat)`, when the modulus is informative.
    pub predicted_iterations: Option<f64>,
}

impl IterationTrace {
    pub fn gaps(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|e| e.gap)
    }

    /// Largest `gap_{n+1} - alpha gap_n` over consecutive entries.
    pub fn gap_decay_violation(&self, alpha: f64) -> f64 {
        self.entries
            .windows(2)
            .map(|w| w[1].gap - alpha * w[0].gap)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// The `n`-th iterate, if recorded (as a point or as the last companion
    /// of a cyclic run).
    pub fn iterate(&self, n: usize) -> Option<&Point> {
        if let Some(e) = self.entries.get(n) {
            return Some(&e.point);
        }
        let last = self.entries.last()?;
        (n == last.index + 1).then_some(last.companion.as_ref()).flatten()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Solution {
    /// Best proximity point of a cyclic map.
    Point(Point),
    /// Best proximity pair of a noncyclic map.
    Pair(Point, Point),
}

impl Solution {
    pub fn kind(&self) -> &'static str {
        match self {
            Solution::Point(_) => "best_proximity_point",
            Solution::Pair(..) => "best_proximity_pair",
        }
    }

    pub fn primary(&self) -> &Point {
        match self {
            Solution::Point(x) | Solution::Pair(x, _) => x,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Residuals {
    /// Point: `|x* - Tx*| - dist`. Pair: `|p - q| - dist`.
    pub distance: f64,
    /// Pair only: `max(|p - Tp|, |q - Tq|)`.
    pub fixed_point: Option<f64>,
}

impl Residuals {
    pub fn worst(&self) -> f64 {
        self.distance.abs().max(self.fixed_point.unwrap_or(0.0))
    }
}

/// Numerical identities that link a reduction run back to the original map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReductionIdentities {
    /// `max_n |(MP)^{2n} x0 - M^{2n} x0|` for `n <= horizon`.
    pub even_deviation: f64,
    /// Noncyclic reduction: worst distance of `(TP)^{2n+1} x0` from `B0`.
    pub odd_membership_excess: Option<f64>,
    /// Noncyclic reduction: `|T x* - x*|`.
    pub fixed_point_residual: Option<f64>,
    pub horizon: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub solver: SolverKind,
    pub solution: Solution,
    pub residuals: Residuals,
    pub trace: IterationTrace,
    pub identities: Option<ReductionIdentities>,
    /// Modulus used for the iteration estimate and the decay check.
    pub alpha_hat: f64,
}

impl SolveResult {
    pub fn converged(&self) -> bool {
        self.trace.converged
    }

    pub fn residual(&self) -> f64 {
        self.residuals.worst()
    }

    /// The defining properties of a best proximity point / pair hold within `tol`.
    pub fn satisfies_contract(&self, tol: f64) -> bool {
        self.residual() <= tol
    }
}

fn predicted(alpha: f64, initial: f64, tol: f64) -> Option<f64> {
    if !(alpha.is_finite() && alpha < 1.0 && initial.is_finite()) {
        return None;
    }
    if initial <= tol {
        return Some(0.0);
    }
    if alpha <= 0.0 {
        return Some(1.0);
    }
    Some((tol / initial).ln() / alpha.ln())
}

fn require_mode(map: &dyn SelfMap, expected: Mode) -> Result<(), SolveError> {
    if map.mode() == expected {
        Ok(())
    } else {
        Err(SolveError::WrongMode {
            name: map.name().to_string(),
            expected,
            got: map.mode(),
        })
    }
}

fn require_in_a(map: &dyn SelfMap, x0: &Point) -> Result<(), SolveError> {
    let inst = map.instance();
    inst.space().check(x0)?;
    match map.domain() {
        Domain::Sets => {
            let distance = inst.a().distance_to(x0)?;
            if distance > side_tol(inst) {
                return Err(SolveError::StartNotInA { distance });
            }
        }
        Domain::ProximalSets => require_proximal(map, x0)?,
    }
    Ok(())
}

fn require_proximal(map: &dyn SelfMap, x0: &Point) -> Result<(), SolveError> {
    let inst = map.instance();
    inst.space().check(x0)?;
    let distance = inst.a().distance_to(x0)?;
    if distance > side_tol(inst) {
        return Err(SolveError::StartNotInA { distance });
    }
    let excess = inst.proximal_excess(x0, Side::A)?;
    if excess > side_tol(inst) {
        return Err(SolveError::StartNotProximal { excess });
    }
    Ok(())
}

fn pair_residuals(map: &dyn SelfMap, p: &Point, q: &Point) -> Result<Residuals, SolveError> {
    let inst = map.instance();
    let space = inst.space();
    let tp = map.apply_on(p, Side::A)?;
    let tq = map.apply_on(q, Side::B)?;
    Ok(Residuals {
        distance: space.distance(p, q)? - inst.dist(),
        fixed_point: Some(space.distance(p, &tp)?.max(space.distance(q, &tq)?)),
    })
}

/// `x0, Mx0, ..., M^steps x0`, following the declared mode from side `A`.
fn orbit(map: &dyn SelfMap, x0: &Point, steps: usize) -> Result<Vec<Point>, MapError> {
    let mut points = vec![x0.clone()];
    let mut side = Side::A;
    for _ in 0..steps {
        let next = map.apply_on(points.last().expect("nonempty"), side)?;
        side = map.mode().target(side);
        points.push(next);
    }
    Ok(points)
}

fn even_deviation(reduced: &[Point], original: &[Point], map: &dyn SelfMap) -> Result<f64, SolveError> {
    let space = map.instance().space();
    let mut worst = 0.0_f64;
    for (r, o) in reduced.iter().zip(original).step_by(2) {
        worst = worst.max(space.distance(r, o)?);
    }
    Ok(worst)
}

/// Picard iteration `x_{n+1} = T x_n` from `x0 ∈ A`.
///
/// Stops at an even index `m` once `|x_m - x_{m-2}| < tol` and
/// `|gap_{m-1}| < tol`; the solution is the last even iterate.
pub fn picard_cyclic<M: SelfMap>(
    t: &Contraction<M>,
    x0: &Point,
    opts: &SolverOptions,
) -> Result<SolveResult, SolveError> {
    opts.check()?;
    let map = t.map();
    require_mode(map, Mode::Cyclic)?;
    require_in_a(map, x0)?;
    let inst = map.instance();
    let space = inst.space();
    let dist = inst.dist();

    let mut entries: Vec<TraceEntry> = Vec::new();
    let mut x = x0.clone();
    let mut side = Side::A;
    let mut converged = false;
    for n in 0..opts.max_iter {
        let next = map.apply_on(&x, side)?;
        let gap = space.distance(&x, &next)? - dist;
        let stop = n % 2 == 1 && gap.abs() < opts.tol && space.distance(&next, &entries[n - 1].point)? < opts.tol;
        entries.push(TraceEntry {
            index: n,
            side,
            point: x,
            companion: Some(next.clone()),
            gap,
        });
        x = next;
        side = side.opposite();
        if stop {
            converged = true;
            break;
        }
    }
    let iterations_used = entries.len();
    let x_star = if converged {
        x
    } else {
        // best even iterate by gap
        entries
            .iter()
            .filter(|e| e.side == Side::A)
            .min_by(|a, b| a.gap.abs().total_cmp(&b.gap.abs()))
            .map(|e| e.point.clone())
            .expect("at least one iteration")
    };
    let tx = map.apply_on(&x_star, Side::A)?;
    let residuals = Residuals {
        distance: space.distance(&x_star, &tx)? - dist,
        fixed_point: None,
    };
    let alpha = t.alpha_hat();
    Ok(SolveResult {
        solver: SolverKind::Picard,
        solution: Solution::Point(x_star),
        residuals,
        trace: IterationTrace {
            predicted_iterations: predicted(alpha, entries[0].gap, opts.tol),
            entries,
            converged,
            iterations_used,
        },
        identities: None,
        alpha_hat: alpha,
    })
}

/// `x_n = T^n x0`, `y_n = P x_n` from `x0 ∈ A0`.
///
/// Stops once `|x_{n+1} - x_n| < tol` and `|gap_n| < tol`; returns
/// `(x_N, P x_N)`.
pub fn noncyclic_projection_iteration<M: SelfMap>(
    t: &Contraction<M>,
    x0: &Point,
    opts: &SolverOptions,
) -> Result<SolveResult, SolveError> {
    opts.check()?;
    let map = t.map();
    require_mode(map, Mode::Noncyclic)?;
    require_proximal(map, x0)?;
    let inst = map.instance();
    let space = inst.space();
    let dist = inst.dist();
    let projector = ProximalProjector::new(inst.clone());

    let mut entries = Vec::new();
    let mut x = x0.clone();
    let mut converged = false;
    let mut first_step = None;
    for n in 0..opts.max_iter {
        let y = projector.project_from(&x, Side::A)?;
        let gap = space.distance(&x, &y)? - dist;
        let next = map.apply_on(&x, Side::A)?;
        let step = space.distance(&next, &x)?;
        first_step.get_or_insert(step);
        entries.push(TraceEntry {
            index: n,
            side: Side::A,
            point: x,
            companion: Some(y),
            gap,
        });
        x = next;
        if step < opts.tol && gap.abs() < opts.tol {
            converged = true;
            break;
        }
    }
    let iterations_used = entries.len();
    let p = if converged {
        x
    } else {
        entries.last().expect("at least one iteration").point.clone()
    };
    let q = projector.project_from(&p, Side::A)?;
    let residuals = pair_residuals(map, &p, &q)?;
    let alpha = t.alpha_hat();
    Ok(SolveResult {
        solver: SolverKind::ProjectionIteration,
        solution: Solution::Pair(p, q),
        residuals,
        trace: IterationTrace {
            entries,
            converged,
            iterations_used,
            predicted_iterations: predicted(alpha, first_step.unwrap_or(0.0), opts.tol),
        },
        identities: None,
        alpha_hat: alpha,
    })
}

/// Composes `outer` with `P` and certifies the result. The composition
/// inherits the outer modulus because `P` is an isometry on `A0 ∪ B0`;
/// the reported modulus is the larger of that and the sampled one.
fn reduce<M: SelfMap + Clone>(
    outer: &Contraction<M>,
    opts: &SolverOptions,
) -> Result<Contraction<ComposedMap<M>>, SolveError> {
    let projector = ProximalProjector::new(outer.map().instance().clone());
    let composed = compose_with_projector(outer.map().clone(), projector, opts.certify_samples, opts.seed)?;
    let mode_cert = certify_mode(&composed, opts.certify_samples, opts.seed)?;
    if !mode_cert.holds {
        let (p, img) = mode_cert.witness.clone().unwrap_or_default();
        return Err(MapError::ModeViolation {
            name: composed.name().to_string(),
            declared: composed.mode(),
            point: Point::from_vec(p),
            image: Point::from_vec(img),
        }
        .into());
    }
    let mut cert = certify_contraction(&composed, opts.certify_samples, opts.seed)?;
    cert.alpha_hat = cert.alpha_hat.max(outer.alpha_hat());
    Ok(Contraction::from_certificates(composed, mode_cert, cert))
}

/// Best proximity point of a cyclic `S` through the noncyclic map `SP`.
pub fn solve_cyclic_via_reduction<M: SelfMap + Clone>(
    s: &Contraction<M>,
    x0: &Point,
    opts: &SolverOptions,
) -> Result<SolveResult, SolveError> {
    opts.check()?;
    require_mode(s.map(), Mode::Cyclic)?;
    require_proximal(s.map(), x0)?;
    let sp = reduce(s, opts)?;
    let inner = noncyclic_projection_iteration(&sp, x0, opts)?;
    let map = s.map();
    let inst = map.instance();
    let p = inner.solution.primary().clone();
    let sp_x = map.apply_on(&p, Side::A)?;
    let residuals = Residuals {
        distance: inst.space().distance(&p, &sp_x)? - inst.dist(),
        fixed_point: None,
    };
    let steps = 2 * IDENTITY_HORIZON;
    let reduced = orbit(sp.map(), x0, steps)?;
    let original = orbit(map, x0, steps)?;
    let identities = ReductionIdentities {
        even_deviation: even_deviation(&reduced, &original, map)?,
        odd_membership_excess: None,
        fixed_point_residual: None,
        horizon: IDENTITY_HORIZON,
    };
    Ok(SolveResult {
        solver: SolverKind::CyclicReduction,
        solution: Solution::Point(p),
        residuals,
        trace: inner.trace,
        identities: Some(identities),
        alpha_hat: inner.alpha_hat,
    })
}

/// Best proximity pair of a noncyclic `T` through Picard iteration of the
/// cyclic map `TP`; returns `(x*, P x*)`.
pub fn solve_noncyclic_via_reduction<M: SelfMap + Clone>(
    t: &Contraction<M>,
    x0: &Point,
    opts: &SolverOptions,
) -> Result<SolveResult, SolveError> {
    opts.check()?;
    require_mode(t.map(), Mode::Noncyclic)?;
    require_proximal(t.map(), x0)?;
    let tp = reduce(t, opts)?;
    let inner = picard_cyclic(&tp, x0, opts)?;
    let map = t.map();
    let inst = map.instance();
    let space = inst.space();
    let x_star = inner.solution.primary().clone();
    let q = tp.map().projector().project_from(&x_star, Side::A)?;
    let residuals = pair_residuals(map, &x_star, &q)?;

    let steps = 2 * IDENTITY_HORIZON + 1;
    let reduced = orbit(tp.map(), x0, steps)?;
    let original = orbit(map, x0, steps)?;
    let mut odd_excess = 0.0_f64;
    for y in reduced.iter().skip(1).step_by(2) {
        let excess = inst.b().distance_to(y)?.max(inst.proximal_excess(y, Side::B)?);
        odd_excess = odd_excess.max(excess);
    }
    let tx = map.apply_on(&x_star, Side::A)?;
    let identities = ReductionIdentities {
        even_deviation: even_deviation(&reduced, &original, map)?,
        odd_membership_excess: Some(odd_excess),
        fixed_point_residual: Some(space.distance(&tx, &x_star)?),
        horizon: IDENTITY_HORIZON,
    };
    Ok(SolveResult {
        solver: SolverKind::NoncyclicReduction,
        solution: Solution::Pair(x_star, q),
        residuals,
        trace: inner.trace,
        identities: Some(identities),
        alpha_hat: inner.alpha_hat,
    })
}

/// Dispatches on `kind`.
pub fn solve<M: SelfMap + Clone>(
    kind: SolverKind,
    map: &Contraction<M>,
    x0: &Point,
    opts: &SolverOptions,
) -> Result<SolveResult, SolveError> {
    match kind {
        SolverKind::Picard => picard_cyclic(map, x0, opts),
        SolverKind::ProjectionIteration => noncyclic_projection_iteration(map, x0, opts),
        SolverKind::CyclicReduction => solve_cyclic_via_reduction(map, x0, opts),
        SolverKind::NoncyclicReduction => solve_noncyclic_via_reduction(map, x0, opts),
    }
}
