//! The verification suite: every structural property of `P`, the
//! reductions and the solvers, checked numerically on one instance.

use serde::Serialize;

use super::file::{LoadedInstance, RunOverrides};
use super::HarnessError;
use crate::geometry::{sample_body, seeded_rng, Point, Side};
use crate::mappings::{certify_mode, side_tol, Contraction, MapError, MapSpec, Mode, SelfMap};
use crate::operators::{
    check_commutation, compose_with_projector, verify_projector_properties, ProximalProjector, PROPERTY_TOL,
};
use crate::solvers::{self, Solution, SolveError, SolveResult, SolverOptions};

pub const DISTANCE_TOL: f64 = 1e-7;
pub const COMMUTATION_TOL: f64 = 1e-8;
pub const IDENTITY_TOL: f64 = 1e-9;
pub const MEMBERSHIP_TOL: f64 = 1e-8;
pub const AGREEMENT_TOL: f64 = 1e-6;
pub const DECAY_SLACK: f64 = 1e-9;
pub const UNIQUENESS_STARTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub samples: usize,
    pub seed: u64,
    pub overrides: RunOverrides,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            samples: 1000,
            seed: 0,
            overrides: RunOverrides::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub property: &'static str,
    pub passed: bool,
    pub worst_deviation: f64,
    pub threshold: f64,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub degenerate: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<Vec<f64>>>,
}

impl CheckResult {
    fn bounded(name: impl Into<String>, property: &'static str, deviation: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            property,
            passed: deviation <= threshold,
            worst_deviation: deviation,
            threshold,
            degenerate: false,
            note: None,
            witness: None,
        }
    }

    fn failed(name: impl Into<String>, property: &'static str, note: impl ToString) -> Self {
        Self {
            passed: false,
            worst_deviation: f64::INFINITY,
            note: Some(note.to_string()),
            ..Self::bounded(name, property, 0.0, 0.0)
        }
    }

    fn with_note(mut self, note: impl ToString) -> Self {
        self.note = Some(note.to_string());
        self
    }

    fn with_witness(mut self, witness: Option<Vec<Vec<f64>>>) -> Self {
        if !self.passed {
            self.witness = witness;
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub instance: String,
    pub passed: bool,
    /// The proximal sets are single points, so several checks hold trivially.
    pub degenerate: bool,
    pub checks: Vec<CheckResult>,
}

impl VerificationReport {
    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

fn max_pair_distance(loaded: &LoadedInstance, a: &SolveResult, b: &SolveResult) -> Result<f64, HarnessError> {
    let space = loaded.instance.space();
    let dist = |x: &Point, y: &Point| space.distance(x, y).map_err(|e| HarnessError::Generate(e.to_string()));
    Ok(match (&a.solution, &b.solution) {
        (Solution::Pair(p1, q1), Solution::Pair(p2, q2)) => dist(p1, p2)?.max(dist(q1, q2)?),
        (x, y) => dist(x.primary(), y.primary())?,
    })
}

/// A start in `A0` for the map: the first run start that lies there,
/// otherwise the cached realizing point.
fn proximal_start(loaded: &LoadedInstance, map: &str) -> Point {
    let inst = &loaded.instance;
    loaded
        .file
        .runs
        .iter()
        .filter(|r| r.map == map)
        .map(|r| Point::from_column_slice(&r.x0))
        .find(|x| {
            inst.a().distance_to(x).is_ok_and(|d| d <= side_tol(inst))
                && inst.proximal_excess(x, Side::A).is_ok_and(|e| e <= side_tol(inst))
        })
        .unwrap_or_else(|| inst.realizing_point(Side::A).clone())
}

struct MapChecks<'a> {
    loaded: &'a LoadedInstance,
    opts: &'a VerifyOptions,
    solver: SolverOptions,
    checks: Vec<CheckResult>,
    decay: f64,
}

impl MapChecks<'_> {
    fn track(&mut self, res: &SolveResult) {
        self.decay = self.decay.max(res.trace.gap_decay_violation(res.alpha_hat));
    }

    fn run(&mut self, spec: &MapSpec, projector: &ProximalProjector) -> Result<(), HarnessError> {
        let name = SelfMap::name(spec).to_string();
        let samples = self.opts.samples;
        let seed = self.opts.seed;
        if spec.mode() == Mode::Noncyclic {
            let rep =
                check_commutation(spec, projector, samples, seed).map_err(|source: MapError| HarnessError::Map {
                    name: name.clone(),
                    source: Box::new(source),
                })?;
            self.checks.push(
                CheckResult::bounded(
                    format!("commutation.{name}"),
                    "commutation",
                    rep.max_deviation,
                    COMMUTATION_TOL,
                )
                .with_witness(rep.witness.map(|w| vec![w])),
            );
        }

        let contraction = match Contraction::certify(spec.clone(), samples, seed) {
            Ok(c) => c,
            Err(e) => {
                self.checks
                    .push(CheckResult::failed(format!("contraction.{name}"), "contraction", e));
                return Ok(());
            }
        };
        let cert = contraction.certificate();
        self.checks.push(
            CheckResult {
                passed: cert.alpha_hat < 1.0,
                ..CheckResult::bounded(format!("contraction.{name}"), "contraction", cert.alpha_hat, 1.0)
            }
            .with_note(if cert.exact { "exact" } else { "sampled" }),
        );

        match compose_with_projector(spec.clone(), projector.clone(), samples, seed) {
            Ok(composed) => {
                let mode = certify_mode(&composed, samples, seed).map_err(|source: MapError| HarnessError::Map {
                    name: name.clone(),
                    source: Box::new(source),
                })?;
                let flipped = composed.mode() == spec.mode().flipped();
                self.checks.push(
                    CheckResult {
                        passed: mode.holds && flipped,
                        ..CheckResult::bounded(format!("mode_flip.{name}"), "mode_flip", 0.0, 0.0)
                    }
                    .with_note(format!("composition is {}", composed.mode()))
                    .with_witness(mode.witness.map(|(x, y)| vec![x, y])),
                );
            }
            Err(e) => self
                .checks
                .push(CheckResult::failed(format!("mode_flip.{name}"), "mode_flip", e)),
        }

        let x0 = proximal_start(self.loaded, &name);
        let wrap = |source: SolveError| HarnessError::Solve {
            run: format!("equivalence.{name}"),
            source: Box::new(source),
        };
        let (direct, reduced) = match spec.mode() {
            Mode::Noncyclic => (
                solvers::noncyclic_projection_iteration(&contraction, &x0, &self.solver),
                solvers::solve_noncyclic_via_reduction(&contraction, &x0, &self.solver),
            ),
            Mode::Cyclic => (
                solvers::picard_cyclic(&contraction, &x0, &self.solver),
                solvers::solve_cyclic_via_reduction(&contraction, &x0, &self.solver),
            ),
        };
        match (direct, reduced) {
            (Ok(d), Ok(r)) => {
                self.track(&d);
                self.track(&r);
                let gap = max_pair_distance(self.loaded, &d, &r)?;
                let both = d.converged() && r.converged();
                self.checks.push(CheckResult {
                    passed: both && gap <= AGREEMENT_TOL,
                    ..CheckResult::bounded(format!("equivalence.{name}"), "equivalence", gap, AGREEMENT_TOL)
                });
            }
            (Err(e), _) | (_, Err(e)) => self.checks.push(CheckResult::failed(
                format!("equivalence.{name}"),
                "equivalence",
                wrap(e),
            )),
        }

        if spec.mode() == Mode::Cyclic {
            let mut rng = seeded_rng(seed);
            let inst = &self.loaded.instance;
            let mut solutions = Vec::new();
            for _ in 0..UNIQUENESS_STARTS {
                let start = sample_body(inst.a(), &mut rng).map_err(|e| HarnessError::Generate(e.to_string()))?;
                match solvers::picard_cyclic(&contraction, &start, &self.solver) {
                    Ok(res) => {
                        self.track(&res);
                        solutions.push(res);
                    }
                    Err(e) => {
                        self.checks
                            .push(CheckResult::failed(format!("uniqueness.{name}"), "uniqueness", wrap(e)));
                        return Ok(());
                    }
                }
            }
            let mut spread = 0.0_f64;
            for a in &solutions {
                for b in &solutions {
                    spread = spread.max(max_pair_distance(self.loaded, a, b)?);
                }
            }
            self.checks.push(CheckResult::bounded(
                format!("uniqueness.{name}"),
                "uniqueness",
                spread,
                AGREEMENT_TOL,
            ));
        }
        Ok(())
    }
}

/// Runs the full suite on a loaded instance.
pub fn run_verification(loaded: &LoadedInstance, opts: &VerifyOptions) -> Result<VerificationReport, HarnessError> {
    let inst = &loaded.instance;
    let mut checks = Vec::new();
    let mut degenerate = false;

    if let Some(expected) = loaded.file.expected_dist {
        checks.push(CheckResult::bounded(
            "distance",
            "distance",
            (inst.dist() - expected).abs(),
            DISTANCE_TOL,
        ));
    }

    let projector = ProximalProjector::new(inst.clone());
    if inst.is_bounded() {
        let rep = verify_projector_properties(&projector, opts.samples, opts.seed).map_err(|source: MapError| {
            HarnessError::Map {
                name: "P".into(),
                source: Box::new(source),
            }
        })?;
        degenerate = rep.degenerate;
        for (key, check) in &rep.properties {
            let mut result = CheckResult::bounded(
                format!("projector.{key}"),
                "projector",
                check.worst_deviation,
                PROPERTY_TOL,
            );
            result.passed = check.holds;
            result.degenerate = rep.degenerate;
            result.note = check.note.clone();
            result.witness = check.witness.clone().map(|(x, y)| vec![x, y]);
            checks.push(result);
        }
    } else {
        checks.push(
            CheckResult::bounded("projector", "projector", 0.0, PROPERTY_TOL).with_note("skipped: unbounded instance"),
        );
    }

    let solver = SolverOptions {
        tol: opts.overrides.tol.unwrap_or(SolverOptions::default().tol),
        max_iter: opts.overrides.max_iter.unwrap_or(SolverOptions::default().max_iter),
        certify_samples: opts.samples,
        seed: opts.seed,
    };
    let solved: Vec<_> = loaded
        .file
        .runs
        .iter()
        .map(|run| (run, loaded.solve_run(run, &opts.overrides, opts.samples)))
        .collect();
    for (spec, mode_cert) in &loaded.maps {
        let name = SelfMap::name(spec);
        let mut maps = MapChecks {
            loaded,
            opts,
            solver,
            checks: vec![CheckResult::bounded(format!("mode.{name}"), "mode", 0.0, 0.0)
                .with_note(if mode_cert.exact { "exact" } else { "sampled" })],
            decay: f64::NEG_INFINITY,
        };
        maps.run(spec, &projector)?;
        for (_, res) in solved.iter().filter(|(r, _)| r.map == name) {
            if let Ok(res) = res {
                maps.track(res);
            }
        }
        if maps.decay.is_finite() {
            maps.checks.push(CheckResult::bounded(
                format!("gap_decay.{name}"),
                "gap_decay",
                maps.decay,
                DECAY_SLACK,
            ));
        }
        checks.extend(maps.checks);
    }

    for (run, res) in solved {
        let prefix = format!("run.{}", run.name);
        let tol = loaded.options(run, &opts.overrides, opts.samples).tol;
        match res {
            Ok(res) => {
                checks.push(
                    CheckResult {
                        passed: res.converged(),
                        ..CheckResult::bounded(format!("{prefix}.converged"), "convergence", 0.0, 0.0)
                    }
                    .with_note(format!("{} iterations", res.trace.iterations_used)),
                );
                checks.push(CheckResult::bounded(
                    format!("{prefix}.best_proximity"),
                    "best_proximity",
                    res.residual(),
                    tol,
                ));
                if let Some(ids) = res.identities {
                    checks.push(CheckResult::bounded(
                        format!("{prefix}.even_identity"),
                        "reduction_identity",
                        ids.even_deviation,
                        IDENTITY_TOL,
                    ));
                    if let Some(odd) = ids.odd_membership_excess {
                        checks.push(CheckResult::bounded(
                            format!("{prefix}.odd_membership"),
                            "odd_membership",
                            odd,
                            MEMBERSHIP_TOL,
                        ));
                    }
                    if let Some(fp) = ids.fixed_point_residual {
                        checks.push(CheckResult::bounded(
                            format!("{prefix}.fixed_point"),
                            "fixed_point",
                            fp,
                            AGREEMENT_TOL,
                        ));
                    }
                }
            }
            Err(e) => checks.push(CheckResult::failed(prefix, "convergence", e)),
        }
    }

    Ok(VerificationReport {
        instance: loaded.name().to_string(),
        passed: checks.iter().all(|c| c.passed),
        degenerate,
        checks,
    })
}
