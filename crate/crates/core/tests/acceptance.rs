//! Acceptance run: one pass/fail line per criterion, non-zero exit on failure.

use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use proxipair::geometry::{distance_between, point, Point, ProximityInstance};
use proxipair::harness::{builtin, generate_instance, Family, LoadedInstance, RunConfig};
use proxipair::mappings::{Contraction, MapSpec, Mode, SelfMap};
use proxipair::operators::{check_commutation, compose_with_projector, verify_projector_properties, ProximalProjector};
use proxipair::solvers::{
    noncyclic_projection_iteration, picard_cyclic, solve_cyclic_via_reduction, solve_noncyclic_via_reduction, Solution,
    SolveResult, SolverKind, SolverOptions,
};

const SAMPLES: usize = 1000;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn load(name: &str) -> LoadedInstance {
    builtin(name).unwrap().load(SAMPLES, 0).unwrap()
}

fn fixtures() -> Vec<LoadedInstance> {
    vec![load("segpair"), load("ballpair")]
}

fn certified(loaded: &LoadedInstance, map: &str) -> Contraction<MapSpec> {
    Contraction::certify(loaded.map(map).unwrap().clone(), SAMPLES, 0).unwrap()
}

fn dist(a: &Point, b: &Point) -> f64 {
    (a - b).norm()
}

/// `x -> 1 + (x - 1)/2` on the first coordinate.
fn halve(x: f64) -> f64 {
    1.0 + (x - 1.0) / 2.0
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

fn picard_orbit() -> Outcome {
    let seg = load("segpair");
    let t = certified(&seg, "T");
    let x0 = point(&[2.0, 0.0]);
    let (res, elapsed) = timed(|| picard_cyclic(&t, &x0, &SolverOptions::default()).unwrap());
    let mut worst = 0.0_f64;
    let mut x = 2.0;
    for n in 0..=15 {
        let Some(got) = res.trace.iterate(2 * n) else {
            return Err(format!("iterate {} missing", 2 * n));
        };
        worst = worst.max(dist(got, &point(&[x, 0.0])));
        x = halve(halve(x));
    }
    let x_star = res.solution.primary();
    let tx = t.map().apply(x_star).unwrap();
    let residual = dist(x_star, &tx) - 1.0;
    ensure(
        worst <= 1e-9 && residual <= 1e-9 && elapsed < Duration::from_millis(10),
        format!("orbit deviation {worst:.2e}, residual {residual:.2e}, {elapsed:?}"),
    )
}

fn projection_orbit() -> Outcome {
    let seg = load("segpair");
    let s = certified(&seg, "S");
    let x0 = point(&[2.0, 0.0]);
    let (res, elapsed) = timed(|| noncyclic_projection_iteration(&s, &x0, &SolverOptions::default()).unwrap());
    let mut worst = 0.0_f64;
    let mut x = 2.0;
    for e in &res.trace.entries {
        let y = e.companion.as_ref().ok_or("missing projection")?;
        worst = worst
            .max(dist(&e.point, &point(&[x, 0.0])))
            .max(dist(y, &point(&[x, 1.0])));
        x = halve(x);
    }
    let residual = res.residual();
    ensure(
        worst <= 1e-9 && residual <= 1e-9 && elapsed < Duration::from_millis(10),
        format!(
            "{} iterates, deviation {worst:.2e}, residual {residual:.2e}, {elapsed:?}",
            res.trace.entries.len()
        ),
    )
}

fn projector_properties() -> Outcome {
    let start = Instant::now();
    let mut instances = vec![load("segpair").instance];
    for p in [1.5, 2.0, 3.0] {
        for seed in 0..100 {
            let dim = 2 + (seed as usize % 4);
            let file = generate_instance(Family::SeparatedBoxes, seed, dim, p, None).unwrap();
            instances.push(Arc::new(file.build_instance().unwrap()));
        }
    }
    let mut worst = 0.0_f64;
    let mut failures = Vec::new();
    for (k, inst) in instances.iter().enumerate() {
        let report = verify_projector_properties(&ProximalProjector::new(inst.clone()), SAMPLES, k as u64).unwrap();
        worst = worst.max(report.worst_deviation());
        if !report.all_hold() || report.worst_deviation() > 1e-8 {
            failures.push(k);
        }
    }
    let elapsed = start.elapsed();
    ensure(
        failures.is_empty() && elapsed < Duration::from_secs(5),
        format!(
            "{} instances, worst {worst:.2e}, failing {failures:?}, {elapsed:?}",
            instances.len()
        ),
    )
}

fn commutation() -> Outcome {
    let mut worst = 0.0_f64;
    let mut checked = 0;
    for loaded in fixtures() {
        let projector = ProximalProjector::new(loaded.instance.clone());
        for (map, _) in &loaded.maps {
            if map.mode() != Mode::Noncyclic || Contraction::certify(map.clone(), SAMPLES, 0).is_err() {
                continue;
            }
            let report = check_commutation(map, &projector, SAMPLES, 0).unwrap();
            worst = worst.max(report.max_deviation);
            checked += 1;
        }
    }
    ensure(
        checked >= 2 && worst <= 1e-8,
        format!("{checked} maps, worst {worst:.2e}"),
    )
}

fn orbit(map: &dyn SelfMap, x0: &Point, steps: usize) -> Vec<Point> {
    let mut out = vec![x0.clone()];
    for _ in 0..steps {
        let next = map.apply(out.last().unwrap()).unwrap();
        out.push(next);
    }
    out
}

fn reduction_identities() -> Outcome {
    let seg = load("segpair");
    let x0 = point(&[2.0, 0.0]);
    let projector = ProximalProjector::new(seg.instance.clone());
    let mut even = 0.0_f64;
    let mut odd = 0.0_f64;
    for name in ["T", "S"] {
        let outer = seg.map(name).unwrap().clone();
        let composed = compose_with_projector(outer.clone(), projector.clone(), SAMPLES, 0).unwrap();
        let reduced = orbit(&composed, &x0, 41);
        let original = orbit(&outer, &x0, 41);
        for n in 0..=20 {
            even = even.max(dist(&reduced[2 * n], &original[2 * n]));
        }
        if name == "S" {
            for n in 0..20 {
                let y = &reduced[2 * n + 1];
                // B0 is the segment [1, 2] x {1}
                let excess = (y[1] - 1.0).abs().max(1.0 - y[0]).max(y[0] - 2.0).max(0.0);
                odd = odd.max(excess);
            }
        }
    }
    let t = certified(&seg, "T");
    let s = certified(&seg, "S");
    let opts = SolverOptions::default();
    let reported = [
        solve_cyclic_via_reduction(&t, &x0, &opts).unwrap(),
        solve_noncyclic_via_reduction(&s, &x0, &opts).unwrap(),
    ];
    for r in &reported {
        let ids = r.identities.unwrap();
        even = even.max(ids.even_deviation);
        odd = odd.max(ids.odd_membership_excess.unwrap_or(0.0));
    }
    ensure(
        even <= 1e-9 && odd <= 1e-8,
        format!("even deviation {even:.2e}, odd membership {odd:.2e}"),
    )
}

fn projection_run(loaded: &LoadedInstance) -> &RunConfig {
    loaded
        .file
        .runs
        .iter()
        .find(|r| r.solver == SolverKind::ProjectionIteration)
        .unwrap()
}

fn equivalence() -> Outcome {
    let opts = SolverOptions::default();
    let mut worst = 0.0_f64;
    for loaded in fixtures() {
        let x0 = Point::from_vec(projection_run(&loaded).x0.clone());
        for (map, _) in &loaded.maps {
            let c = Contraction::certify(map.clone(), SAMPLES, 0).unwrap();
            let (direct, reduced) = match map.mode() {
                Mode::Noncyclic => (
                    noncyclic_projection_iteration(&c, &x0, &opts).unwrap(),
                    solve_noncyclic_via_reduction(&c, &x0, &opts).unwrap(),
                ),
                Mode::Cyclic => (
                    picard_cyclic(&c, &x0, &opts).unwrap(),
                    solve_cyclic_via_reduction(&c, &x0, &opts).unwrap(),
                ),
            };
            let gap = match (&direct.solution, &reduced.solution) {
                (Solution::Pair(p1, q1), Solution::Pair(p2, q2)) => dist(p1, p2).max(dist(q1, q2)),
                (a, b) => dist(a.primary(), b.primary()),
            };
            worst = worst.max(gap);
        }
    }
    ensure(worst <= 1e-6, format!("worst disagreement {worst:.2e}"))
}

fn uniqueness() -> Outcome {
    let seg = load("segpair");
    let t = certified(&seg, "T");
    let limits: Vec<Point> = [1.0, 1.25, 1.5, 1.75, 2.0]
        .iter()
        .map(|&x| {
            let res = picard_cyclic(&t, &point(&[x, 0.0]), &SolverOptions::default()).unwrap();
            res.solution.primary().clone()
        })
        .collect();
    let mut worst = 0.0_f64;
    for a in &limits {
        for b in &limits {
            worst = worst.max(dist(a, b));
        }
    }
    ensure(worst <= 1e-6, format!("5 starts, pairwise spread {worst:.2e}"))
}

fn modulus_oracle() -> Outcome {
    let n = 100_000;
    let grid = (1..=n)
        .map(|k| {
            let u = k as f64 / n as f64;
            ((u * u / 4.0 + 1.0).sqrt() - 1.0) / ((u * u + 1.0).sqrt() - 1.0)
        })
        .fold(f64::NEG_INFINITY, f64::max);
    let seg = load("segpair");
    let alpha = certified(&seg, "T").alpha_hat();
    ensure(
        (alpha - 0.2850).abs() <= 1e-3 && (alpha - grid).abs() <= 1e-3,
        format!("alpha_hat {alpha:.6}, grid oracle {grid:.6}"),
    )
}

fn all_runs() -> Vec<(String, SolveResult)> {
    let mut out = Vec::new();
    for loaded in fixtures() {
        for run in &loaded.file.runs {
            let res = loaded.solve_run(run, &Default::default(), SAMPLES).unwrap();
            out.push((format!("{}.{}", loaded.name(), run.name), res));
        }
    }
    out
}

fn gap_decay() -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    let mut at = String::new();
    let runs = all_runs();
    for (name, res) in &runs {
        let v = res.trace.gap_decay_violation(res.alpha_hat);
        if v > worst {
            worst = v;
            at = name.clone();
        }
    }
    ensure(
        worst <= 1e-9,
        format!("{} runs, worst excess {worst:.2e} ({at})", runs.len()),
    )
}

fn distance_oracle() -> Outcome {
    let mut worst = 0.0_f64;
    for seed in 0..100u64 {
        let family = Family::ALL[seed as usize % 3];
        let p = [1.5, 2.0, 3.0][(seed as usize / 3) % 3];
        let dim = 2 + seed as usize % 5;
        let file = generate_instance(family, seed, dim, p, None).unwrap();
        let inst = file.build_instance().unwrap();
        let d = distance_between(inst.a(), inst.b(), 1e-12, 100_000).unwrap();
        worst = worst.max((d.dist - file.expected_dist.unwrap()).abs());
    }
    let balls = load("ballpair");
    let inst: &ProximityInstance = &balls.instance;
    let d = distance_between(inst.a(), inst.b(), 1e-12, 100_000).unwrap();
    let ball_dev = (d.dist - 2.0)
        .abs()
        .max(dist(&d.a, &point(&[-1.0, 0.0])))
        .max(dist(&d.b, &point(&[1.0, 0.0])));
    ensure(
        worst <= 1e-7 && ball_dev <= 1e-8,
        format!("generated worst {worst:.2e}, ballpair deviation {ball_dev:.2e}"),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("picard even orbit on segpair", picard_orbit),
        ("projection iteration orbit on segpair", projection_orbit),
        ("proximal projector properties", projector_properties),
        ("commutation with the projector", commutation),
        ("reduction identities", reduction_identities),
        ("solver equivalence on fixtures", equivalence),
        ("uniqueness over five starts", uniqueness),
        ("contraction modulus of T", modulus_oracle),
        ("geometric gap decay", gap_decay),
        ("distance oracle", distance_oracle),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let (flag, detail) = match std::panic::catch_unwind(check) {
            Ok(Ok(d)) => ("PASS", d),
            Ok(Err(d)) => ("FAIL", d),
            Err(_) => ("FAIL", "panicked".to_string()),
        };
        if flag == "FAIL" {
            failed += 1;
        }
        println!("[{flag}] {:>2} {name}: {detail}", i + 1);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
