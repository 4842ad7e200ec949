//! The two desk-scale fixtures with closed-form answers.

use super::file::{BodySpec, InstanceFile, MapEntry, MapKindSpec, RunConfig, SpaceSpec};
use crate::mappings::Mode;
use crate::solvers::SolverKind;

pub const BUILTIN_NAMES: [&str; 2] = ["segpair", "ballpair"];

pub fn builtin(name: &str) -> Option<InstanceFile> {
    match name {
        "segpair" => Some(segpair()),
        "ballpair" => Some(ballpair()),
        _ => None,
    }
}

fn run(name: &str, solver: SolverKind, map: &str, x0: [f64; 2]) -> RunConfig {
    RunConfig {
        name: name.into(),
        solver,
        map: map.into(),
        x0: x0.to_vec(),
        tol: None,
        max_iter: None,
        seed: None,
    }
}

fn affine(name: &str, mode: Mode, matrix: [[f64; 2]; 2], offset: [f64; 2]) -> MapEntry {
    MapEntry {
        name: name.into(),
        mode,
        kind: MapKindSpec::Affine {
            matrix: matrix.iter().map(|r| r.to_vec()).collect(),
            offset: offset.to_vec(),
        },
    }
}

/// Unit segments over `[1, 2]` at heights 0 and 1.
fn segpair() -> InstanceFile {
    InstanceFile {
        name: "segpair".into(),
        space: SpaceSpec { dim: 2, p: 2.0 },
        a: BodySpec::Polytope {
            vertices: vec![vec![1.0, 0.0], vec![2.0, 0.0]],
            halfspaces: None,
        },
        b: BodySpec::Polytope {
            vertices: vec![vec![1.0, 1.0], vec![2.0, 1.0]],
            halfspaces: None,
        },
        tol: 1e-9,
        expected_dist: Some(1.0),
        maps: vec![
            // (x, y) -> (1 + (x - 1)/2, 1 - y)
            affine("T", Mode::Cyclic, [[0.5, 0.0], [0.0, -1.0]], [0.5, 1.0]),
            // (x, y) -> (1 + (x - 1)/2, y)
            affine("S", Mode::Noncyclic, [[0.5, 0.0], [0.0, 1.0]], [0.5, 0.0]),
        ],
        runs: vec![
            run("picard-T", SolverKind::Picard, "T", [2.0, 0.0]),
            run("projection-S", SolverKind::ProjectionIteration, "S", [2.0, 0.0]),
            run("reduction-T", SolverKind::CyclicReduction, "T", [2.0, 0.0]),
            run("reduction-S", SolverKind::NoncyclicReduction, "S", [2.0, 0.0]),
        ],
    }
}

/// Unit Euclidean balls centred at `(-2, 0)` and `(2, 0)`.
fn ballpair() -> InstanceFile {
    let constant = |name: &str, mode| MapEntry {
        name: name.into(),
        mode,
        kind: MapKindSpec::Constant,
    };
    InstanceFile {
        name: "ballpair".into(),
        space: SpaceSpec { dim: 2, p: 2.0 },
        a: BodySpec::Ball {
            center: vec![-2.0, 0.0],
            radius: 1.0,
        },
        b: BodySpec::Ball {
            center: vec![2.0, 0.0],
            radius: 1.0,
        },
        tol: 1e-9,
        expected_dist: Some(2.0),
        maps: vec![
            constant("const-cyclic", Mode::Cyclic),
            constant("const-noncyclic", Mode::Noncyclic),
        ],
        runs: vec![
            run("picard-const", SolverKind::Picard, "const-cyclic", [-2.0, 0.0]),
            run(
                "projection-const",
                SolverKind::ProjectionIteration,
                "const-noncyclic",
                [-1.0, 0.0],
            ),
            run(
                "reduction-cyclic",
                SolverKind::CyclicReduction,
                "const-cyclic",
                [-1.0, 0.0],
            ),
            run(
                "reduction-noncyclic",
                SolverKind::NoncyclicReduction,
                "const-noncyclic",
                [-1.0, 0.0],
            ),
        ],
    }
}
