//! JSON instance files.

use std::collections::HashSet;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::geometry::{ConvexBody, GeometryError, LinearConstraint, LpSpace, Point, ProximityInstance, Side};
use crate::mappings::{certify_mode, AffinePiece, Contraction, MapError, MapKind, MapSpec, Mode, ModeCertificate};
use crate::solvers::{self, SolveError, SolveResult, SolverKind, SolverOptions};

fn default_tol() -> f64 {
    1e-9
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSpec {
    pub dim: usize,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HalfspaceSpec {
    pub normal: Vec<f64>,
    pub offset: f64,
    #[serde(default, skip_serializing_if = "is_false")]
    pub equality: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum BodySpec {
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    /// `{x : <normal, x> <= offset}`
    Halfspace {
        normal: Vec<f64>,
        offset: f64,
    },
    Hyperplane {
        normal: Vec<f64>,
        offset: f64,
    },
    Polytope {
        vertices: Vec<Vec<f64>>,
        /// Required in dimension 3 and up.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        halfspaces: Option<Vec<HalfspaceSpec>>,
    },
    Intersection {
        bodies: Vec<BodySpec>,
        witness: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineSpec {
    pub matrix: Vec<Vec<f64>>,
    pub offset: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapKindSpec {
    Affine {
        matrix: Vec<Vec<f64>>,
        offset: Vec<f64>,
    },
    SideAffine {
        on_a: AffineSpec,
        on_b: AffineSpec,
    },
    /// Sends each side to a realizing point (chosen by the mode).
    Constant,
    /// Noncyclic blackbox contracting `A` by `beta` and `B` by `beta^2`
    /// toward the realizing pair.
    Skewed {
        beta: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapEntry {
    pub name: String,
    pub mode: Mode,
    pub kind: MapKindSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    pub solver: SolverKind,
    pub map: String,
    pub x0: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub name: String,
    pub space: SpaceSpec,
    pub a: BodySpec,
    pub b: BodySpec,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_dist: Option<f64>,
    #[serde(default)]
    pub maps: Vec<MapEntry>,
    #[serde(default)]
    pub runs: Vec<RunConfig>,
}

fn invalid(field: impl Into<String>, err: impl ToString) -> HarnessError {
    HarnessError::Invalid {
        field: field.into(),
        reason: err.to_string(),
    }
}

/// Attaches `prefix` to the field named by a body validation error.
fn body_error(prefix: &str, err: GeometryError) -> HarnessError {
    match err {
        GeometryError::InvalidBody { field, reason } => HarnessError::Invalid {
            field: format!("{prefix}.{field}"),
            reason,
        },
        other => invalid(prefix, other),
    }
}

fn vector(space: &LpSpace, field: &str, coords: &[f64]) -> Result<Point, HarnessError> {
    let x = Point::from_column_slice(coords);
    space.check(&x).map_err(|e| invalid(field, e))?;
    Ok(x)
}

fn affine(spec_rows: &[Vec<f64>], offset: &[f64], field: &str) -> Result<AffinePiece, HarnessError> {
    AffinePiece::from_rows(spec_rows, offset).map_err(|e| invalid(field, e))
}

impl BodySpec {
    pub fn build(&self, space: LpSpace, field: &str) -> Result<ConvexBody, HarnessError> {
        let sub = |name: &str| format!("{field}.{name}");
        let body = match self {
            BodySpec::Ball { center, radius } => {
                ConvexBody::ball(space, vector(&space, &sub("center"), center)?, *radius)
            }
            BodySpec::Box { lo, hi } => {
                ConvexBody::cuboid(space, vector(&space, &sub("lo"), lo)?, vector(&space, &sub("hi"), hi)?)
            }
            BodySpec::Halfspace { normal, offset } => {
                ConvexBody::halfspace(space, vector(&space, &sub("normal"), normal)?, *offset)
            }
            BodySpec::Hyperplane { normal, offset } => {
                ConvexBody::hyperplane(space, vector(&space, &sub("normal"), normal)?, *offset)
            }
            BodySpec::Polytope { vertices, halfspaces } => {
                let verts = vertices
                    .iter()
                    .enumerate()
                    .map(|(i, v)| vector(&space, &format!("{field}.vertices[{i}]"), v))
                    .collect::<Result<Vec<_>, _>>()?;
                match halfspaces {
                    None => ConvexBody::polytope(space, verts),
                    Some(hs) => {
                        let mut constraints = Vec::with_capacity(hs.len());
                        for (i, h) in hs.iter().enumerate() {
                            let n = vector(&space, &format!("{field}.halfspaces[{i}].normal"), &h.normal)?;
                            constraints.push(if h.equality {
                                LinearConstraint::eq(n, h.offset)
                            } else {
                                LinearConstraint::le(n, h.offset)
                            });
                        }
                        ConvexBody::polytope_with_halfspaces(space, verts, constraints)
                    }
                }
            }
            BodySpec::Intersection { bodies, witness } => {
                let members = bodies
                    .iter()
                    .enumerate()
                    .map(|(i, b)| b.build(space, &format!("{field}.bodies[{i}]")))
                    .collect::<Result<Vec<_>, _>>()?;
                ConvexBody::intersection(space, members, vector(&space, &sub("witness"), witness)?)
            }
        };
        body.map_err(|e| body_error(field, e))
    }
}

/// An instance file turned into live objects, with every declared map
/// mode-certified.
#[derive(Debug, Clone)]
pub struct LoadedInstance {
    pub file: InstanceFile,
    pub instance: Arc<ProximityInstance>,
    pub maps: Vec<(MapSpec, ModeCertificate)>,
}

impl InstanceFile {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            let inner = e.into_inner();
            let full = inner.to_string();
            let message = full
                .rsplit_once(" at line ")
                .map_or(full.as_str(), |(m, _)| m)
                .to_string();
            HarnessError::Parse {
                field,
                line: inner.line(),
                column: inner.column(),
                message,
            }
        })
    }

    pub fn from_path(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String, HarnessError> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn build_instance(&self) -> Result<ProximityInstance, HarnessError> {
        let space = LpSpace::new(self.space.dim, self.space.p).map_err(|e| match e {
            GeometryError::ZeroDimension => invalid("space.dim", e),
            _ => invalid("space.p", e),
        })?;
        let a = self.a.build(space, "a")?;
        let b = self.b.build(space, "b")?;
        ProximityInstance::new(a, b, self.tol).map_err(|e| match e {
            GeometryError::InvalidTolerance(_) => invalid("tol", e),
            _ => invalid("instance", e),
        })
    }

    fn build_map(
        &self,
        index: usize,
        entry: &MapEntry,
        inst: &Arc<ProximityInstance>,
    ) -> Result<MapSpec, HarnessError> {
        let field = format!("maps[{index}].kind");
        let map_err = |source: MapError| HarnessError::Map {
            name: entry.name.clone(),
            source: Box::new(source),
        };
        let kind = match &entry.kind {
            MapKindSpec::Affine { matrix, offset } => MapKind::Affine(affine(matrix, offset, &field)?),
            MapKindSpec::SideAffine { on_a, on_b } => MapKind::SideAffine {
                on_a: affine(&on_a.matrix, &on_a.offset, &format!("{field}.on_a"))?,
                on_b: affine(&on_b.matrix, &on_b.offset, &format!("{field}.on_b"))?,
            },
            MapKindSpec::Constant => {
                let (ra, rb) = inst.realizing_pair();
                let (to_a, to_b) = match entry.mode {
                    Mode::Cyclic => (rb.clone(), ra.clone()),
                    Mode::Noncyclic => (ra.clone(), rb.clone()),
                };
                let zero = DMatrix::zeros(ra.len(), ra.len());
                MapKind::SideAffine {
                    on_a: AffinePiece::new(zero.clone(), to_a).map_err(map_err)?,
                    on_b: AffinePiece::new(zero, to_b).map_err(map_err)?,
                }
            }
            MapKindSpec::Skewed { beta } => {
                if entry.mode != Mode::Noncyclic {
                    return Err(invalid(format!("maps[{index}].mode"), "skewed maps are noncyclic"));
                }
                if !(beta.is_finite() && *beta > 0.0 && *beta < 1.0) {
                    return Err(invalid(format!("{field}.beta"), "must lie in (0, 1)"));
                }
                let beta = *beta;
                let (ra, rb) = (
                    inst.realizing_point(Side::A).clone(),
                    inst.realizing_point(Side::B).clone(),
                );
                return Ok(MapSpec::blackbox(
                    &entry.name,
                    entry.mode,
                    inst.clone(),
                    move |x, side| match side {
                        Side::A => &ra + (x - &ra) * beta,
                        Side::B => &rb + (x - &rb) * (beta * beta),
                    },
                ));
            }
        };
        MapSpec::new(&entry.name, kind, entry.mode, inst.clone()).map_err(map_err)
    }

    /// Builds the instance and maps, re-certifying every declared mode.
    pub fn load(&self, samples: usize, seed: u64) -> Result<LoadedInstance, HarnessError> {
        let instance = Arc::new(self.build_instance()?);
        let mut names = HashSet::new();
        let mut maps = Vec::with_capacity(self.maps.len());
        for (i, entry) in self.maps.iter().enumerate() {
            if !names.insert(entry.name.as_str()) {
                return Err(invalid(
                    format!("maps[{i}].name"),
                    format!("duplicate map `{}`", entry.name),
                ));
            }
            let spec = self.build_map(i, entry, &instance)?;
            let cert = certify_mode(&spec, samples, seed).map_err(|source: MapError| HarnessError::Map {
                name: entry.name.clone(),
                source: Box::new(source),
            })?;
            if !cert.holds {
                let (point, image) = cert.witness.clone().unwrap_or_default();
                return Err(HarnessError::ModeNotCertified {
                    name: entry.name.clone(),
                    declared: entry.mode.to_string(),
                    point,
                    image,
                });
            }
            maps.push((spec, cert));
        }
        let mut runs = HashSet::new();
        for (i, run) in self.runs.iter().enumerate() {
            if !runs.insert(run.name.as_str()) {
                return Err(invalid(
                    format!("runs[{i}].name"),
                    format!("duplicate run `{}`", run.name),
                ));
            }
            if !names.contains(run.map.as_str()) {
                return Err(HarnessError::UnknownMap(run.map.clone()));
            }
            vector(instance.space(), &format!("runs[{i}].x0"), &run.x0)?;
        }
        Ok(LoadedInstance {
            file: self.clone(),
            instance,
            maps,
        })
    }
}

/// Command-line overrides for run settings.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunOverrides {
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub seed: Option<u64>,
}

impl LoadedInstance {
    pub fn name(&self) -> &str {
        &self.file.name
    }

    pub fn map(&self, name: &str) -> Result<&MapSpec, HarnessError> {
        self.maps
            .iter()
            .map(|(m, _)| m)
            .find(|m| crate::mappings::SelfMap::name(*m) == name)
            .ok_or_else(|| HarnessError::UnknownMap(name.to_string()))
    }

    pub fn run(&self, name: &str) -> Result<&RunConfig, HarnessError> {
        self.file
            .runs
            .iter()
            .find(|r| r.name == name)
            .ok_or_else(|| HarnessError::UnknownRun(name.to_string()))
    }

    pub fn options(&self, run: &RunConfig, overrides: &RunOverrides, certify_samples: usize) -> SolverOptions {
        let defaults = SolverOptions::default();
        SolverOptions {
            tol: overrides.tol.or(run.tol).unwrap_or(defaults.tol),
            max_iter: overrides.max_iter.or(run.max_iter).unwrap_or(defaults.max_iter),
            certify_samples,
            seed: overrides.seed.or(run.seed).unwrap_or(defaults.seed),
        }
    }

    /// Certifies the run's map as a contraction and executes its solver.
    pub fn solve_run(
        &self,
        run: &RunConfig,
        overrides: &RunOverrides,
        certify_samples: usize,
    ) -> Result<SolveResult, HarnessError> {
        let opts = self.options(run, overrides, certify_samples);
        let wrap = |source: SolveError| HarnessError::Solve {
            run: run.name.clone(),
            source: Box::new(source),
        };
        let map = self.map(&run.map)?.clone();
        let contraction = Contraction::certify(map, certify_samples, opts.seed).map_err(|e| wrap(e.into()))?;
        let x0 = Point::from_column_slice(&run.x0);
        solvers::solve(run.solver, &contraction, &x0, &opts).map_err(wrap)
    }
}
