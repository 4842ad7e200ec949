//! Instance files, built-in fixtures, random instance generation, the
//! verification suite and trace output.

mod builtin;
mod file;
mod generate;
mod output;
mod verify;

use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::mappings::MapError;
use crate::solvers::SolveError;

pub use builtin::{builtin, BUILTIN_NAMES};
pub use file::{
    AffineSpec, BodySpec, HalfspaceSpec, InstanceFile, LoadedInstance, MapEntry, MapKindSpec, RunConfig, RunOverrides,
    SpaceSpec,
};
pub use generate::{generate_instance, Family};
pub use output::{write_summary, write_trace_csv, RunSummary};
pub use verify::{run_verification, CheckResult, VerificationReport, VerifyOptions};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("parse error at `{field}` (line {line}, column {column}): {message}")]
    Parse {
        field: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: String, reason: String },
    #[error("map `{name}`: {source}")]
    Map {
        name: String,
        #[source]
        source: Box<MapError>,
    },
    #[error("map `{name}` is declared {declared} but sends {point:?} to {image:?}")]
    ModeNotCertified {
        name: String,
        declared: String,
        point: Vec<f64>,
        image: Vec<f64>,
    },
    #[error("unknown map `{0}`")]
    UnknownMap(String),
    #[error("unknown run `{0}`")]
    UnknownRun(String),
    #[error("`{0}` is neither a file nor a built-in instance")]
    UnknownInstance(String),
    #[error("run `{run}`: {source}")]
    Solve {
        run: String,
        #[source]
        source: Box<SolveError>,
    },
    #[error("invalid generator request: {0}")]
    Generate(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
