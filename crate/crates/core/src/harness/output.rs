//! CSV traces and JSON run summaries.

use std::io::Write;

use serde::Serialize;

use super::file::RunConfig;
use super::HarnessError;
use crate::solvers::{IterationTrace, ReductionIdentities, Residuals, Solution, SolveResult};

/// Writes one row per trace entry: `index,side,x0..,y0..,gap`. The `y`
/// columns hold the companion point and are empty when it is absent.
pub fn write_trace_csv<W: Write>(writer: W, trace: &IterationTrace, dim: usize) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["index".to_string(), "side".to_string()];
    header.extend((0..dim).map(|i| format!("x{i}")));
    header.extend((0..dim).map(|i| format!("y{i}")));
    header.push("gap".into());
    w.write_record(&header)?;
    for e in &trace.entries {
        let mut row = vec![e.index.to_string(), e.side.to_string()];
        row.extend(e.point.iter().map(|v| v.to_string()));
        match &e.companion {
            Some(y) => row.extend(y.iter().map(|v| v.to_string())),
            None => row.extend(std::iter::repeat_n(String::new(), dim)),
        }
        row.push(e.gap.to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub instance: String,
    pub run: String,
    pub solver: String,
    pub map: String,
    pub kind: &'static str,
    pub converged: bool,
    pub iterations: usize,
    pub predicted_iterations: Option<f64>,
    pub alpha_hat: f64,
    pub residual: f64,
    pub residuals: Residuals,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<Vec<f64>>,
    /// Smallest `|gap|` seen along the trace.
    pub best_gap: f64,
    pub final_gap: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub identities: Option<ReductionIdentities>,
}

impl RunSummary {
    pub fn new(instance: &str, run: &RunConfig, res: &SolveResult) -> Self {
        let (x, p, q) = match &res.solution {
            Solution::Point(x) => (Some(x.as_slice().to_vec()), None, None),
            Solution::Pair(p, q) => (None, Some(p.as_slice().to_vec()), Some(q.as_slice().to_vec())),
        };
        Self {
            instance: instance.to_string(),
            run: run.name.clone(),
            solver: res.solver.to_string(),
            map: run.map.clone(),
            kind: res.solution.kind(),
            converged: res.converged(),
            iterations: res.trace.iterations_used,
            predicted_iterations: res.trace.predicted_iterations,
            alpha_hat: res.alpha_hat,
            residual: res.residual(),
            residuals: res.residuals,
            x,
            p,
            q,
            best_gap: res.trace.gaps().map(f64::abs).fold(f64::INFINITY, f64::min),
            final_gap: res.trace.entries.last().map_or(f64::NAN, |e| e.gap),
            identities: res.identities,
        }
    }
}

pub fn write_summary<W: Write>(mut writer: W, summary: &RunSummary) -> Result<(), HarnessError> {
    serde_json::to_writer_pretty(&mut writer, summary)?;
    writeln!(writer).map_err(serde_json::Error::io)?;
    Ok(())
}
