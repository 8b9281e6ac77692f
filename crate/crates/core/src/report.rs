//! CSV serialization of run results.
//!
//! Floats are written in shortest round-trip form so every summary can be
//! recomputed exactly from `report.csv`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::EvaluationReport;
use crate::pipeline::RunSummary;
use crate::solver::IterationRecord;

const METRICS_HEADER: &str = "nmi,acc,f_score,avgent,precision,rand_index";

fn write(path: &Path, text: String) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Identifying columns; `lambda2` is the weight actually applied.
fn meta_fields(run: &RunSummary) -> String {
    format!(
        "{},{},{},{},{},{}",
        csv_escape(&run.dataset),
        run.variant,
        run.params.lambda1,
        run.params.effective_lambda2(),
        run.params.alpha,
        run.knn
    )
}

fn csv_escape(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn metric_fields(report: Option<&EvaluationReport>) -> String {
    match report {
        Some(r) => r
            .values()
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(","),
        None => ",,,,,".to_string(),
    }
}

/// One row per restart of every run.
pub fn report_csv(runs: &[RunSummary]) -> String {
    let mut out = format!(
        "dataset,variant,lambda1,lambda2,alpha,knn,restart,seed,view,status,converged,iterations,{METRICS_HEADER}\n"
    );
    for run in runs {
        let view = run.best_view.map(|v| v.to_string()).unwrap_or_default();
        for r in &run.restarts {
            let (status, converged, iterations, report) = match &r.result {
                Ok(res) => (
                    "ok".to_string(),
                    res.converged.to_string(),
                    res.iterations.to_string(),
                    res.report,
                ),
                Err(msg) => (
                    csv_escape(&format!("failed: {msg}")),
                    String::new(),
                    String::new(),
                    None,
                ),
            };
            let _ = writeln!(
                out,
                "{},{},{},{view},{status},{converged},{iterations},{}",
                meta_fields(run),
                r.restart,
                r.seed,
                metric_fields(report.as_ref())
            );
        }
    }
    out
}

/// Mean and standard deviation per metric, one row per run.
pub fn summary_csv(runs: &[RunSummary]) -> String {
    let mut out = String::from("dataset,variant,lambda1,lambda2,alpha,knn,view,restarts,successes");
    for name in EvaluationReport::NAMES {
        let _ = write!(out, ",{name}_mean,{name}_std");
    }
    for name in EvaluationReport::NAMES {
        let _ = write!(out, ",{name}");
    }
    out.push('\n');
    for run in runs {
        let view = run.best_view.map(|v| v.to_string()).unwrap_or_default();
        let _ = write!(
            out,
            "{},{view},{},{}",
            meta_fields(run),
            run.restarts.len(),
            run.successes()
        );
        match &run.summary {
            Some(s) => {
                for e in s.entries() {
                    let _ = write!(out, ",{},{}", e.mean, e.std);
                }
                for e in s.entries() {
                    let _ = write!(out, ",{e}");
                }
            }
            None => out.push_str(&",".repeat(18)),
        }
        out.push('\n');
    }
    out
}

/// Sweep table: `(lambda1, lambda2)` followed by metric means and stds.
pub fn sweep_csv(runs: &[RunSummary]) -> String {
    let mut out = String::from("lambda1,lambda2,successes");
    for name in EvaluationReport::NAMES {
        let _ = write!(out, ",{name}_mean,{name}_std");
    }
    out.push('\n');
    for run in runs {
        let _ = write!(
            out,
            "{},{},{}",
            run.params.lambda1,
            run.params.lambda2,
            run.successes()
        );
        match &run.summary {
            Some(s) => {
                for e in s.entries() {
                    let _ = write!(out, ",{},{}", e.mean, e.std);
                }
            }
            None => out.push_str(&",".repeat(12)),
        }
        out.push('\n');
    }
    out
}

/// Convergence trace: iteration, per-view residuals, `Z - Q` residual,
/// objective (blank unless traced) and `mu`.
pub fn trace_csv(history: &[IterationRecord]) -> String {
    let views = history.first().map_or(0, |h| h.view_residuals.len());
    let mut out = String::from("iteration");
    for k in 0..views {
        let _ = write!(out, ",residual_view{k}");
    }
    out.push_str(",residual_zq,objective,mu\n");
    for h in history {
        let _ = write!(out, "{}", h.iteration);
        for r in &h.view_residuals {
            let _ = write!(out, ",{r}");
        }
        let objective = h.objective.map(|o| o.to_string()).unwrap_or_default();
        let _ = writeln!(out, ",{},{objective},{}", h.zq_residual, h.mu);
    }
    out
}

pub fn write_report_csv(path: &Path, runs: &[RunSummary]) -> Result<()> {
    write(path, report_csv(runs))
}

pub fn write_summary_csv(path: &Path, runs: &[RunSummary]) -> Result<()> {
    write(path, summary_csv(runs))
}

pub fn write_sweep_csv(path: &Path, runs: &[RunSummary]) -> Result<()> {
    write(path, sweep_csv(runs))
}

pub fn write_trace_csv(path: &Path, history: &[IterationRecord]) -> Result<()> {
    write(path, trace_csv(history))
}
