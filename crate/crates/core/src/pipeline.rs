//! End-to-end runs: graphs, optimization, spectral clustering and scoring
//! over seeded restarts. Restart `r` uses seed `base_seed + r` for both the
//! random `Z` initialization and the k-means seeding.

use log::info;
use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::MultiViewDataset;
use crate::error::{Error, Result};
use crate::graph::{default_neighbor_count, GraphSet};
use crate::linalg::DenseMatrix;
use crate::metrics::{evaluate_with, EvaluationReport, NmiNormalization, ReportSummary};
use crate::solver::{HyperParams, IterationRecord, Regularizer, Solver, Variant};
use crate::spectral::{affinity_from_representation, spectral_cluster};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub params: HyperParams,
    pub restarts: usize,
    pub nmi_normalization: NmiNormalization,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            params: HyperParams::default(),
            restarts: 30,
            nmi_normalization: NmiNormalization::Geometric,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RestartResult {
    pub labels: Vec<usize>,
    pub report: Option<EvaluationReport>,
    pub converged: bool,
    pub iterations: usize,
    pub history: Vec<IterationRecord>,
    pub representation: DenseMatrix,
}

#[derive(Debug, Clone)]
pub struct RestartOutcome {
    pub restart: usize,
    pub seed: u64,
    /// Failure message when this restart did not complete.
    pub result: std::result::Result<RestartResult, String>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub dataset: String,
    pub variant: Variant,
    pub params: HyperParams,
    pub knn: usize,
    pub restarts: Vec<RestartOutcome>,
    /// Mean/std over successful restarts; `None` without ground truth.
    pub summary: Option<ReportSummary>,
    /// For the single-view variant, the view that was reported.
    pub best_view: Option<usize>,
}

impl RunSummary {
    pub fn successes(&self) -> usize {
        self.restarts.iter().filter(|r| r.result.is_ok()).count()
    }

    pub fn reports(&self) -> Vec<EvaluationReport> {
        self.restarts
            .iter()
            .filter_map(|r| r.result.as_ref().ok().and_then(|x| x.report))
            .collect()
    }
}

/// Proximity graphs for a dataset; reusable across restarts and variants
/// that share `knn` and `alpha`.
pub fn build_graphs(dataset: &MultiViewDataset, params: &HyperParams) -> Result<GraphSet> {
    GraphSet::build(&dataset.views, resolve_knn(dataset, params), params.alpha)
}

pub fn resolve_knn(dataset: &MultiViewDataset, params: &HyperParams) -> usize {
    params
        .knn
        .unwrap_or_else(|| default_neighbor_count(dataset.n_samples(), dataset.clusters))
}

fn run_restart(
    solver: &Solver,
    dataset: &MultiViewDataset,
    seed: u64,
    norm: NmiNormalization,
) -> Result<RestartResult> {
    let fit = solver.fit_from(solver.initial_state(seed))?;
    let affinity = affinity_from_representation(&fit.z)?;
    let assignment = spectral_cluster(&affinity, dataset.clusters, seed)?;
    if !assignment.empty_clusters.is_empty() {
        log::warn!(
            "seed {seed}: empty clusters {:?}",
            assignment.empty_clusters
        );
    }
    let report = dataset
        .labels
        .as_ref()
        .map(|truth| evaluate_with(&assignment.labels, truth, norm))
        .transpose()?;
    Ok(RestartResult {
        labels: assignment.labels,
        report,
        converged: fit.converged,
        iterations: fit.iterations,
        history: fit.state.history,
        representation: fit.z,
    })
}

fn run_restarts(
    solver: &Solver,
    dataset: &MultiViewDataset,
    config: &PipelineConfig,
) -> Vec<RestartOutcome> {
    let base = config.params.seed;
    (0..config.restarts)
        .into_par_iter()
        .map(|r| {
            let seed = base.wrapping_add(r as u64);
            let result = run_restart(solver, dataset, seed, config.nmi_normalization)
                .map_err(|e| e.to_string());
            if let Err(msg) = &result {
                log::warn!("restart {r} (seed {seed}) failed: {msg}");
            }
            RestartOutcome {
                restart: r,
                seed,
                result,
            }
        })
        .collect()
}

fn summarize(outcomes: &[RestartOutcome]) -> Option<ReportSummary> {
    let reports: Vec<EvaluationReport> = outcomes
        .iter()
        .filter_map(|o| o.result.as_ref().ok().and_then(|r| r.report))
        .collect();
    (!reports.is_empty()).then(|| ReportSummary::of(&reports))
}

/// Runs one variant with `config.restarts` seeds. Graphs may be supplied to
/// share them across calls; otherwise they are built when the variant needs them.
pub fn run_pipeline_with_graphs(
    dataset: &MultiViewDataset,
    config: &PipelineConfig,
    graphs: Option<&GraphSet>,
) -> Result<RunSummary> {
    config.params.validate()?;
    dataset.validate()?;
    if config.restarts == 0 {
        return Err(Error::InvalidArgument("restarts must be at least 1".into()));
    }
    let params = &config.params;
    let knn = resolve_knn(dataset, params);

    if params.variant == Variant::LrrBsv {
        return run_best_single_view(dataset, config, knn);
    }

    let graphs = if params.variant.uses_graph() {
        Some(match graphs {
            Some(g) => g.clone(),
            None => build_graphs(dataset, params)?,
        })
    } else {
        None
    };
    let regularizer = Regularizer::for_variant(params.variant, graphs)?;
    let solver = Solver::new(dataset.views.clone(), regularizer, params.clone())?;
    let restarts = run_restarts(&solver, dataset, config);
    info!(
        "{} on {}: {}/{} restarts succeeded",
        params.variant,
        dataset.name,
        restarts.iter().filter(|r| r.result.is_ok()).count(),
        restarts.len()
    );
    Ok(RunSummary {
        dataset: dataset.name.clone(),
        variant: params.variant,
        params: params.clone(),
        knn,
        summary: summarize(&restarts),
        restarts,
        best_view: None,
    })
}

pub fn run_pipeline(dataset: &MultiViewDataset, config: &PipelineConfig) -> Result<RunSummary> {
    run_pipeline_with_graphs(dataset, config, None)
}

/// Plain low-rank representation on every view alone. The view with the
/// best mean NMI is reported; without labels, view 0.
fn run_best_single_view(
    dataset: &MultiViewDataset,
    config: &PipelineConfig,
    knn: usize,
) -> Result<RunSummary> {
    let mut best: Option<(usize, f64, Vec<RestartOutcome>)> = None;
    for k in 0..dataset.n_views() {
        let single = dataset.single_view(k);
        let solver = Solver::new(
            single.views.clone(),
            Regularizer::None,
            config.params.clone(),
        )?;
        let outcomes = run_restarts(&solver, &single, config);
        let score = summarize(&outcomes).map_or(f64::NEG_INFINITY, |s| s.nmi.mean);
        let better = match &best {
            None => true,
            Some((_, s, _)) => score > *s,
        };
        if better {
            best = Some((k, score, outcomes));
        }
        if dataset.labels.is_none() {
            break;
        }
    }
    let (view, _, restarts) = best.expect("dataset has at least one view");
    Ok(RunSummary {
        dataset: dataset.name.clone(),
        variant: Variant::LrrBsv,
        params: config.params.clone(),
        knn,
        summary: summarize(&restarts),
        restarts,
        best_view: Some(view),
    })
}

/// Runs every variant with identical seeds, in reporting order
/// `LRR_BSV, MSC_NAIVE, GRMSC_NAIVE, GRMSC`.
pub fn run_ablation(
    dataset: &MultiViewDataset,
    config: &PipelineConfig,
) -> Result<Vec<RunSummary>> {
    let graphs = build_graphs(dataset, &config.params)?;
    Variant::ALL
        .iter()
        .map(|&variant| {
            let mut cfg = config.clone();
            cfg.params.variant = variant;
            run_pipeline_with_graphs(dataset, &cfg, Some(&graphs))
        })
        .collect()
}

/// The hyperparameter grid used for sensitivity sweeps.
pub const DEFAULT_SWEEP_GRID: [f64; 7] = [0.001, 0.01, 0.1, 1.0, 10.0, 100.0, 1000.0];

/// Full pipeline at every `(lambda1, lambda2)` pair, lambda1-major order.
pub fn run_sweep(
    dataset: &MultiViewDataset,
    config: &PipelineConfig,
    lambda1_grid: &[f64],
    lambda2_grid: &[f64],
) -> Result<Vec<RunSummary>> {
    if lambda1_grid.is_empty() || lambda2_grid.is_empty() {
        return Err(Error::InvalidArgument("sweep grid is empty".into()));
    }
    let graphs = if config.params.variant.uses_graph() {
        Some(build_graphs(dataset, &config.params)?)
    } else {
        None
    };
    let mut out = Vec::with_capacity(lambda1_grid.len() * lambda2_grid.len());
    for &l1 in lambda1_grid {
        for &l2 in lambda2_grid {
            let mut cfg = config.clone();
            cfg.params.lambda1 = l1;
            cfg.params.lambda2 = l2;
            out.push(run_pipeline_with_graphs(dataset, &cfg, graphs.as_ref())?);
        }
    }
    Ok(out)
}
