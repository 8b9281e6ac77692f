//! `grmsc` command-line driver.
//!
//! Exit codes: 0 success, 2 validation, 3 numerical failure, 4 i/o.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use grmsc::dataset::{generate_synthetic, load_dataset, normalize_views, write_dataset};
use grmsc::pipeline::{run_ablation, run_pipeline, run_sweep, RunSummary, DEFAULT_SWEEP_GRID};
use grmsc::report::{write_report_csv, write_summary_csv, write_sweep_csv, write_trace_csv};
use grmsc::{
    Error, HyperParams, MultiViewDataset, Normalization, PipelineConfig, Result, SyntheticSpec,
    Variant, ZUpdate,
};
use log::info;

#[derive(Parser)]
#[command(
    name = "grmsc",
    version,
    about = "Graph-regularized multi-view subspace clustering"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cluster one dataset with one variant over seeded restarts.
    Run(RunArgs),
    /// Run all four variants with identical seeds.
    Ablate(RunArgs),
    /// Grid sweep over lambda1 and lambda2.
    Sweep(SweepArgs),
    /// Write a synthetic dataset as CSV files plus a manifest.
    Generate(GenerateArgs),
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// JSON manifest describing the views and labels.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// JSON synthetic dataset spec.
    #[arg(long)]
    synthetic: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long, default_value = "grmsc")]
    variant: Variant,
    #[arg(long)]
    lambda1: Option<f64>,
    #[arg(long)]
    lambda2: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Mutual-kNN neighbor count (default min(10, n / c)).
    #[arg(long)]
    knn: Option<usize>,
    #[arg(long, default_value_t = 30)]
    restarts: usize,
    /// Base seed; restart r uses seed + r.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Write the proximity graphs as CSV under <out>/graphs.
    #[arg(long)]
    dump_graphs: bool,
    /// Write per-restart convergence traces under <out>/traces.
    #[arg(long)]
    trace_residuals: bool,
    #[arg(long, default_value = "derived")]
    z_update: ZUpdate,
    #[arg(long, default_value = "unit_column")]
    normalize: Normalization,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, value_delimiter = ',')]
    lambda1_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    lambda2_grid: Option<Vec<f64>>,
}

#[derive(Args)]
struct GenerateArgs {
    /// JSON synthetic dataset spec; defaults are used when omitted.
    #[arg(long)]
    synthetic: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "data")]
    out: PathBuf,
}

fn read_spec(path: &Path) -> Result<SyntheticSpec> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn load(args: &RunArgs) -> Result<MultiViewDataset> {
    let raw = match (&args.source.manifest, &args.source.synthetic) {
        (Some(m), _) => load_dataset(m)?,
        (None, Some(s)) => generate_synthetic(&read_spec(s)?)?,
        (None, None) => unreachable!("clap requires a source"),
    };
    info!(
        "dataset {}: {} samples, {} views, {} clusters",
        raw.name,
        raw.n_samples(),
        raw.n_views(),
        raw.clusters
    );
    Ok(normalize_views(&raw, args.normalize))
}

fn config(args: &RunArgs) -> PipelineConfig {
    let mut p = HyperParams {
        variant: args.variant,
        seed: args.seed,
        knn: args.knn,
        z_update: args.z_update,
        trace_objective: args.trace_residuals,
        ..HyperParams::default()
    };
    if let Some(v) = args.lambda1 {
        p.lambda1 = v;
    }
    if let Some(v) = args.lambda2 {
        p.lambda2 = v;
    }
    if let Some(v) = args.alpha {
        p.alpha = v;
    }
    if let Some(v) = args.max_iter {
        p.max_iter = v;
    }
    if let Some(v) = args.eps {
        p.eps = v;
    }
    PipelineConfig {
        params: p,
        restarts: args.restarts,
        ..PipelineConfig::default()
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn write_extras(
    args: &RunArgs,
    ds: &MultiViewDataset,
    cfg: &PipelineConfig,
    runs: &[RunSummary],
) -> Result<()> {
    if args.dump_graphs {
        let dir = args.out.join("graphs");
        create_dir(&dir)?;
        grmsc::pipeline::build_graphs(ds, &cfg.params)?.dump(&dir)?;
    }
    if args.trace_residuals {
        let dir = args.out.join("traces");
        create_dir(&dir)?;
        for run in runs {
            for r in &run.restarts {
                if let Ok(res) = &r.result {
                    let name = format!("{}_restart{}.csv", run.variant, r.restart);
                    write_trace_csv(&dir.join(name), &res.history)?;
                }
            }
        }
    }
    Ok(())
}

fn print_summaries(runs: &[RunSummary]) {
    for run in runs {
        match &run.summary {
            Some(s) => println!(
                "{:<12} NMI {}  ACC {}  F {}  AVGent {}  P {}  RI {}",
                run.variant.label(),
                s.nmi,
                s.acc,
                s.f_score,
                s.avgent,
                s.precision,
                s.rand_index
            ),
            None => println!(
                "{:<12} {}/{} restarts succeeded (no labels)",
                run.variant.label(),
                run.successes(),
                run.restarts.len()
            ),
        }
    }
}

fn check_failures(runs: &[RunSummary]) -> Result<()> {
    if let Some(run) = runs.iter().find(|r| r.successes() == 0) {
        let msg = run
            .restarts
            .iter()
            .find_map(|r| r.result.as_ref().err().cloned())
            .unwrap_or_default();
        return Err(Error::NumericalFailure {
            operation: "pipeline",
            detail: format!("every restart of {} failed: {msg}", run.variant),
        });
    }
    Ok(())
}

fn cmd_run(args: &RunArgs, ablate: bool) -> Result<()> {
    let ds = load(args)?;
    let cfg = config(args);
    let runs = if ablate {
        run_ablation(&ds, &cfg)?
    } else {
        vec![run_pipeline(&ds, &cfg)?]
    };
    create_dir(&args.out)?;
    write_report_csv(&args.out.join("report.csv"), &runs)?;
    write_summary_csv(&args.out.join("summary.csv"), &runs)?;
    write_extras(args, &ds, &cfg, &runs)?;
    print_summaries(&runs);
    check_failures(&runs)
}

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let ds = load(&args.run)?;
    let cfg = config(&args.run);
    let l1 = args
        .lambda1_grid
        .clone()
        .unwrap_or_else(|| DEFAULT_SWEEP_GRID.to_vec());
    let l2 = args
        .lambda2_grid
        .clone()
        .unwrap_or_else(|| DEFAULT_SWEEP_GRID.to_vec());
    let runs = run_sweep(&ds, &cfg, &l1, &l2)?;
    create_dir(&args.run.out)?;
    write_sweep_csv(&args.run.out.join("sweep.csv"), &runs)?;
    write_report_csv(&args.run.out.join("report.csv"), &runs)?;
    write_extras(&args.run, &ds, &cfg, &runs)?;
    let best = runs
        .iter()
        .filter_map(|r| {
            r.summary
                .map(|s| (r.params.lambda1, r.params.lambda2, s.nmi.mean))
        })
        .fold(None, |acc: Option<(f64, f64, f64)>, x| match acc {
            Some(a) if a.2 >= x.2 => Some(a),
            _ => Some(x),
        });
    if let Some((l1, l2, v)) = best {
        println!("best cell: lambda1 = {l1}, lambda2 = {l2}, mean NMI {v:.4}");
        if !(l1 >= 1.0 && l2 <= 1.0) {
            info!("best cell lies outside the region lambda1 >= 1, lambda2 <= 1");
        }
    }
    check_failures(&runs)
}

fn cmd_generate(args: &GenerateArgs) -> Result<()> {
    let mut spec = match &args.synthetic {
        Some(p) => read_spec(p)?,
        None => SyntheticSpec::default(),
    };
    if let Some(s) = args.seed {
        spec.seed = s;
    }
    let ds = generate_synthetic(&spec)?;
    create_dir(&args.out)?;
    let manifest = write_dataset(&ds, &args.out)?;
    println!("{}", manifest.display());
    Ok(())
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("MVSC_THREADS") else {
        return Ok(());
    };
    let threads: usize = value.parse().ok().filter(|&t| t > 0).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "MVSC_THREADS must be a positive integer, got {value:?}"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match &cli.command {
        Command::Run(a) => cmd_run(a, false),
        Command::Ablate(a) => cmd_run(a, true),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Generate(a) => cmd_generate(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
