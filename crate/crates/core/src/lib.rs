//! Graph-regularized multi-view subspace clustering.
//!
//! The pipeline builds proximity graphs for every view, learns a shared
//! low-rank self-representation `Z` with an augmented-Lagrangian solver,
//! clusters `(|Z| + |Z^T|) / 2` spectrally and scores the result.
//!
//! ```no_run
//! use grmsc::{dataset, pipeline};
//!
//! let ds = dataset::generate_synthetic(&dataset::SyntheticSpec::default())?;
//! let config = pipeline::PipelineConfig { restarts: 5, ..Default::default() };
//! let run = pipeline::run_pipeline(&ds, &config)?;
//! println!("NMI {}", run.summary.unwrap().nmi);
//! # Ok::<(), grmsc::Error>(())
//! ```

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod error;
pub mod graph;
pub mod linalg;
pub mod metrics;
pub mod pipeline;
pub mod report;
pub mod solver;
pub mod spectral;

pub use dataset::{MultiViewDataset, Normalization, SyntheticSpec};
pub use error::{Error, Result};
pub use linalg::DenseMatrix;
pub use metrics::EvaluationReport;
pub use pipeline::{PipelineConfig, RunSummary};
pub use solver::{HyperParams, Solver, Variant, ZUpdate};
