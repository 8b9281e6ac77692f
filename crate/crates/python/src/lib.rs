//! Python bindings. Matrices cross the boundary as nested lists in
//! row-major order (`rows x cols`); views are `features x samples`.

use grmsc::dataset::{self, Normalization};
use grmsc::metrics;
use grmsc::pipeline::{self, RunSummary};
use grmsc::solver::{self, Variant, ZUpdate};
use grmsc::spectral;
use grmsc::{DenseMatrix, Error};
use pyo3::exceptions::{PyArithmeticError, PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py_err(e: Error) -> PyErr {
    match e.exit_code() {
        3 => PyArithmeticError::new_err(e.to_string()),
        4 => PyOSError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_matrix(rows: &[Vec<f64>]) -> PyResult<DenseMatrix> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return Err(PyValueError::new_err("matrix rows have different lengths"));
    }
    Ok(DenseMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

fn to_rows(m: &DenseMatrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(to_py_err)
}

/// A multi-view dataset: one `features x samples` matrix per view.
#[pyclass(name = "Dataset", module = "pygrmsc", skip_from_py_object)]
#[derive(Clone)]
struct PyDataset {
    inner: dataset::MultiViewDataset,
}

#[pymethods]
impl PyDataset {
    #[new]
    #[pyo3(signature = (views, clusters, labels=None, name="dataset".to_string()))]
    fn new(
        views: Vec<Vec<Vec<f64>>>,
        clusters: usize,
        labels: Option<Vec<usize>>,
        name: String,
    ) -> PyResult<Self> {
        let views = views
            .iter()
            .map(|v| to_matrix(v))
            .collect::<PyResult<Vec<_>>>()?;
        let inner =
            dataset::MultiViewDataset::new(name, views, labels, clusters).map_err(to_py_err)?;
        Ok(PyDataset { inner })
    }

    /// Loads a dataset from a JSON manifest.
    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        Ok(PyDataset {
            inner: dataset::load_dataset(&path).map_err(to_py_err)?,
        })
    }

    /// Writes CSV views, labels and `manifest.json` into `dir`; returns the manifest path.
    fn save(&self, dir: std::path::PathBuf) -> PyResult<String> {
        std::fs::create_dir_all(&dir).map_err(|e| PyOSError::new_err(e.to_string()))?;
        let p = dataset::write_dataset(&self.inner, &dir).map_err(to_py_err)?;
        Ok(p.display().to_string())
    }

    /// Returns a copy normalized with `"none"`, `"unit_column"` or `"zscore_feature"`.
    #[pyo3(signature = (mode="unit_column"))]
    fn normalized(&self, mode: &str) -> PyResult<Self> {
        let mode: Normalization = parse(mode)?;
        Ok(PyDataset {
            inner: dataset::normalize_views(&self.inner, mode),
        })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn n_samples(&self) -> usize {
        self.inner.n_samples()
    }

    #[getter]
    fn n_views(&self) -> usize {
        self.inner.n_views()
    }

    #[getter]
    fn clusters(&self) -> usize {
        self.inner.clusters
    }

    #[getter]
    fn labels(&self) -> Option<Vec<usize>> {
        self.inner.labels.clone()
    }

    fn view(&self, k: usize) -> PyResult<Vec<Vec<f64>>> {
        self.inner
            .views
            .get(k)
            .map(to_rows)
            .ok_or_else(|| PyValueError::new_err(format!("no view {k}")))
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(name={:?}, n_samples={}, n_views={}, clusters={})",
            self.inner.name,
            self.inner.n_samples(),
            self.inner.n_views(),
            self.inner.clusters
        )
    }
}

/// Solver hyperparameters. Unset arguments keep the library defaults.
#[pyclass(name = "HyperParams", module = "pygrmsc", skip_from_py_object)]
#[derive(Clone)]
struct PyHyperParams {
    inner: solver::HyperParams,
}

#[pymethods]
impl PyHyperParams {
    #[new]
    #[pyo3(signature = (*, variant="grmsc", lambda1=None, lambda2=None, alpha=None, knn=None, max_iter=None, eps=None, seed=0, z_update="derived"))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        variant: &str,
        lambda1: Option<f64>,
        lambda2: Option<f64>,
        alpha: Option<f64>,
        knn: Option<usize>,
        max_iter: Option<usize>,
        eps: Option<f64>,
        seed: u64,
        z_update: &str,
    ) -> PyResult<Self> {
        let d = solver::HyperParams::default();
        let inner = solver::HyperParams {
            variant: parse::<Variant>(variant)?,
            lambda1: lambda1.unwrap_or(d.lambda1),
            lambda2: lambda2.unwrap_or(d.lambda2),
            alpha: alpha.unwrap_or(d.alpha),
            knn,
            max_iter: max_iter.unwrap_or(d.max_iter),
            eps: eps.unwrap_or(d.eps),
            seed,
            z_update: parse::<ZUpdate>(z_update)?,
            ..d
        };
        inner.validate().map_err(to_py_err)?;
        Ok(PyHyperParams { inner })
    }

    #[getter]
    fn variant(&self) -> String {
        self.inner.variant.to_string()
    }

    #[getter]
    fn lambda1(&self) -> f64 {
        self.inner.lambda1
    }

    #[getter]
    fn lambda2(&self) -> f64 {
        self.inner.lambda2
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    fn __repr__(&self) -> String {
        format!(
            "HyperParams(variant={}, lambda1={}, lambda2={}, alpha={}, seed={})",
            self.inner.variant,
            self.inner.lambda1,
            self.inner.lambda2,
            self.inner.alpha,
            self.inner.seed
        )
    }
}

/// Output of a single solver run.
#[pyclass(name = "FitResult", module = "pygrmsc", get_all)]
struct PyFitResult {
    /// Representation matrix, `samples x samples`.
    z: Vec<Vec<f64>>,
    converged: bool,
    iterations: usize,
    /// Largest per-view constraint residual at every iteration.
    view_residuals: Vec<f64>,
    /// `||Z - Q||_inf` at every iteration.
    zq_residuals: Vec<f64>,
}

#[pyfunction]
#[pyo3(signature = (n=150, clusters=3, dims=vec![20, 30, 40], subspace_rank=3, noise_sigma=0.05, consensus_fraction=1.0, seed=7))]
fn generate_synthetic(
    n: usize,
    clusters: usize,
    dims: Vec<usize>,
    subspace_rank: usize,
    noise_sigma: f64,
    consensus_fraction: f64,
    seed: u64,
) -> PyResult<PyDataset> {
    let spec = dataset::SyntheticSpec {
        n,
        clusters,
        dims,
        subspace_rank,
        noise_sigma,
        consensus_fraction,
        seed,
    };
    Ok(PyDataset {
        inner: dataset::generate_synthetic(&spec).map_err(to_py_err)?,
    })
}

/// Runs the solver once and returns the representation with its trace.
#[pyfunction]
fn fit(py: Python<'_>, dataset: &PyDataset, params: &PyHyperParams) -> PyResult<PyFitResult> {
    let (ds, p) = (dataset.inner.clone(), params.inner.clone());
    let res = py.detach(move || solver::fit(&ds, &p)).map_err(to_py_err)?;
    Ok(PyFitResult {
        z: to_rows(&res.z),
        converged: res.converged,
        iterations: res.iterations,
        view_residuals: res
            .state
            .history
            .iter()
            .map(|h| h.max_view_residual())
            .collect(),
        zq_residuals: res.state.history.iter().map(|h| h.zq_residual).collect(),
    })
}

/// Spectral clustering of a representation matrix into `clusters` groups.
#[pyfunction]
#[pyo3(signature = (z, clusters, seed=0))]
fn cluster(z: Vec<Vec<f64>>, clusters: usize, seed: u64) -> PyResult<Vec<usize>> {
    let affinity = spectral::affinity_from_representation(&to_matrix(&z)?).map_err(to_py_err)?;
    Ok(spectral::spectral_cluster(&affinity, clusters, seed)
        .map_err(to_py_err)?
        .labels)
}

fn report_dict<'py>(
    py: Python<'py>,
    r: &metrics::EvaluationReport,
) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    for (name, v) in metrics::EvaluationReport::NAMES.iter().zip(r.values()) {
        d.set_item(*name, v)?;
    }
    Ok(d)
}

/// NMI, ACC, F-score, AVGent, precision and Rand index of a labeling.
#[pyfunction]
fn evaluate<'py>(
    py: Python<'py>,
    pred: Vec<usize>,
    truth: Vec<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let r = metrics::evaluate(&pred, &truth).map_err(to_py_err)?;
    report_dict(py, &r)
}

fn summary_dict<'py>(py: Python<'py>, run: &RunSummary) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("variant", run.variant.label())?;
    d.set_item("knn", run.knn)?;
    d.set_item("restarts", run.restarts.len())?;
    d.set_item("successes", run.successes())?;
    d.set_item("best_view", run.best_view)?;
    if let Some(s) = &run.summary {
        for (name, e) in metrics::EvaluationReport::NAMES.iter().zip(s.entries()) {
            d.set_item(format!("{name}_mean"), e.mean)?;
            d.set_item(format!("{name}_std"), e.std)?;
        }
    }
    let reports: Vec<Bound<'py, PyDict>> = run
        .reports()
        .iter()
        .map(|r| report_dict(py, r))
        .collect::<PyResult<_>>()?;
    d.set_item("reports", reports)?;
    Ok(d)
}

fn config(params: &PyHyperParams, restarts: usize) -> pipeline::PipelineConfig {
    pipeline::PipelineConfig {
        params: params.inner.clone(),
        restarts,
        ..pipeline::PipelineConfig::default()
    }
}

/// Full pipeline over seeded restarts; returns a summary dictionary.
#[pyfunction]
#[pyo3(signature = (dataset, params, restarts=30))]
fn run<'py>(
    py: Python<'py>,
    dataset: &PyDataset,
    params: &PyHyperParams,
    restarts: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let (ds, cfg) = (dataset.inner.clone(), config(params, restarts));
    let summary = py
        .detach(move || pipeline::run_pipeline(&ds, &cfg))
        .map_err(to_py_err)?;
    summary_dict(py, &summary)
}

/// All four variants with identical seeds.
#[pyfunction]
#[pyo3(signature = (dataset, params, restarts=30))]
fn ablate<'py>(
    py: Python<'py>,
    dataset: &PyDataset,
    params: &PyHyperParams,
    restarts: usize,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let (ds, cfg) = (dataset.inner.clone(), config(params, restarts));
    let runs = py
        .detach(move || pipeline::run_ablation(&ds, &cfg))
        .map_err(to_py_err)?;
    runs.iter().map(|r| summary_dict(py, r)).collect()
}

/// Singular value thresholding.
#[pyfunction]
fn svt(m: Vec<Vec<f64>>, tau: f64) -> PyResult<Vec<Vec<f64>>> {
    Ok(to_rows(
        &grmsc::linalg::svt(&to_matrix(&m)?, tau).map_err(to_py_err)?,
    ))
}

/// Column-wise shrinkage, the proximal operator of the l2,1 norm.
#[pyfunction]
fn prox_l21(m: Vec<Vec<f64>>, kappa: f64) -> PyResult<Vec<Vec<f64>>> {
    Ok(to_rows(
        &grmsc::linalg::prox_l21(&to_matrix(&m)?, kappa).map_err(to_py_err)?,
    ))
}

#[pymodule]
fn pygrmsc(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyHyperParams>()?;
    m.add_class::<PyFitResult>()?;
    m.add_function(wrap_pyfunction!(generate_synthetic, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(cluster, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(ablate, m)?)?;
    m.add_function(wrap_pyfunction!(svt, m)?)?;
    m.add_function(wrap_pyfunction!(prox_l21, m)?)?;
    Ok(())
}
