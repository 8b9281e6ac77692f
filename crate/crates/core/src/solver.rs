//! Augmented-Lagrangian solver for the graph-regularized low-rank model
//!
//! ```text
//! min  ||Z||_* + lambda1 * sum_k ||E_k||_{2,1} + lambda2 * R(Z)
//! s.t. X_k = X_k Z + E_k   for every view k
//! ```
//!
//! where `R(Z) = sum_k Tr(Z L_k Z^T)` penalizes differences between the
//! representation columns of graph neighbors. An auxiliary copy `Q = Z`
//! carries the nuclear norm, and each iteration updates `E`, `Q`, `Z`, then
//! the multipliers and the penalty `mu`.
//!
//! The `Z` block solves the Sylvester equation
//!
//! ```text
//! mu (G + I) Z + Z S = sum_k X_k^T (Y1_k + mu (X_k - E_k)) + mu Q - Y2
//! ```
//!
//! with `G = sum_k X_k^T X_k` and `S = lambda2 * sum_k (L_k + L_k^T)`.
//! Both `G` and `S` are fixed across iterations, so their eigendecompositions
//! are computed once and every update is four `n x n` products.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::MultiViewDataset;
use crate::error::{Error, Result};
use crate::graph::{
    default_neighbor_count, first_order_fusion, regularizer_by_pairs, weighted_smoothness, GraphSet,
};
use crate::linalg::{
    l21_norm, max_abs, nuclear_norm, prox_l21, solve_spd, svt, symmetric_eigen, symmetrize,
    DenseMatrix,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Consistent and complementary graph regularizers.
    #[serde(rename = "GRMSC")]
    Grmsc,
    /// Regularizer built from each view's first-order graph alone.
    #[serde(rename = "GRMSC_NAIVE")]
    GrmscNaive,
    /// Joint low-rank representation with no graph term.
    #[serde(rename = "MSC_NAIVE")]
    MscNaive,
    /// Single-view low-rank representation; the best view is reported.
    #[serde(rename = "LRR_BSV")]
    LrrBsv,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::LrrBsv,
        Variant::MscNaive,
        Variant::GrmscNaive,
        Variant::Grmsc,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Variant::Grmsc => "GRMSC",
            Variant::GrmscNaive => "GRMSC_NAIVE",
            Variant::MscNaive => "MSC_NAIVE",
            Variant::LrrBsv => "LRR_BSV",
        }
    }

    pub fn uses_graph(self) -> bool {
        matches!(self, Variant::Grmsc | Variant::GrmscNaive)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "grmsc" => Ok(Variant::Grmsc),
            "grmsc-naive" => Ok(Variant::GrmscNaive),
            "msc-naive" => Ok(Variant::MscNaive),
            "lrr-bsv" => Ok(Variant::LrrBsv),
            _ => Err(Error::InvalidArgument(format!("unknown variant {s:?}"))),
        }
    }
}

/// How the `Z` block is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZUpdate {
    /// Exact stationarity of the `Z` subproblem.
    #[default]
    Derived,
    /// The published closed form `T_ZA^{-1} T_ZB`, kept for comparison. It
    /// omits `-Y2`, adds rather than subtracts `X^T E`, and applies the
    /// Laplacian from the left; it does not solve the subproblem.
    AsPrinted,
}

impl FromStr for ZUpdate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "derived" => Ok(ZUpdate::Derived),
            "as-printed" | "as_printed" => Ok(ZUpdate::AsPrinted),
            _ => Err(Error::InvalidArgument(format!(
                "unknown z-update mode {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub alpha: f64,
    /// Mutual-kNN neighbor count; `None` picks `min(10, n / c)`.
    pub knn: Option<usize>,
    pub rho: f64,
    pub mu0: f64,
    pub mu_max: f64,
    pub eps: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub variant: Variant,
    pub z_update: ZUpdate,
    /// Record the full objective every iteration (costs one extra SVD).
    pub trace_objective: bool,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            lambda1: 0.1,
            lambda2: 1.0,
            alpha: 0.001,
            knn: None,
            rho: 1.9,
            mu0: 1e-4,
            mu_max: 1e6,
            eps: 1e-6,
            max_iter: 300,
            seed: 0,
            variant: Variant::Grmsc,
            z_update: ZUpdate::Derived,
            trace_objective: false,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.lambda1 > 0.0) {
            return bad(format!("lambda1 must be positive, got {}", self.lambda1));
        }
        if !(self.lambda2 >= 0.0) {
            return bad(format!("lambda2 must be nonnegative, got {}", self.lambda2));
        }
        if !(self.alpha >= 0.0) {
            return bad(format!("alpha must be nonnegative, got {}", self.alpha));
        }
        if !(self.rho > 1.0) {
            return bad(format!("rho must exceed 1, got {}", self.rho));
        }
        if !(self.mu0 > 0.0 && self.mu0 < self.mu_max) {
            return bad(format!(
                "need 0 < mu0 < mu_max, got {} and {}",
                self.mu0, self.mu_max
            ));
        }
        if !(self.eps > 0.0) {
            return bad(format!("eps must be positive, got {}", self.eps));
        }
        if self.max_iter == 0 {
            return bad("max_iter must be at least 1".into());
        }
        if self.knn == Some(0) {
            return bad("knn must be at least 1".into());
        }
        Ok(())
    }

    /// The graph weight actually applied for this variant.
    pub fn effective_lambda2(&self) -> f64 {
        if self.variant.uses_graph() {
            self.lambda2
        } else {
            0.0
        }
    }
}

/// One row of the convergence trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `||X_k - X_k Z - E_k||_inf` per view.
    pub view_residuals: Vec<f64>,
    /// `||Z - Q||_inf`.
    pub zq_residual: f64,
    pub objective: Option<f64>,
    /// Penalty used during this iteration.
    pub mu: f64,
}

impl IterationRecord {
    pub fn max_view_residual(&self) -> f64 {
        self.view_residuals.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct SolverState {
    pub z: DenseMatrix,
    pub q: DenseMatrix,
    pub e: Vec<DenseMatrix>,
    pub y1: Vec<DenseMatrix>,
    pub y2: DenseMatrix,
    pub mu: f64,
    pub iter: usize,
    pub history: Vec<IterationRecord>,
}

impl SolverState {
    /// Zero blocks and multipliers; `Z` uniform on `[0, 1/n]` from `seed`.
    pub fn initial(views: &[DenseMatrix], mu0: f64, seed: u64) -> SolverState {
        let n = views[0].ncols();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let upper = 1.0 / n as f64;
        let z = DenseMatrix::from_fn(n, n, |_, _| rng.random_range(0.0..=upper));
        SolverState {
            z,
            q: DenseMatrix::zeros(n, n),
            e: views
                .iter()
                .map(|x| DenseMatrix::zeros(x.nrows(), n))
                .collect(),
            y1: views
                .iter()
                .map(|x| DenseMatrix::zeros(x.nrows(), n))
                .collect(),
            y2: DenseMatrix::zeros(n, n),
            mu: mu0,
            iter: 0,
            history: Vec::new(),
        }
    }

    /// Per-view `||X_k - X_k Z - E_k||_inf` and `||Z - Q||_inf`.
    pub fn residuals(&self, views: &[DenseMatrix]) -> (Vec<f64>, f64) {
        let view = views
            .iter()
            .zip(&self.e)
            .map(|(x, e)| max_abs(&(x - x * &self.z - e)))
            .collect();
        (view, max_abs(&(&self.z - &self.q)))
    }
}

/// The graph penalty attached to a problem.
#[derive(Debug, Clone)]
pub enum Regularizer {
    None,
    /// Consensus edges weighted by the consensus graph, the rest by
    /// alpha-weighted second-order proximity.
    Fused(GraphSet),
    /// Each view's first-order graph used as is.
    FirstOrder(GraphSet),
}

impl Regularizer {
    pub fn for_variant(variant: Variant, graphs: Option<GraphSet>) -> Result<Regularizer> {
        if !variant.uses_graph() {
            return Ok(Regularizer::None);
        }
        let graphs = graphs
            .ok_or_else(|| Error::InvalidArgument(format!("{variant} needs proximity graphs")))?;
        Ok(match variant {
            Variant::Grmsc => Regularizer::Fused(graphs),
            _ => Regularizer::FirstOrder(graphs),
        })
    }

    pub fn laplacians(&self) -> Vec<DenseMatrix> {
        match self {
            Regularizer::None => Vec::new(),
            Regularizer::Fused(g) => g.fused.laplacians.clone(),
            Regularizer::FirstOrder(g) => first_order_fusion(&g.first_order).laplacians,
        }
    }

    /// Regularizer value from explicit pair sums.
    pub fn value_by_pairs(&self, z: &DenseMatrix) -> f64 {
        match self {
            Regularizer::None => 0.0,
            Regularizer::Fused(g) => {
                regularizer_by_pairs(&g.consensus, &g.second_order, g.alpha, z)
            }
            Regularizer::FirstOrder(g) => {
                let weights: Vec<DenseMatrix> =
                    g.first_order.iter().map(|f| f.similarity.clone()).collect();
                weighted_smoothness(&weights, z)
            }
        }
    }

    pub fn graphs(&self) -> Option<&GraphSet> {
        match self {
            Regularizer::None => None,
            Regularizer::Fused(g) | Regularizer::FirstOrder(g) => Some(g),
        }
    }
}

/// Cached factorizations for the `Z` block.
#[derive(Debug, Clone)]
struct ZSystem {
    gram: DenseMatrix,
    gram_vectors: DenseMatrix,
    gram_values: DVector<f64>,
    /// `lambda2 * sum_k (L_k + L_k^T)`, or `None` when it vanishes.
    graph: Option<(DenseMatrix, DenseMatrix, DVector<f64>)>,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub z: DenseMatrix,
    pub state: SolverState,
    pub converged: bool,
    pub iterations: usize,
}

/// A fully prepared problem instance.
#[derive(Debug, Clone)]
pub struct Solver {
    views: Vec<DenseMatrix>,
    regularizer: Regularizer,
    params: HyperParams,
    system: ZSystem,
}

impl Solver {
    pub fn new(
        views: Vec<DenseMatrix>,
        regularizer: Regularizer,
        params: HyperParams,
    ) -> Result<Solver> {
        params.validate()?;
        if views.is_empty() {
            return Err(Error::InvalidArgument("no views".into()));
        }
        let n = views[0].ncols();
        if views.iter().any(|x| x.ncols() != n) {
            return Err(Error::InvalidArgument(
                "views disagree on sample count".into(),
            ));
        }

        let mut gram = DenseMatrix::zeros(n, n);
        for x in &views {
            gram.gemm_tr(1.0, x, x, 1.0);
        }
        let gram = symmetrize(&gram);
        let (gram_values, gram_vectors) = symmetric_eigen(&gram)?;

        let lambda2 = params.effective_lambda2();
        let laplacians = regularizer.laplacians();
        let graph = if lambda2 > 0.0 && !laplacians.is_empty() {
            let mut s = DenseMatrix::zeros(n, n);
            for l in &laplacians {
                if l.shape() != (n, n) {
                    return Err(Error::InvalidArgument(
                        "laplacian does not match sample count".into(),
                    ));
                }
                s += l + l.transpose();
            }
            let s = symmetrize(&(s * lambda2));
            let (values, vectors) = symmetric_eigen(&s)?;
            Some((s, vectors, values))
        } else {
            None
        };

        Ok(Solver {
            views,
            regularizer,
            params,
            system: ZSystem {
                gram,
                gram_vectors,
                gram_values,
                graph,
            },
        })
    }

    /// Builds graphs as the variant requires and prepares the solver.
    pub fn for_dataset(dataset: &MultiViewDataset, params: HyperParams) -> Result<Solver> {
        params.validate()?;
        let graphs = if params.variant.uses_graph() {
            let k = params
                .knn
                .unwrap_or_else(|| default_neighbor_count(dataset.n_samples(), dataset.clusters));
            Some(GraphSet::build(&dataset.views, k, params.alpha)?)
        } else {
            None
        };
        let regularizer = Regularizer::for_variant(params.variant, graphs)?;
        Solver::new(dataset.views.clone(), regularizer, params)
    }

    pub fn views(&self) -> &[DenseMatrix] {
        &self.views
    }

    pub fn params(&self) -> &HyperParams {
        &self.params
    }

    pub fn regularizer(&self) -> &Regularizer {
        &self.regularizer
    }

    pub fn initial_state(&self, seed: u64) -> SolverState {
        SolverState::initial(&self.views, self.params.mu0, seed)
    }

    /// `E_k = prox_{lambda1/mu ||.||_{2,1}}(X_k - X_k Z + Y1_k / mu)`.
    pub fn update_e(&self, state: &SolverState) -> Result<Vec<DenseMatrix>> {
        let kappa = self.params.lambda1 / state.mu;
        self.views
            .par_iter()
            .zip(&state.y1)
            .map(|(x, y1)| {
                let target = x - x * &state.z + y1 / state.mu;
                prox_l21(&target, kappa)
            })
            .collect()
    }

    /// `Q = svt(Z + Y2 / mu, 1 / mu)`.
    pub fn update_q(&self, state: &SolverState) -> Result<DenseMatrix> {
        svt(&(&state.z + &state.y2 / state.mu), 1.0 / state.mu)
    }

    /// Right-hand side of the `Z` stationarity condition.
    fn z_rhs(&self, state: &SolverState) -> DenseMatrix {
        let mu = state.mu;
        let mut rhs = &state.q * mu - &state.y2;
        for ((x, e), y1) in self.views.iter().zip(&state.e).zip(&state.y1) {
            let inner = y1 + (x - e) * mu;
            rhs.gemm_tr(1.0, x, &inner, 1.0);
        }
        rhs
    }

    pub fn update_z(&self, state: &SolverState) -> Result<DenseMatrix> {
        match self.params.z_update {
            ZUpdate::Derived => Ok(self.solve_z_derived(state)),
            ZUpdate::AsPrinted => self.solve_z_as_printed(state),
        }
    }

    fn solve_z_derived(&self, state: &SolverState) -> DenseMatrix {
        let mu = state.mu;
        let rhs = self.z_rhs(state);
        let sys = &self.system;
        let p = &sys.gram_vectors;
        let n = rhs.nrows();
        match &sys.graph {
            None => {
                let mut t = p.tr_mul(&rhs);
                for i in 0..n {
                    let denom = mu * (sys.gram_values[i] + 1.0);
                    t.row_mut(i).scale_mut(1.0 / denom);
                }
                p * t
            }
            Some((_, r, s_values)) => {
                let mut t = p.tr_mul(&rhs) * r;
                for j in 0..n {
                    for i in 0..n {
                        // S is PSD up to rounding; mu (g + 1) > 0 dominates.
                        t[(i, j)] /= mu * (sys.gram_values[i] + 1.0) + s_values[j].max(0.0);
                    }
                }
                p * t * r.transpose()
            }
        }
    }

    fn solve_z_as_printed(&self, state: &SolverState) -> Result<DenseMatrix> {
        let mu = state.mu;
        let n = state.z.nrows();
        let sys = &self.system;
        let mut a = (&sys.gram + DenseMatrix::identity(n, n)) * mu;
        if let Some((s, _, _)) = &sys.graph {
            a += s;
        }
        let a = symmetrize(&a);
        let mut b = &sys.gram * mu + &state.q * mu;
        for ((x, e), y1) in self.views.iter().zip(&state.e).zip(&state.y1) {
            b.gemm_tr(1.0, x, y1, 1.0);
            b.gemm_tr(mu, x, e, 1.0);
        }
        solve_spd(&a, &b)
    }

    /// Dual ascent on both constraints, then `mu = min(rho mu, mu_max)`.
    pub fn update_multipliers(&self, state: &mut SolverState) {
        let mu = state.mu;
        for ((y1, x), e) in state.y1.iter_mut().zip(&self.views).zip(&state.e) {
            *y1 += (x - x * &state.z - e) * mu;
        }
        state.y2 += (&state.z - &state.q) * mu;
        state.mu = (self.params.rho * mu).min(self.params.mu_max);
    }

    /// `||Z||_* + lambda1 sum ||E_k||_{2,1} + lambda2 R(Z)` with `R` summed
    /// over pairs.
    pub fn objective_value(&self, state: &SolverState) -> Result<f64> {
        let lambda2 = self.params.effective_lambda2();
        let graph = if lambda2 > 0.0 {
            lambda2 * self.regularizer.value_by_pairs(&state.z)
        } else {
            0.0
        };
        Ok(nuclear_norm(&state.z)?
            + self.params.lambda1 * state.e.iter().map(l21_norm).sum::<f64>()
            + graph)
    }

    /// Augmented Lagrangian terms that depend on `Z`.
    pub fn z_subproblem_objective(&self, state: &SolverState, z: &DenseMatrix) -> Result<f64> {
        let mu = state.mu;
        let lambda2 = self.params.effective_lambda2();
        let mut total = if lambda2 > 0.0 {
            lambda2 * crate::graph::laplacian_quadratic(&self.regularizer.laplacians(), z)?
        } else {
            0.0
        };
        for ((x, e), y1) in self.views.iter().zip(&state.e).zip(&state.y1) {
            let r = x - x * z - e;
            total += y1.dot(&r) + 0.5 * mu * r.norm_squared();
        }
        let r = z - &state.q;
        total += state.y2.dot(&r) + 0.5 * mu * r.norm_squared();
        Ok(total)
    }

    /// One full sweep: `E`, `Q`, `Z`, multipliers. Returns the record.
    pub fn step(&self, state: &mut SolverState) -> Result<IterationRecord> {
        state.e = self.update_e(state)?;
        state.q = self.update_q(state)?;
        state.z = self.update_z(state)?;
        let (view_residuals, zq_residual) = state.residuals(&self.views);
        let objective = if self.params.trace_objective {
            Some(self.objective_value(state)?)
        } else {
            None
        };
        let record = IterationRecord {
            iteration: state.iter + 1,
            view_residuals,
            zq_residual,
            objective,
            mu: state.mu,
        };
        self.update_multipliers(state);
        state.iter += 1;
        state.history.push(record.clone());
        Ok(record)
    }

    /// Iterates from the seeded initial state until every residual is below
    /// `eps` or `max_iter` is reached.
    pub fn fit(&self) -> Result<FitResult> {
        self.fit_from(self.initial_state(self.params.seed))
    }

    pub fn fit_from(&self, mut state: SolverState) -> Result<FitResult> {
        let eps = self.params.eps;
        let mut converged = false;
        while state.iter < self.params.max_iter {
            let record = self.step(&mut state)?;
            if !record.zq_residual.is_finite() || !record.max_view_residual().is_finite() {
                return Err(Error::numerical(
                    "solver",
                    format!("residuals diverged at iteration {}", record.iteration),
                ));
            }
            if record.max_view_residual() < eps && record.zq_residual < eps {
                converged = true;
                break;
            }
        }
        if !converged {
            log::warn!(
                "solver stopped at max_iter = {} without converging",
                self.params.max_iter
            );
        }
        Ok(FitResult {
            z: state.z.clone(),
            iterations: state.iter,
            converged,
            state,
        })
    }
}

/// Convenience wrapper: build graphs, prepare and run.
pub fn fit(dataset: &MultiViewDataset, params: &HyperParams) -> Result<FitResult> {
    Solver::for_dataset(dataset, params.clone())?.fit()
}
