//! Proximity graphs over samples.
//!
//! First-order graphs are Gaussian-kernel similarities sparsified to mutual
//! k-nearest neighbors. Their Hadamard product is the consensus graph whose
//! support (`omega`) marks edges every view agrees on; the remaining pairs
//! are weighted by per-view second-order proximity (similarity of
//! neighborhood vectors). All graphs are dense `n x n`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// Consensus entries at or below this value are treated as zero.
pub const CONSENSUS_ZERO: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct FirstOrderGraph {
    /// Mutual-kNN sparsified kernel matrix, zero diagonal.
    pub similarity: DenseMatrix,
    /// Kernel bandwidth: median pairwise distance between samples.
    pub sigma: f64,
    pub neighbor_count: usize,
}

#[derive(Debug, Clone)]
pub struct ConsensusGraph {
    pub lambda_star: DenseMatrix,
    /// Row-major `n x n` membership mask of the support set.
    mask: Vec<bool>,
}

impl ConsensusGraph {
    pub fn n(&self) -> usize {
        self.lambda_star.nrows()
    }

    pub fn in_omega(&self, i: usize, j: usize) -> bool {
        self.mask[i * self.n() + j]
    }

    /// Pairs where every view has an edge.
    pub fn omega(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.n();
        (0..n * n)
            .filter(move |&idx| self.mask[idx])
            .map(move |idx| (idx / n, idx % n))
    }

    /// Complement of `omega`. Includes the diagonal, whose pairs are inert
    /// in every regularizer.
    pub fn omega_bar(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.n();
        (0..n * n)
            .filter(move |&idx| !self.mask[idx])
            .map(move |idx| (idx / n, idx % n))
    }

    pub fn edge_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

#[derive(Debug, Clone)]
pub struct SecondOrderGraph {
    pub similarity: DenseMatrix,
    /// Median pairwise distance between neighborhood vectors of the view.
    pub sigma: f64,
}

/// Per-view weights `W` and Laplacians `L = D - W`.
#[derive(Debug, Clone)]
pub struct FusedGraph {
    pub weights: Vec<DenseMatrix>,
    pub laplacians: Vec<DenseMatrix>,
}

/// Squared Euclidean distances between columns.
pub fn pairwise_sq_distances(x: &DenseMatrix) -> DenseMatrix {
    let n = x.ncols();
    let mut d = DenseMatrix::zeros(n, n);
    for j in 0..n {
        for i in (j + 1)..n {
            let s = x
                .column(i)
                .iter()
                .zip(x.column(j).iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
            d[(i, j)] = s;
            d[(j, i)] = s;
        }
    }
    d
}

/// Median of the Euclidean distances over distinct pairs.
fn median_distance(sq: &DenseMatrix) -> f64 {
    let n = sq.nrows();
    let mut dists: Vec<f64> = Vec::with_capacity(n * (n - 1) / 2);
    for j in 0..n {
        for i in (j + 1)..n {
            dists.push(sq[(i, j)].sqrt());
        }
    }
    dists.sort_by(f64::total_cmp);
    let m = dists.len();
    if m % 2 == 1 {
        dists[m / 2]
    } else {
        0.5 * (dists[m / 2 - 1] + dists[m / 2])
    }
}

/// The `k` nearest other samples of every sample. Ties go to the smaller index.
fn nearest_neighbors(sq: &DenseMatrix, k: usize) -> Vec<Vec<usize>> {
    let n = sq.nrows();
    (0..n)
        .map(|i| {
            let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            others.sort_by(|&a, &b| sq[(i, a)].total_cmp(&sq[(i, b)]).then(a.cmp(&b)));
            others.truncate(k);
            others
        })
        .collect()
}

fn gaussian_kernel(sq: &DenseMatrix, sigma: f64) -> DenseMatrix {
    let s2 = sigma * sigma;
    sq.map(|d| (-d / s2).exp())
}

/// Gaussian similarities of one view restricted to mutual k-nearest neighbors.
pub fn first_order_proximity(x: &DenseMatrix, k: usize) -> Result<FirstOrderGraph> {
    let n = x.ncols();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 samples, got {n}"
        )));
    }
    if k == 0 || k >= n {
        return Err(Error::InvalidArgument(format!(
            "neighbor count must be in [1, {}), got {k}",
            n
        )));
    }
    let sq = pairwise_sq_distances(x);
    let sigma = median_distance(&sq);
    if !(sigma > 0.0) {
        return Err(Error::DegenerateInput(
            "median pairwise distance is zero (samples are identical)".into(),
        ));
    }
    let kernel = gaussian_kernel(&sq, sigma);
    let neighbors = nearest_neighbors(&sq, k);

    let mut is_neighbor = vec![false; n * n];
    for (i, list) in neighbors.iter().enumerate() {
        for &j in list {
            is_neighbor[i * n + j] = true;
        }
    }
    let similarity = DenseMatrix::from_fn(n, n, |i, j| {
        if i != j && is_neighbor[i * n + j] && is_neighbor[j * n + i] {
            kernel[(i, j)]
        } else {
            0.0
        }
    });
    Ok(FirstOrderGraph {
        similarity,
        sigma,
        neighbor_count: k,
    })
}

/// Elementwise product of all first-order graphs.
pub fn consensus_graph(graphs: &[FirstOrderGraph]) -> Result<ConsensusGraph> {
    let first = graphs
        .first()
        .ok_or_else(|| Error::InvalidArgument("consensus of zero graphs".into()))?;
    let n = first.similarity.nrows();
    if let Some(bad) = graphs.iter().position(|g| g.similarity.shape() != (n, n)) {
        return Err(Error::InvalidArgument(format!(
            "graph {bad} is {:?}, expected {n}x{n}",
            graphs[bad].similarity.shape()
        )));
    }
    let mut lambda_star = first.similarity.clone();
    for g in &graphs[1..] {
        lambda_star.component_mul_assign(&g.similarity);
    }
    let mut mask = vec![false; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j && lambda_star[(i, j)] > CONSENSUS_ZERO {
                mask[i * n + j] = true;
            } else {
                lambda_star[(i, j)] = 0.0;
            }
        }
    }
    Ok(ConsensusGraph { lambda_star, mask })
}

/// Gaussian similarity between the neighborhood vectors (columns) of a
/// first-order graph. The bandwidth is recomputed for this view as the
/// median distance between columns.
pub fn second_order_proximity(g: &FirstOrderGraph) -> Result<SecondOrderGraph> {
    let sq = pairwise_sq_distances(&g.similarity);
    let sigma = median_distance(&sq);
    if !(sigma > 0.0) {
        return Err(Error::DegenerateInput(
            "median distance between neighborhood vectors is zero".into(),
        ));
    }
    let mut similarity = gaussian_kernel(&sq, sigma);
    similarity.fill_diagonal(1.0);
    Ok(SecondOrderGraph { similarity, sigma })
}

/// `D - W` with `D` the diagonal of row sums.
pub fn laplacian(w: &DenseMatrix) -> DenseMatrix {
    let mut l = -w.clone();
    for (i, row) in w.row_iter().enumerate() {
        l[(i, i)] += row.sum();
    }
    l
}

/// Per-view weights: `lambda*/v` on the consensus support, `alpha * upsilon`
/// on its complement, zero on the diagonal.
pub fn fuse_weights(
    consensus: &ConsensusGraph,
    second_order: &[SecondOrderGraph],
    alpha: f64,
) -> Result<FusedGraph> {
    if !(alpha >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha must be nonnegative, got {alpha}"
        )));
    }
    if second_order.is_empty() {
        return Err(Error::InvalidArgument("no second-order graphs".into()));
    }
    let n = consensus.n();
    if let Some(bad) = second_order
        .iter()
        .position(|u| u.similarity.shape() != (n, n))
    {
        return Err(Error::InvalidArgument(format!(
            "second-order graph {bad} does not match the {n}x{n} consensus graph"
        )));
    }
    let v = second_order.len() as f64;
    let weights: Vec<DenseMatrix> = second_order
        .iter()
        .map(|ups| {
            DenseMatrix::from_fn(n, n, |i, j| {
                if i == j {
                    0.0
                } else if consensus.in_omega(i, j) {
                    consensus.lambda_star[(i, j)] / v
                } else {
                    alpha * ups.similarity[(i, j)]
                }
            })
        })
        .collect();
    let laplacians = weights.iter().map(laplacian).collect();
    Ok(FusedGraph {
        weights,
        laplacians,
    })
}

/// Weights taken directly from each view's first-order graph, with no
/// consensus split.
pub fn first_order_fusion(graphs: &[FirstOrderGraph]) -> FusedGraph {
    let weights: Vec<DenseMatrix> = graphs.iter().map(|g| g.similarity.clone()).collect();
    let laplacians = weights.iter().map(laplacian).collect();
    FusedGraph {
        weights,
        laplacians,
    }
}

/// `sum_k Tr(Z L_k Z^T)`: smoothness of the columns of `Z` over each graph.
///
/// For symmetric `W`, `Tr(Z L Z^T) = 1/2 sum_ij W_ij ||Z_i - Z_j||^2`.
pub fn laplacian_quadratic(laplacians: &[DenseMatrix], z: &DenseMatrix) -> Result<f64> {
    let n = z.ncols();
    let mut total = 0.0;
    for (k, l) in laplacians.iter().enumerate() {
        if l.shape() != (n, n) {
            return Err(Error::InvalidArgument(format!(
                "laplacian {k} is {:?}, expected {n}x{n}",
                l.shape()
            )));
        }
        total += (z * l).component_mul(z).sum();
    }
    Ok(total)
}

/// Consistent plus alpha-weighted complementary regularizer, summed pair by
/// pair over the index sets.
pub fn regularizer_by_pairs(
    consensus: &ConsensusGraph,
    second_order: &[SecondOrderGraph],
    alpha: f64,
    z: &DenseMatrix,
) -> f64 {
    let sq = pairwise_sq_distances(z);
    let consistent: f64 = consensus
        .omega()
        .map(|(i, j)| consensus.lambda_star[(i, j)] * sq[(i, j)])
        .sum();
    let complementary: f64 = second_order
        .iter()
        .map(|ups| {
            consensus
                .omega_bar()
                .filter(|&(i, j)| i != j)
                .map(|(i, j)| ups.similarity[(i, j)] * sq[(i, j)])
                .sum::<f64>()
        })
        .sum();
    0.5 * consistent + 0.5 * alpha * complementary
}

/// Pairwise form of `sum_k Tr(Z L_k Z^T)` for arbitrary weight matrices.
pub fn weighted_smoothness(weights: &[DenseMatrix], z: &DenseMatrix) -> f64 {
    let sq = pairwise_sq_distances(z);
    0.5 * weights
        .iter()
        .map(|w| w.component_mul(&sq).sum())
        .sum::<f64>()
}

/// Every graph derived from a dataset, computed once before optimization.
#[derive(Debug, Clone)]
pub struct GraphSet {
    pub first_order: Vec<FirstOrderGraph>,
    pub consensus: ConsensusGraph,
    pub second_order: Vec<SecondOrderGraph>,
    pub alpha: f64,
    /// Weights and Laplacians of the consistent/complementary regularizer.
    pub fused: FusedGraph,
}

impl GraphSet {
    pub fn build(views: &[DenseMatrix], k: usize, alpha: f64) -> Result<GraphSet> {
        let first_order = views
            .par_iter()
            .map(|x| first_order_proximity(x, k))
            .collect::<Result<Vec<_>>>()?;
        let consensus = consensus_graph(&first_order)?;
        let second_order = first_order
            .par_iter()
            .map(second_order_proximity)
            .collect::<Result<Vec<_>>>()?;
        let fused = fuse_weights(&consensus, &second_order, alpha)?;
        Ok(GraphSet {
            first_order,
            consensus,
            second_order,
            alpha,
            fused,
        })
    }

    /// Writes `first_order_{k}.csv`, `consensus.csv` and `second_order_{k}.csv`.
    pub fn dump(&self, dir: &std::path::Path) -> Result<()> {
        use crate::dataset::write_matrix_csv;
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (k, g) in self.first_order.iter().enumerate() {
            write_matrix_csv(&dir.join(format!("first_order_{k}.csv")), &g.similarity)?;
        }
        write_matrix_csv(&dir.join("consensus.csv"), &self.consensus.lambda_star)?;
        for (k, g) in self.second_order.iter().enumerate() {
            write_matrix_csv(&dir.join(format!("second_order_{k}.csv")), &g.similarity)?;
        }
        Ok(())
    }
}

/// Default neighbor count: `min(10, n / c)`, at least 1 and below `n`.
pub fn default_neighbor_count(n: usize, clusters: usize) -> usize {
    (n / clusters.max(1))
        .min(10)
        .clamp(1, n.saturating_sub(1).max(1))
}
