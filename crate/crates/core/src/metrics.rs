//! Clustering quality measures: NMI, ACC, F-score, AVGent, precision and
//! Rand index, all derived from the contingency table of two labelings.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Co-occurrence counts, predicted clusters by true classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    pub counts: Vec<Vec<usize>>,
    pub n: usize,
}

fn dense_ids(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut map = BTreeMap::new();
    for &l in labels {
        let next = map.len();
        map.entry(l).or_insert(next);
    }
    (labels.iter().map(|l| map[l]).collect(), map.len())
}

impl ContingencyTable {
    pub fn new(pred: &[usize], truth: &[usize]) -> Result<Self> {
        if pred.len() != truth.len() {
            return Err(Error::InvalidArgument(format!(
                "label vectors differ in length: {} vs {}",
                pred.len(),
                truth.len()
            )));
        }
        if pred.is_empty() {
            return Err(Error::InvalidArgument("label vectors are empty".into()));
        }
        let (p, rows) = dense_ids(pred);
        let (t, cols) = dense_ids(truth);
        let mut counts = vec![vec![0usize; cols]; rows];
        for (&i, &j) in p.iter().zip(&t) {
            counts[i][j] += 1;
        }
        Ok(ContingencyTable {
            counts,
            n: pred.len(),
        })
    }

    pub fn row_sums(&self) -> Vec<usize> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<usize> {
        let cols = self.counts.first().map_or(0, Vec::len);
        (0..cols)
            .map(|j| self.counts.iter().map(|r| r[j]).sum())
            .collect()
    }
}

/// Maximum-weight perfect matching on a square matrix (Hungarian method,
/// shortest augmenting paths). Returns `assignment[row] = col`.
fn max_weight_assignment(weights: &[Vec<f64>]) -> Vec<usize> {
    let n = weights.len();
    // Minimize cost = -weight; potentials u (rows), v (cols), 1-based.
    let cost = |i: usize, j: usize| -weights[i - 1][j - 1];
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut col_owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        col_owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = col_owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[col_owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if col_owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            col_owner[j0] = col_owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if col_owner[j] > 0 {
            assignment[col_owner[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Best one-to-one cluster-to-class mapping accuracy.
pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let table = ContingencyTable::new(pred, truth)?;
    let size = table.counts.len().max(table.counts[0].len());
    let mut weights = vec![vec![0.0; size]; size];
    for (i, row) in table.counts.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            weights[i][j] = c as f64;
        }
    }
    let assignment = max_weight_assignment(&weights);
    let matched: f64 = assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| weights[i][j])
        .sum();
    Ok(matched / table.n as f64)
}

/// How mutual information is normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NmiNormalization {
    #[default]
    Geometric,
    Arithmetic,
    Max,
}

fn entropy(sizes: &[usize], n: usize, log: fn(f64) -> f64) -> f64 {
    let n = n as f64;
    sizes
        .iter()
        .filter(|&&s| s > 0)
        .map(|&s| {
            let p = s as f64 / n;
            -p * log(p)
        })
        .sum()
}

fn same_partition(table: &ContingencyTable) -> bool {
    // Identical partitions: every row and every column has exactly one nonzero cell.
    let rows_ok = table
        .counts
        .iter()
        .all(|r| r.iter().filter(|&&c| c > 0).count() == 1);
    let cols = table.counts[0].len();
    let cols_ok = (0..cols).all(|j| table.counts.iter().filter(|r| r[j] > 0).count() == 1);
    rows_ok && cols_ok
}

pub fn nmi_with(pred: &[usize], truth: &[usize], norm: NmiNormalization) -> Result<f64> {
    let table = ContingencyTable::new(pred, truth)?;
    let n = table.n as f64;
    let rows = table.row_sums();
    let cols = table.col_sums();
    let hp = entropy(&rows, table.n, f64::ln);
    let ht = entropy(&cols, table.n, f64::ln);
    if hp == 0.0 || ht == 0.0 {
        return Ok(if same_partition(&table) { 1.0 } else { 0.0 });
    }
    let mut mi = 0.0;
    for (i, row) in table.counts.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if c > 0 {
                let c = c as f64;
                mi += c / n * (c * n / (rows[i] as f64 * cols[j] as f64)).ln();
            }
        }
    }
    let denom = match norm {
        NmiNormalization::Geometric => (hp * ht).sqrt(),
        NmiNormalization::Arithmetic => 0.5 * (hp + ht),
        NmiNormalization::Max => hp.max(ht),
    };
    Ok((mi / denom).clamp(0.0, 1.0))
}

pub fn nmi(pred: &[usize], truth: &[usize]) -> Result<f64> {
    nmi_with(pred, truth, NmiNormalization::Geometric)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairwiseScores {
    pub f_score: f64,
    pub precision: f64,
    pub recall: f64,
    pub rand_index: f64,
}

fn pairs(k: usize) -> f64 {
    let k = k as f64;
    k * (k - 1.0) / 2.0
}

/// Pair-counting precision, recall, F-score and Rand index.
pub fn pairwise_scores(pred: &[usize], truth: &[usize]) -> Result<PairwiseScores> {
    let table = ContingencyTable::new(pred, truth)?;
    if table.n < 2 {
        return Err(Error::InvalidArgument(
            "pair scores need at least two samples".into(),
        ));
    }
    let tp: f64 = table.counts.iter().flatten().map(|&c| pairs(c)).sum();
    let pred_pairs: f64 = table.row_sums().into_iter().map(pairs).sum();
    let truth_pairs: f64 = table.col_sums().into_iter().map(pairs).sum();
    let total = pairs(table.n);
    let fp = pred_pairs - tp;
    let fn_ = truth_pairs - tp;
    let tn = total - tp - fp - fn_;

    let precision = if pred_pairs > 0.0 {
        tp / pred_pairs
    } else {
        1.0
    };
    let recall = if truth_pairs > 0.0 {
        tp / truth_pairs
    } else {
        1.0
    };
    let f_score = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(PairwiseScores {
        f_score,
        precision,
        recall,
        rand_index: (tp + tn) / total,
    })
}

/// Size-weighted base-2 entropy of the class mix inside each predicted cluster.
pub fn avgent(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let table = ContingencyTable::new(pred, truth)?;
    let n = table.n as f64;
    Ok(table
        .counts
        .iter()
        .map(|row| {
            let size: usize = row.iter().sum();
            size as f64 / n * entropy(row, size, f64::log2)
        })
        .sum())
}

/// The six reported measures for one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub nmi: f64,
    pub acc: f64,
    pub f_score: f64,
    pub avgent: f64,
    pub precision: f64,
    pub rand_index: f64,
}

impl EvaluationReport {
    pub const NAMES: [&'static str; 6] =
        ["nmi", "acc", "f_score", "avgent", "precision", "rand_index"];

    pub fn values(&self) -> [f64; 6] {
        [
            self.nmi,
            self.acc,
            self.f_score,
            self.avgent,
            self.precision,
            self.rand_index,
        ]
    }

    pub fn from_values(v: [f64; 6]) -> Self {
        EvaluationReport {
            nmi: v[0],
            acc: v[1],
            f_score: v[2],
            avgent: v[3],
            precision: v[4],
            rand_index: v[5],
        }
    }
}

pub fn evaluate(pred: &[usize], truth: &[usize]) -> Result<EvaluationReport> {
    evaluate_with(pred, truth, NmiNormalization::Geometric)
}

pub fn evaluate_with(
    pred: &[usize],
    truth: &[usize],
    norm: NmiNormalization,
) -> Result<EvaluationReport> {
    let pair = pairwise_scores(pred, truth)?;
    Ok(EvaluationReport {
        nmi: nmi_with(pred, truth, norm)?,
        acc: accuracy(pred, truth)?,
        f_score: pair.f_score,
        avgent: avgent(pred, truth)?,
        precision: pair.precision,
        rand_index: pair.rand_index,
    })
}

/// Mean and sample standard deviation of one metric across runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> MeanStd {
        if values.is_empty() {
            return MeanStd {
                mean: f64::NAN,
                std: f64::NAN,
            };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        MeanStd { mean, std }
    }
}

impl std::fmt::Display for MeanStd {
    /// `0.9547(0.0012)`.
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.4}({:.4})", self.mean, self.std)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub nmi: MeanStd,
    pub acc: MeanStd,
    pub f_score: MeanStd,
    pub avgent: MeanStd,
    pub precision: MeanStd,
    pub rand_index: MeanStd,
}

impl ReportSummary {
    pub fn of(reports: &[EvaluationReport]) -> ReportSummary {
        let col =
            |i: usize| MeanStd::of(&reports.iter().map(|r| r.values()[i]).collect::<Vec<_>>());
        ReportSummary {
            nmi: col(0),
            acc: col(1),
            f_score: col(2),
            avgent: col(3),
            precision: col(4),
            rand_index: col(5),
        }
    }

    pub fn entries(&self) -> [MeanStd; 6] {
        [
            self.nmi,
            self.acc,
            self.f_score,
            self.avgent,
            self.precision,
            self.rand_index,
        ]
    }
}
