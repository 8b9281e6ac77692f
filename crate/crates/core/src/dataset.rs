//! Multi-view datasets: manifest loading, normalization, synthetic generation.
//!
//! On disk every view is a headerless CSV with one row per feature and one
//! column per sample. Labels are a single-column CSV of nonnegative integers.
//! A JSON manifest ties the files together:
//!
//! ```json
//! {"name": "ngs", "clusters": 5,
//!  "views": [{"path": "v1.csv", "rows": 2000}, {"path": "v2.csv", "rows": 2000}],
//!  "labels": "labels.csv"}
//! ```
//!
//! Paths are resolved relative to the manifest's directory.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use log::warn;
use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ensure_finite, DenseMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct MultiViewDataset {
    pub name: String,
    /// One `d_k x n` matrix per view; columns are samples.
    pub views: Vec<DenseMatrix>,
    pub labels: Option<Vec<usize>>,
    pub clusters: usize,
}

impl MultiViewDataset {
    pub fn new(
        name: impl Into<String>,
        views: Vec<DenseMatrix>,
        labels: Option<Vec<usize>>,
        clusters: usize,
    ) -> Result<Self> {
        let ds = MultiViewDataset {
            name: name.into(),
            views,
            labels,
            clusters,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn n_samples(&self) -> usize {
        self.views.first().map_or(0, |v| v.ncols())
    }

    pub fn n_views(&self) -> usize {
        self.views.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.views.is_empty() {
            return Err(Error::Validation("dataset has no views".into()));
        }
        for (k, v) in self.views.iter().enumerate() {
            ensure_finite(v, &format!("view {k}"))?;
        }
        let n = self.n_samples();
        let offending: Vec<String> = self
            .views
            .iter()
            .enumerate()
            .filter(|(_, v)| v.ncols() != n)
            .map(|(k, v)| format!("view {k} has {} samples", v.ncols()))
            .collect();
        if !offending.is_empty() {
            return Err(Error::Validation(format!(
                "views disagree on sample count (view 0 has {n}): {}",
                offending.join(", ")
            )));
        }
        if self.clusters < 1 {
            return Err(Error::Validation("cluster count must be at least 1".into()));
        }
        if let Some(labels) = &self.labels {
            if labels.len() != n {
                return Err(Error::Validation(format!(
                    "{} labels for {n} samples",
                    labels.len()
                )));
            }
            let distinct = labels.iter().collect::<BTreeSet<_>>().len();
            if distinct != self.clusters {
                return Err(Error::Validation(format!(
                    "labels contain {distinct} distinct classes but the cluster count is {}",
                    self.clusters
                )));
            }
        }
        Ok(())
    }

    /// The dataset restricted to a single view.
    pub fn single_view(&self, k: usize) -> MultiViewDataset {
        MultiViewDataset {
            name: format!("{}[view {k}]", self.name),
            views: vec![self.views[k].clone()],
            labels: self.labels.clone(),
            clusters: self.clusters,
        }
    }

    /// Reorders samples so that new sample `i` is old sample `perm[i]`.
    pub fn permute_samples(&self, perm: &[usize]) -> MultiViewDataset {
        MultiViewDataset {
            name: self.name.clone(),
            views: self.views.iter().map(|v| v.select_columns(perm)).collect(),
            labels: self
                .labels
                .as_ref()
                .map(|l| perm.iter().map(|&i| l[i]).collect()),
            clusters: self.clusters,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ViewEntry {
    pub path: String,
    pub rows: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Manifest {
    pub name: String,
    pub clusters: usize,
    pub views: Vec<ViewEntry>,
    pub labels: Option<String>,
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Parses a headerless numeric CSV into a matrix with one CSV row per matrix row.
pub fn read_matrix_csv(path: &Path) -> Result<DenseMatrix> {
    let text = read_text(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .enumerate()
            .map(|(col, field)| {
                let field = field.trim();
                let value: f64 = field.parse().map_err(|_| Error::Parse {
                    path: path.to_path_buf(),
                    message: format!("bad number {field:?} at row {line_no}, column {col}"),
                })?;
                if !value.is_finite() {
                    return Err(Error::Validation(format!(
                        "{}: non-finite value at row {line_no}, column {col}",
                        path.display()
                    )));
                }
                Ok(value)
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    message: format!(
                        "row {line_no} has {} fields, expected {}",
                        row.len(),
                        first.len()
                    ),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            message: "no data rows".into(),
        });
    }
    let cols = rows[0].len();
    Ok(DenseMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

pub fn read_labels_csv(path: &Path) -> Result<Vec<usize>> {
    let text = read_text(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(line_no, l)| {
            l.trim().parse::<usize>().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                message: format!("bad label {:?} at line {line_no}", l.trim()),
            })
        })
        .collect()
}

pub fn write_matrix_csv(path: &Path, m: &DenseMatrix) -> Result<()> {
    let mut out = String::with_capacity(m.nrows() * m.ncols() * 20);
    for row in m.row_iter() {
        let fields: Vec<String> = row.iter().map(|x| format!("{x}")).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn write_labels_csv(path: &Path, labels: &[usize]) -> Result<()> {
    let mut out = String::with_capacity(labels.len() * 3);
    for l in labels {
        out.push_str(&l.to_string());
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn load_dataset(manifest_path: &Path) -> Result<MultiViewDataset> {
    let text = read_text(manifest_path)?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: manifest_path.to_path_buf(),
        message: e.to_string(),
    })?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let resolve = |p: &str| -> PathBuf { base.join(p) };

    let mut views = Vec::with_capacity(manifest.views.len());
    for (k, entry) in manifest.views.iter().enumerate() {
        let m = read_matrix_csv(&resolve(&entry.path))?;
        if m.nrows() != entry.rows {
            return Err(Error::Validation(format!(
                "view {k} ({}) has {} rows, manifest says {}",
                entry.path,
                m.nrows(),
                entry.rows
            )));
        }
        views.push(m);
    }
    let labels = manifest
        .labels
        .as_deref()
        .map(|p| read_labels_csv(&resolve(p)))
        .transpose()?;
    MultiViewDataset::new(manifest.name, views, labels, manifest.clusters)
}

/// Writes `view{k}.csv`, `labels.csv` and `manifest.json` into `dir`,
/// returning the manifest path.
pub fn write_dataset(ds: &MultiViewDataset, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(ds.views.len());
    for (k, v) in ds.views.iter().enumerate() {
        let file = format!("view{k}.csv");
        write_matrix_csv(&dir.join(&file), v)?;
        entries.push(ViewEntry {
            path: file,
            rows: v.nrows(),
        });
    }
    let labels = match &ds.labels {
        Some(l) => {
            write_labels_csv(&dir.join("labels.csv"), l)?;
            Some("labels.csv".to_string())
        }
        None => None,
    };
    let manifest = Manifest {
        name: ds.name.clone(),
        clusters: ds.clusters,
        views: entries,
        labels,
    };
    let path = dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    None,
    #[default]
    UnitColumn,
    ZscoreFeature,
}

impl std::str::FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Normalization::None),
            "unit_column" | "unit-column" => Ok(Normalization::UnitColumn),
            "zscore_feature" | "zscore-feature" => Ok(Normalization::ZscoreFeature),
            other => Err(Error::InvalidArgument(format!(
                "unknown normalization {other:?}"
            ))),
        }
    }
}

pub fn normalize_views(ds: &MultiViewDataset, mode: Normalization) -> MultiViewDataset {
    let views = ds
        .views
        .iter()
        .enumerate()
        .map(|(k, v)| match mode {
            Normalization::None => v.clone(),
            Normalization::UnitColumn => {
                let mut out = v.clone();
                let mut zero_columns = 0;
                for mut col in out.column_iter_mut() {
                    let norm = col.norm();
                    if norm > 0.0 {
                        col /= norm;
                    } else {
                        zero_columns += 1;
                    }
                }
                if zero_columns > 0 {
                    warn!("view {k}: {zero_columns} zero sample columns left unnormalized");
                }
                out
            }
            Normalization::ZscoreFeature => {
                let mut out = v.clone();
                let n = v.ncols() as f64;
                for mut row in out.row_iter_mut() {
                    let mean = row.sum() / n;
                    row.add_scalar_mut(-mean);
                    let std = (row.norm_squared() / n).sqrt();
                    if std > 0.0 {
                        row /= std;
                    }
                }
                out
            }
        })
        .collect();
    MultiViewDataset {
        name: ds.name.clone(),
        views,
        labels: ds.labels.clone(),
        clusters: ds.clusters,
    }
}

/// Parameters of a planted union-of-subspaces dataset.
///
/// Each cluster owns a random `subspace_rank`-dimensional subspace of a
/// shared latent space of dimension `clusters * subspace_rank`. A sample's
/// coefficients in its cluster basis are split into a prefix shared by all
/// views (`round(consensus_fraction * rank)` coordinates) and a suffix drawn
/// independently for every view. Each view maps latent points to its own
/// dimension with a random Gaussian matrix and adds isotropic noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub clusters: usize,
    pub dims: Vec<usize>,
    pub subspace_rank: usize,
    pub noise_sigma: f64,
    #[serde(default = "default_consensus")]
    pub consensus_fraction: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_consensus() -> f64 {
    1.0
}

impl Default for SyntheticSpec {
    /// The reference configuration: 150 samples, 3 clusters, views of
    /// dimension 20/30/40, rank-3 subspaces, noise 0.05.
    fn default() -> Self {
        SyntheticSpec {
            n: 150,
            clusters: 3,
            dims: vec![20, 30, 40],
            subspace_rank: 3,
            noise_sigma: 0.05,
            consensus_fraction: 1.0,
            seed: 7,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Validation(m));
        if self.clusters < 1 {
            return fail("synthetic spec needs at least one cluster".into());
        }
        if self.subspace_rank < 1 {
            return fail("subspace rank must be at least 1".into());
        }
        if self.n < self.clusters * self.subspace_rank {
            return fail(format!(
                "n = {} is below clusters * rank = {}",
                self.n,
                self.clusters * self.subspace_rank
            ));
        }
        if self.dims.is_empty() {
            return fail("synthetic spec needs at least one view".into());
        }
        if let Some(d) = self.dims.iter().find(|&&d| d < self.subspace_rank) {
            return fail(format!("view dimension {d} is below the subspace rank"));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return fail(format!(
                "noise sigma must be nonnegative, got {}",
                self.noise_sigma
            ));
        }
        if !(0.0..=1.0).contains(&self.consensus_fraction) {
            return fail(format!(
                "consensus fraction must lie in [0, 1], got {}",
                self.consensus_fraction
            ));
        }
        Ok(())
    }
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        z * scale
    })
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<MultiViewDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let c = spec.clusters;
    let r = spec.subspace_rank;
    let latent_dim = c * r;
    let shared = ((spec.consensus_fraction * r as f64).round() as usize).min(r);

    let bases: Vec<DenseMatrix> = (0..c)
        .map(|_| gaussian_matrix(&mut rng, latent_dim, r, 1.0).qr().q())
        .collect();
    let maps: Vec<DenseMatrix> = spec
        .dims
        .iter()
        .map(|&d| gaussian_matrix(&mut rng, d, latent_dim, 1.0 / (d as f64).sqrt()))
        .collect();

    // Balanced sizes; the first n % c clusters get one extra sample.
    let mut labels: Vec<usize> = (0..spec.n).map(|i| i * c / spec.n).collect();
    labels.sort_unstable();
    labels.shuffle(&mut rng);

    let v = spec.dims.len();
    let mut latent: Vec<DenseMatrix> = vec![DenseMatrix::zeros(latent_dim, spec.n); v];
    for (i, &label) in labels.iter().enumerate() {
        let shared_coeffs: Vec<f64> = (0..shared)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        for lat in latent.iter_mut() {
            let coeffs = DVector::from_iterator(
                r,
                shared_coeffs
                    .iter()
                    .copied()
                    .chain((shared..r).map(|_| StandardNormal.sample(&mut rng))),
            );
            lat.set_column(i, &(&bases[label] * coeffs));
        }
    }

    let views = maps
        .iter()
        .zip(&latent)
        .map(|(map, lat)| {
            let clean = map * lat;
            let noise = gaussian_matrix(&mut rng, clean.nrows(), clean.ncols(), spec.noise_sigma);
            clean + noise
        })
        .collect();

    MultiViewDataset::new(
        format!("synthetic-seed{}", spec.seed),
        views,
        Some(labels),
        c,
    )
}
