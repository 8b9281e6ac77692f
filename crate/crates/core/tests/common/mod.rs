#![allow(dead_code)]

use grmsc::graph::GraphSet;
use grmsc::DenseMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

/// Random matrix scaled to Frobenius norm `norm`.
pub fn direction(rng: &mut ChaCha8Rng, rows: usize, cols: usize, norm: f64) -> DenseMatrix {
    let m = uniform(rng, rows, cols);
    let f = m.norm();
    m * (norm / f)
}

/// Cyclic Jacobi eigenvalues of a symmetric matrix. Independent of the
/// library's decompositions.
pub fn jacobi_eigenvalues(a: &DenseMatrix) -> Vec<f64> {
    let n = a.nrows();
    let mut m = a.clone();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if m[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * m[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut vals: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    vals.sort_by(f64::total_cmp);
    vals
}

/// Nuclear norm as `trace(sqrt(G))` via Jacobi, `G` the smaller Gram matrix.
pub fn nuclear_norm_oracle(m: &DenseMatrix) -> f64 {
    let gram = if m.nrows() < m.ncols() {
        m * m.transpose()
    } else {
        m.transpose() * m
    };
    jacobi_eigenvalues(&gram)
        .into_iter()
        .map(|l| l.max(0.0).sqrt())
        .sum()
}

/// Random orthogonal matrix from Gram-Schmidt on a random square matrix.
pub fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DenseMatrix {
    let mut m = uniform(rng, n, n);
    for j in 0..n {
        for k in 0..j {
            let proj = m.column(k).dot(&m.column(j));
            let ck = m.column(k).into_owned();
            let mut cj = m.column_mut(j);
            cj -= ck * proj;
        }
        let norm = m.column(j).norm();
        m.column_mut(j).scale_mut(1.0 / norm);
    }
    m
}

/// Brute-force `||A - B||_F`.
pub fn frob_diff(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    (a - b).norm()
}

/// All permutations of `0..k`.
pub fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

/// `1/2 sum_{Omega} L*_ij ||Z_i - Z_j||^2 + alpha/2 sum_k sum_{Omega-bar} U_ij ||Z_i - Z_j||^2`
/// by a direct double loop over columns.
pub fn direct_regularizer(gs: &GraphSet, z: &DenseMatrix) -> f64 {
    let n = z.ncols();
    let mut consistent = 0.0;
    let mut complementary = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let d2 = (z.column(i) - z.column(j)).norm_squared();
            let lam = gs.consensus.lambda_star[(i, j)];
            if lam > 0.0 {
                consistent += lam * d2;
            } else {
                for ups in &gs.second_order {
                    complementary += ups.similarity[(i, j)] * d2;
                }
            }
        }
    }
    0.5 * consistent + 0.5 * gs.alpha * complementary
}
