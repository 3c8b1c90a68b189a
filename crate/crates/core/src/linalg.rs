//! Small dense helpers shared by the search routines.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::kernel::{GramMatrix, KernelSource};

/// Eigenvalues below this fraction of the largest one are treated as zero
/// when factoring a Gram matrix into explicit features.
pub const RANK_RTOL: f64 = 1e-12;

/// Squared kernel distance below this fraction of the larger diagonal marks
/// two points as duplicates.
pub const DUPLICATE_RTOL: f64 = 1e-12;

/// Lower Cholesky factor of the row-major `n x n` matrix `a`, or `None` if a
/// pivot is not positive.
pub fn cholesky(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

pub fn chol_logdet(l: &[f64], n: usize) -> f64 {
    (0..n).map(|i| 2.0 * l[i * n + i].ln()).sum()
}

/// Solves `L y = b` in place.
pub fn forward_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

/// Rows `f_i` with `<f_i, f_j> = G_ij`, from the eigendecomposition of `G`
/// truncated to its numerically nonzero spectrum.
pub fn feature_factor(gram: &GramMatrix) -> Vec<Vec<f64>> {
    let n = gram.len();
    if n == 0 {
        return Vec::new();
    }
    feature_factor_dense(gram.to_dmatrix())
}

pub fn feature_factor_dense(m: DMatrix<f64>) -> Vec<Vec<f64>> {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m);
    let max_eig = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let kept: Vec<usize> = (0..n)
        .filter(|&k| eig.eigenvalues[k] > RANK_RTOL * max_eig && eig.eigenvalues[k] > 0.0)
        .collect();
    (0..n)
        .map(|i| {
            kept.iter()
                .map(|&k| eig.eigenvectors[(i, k)] * eig.eigenvalues[k].sqrt())
                .collect()
        })
        .collect()
}

/// Groups indices whose kernel sections coincide. Returns the representative
/// (lowest index) of each group, in order of first appearance.
pub fn distinct_indices<K: KernelSource + ?Sized>(src: &K, indices: &[usize]) -> Vec<usize> {
    let mut reps: Vec<usize> = Vec::new();
    for &i in indices {
        if !reps.iter().any(|&r| is_duplicate(src, r, i)) {
            reps.push(i);
        }
    }
    reps
}

pub fn is_duplicate<K: KernelSource + ?Sized>(src: &K, i: usize, j: usize) -> bool {
    if i == j {
        return true;
    }
    let (a, b) = (src.diag(i), src.diag(j));
    let d2 = a + b - 2.0 * src.entry(i, j);
    d2 <= DUPLICATE_RTOL * a.max(b).max(f64::MIN_POSITIVE)
}
