//! Independent reference computations for tests. Nothing here goes through
//! the incremental engine.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rkhs_complexity::{GramMatrix, KernelSource, KernelSpec};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n` points uniform in `[-1, 1]^d`.
pub fn random_rows(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect()
}

pub fn random_kernel(rng: &mut ChaCha8Rng) -> KernelSpec {
    match rng.gen_range(0..3) {
        0 => KernelSpec::Linear,
        1 => KernelSpec::Rbf {
            gamma: rng.gen_range(0.1..2.0),
        },
        _ => KernelSpec::Polynomial {
            degree: rng.gen_range(1..=3),
            offset: rng.gen_range(0.0..1.0),
        },
    }
}

pub fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

pub fn orthonormal(d: usize) -> GramMatrix {
    let rows: Vec<Vec<f64>> = (0..d)
        .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    GramMatrix::from_features(&rows)
}

pub fn sub_gram<K: KernelSource + ?Sized>(src: &K, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |a, b| src.entry(idx[a], idx[b]))
}

/// `log det(I + K/lambda)` from the eigenvalues of `K`.
pub fn dense_logdet<K: KernelSource + ?Sized>(src: &K, idx: &[usize], lambda: f64) -> f64 {
    if idx.is_empty() {
        return 0.0;
    }
    SymmetricEigen::new(sub_gram(src, idx))
        .eigenvalues
        .iter()
        .map(|&mu| (mu.max(0.0) / lambda).ln_1p())
        .sum()
}

/// `V = lambda I + sum_i f_i f_i^T` over explicit features.
pub fn primal_v(features: &[&[f64]], dim: usize, lambda: f64) -> DMatrix<f64> {
    let mut v = DMatrix::identity(dim, dim) * lambda;
    for f in features {
        let f = DVector::from_column_slice(f);
        v += &f * f.transpose();
    }
    v
}

pub fn logdet_spd(m: &DMatrix<f64>) -> f64 {
    let l = m.clone().cholesky().expect("positive definite");
    l.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum()
}

/// `x^T V^-1 x` by a dense solve.
pub fn primal_leverage(x: &[f64], preds: &[&[f64]], lambda: f64) -> f64 {
    let v = primal_v(preds, x.len(), lambda);
    let xv = DVector::from_column_slice(x);
    let sol = v.cholesky().expect("positive definite").solve(&xv);
    xv.dot(&sol)
}

/// `log det((V + x x^T)/lambda) - log det(V/lambda)`.
pub fn primal_increment(x: &[f64], preds: &[&[f64]], lambda: f64) -> f64 {
    let v = primal_v(preds, x.len(), lambda);
    let xv = DVector::from_column_slice(x);
    let w = &v + &xv * xv.transpose();
    logdet_spd(&w) - logdet_spd(&v)
}

/// Every multiset of size `k` from `0..n`, as sorted index vectors.
pub fn multisets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// `gamma_k` by enumerating all multisets.
pub fn enumerated_gamma<K: KernelSource + ?Sized>(src: &K, lambda: f64, k: usize) -> f64 {
    multisets(src.len(), k)
        .iter()
        .map(|m| dense_logdet(src, m, lambda))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `tilde gamma(lambda, c)` by enumeration, or `None` past `k_max`.
pub fn enumerated_tau<K: KernelSource + ?Sized>(src: &K, lambda: f64, c: f64, k_max: usize) -> Option<usize> {
    (1..=k_max).find(|&k| enumerated_gamma(src, lambda, k) <= c * k as f64)
}

/// Monte Carlo lower estimate of
/// `sup { <D, x> : ||D|| <= 2S, sum_i <D, x_i>^2 <= eps^2 }` over explicit
/// features: random directions rescaled onto the feasible set, plus the
/// direction `x` itself.
pub fn monte_carlo_sup(
    rng: &mut ChaCha8Rng,
    x: &[f64],
    preds: &[&[f64]],
    eps: f64,
    s: f64,
    samples: usize,
) -> f64 {
    let value = |u: &[f64]| -> f64 {
        let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let energy: f64 = preds
            .iter()
            .map(|p| p.iter().zip(u).map(|(a, b)| a * b).sum::<f64>().powi(2))
            .sum();
        let t = (2.0 * s / norm).min(if energy > 0.0 { eps / energy.sqrt() } else { f64::INFINITY });
        (t * x.iter().zip(u).map(|(a, b)| a * b).sum::<f64>()).abs()
    };
    let mut best = value(x);
    for _ in 0..samples {
        // perturbations around x explore the active region better than
        // isotropic draws
        let scale = log_uniform(rng, 1e-3, 10.0);
        let u: Vec<f64> = x.iter().map(|&xi| xi + scale * rng.gen_range(-1.0..1.0)).collect();
        best = best.max(value(&u));
    }
    best
}

pub fn rows_as_refs(rows: &[Vec<f64>]) -> Vec<&[f64]> {
    rows.iter().map(Vec::as_slice).collect()
}
