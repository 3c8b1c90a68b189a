//! Exact value of
//!
//! ```text
//! v* = sup { <D, x> : ||D|| <= 2S, sum_i <D, x_i>^2 <= eps^2 }
//! ```
//!
//! over the RKHS. Any component of `D` orthogonal to `span{x, x_1..x_n}`
//! changes neither the objective nor the data constraint but uses norm
//! budget, so the supremum is attained in that span. The span is mapped
//! isometrically onto `R^r` through an eigendecomposition of its Gram, where
//! `x -> p` and `sum_i x_i x_i^T -> G`.
//!
//! With `w(mu) = (I + mu G)^-1 p`, the KKT point has both constraints active
//! at the `mu` solving `eps^2 ||w||^2 = 4 S^2 w^T G w` (the ratio
//! `w^T G w / ||w||^2` is non-increasing in `mu`, so the root is found by
//! bisection). Two limits handle the single-constraint regimes: `mu = 0`
//! (ball only, `D = 2S p / ||p||`) and `mu -> inf` (ellipsoid only,
//! `D = eps G^+ p / sqrt(p^T G^+ p)`).
//!
//! Every `mu >= 0` gives a certificate pair: a primal feasible value
//! (rescale `w(mu)` into both constraints) and the dual bound
//! `sqrt(p^T (I + mu G)^-1 p * (4 S^2 + mu eps^2))`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::kernel::GramMatrix;
use crate::linalg::{feature_factor, RANK_RTOL};

const BISECTION_STEPS: usize = 200;
const BRACKET_STEPS: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct SupBounds {
    /// Value of a feasible deviation.
    pub lower: f64,
    /// Dual upper bound.
    pub upper: f64,
}

/// `support_gram` is the Gram of `(x, x_1, .., x_n)`, with `x` first.
pub(crate) fn sup_deviation(support_gram: &GramMatrix, epsilon: f64, s: f64) -> SupBounds {
    let features = feature_factor(support_gram);
    let r = features.first().map_or(0, Vec::len);
    if r == 0 {
        return SupBounds { lower: 0.0, upper: 0.0 };
    }
    let p = &features[0];
    let mut g = DMatrix::<f64>::zeros(r, r);
    for f in &features[1..] {
        for a in 0..r {
            for b in 0..r {
                g[(a, b)] += f[a] * f[b];
            }
        }
    }
    let eig = SymmetricEigen::new(g);
    let g_max = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let spectrum: Vec<(f64, f64)> = (0..r)
        .map(|k| {
            let gk = eig.eigenvalues[k];
            let gk = if gk > RANK_RTOL * g_max { gk } else { 0.0 };
            let pk: f64 = (0..r).map(|a| eig.eigenvectors[(a, k)] * p[a]).sum();
            (gk, pk * pk)
        })
        .collect();
    solve_diagonal(&spectrum, epsilon, s)
}

/// The problem in the eigenbasis of `G`: `spectrum[k] = (g_k, p_k^2)`.
pub(crate) fn solve_diagonal(spectrum: &[(f64, f64)], epsilon: f64, s: f64) -> SupBounds {
    let ball = 4.0 * s * s;
    let p_norm_sq: f64 = spectrum.iter().map(|&(_, pk)| pk).sum();
    if p_norm_sq == 0.0 {
        return SupBounds { lower: 0.0, upper: 0.0 };
    }
    let null_mass: f64 = spectrum.iter().filter(|&&(g, _)| g == 0.0).map(|&(_, pk)| pk).sum();

    if epsilon == 0.0 {
        // the data constraint forces D into the null space of G
        let v = 2.0 * s * null_mass.sqrt();
        return SupBounds { lower: v, upper: v };
    }
    let eps_sq = epsilon * epsilon;

    // ball-only corner
    let gp: f64 = spectrum.iter().map(|&(g, pk)| g * pk).sum();
    if eps_sq * p_norm_sq >= ball * gp {
        let v = 2.0 * s * p_norm_sq.sqrt();
        return SupBounds { lower: v, upper: v };
    }

    // ellipsoid-only limit
    if null_mass == 0.0 {
        let q_inf: f64 = spectrum.iter().filter(|&&(g, _)| g > 0.0).map(|&(g, pk)| pk / g).sum();
        let n_inf: f64 = spectrum.iter().filter(|&&(g, _)| g > 0.0).map(|&(g, pk)| pk / (g * g)).sum();
        if eps_sq * n_inf <= ball * q_inf {
            let v = epsilon * q_inf.sqrt();
            return SupBounds { lower: v, upper: v };
        }
    }

    let moments = |mu: f64| {
        let mut norm_sq = 0.0;
        let mut energy = 0.0;
        let mut q = 0.0;
        for &(g, pk) in spectrum {
            let d = 1.0 + mu * g;
            norm_sq += pk / (d * d);
            energy += g * pk / (d * d);
            q += pk / d;
        }
        (norm_sq, energy, q)
    };
    let residual = |mu: f64| {
        let (n, e, _) = moments(mu);
        eps_sq * n - ball * e
    };
    let certify = |mu: f64| {
        let (n, e, q) = moments(mu);
        let t = (2.0 * s / n.sqrt()).min(if e > 0.0 { epsilon / e.sqrt() } else { f64::INFINITY });
        let primal = t * q;
        let dual = (q * (ball + mu * eps_sq)).sqrt();
        (primal, dual)
    };

    let g_max = spectrum.iter().map(|&(g, _)| g).fold(0.0, f64::max);
    let mut lo = 0.0;
    let mut hi = 1.0 / g_max;
    let mut steps = 0;
    while residual(hi) < 0.0 && steps < BRACKET_STEPS {
        lo = hi;
        hi *= 2.0;
        steps += 1;
    }
    for _ in 0..BISECTION_STEPS {
        let mid = if lo == 0.0 { 0.5 * hi } else { (lo * hi).sqrt() };
        if !(mid > lo && mid < hi) {
            break;
        }
        if residual(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (p_lo, d_lo) = certify(lo);
    let (p_hi, d_hi) = certify(hi);
    SupBounds {
        lower: p_lo.max(p_hi),
        upper: d_lo.min(d_hi),
    }
}
