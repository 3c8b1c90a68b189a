//! Incremental log-determinant engine.
//!
//! The regularized operator `V = lambda I + sum_i x_i x_i^T` is never formed.
//! Everything is done in dual coordinates: with `K_n` the Gram of the stored
//! points and `L L^T = K_n + lambda I`,
//!
//! ```text
//! ||x||^2_{V^-1} = (K(x,x) - k_x^T (K_n + lambda I)^-1 k_x) / lambda
//! log det(I + K_n / lambda) = sum_i 2 log L_ii - n log lambda
//! ```
//!
//! Appending a point borders `L` with one row; the new diagonal entry
//! satisfies `L_nn^2 = lambda (1 + ||x||^2_{V^-1})`, so the information gain
//! increment is `log(L_nn^2 / lambda)`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::kernel::KernelSource;

/// A new pivot `L_nn^2` must exceed this multiple of `K(x,x) + lambda`.
pub const PIVOT_RTOL: f64 = 1e-12;

/// Candidate pools at least this large are updated in parallel.
const PARALLEL_POOL: usize = 256;

/// Value-semantics posterior: [`PosteriorState::extend`] returns a new state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PosteriorState {
    lambda: f64,
    points: Vec<usize>,
    /// Row `i` holds `L[i][0..=i]`.
    chol: Vec<Vec<f64>>,
    total_gain: f64,
}

impl PosteriorState {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(invalid(format!("lambda must be positive, got {lambda}")));
        }
        Ok(Self {
            lambda,
            points: Vec::new(),
            chol: Vec::new(),
            total_gain: 0.0,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn points(&self) -> &[usize] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `log det(I + K_n / lambda)`.
    pub fn total_gain(&self) -> f64 {
        self.total_gain
    }

    pub fn cholesky_row(&self, i: usize) -> &[f64] {
        &self.chol[i]
    }

    /// `L^-1 k_x` together with `K(x,x)`.
    fn forward<K: KernelSource + ?Sized>(&self, src: &K, x: usize) -> (Vec<f64>, f64) {
        let n = self.points.len();
        let mut v = Vec::with_capacity(n);
        for i in 0..n {
            let row = &self.chol[i];
            let s: f64 = row[..i].iter().zip(&v).map(|(l, vj)| l * vj).sum();
            v.push((src.entry(x, self.points[i]) - s) / row[i]);
        }
        (v, src.diag(x))
    }

    fn check_index<K: KernelSource + ?Sized>(src: &K, x: usize) -> Result<()> {
        if x >= src.len() {
            return Err(Error::IdOutOfRange { id: x, len: src.len() });
        }
        Ok(())
    }

    /// `||x||^2_{V^-1}`, clamped to `[0, K(x,x)/lambda]`.
    pub fn leverage<K: KernelSource + ?Sized>(&self, src: &K, x: usize) -> Result<f64> {
        Self::check_index(src, x)?;
        let (v, kxx) = self.forward(src, x);
        let residual = kxx - v.iter().map(|a| a * a).sum::<f64>();
        Ok((residual / self.lambda).clamp(0.0, kxx.max(0.0) / self.lambda))
    }

    /// `Delta gamma(lambda; x | stored points) = log(1 + leverage)`.
    pub fn gain_increment<K: KernelSource + ?Sized>(&self, src: &K, x: usize) -> Result<f64> {
        Ok(self.leverage(src, x)?.ln_1p())
    }

    /// Dual weights `alpha = (K_n + lambda I)^-1 k_x`, so that
    /// `V^-1 x = (x - sum_j alpha_j x_j) / lambda`.
    pub fn dual_weights<K: KernelSource + ?Sized>(&self, src: &K, x: usize) -> Result<Vec<f64>> {
        Self::check_index(src, x)?;
        let (mut w, _) = self.forward(src, x);
        let n = w.len();
        for i in (0..n).rev() {
            let mut s = w[i];
            for (j, wj) in w.iter().enumerate().skip(i + 1) {
                s -= self.chol[j][i] * wj;
            }
            w[i] = s / self.chol[i][i];
        }
        Ok(w)
    }

    /// Appends `x` by bordering the factor; no refactorization.
    pub fn extend<K: KernelSource + ?Sized>(&self, src: &K, x: usize) -> Result<Self> {
        Self::check_index(src, x)?;
        let (mut row, kxx) = self.forward(src, x);
        let residual = kxx - row.iter().map(|a| a * a).sum::<f64>();
        let pivot_sq = self.lambda + residual;
        let threshold = PIVOT_RTOL * (kxx + self.lambda);
        if !(pivot_sq > threshold) {
            return Err(Error::DegenerateGram { pivot_sq, threshold });
        }
        // residual >= 0 in exact arithmetic
        let residual = residual.max(0.0);
        row.push((self.lambda + residual).sqrt());
        let mut next = self.clone();
        next.chol.push(row);
        next.points.push(x);
        next.total_gain += (residual / self.lambda).ln_1p();
        Ok(next)
    }

    /// Extends by a sequence, returning the state and the increments.
    pub fn extend_all<K: KernelSource + ?Sized>(&self, src: &K, xs: &[usize]) -> Result<(Self, Vec<f64>)> {
        let mut state = self.clone();
        let mut increments = Vec::with_capacity(xs.len());
        for &x in xs {
            let next = state.extend(src, x)?;
            increments.push(next.total_gain - state.total_gain);
            state = next;
        }
        Ok((state, increments))
    }

    /// Relative Frobenius error of `L L^T` against a fresh `K_n + lambda I`.
    pub fn refactorization_error<K: KernelSource + ?Sized>(&self, src: &K) -> f64 {
        let n = self.points.len();
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..n {
            for j in 0..n {
                let k = i.min(j) + 1;
                let llt: f64 = self.chol[i][..k]
                    .iter()
                    .zip(&self.chol[j][..k])
                    .map(|(a, b)| a * b)
                    .sum();
                let mut target = src.entry(self.points[i], self.points[j]);
                if i == j {
                    target += self.lambda;
                }
                num += (llt - target).powi(2);
                den += target * target;
            }
        }
        if den == 0.0 {
            0.0
        } else {
            (num / den).sqrt()
        }
    }
}

/// Greedy scorer over a fixed candidate list.
///
/// Keeps `v_i = L^-1 k_{c_i}` for every candidate so that one selection costs
/// `O(#candidates * #selected)` instead of a triangular solve per candidate.
#[derive(Debug, Clone)]
pub struct CandidatePool<'a, K: KernelSource + ?Sized> {
    src: &'a K,
    lambda: f64,
    candidates: Vec<usize>,
    diag: Vec<f64>,
    cross: Vec<Vec<f64>>,
    residual: Vec<f64>,
    chosen: Vec<usize>,
    total_gain: f64,
}

impl<'a, K: KernelSource + ?Sized> CandidatePool<'a, K> {
    pub fn new(src: &'a K, lambda: f64, candidates: Vec<usize>) -> Result<Self> {
        PosteriorState::new(lambda)?;
        for &c in &candidates {
            PosteriorState::check_index(src, c)?;
        }
        let diag: Vec<f64> = candidates.iter().map(|&c| src.diag(c)).collect();
        Ok(Self {
            src,
            lambda,
            residual: diag.clone(),
            diag,
            cross: vec![Vec::new(); candidates.len()],
            candidates,
            chosen: Vec::new(),
            total_gain: 0.0,
        })
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn candidate(&self, pos: usize) -> usize {
        self.candidates[pos]
    }

    pub fn total_gain(&self) -> f64 {
        self.total_gain
    }

    /// Chosen source indices, in selection order.
    pub fn chosen(&self) -> &[usize] {
        &self.chosen
    }

    pub fn leverage(&self, pos: usize) -> f64 {
        (self.residual[pos] / self.lambda).clamp(0.0, self.diag[pos].max(0.0) / self.lambda)
    }

    /// Position of the largest leverage among `available` positions, lowest
    /// position on ties.
    pub fn best<I: IntoIterator<Item = usize>>(&self, available: I) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for pos in available {
            let lev = self.leverage(pos);
            match best {
                Some((bp, b)) if !(lev > b || (lev == b && pos < bp)) => {}
                _ => best = Some((pos, lev)),
            }
        }
        best
    }

    /// Selects the candidate at `pos`; returns the gain increment.
    pub fn select(&mut self, pos: usize) -> Result<f64> {
        let kxx = self.diag[pos];
        let pivot_sq = self.lambda + self.residual[pos];
        let threshold = PIVOT_RTOL * (kxx + self.lambda);
        if !(pivot_sq > threshold) {
            return Err(Error::DegenerateGram { pivot_sq, threshold });
        }
        let residual = self.residual[pos].max(0.0);
        let pivot = (self.lambda + residual).sqrt();
        let chosen_src = self.candidates[pos];
        let pivot_row = self.cross[pos].clone();
        let src = self.src;
        let update = |(c, (v, r)): (&usize, (&mut Vec<f64>, &mut f64))| {
            let s: f64 = v.iter().zip(&pivot_row).map(|(a, b)| a * b).sum();
            let e = (src.entry(*c, chosen_src) - s) / pivot;
            v.push(e);
            *r -= e * e;
        };
        if self.candidates.len() >= PARALLEL_POOL {
            self.candidates
                .par_iter()
                .zip(self.cross.par_iter_mut().zip(self.residual.par_iter_mut()))
                .with_min_len(64)
                .for_each(update);
        } else {
            self.candidates
                .iter()
                .zip(self.cross.iter_mut().zip(self.residual.iter_mut()))
                .for_each(update);
        }
        let inc = (residual / self.lambda).ln_1p();
        self.total_gain += inc;
        self.chosen.push(chosen_src);
        Ok(inc)
    }
}
