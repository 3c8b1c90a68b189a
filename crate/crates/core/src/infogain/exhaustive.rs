//! Exact maximum information gain over multisets.
//!
//! `gamma_k` is a maximum over k-tuples with repetition, and the gain only
//! depends on how many times each distinct point is used, so the search runs
//! over allocations `m` with `sum m = k`:
//!
//! ```text
//! gamma(m) = log det(I_r + sum_i m_i f_i f_i^T / lambda)
//! ```
//!
//! where `f_i` are explicit features of the distinct candidates obtained from
//! their Gram (`r` is its numerical rank). Allocations are enumerated
//! depth-first, one candidate per level, with a branch-and-bound cut. At a
//! node with matrix `A` and `rem` units still to place among candidates
//! `j..`, let `l_max = max_i f_i^T A^-1 f_i / lambda`. Submodularity bounds
//! the remaining gain by `rem * log(1 + l_max)`; concavity of `log det` over
//! a rank-`r_eff` update bounds it by `r_eff * log(1 + rem * l_max / r_eff)`.

use crate::error::{Error, Result};
use crate::linalg::{chol_logdet, cholesky, forward_solve};

/// Node-expansion budget.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Budget {
    limit: u64,
    used: u64,
}

impl Budget {
    pub(crate) fn new(limit: u64) -> Self {
        Self { limit, used: 0 }
    }

    fn tick(&mut self) -> Result<()> {
        self.used += 1;
        if self.used > self.limit {
            return Err(Error::BudgetExceeded { budget: self.limit });
        }
        Ok(())
    }

    pub(crate) fn used(&self) -> u64 {
        self.used
    }
}

pub(crate) struct AllocationSearch<'a> {
    lambda: f64,
    features: &'a [Vec<f64>],
    rank: usize,
}

struct Incumbent {
    value: f64,
    alloc: Vec<u32>,
}

impl<'a> AllocationSearch<'a> {
    pub(crate) fn new(lambda: f64, features: &'a [Vec<f64>]) -> Self {
        let rank = features.first().map_or(0, Vec::len);
        Self {
            lambda,
            features,
            rank,
        }
    }

    /// Maximizes `gamma(m)` over `sum m = k`. `seed` is a feasible allocation
    /// used as the initial incumbent; ties keep the incumbent.
    pub(crate) fn maximize(&self, k: u32, seed: Vec<u32>, budget: &mut Budget) -> Result<(f64, Vec<u32>)> {
        let n = self.features.len();
        debug_assert_eq!(seed.len(), n);
        debug_assert_eq!(seed.iter().sum::<u32>(), k);
        let r = self.rank;
        if r == 0 || n == 0 {
            return Ok((0.0, seed));
        }
        let mut best = Incumbent {
            value: self.gain_of(&seed),
            alloc: seed,
        };
        let mut identity = vec![0.0; r * r];
        for i in 0..r {
            identity[i * r + i] = 1.0;
        }
        let mut alloc = vec![0u32; n];
        self.dfs(0, k, &identity, 0.0, &mut alloc, &mut best, budget)?;
        Ok((best.value, best.alloc))
    }

    pub(crate) fn gain_of(&self, alloc: &[u32]) -> f64 {
        let r = self.rank;
        if r == 0 {
            return 0.0;
        }
        let mut a = vec![0.0; r * r];
        for i in 0..r {
            a[i * r + i] = 1.0;
        }
        for (f, &m) in self.features.iter().zip(alloc) {
            if m > 0 {
                self.add_outer(&mut a, f, m);
            }
        }
        let l = cholesky(&a, r).expect("identity plus PSD is positive definite");
        chol_logdet(&l, r)
    }

    fn add_outer(&self, a: &mut [f64], f: &[f64], m: u32) {
        let r = self.rank;
        let w = m as f64 / self.lambda;
        for p in 0..r {
            for q in 0..r {
                a[p * r + q] += w * f[p] * f[q];
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn dfs(
        &self,
        j: usize,
        rem: u32,
        a: &[f64],
        logdet: f64,
        alloc: &mut Vec<u32>,
        best: &mut Incumbent,
        budget: &mut Budget,
    ) -> Result<()> {
        budget.tick()?;
        let n = self.features.len();
        let r = self.rank;
        if rem == 0 {
            if logdet > best.value {
                best.value = logdet;
                best.alloc.clone_from(alloc);
            }
            return Ok(());
        }
        if j == n {
            return Ok(());
        }

        let l = cholesky(a, r).expect("identity plus PSD is positive definite");
        let mut l_max = 0.0f64;
        let mut active = 0usize;
        let mut y = vec![0.0; r];
        for f in &self.features[j..] {
            y.copy_from_slice(f);
            forward_solve(&l, r, &mut y);
            let lev = y.iter().map(|v| v * v).sum::<f64>() / self.lambda;
            if lev > 0.0 {
                active += 1;
            }
            l_max = l_max.max(lev);
        }
        let r_eff = r.min(active).max(1) as f64;
        let rem_f = rem as f64;
        let bound = logdet + (rem_f * l_max.ln_1p()).min(r_eff * (rem_f * l_max / r_eff).ln_1p());
        if bound <= best.value {
            return Ok(());
        }

        let range: Vec<u32> = if j + 1 == n { vec![rem] } else { (0..=rem).rev().collect() };
        for m in range {
            alloc[j] = m;
            if m == 0 {
                self.dfs(j + 1, rem, a, logdet, alloc, best, budget)?;
            } else {
                let mut next = a.to_vec();
                self.add_outer(&mut next, &self.features[j], m);
                let lc = cholesky(&next, r).expect("identity plus PSD is positive definite");
                let ld = chol_logdet(&lc, r);
                self.dfs(j + 1, rem - m, &next, ld, alloc, best, budget)?;
            }
        }
        alloc[j] = 0;
        Ok(())
    }
}
