//! Information gain, maximum information gain and critical information gain.
//!
//! All quantities use natural logarithms and the dual form
//! `gamma(lambda; x_1..x_T) = log det(I + K_T / lambda)`.

mod exhaustive;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::gram::{CandidatePool, PosteriorState};
use crate::kernel::{GramMatrix, KernelSource};
use crate::linalg::{distinct_indices, feature_factor, is_duplicate};

use exhaustive::{AllocationSearch, Budget};

/// Default node budget for exhaustive searches.
pub const DEFAULT_EXHAUSTIVE_BUDGET: u64 = 1_000_000;

/// Greedy achieves at least this fraction of the optimum (monotone
/// submodular maximization under a cardinality constraint).
pub const GREEDY_GUARANTEE: f64 = 1.0 - 1.0 / std::f64::consts::E;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainMethod {
    Greedy,
    Exhaustive,
}

impl std::fmt::Display for GainMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            GainMethod::Greedy => "greedy",
            GainMethod::Exhaustive => "exhaustive",
        })
    }
}

/// Ordered increments of information gain for a point sequence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfoGainTrace {
    pub lambda: f64,
    pub points: Vec<usize>,
    pub increments: Vec<f64>,
    pub total: f64,
}

impl InfoGainTrace {
    /// Running totals `gamma(x_1..x_k)` for `k = 1..T`.
    pub fn prefix_totals(&self) -> Vec<f64> {
        self.increments
            .iter()
            .scan(0.0, |acc, d| {
                *acc += d;
                Some(*acc)
            })
            .collect()
    }
}

/// `gamma(lambda; x_1..x_T)` with its increments.
pub fn info_gain<K: KernelSource + ?Sized>(lambda: f64, sequence: &[usize], src: &K) -> Result<InfoGainTrace> {
    let (state, increments) = PosteriorState::new(lambda)?.extend_all(src, sequence)?;
    Ok(InfoGainTrace {
        lambda,
        points: sequence.to_vec(),
        increments,
        total: state.total_gain(),
    })
}

/// Greedy selection with repetition over every point of `src`; values are
/// extended lazily.
struct GreedyRun<'a, K: KernelSource + ?Sized> {
    pool: CandidatePool<'a, K>,
    values: Vec<f64>,
}

impl<'a, K: KernelSource + ?Sized> GreedyRun<'a, K> {
    fn new(src: &'a K, lambda: f64) -> Result<Self> {
        if src.is_empty() {
            return Err(invalid("candidate set is empty"));
        }
        Ok(Self {
            pool: CandidatePool::new(src, lambda, (0..src.len()).collect())?,
            values: Vec::new(),
        })
    }

    /// Greedy `gamma_k`, `k >= 1`.
    fn value(&mut self, k: usize) -> Result<f64> {
        while self.values.len() < k {
            let (pos, _) = self.pool.best(0..self.pool.len()).expect("pool is nonempty");
            self.pool.select(pos)?;
            self.values.push(self.pool.total_gain());
        }
        Ok(self.values[k - 1])
    }

    fn prefix(&self, k: usize) -> Vec<usize> {
        self.pool.chosen()[..k].to_vec()
    }
}

/// `gamma_T(lambda; X)`, the maximum of `gamma` over `T`-tuples of points of
/// `src` (repetition allowed).
///
/// Greedy appends the candidate with the largest increment (lowest index on
/// ties). Exhaustive is exact, searching allocations over the distinct points
/// with branch and bound; `budget` caps node expansions.
pub fn max_info_gain<K: KernelSource + ?Sized>(
    lambda: f64,
    t: usize,
    src: &K,
    method: GainMethod,
    budget: u64,
) -> Result<InfoGainTrace> {
    if t == 0 {
        return Err(invalid("T must be at least 1"));
    }
    let mut greedy = GreedyRun::new(src, lambda)?;
    greedy.value(t)?;
    match method {
        GainMethod::Greedy => info_gain(lambda, &greedy.prefix(t), src),
        GainMethod::Exhaustive => {
            let exact = ExactSearch::new(src, lambda);
            let mut budget = Budget::new(budget);
            exact.gamma(src, &greedy.prefix(t), &mut budget)
        }
    }
}

/// Exact search state over the distinct points of a source.
struct ExactSearch {
    lambda: f64,
    reps: Vec<usize>,
    rep_of: Vec<usize>,
    features: Vec<Vec<f64>>,
}

impl ExactSearch {
    fn new<K: KernelSource + ?Sized>(src: &K, lambda: f64) -> Self {
        let all: Vec<usize> = (0..src.len()).collect();
        let reps = distinct_indices(src, &all);
        let rep_of = all
            .iter()
            .map(|&i| {
                reps.iter()
                    .position(|&r| is_duplicate(src, r, i))
                    .expect("every point has a representative")
            })
            .collect();
        let features = feature_factor(&GramMatrix::from_indices(src, &reps));
        Self {
            lambda,
            reps,
            rep_of,
            features,
        }
    }

    /// Exact `gamma_k` where `k = seed.len()`, seeded with a feasible tuple.
    /// The maximizing tuple is re-evaluated by the posterior engine so that
    /// reported values agree bit-for-bit with the other routes. When the
    /// search cannot beat the seed, the seed itself is returned.
    fn gamma<K: KernelSource + ?Sized>(
        &self,
        src: &K,
        seed: &[usize],
        budget: &mut Budget,
    ) -> Result<InfoGainTrace> {
        let mut alloc = vec![0u32; self.reps.len()];
        for &i in seed {
            alloc[self.rep_of[i]] += 1;
        }
        let search = AllocationSearch::new(self.lambda, &self.features);
        let (_, best) = search.maximize(seed.len() as u32, alloc.clone(), budget)?;
        if best == alloc {
            return info_gain(self.lambda, seed, src);
        }
        let tuple: Vec<usize> = best
            .iter()
            .enumerate()
            .flat_map(|(r, &m)| std::iter::repeat_n(self.reps[r], m as usize))
            .collect();
        let improved = info_gain(self.lambda, &tuple, src)?;
        let seeded = info_gain(self.lambda, seed, src)?;
        Ok(if improved.total >= seeded.total { improved } else { seeded })
    }
}

/// One evaluated `gamma_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaProbe {
    pub k: usize,
    pub gamma: f64,
}

/// `tilde gamma(lambda, c) = min { k : gamma_k <= c k }`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalGainResult {
    pub lambda: f64,
    pub c: f64,
    pub tau: usize,
    pub method: GainMethod,
    /// Every evaluated `gamma_k` (all `k = 1..tau` for greedy; the probes of
    /// the exact search otherwise), sorted by `k`.
    pub gamma_at: Vec<GammaProbe>,
    /// `tau` equals the true critical gain. Greedy values are lower bounds of
    /// `gamma_k`, so a greedy `tau` is only a lower bound of the true one.
    pub exact: bool,
    /// Certified upper bound on the true critical gain, when known.
    pub tau_upper: Option<usize>,
    /// A `(tau - 1)`-tuple with `gamma > c (tau - 1)`.
    pub witness: Vec<usize>,
    pub witness_gain: f64,
    /// Nodes expanded by the exact search.
    pub search_nodes: u64,
}

/// Critical information gain.
///
/// The exact method relies on `gamma_k / k` being non-increasing in `k`
/// (drop the element of an optimal `(k+1)`-tuple with the smallest marginal
/// loss), so `{k : gamma_k <= c k}` is upward closed and can be located by
/// galloping plus bisection, starting from the greedy crossing, which never
/// exceeds the exact one.
pub fn critical_gain<K: KernelSource + ?Sized>(
    lambda: f64,
    c: f64,
    src: &K,
    method: GainMethod,
    k_max: usize,
    budget: u64,
) -> Result<CriticalGainResult> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(invalid(format!("c must be positive, got {c}")));
    }
    if k_max == 0 {
        return Err(invalid("k_max must be at least 1"));
    }
    let mut greedy = GreedyRun::new(src, lambda)?;
    let mut tau_g = None;
    for k in 1..=k_max {
        if greedy.value(k)? <= c * k as f64 {
            tau_g = Some(k);
            break;
        }
    }
    let tau_g = tau_g.ok_or(Error::CriticalNotFound { k_max })?;

    match method {
        GainMethod::Greedy => {
            let gamma_at = (1..=tau_g)
                .map(|k| GammaProbe {
                    k,
                    gamma: greedy.values[k - 1],
                })
                .collect();
            let mut tau_upper = None;
            for k in tau_g..=k_max {
                if greedy.value(k)? <= GREEDY_GUARANTEE * c * k as f64 {
                    tau_upper = Some(k);
                    break;
                }
            }
            let witness = greedy.prefix(tau_g - 1);
            let witness_gain = if tau_g > 1 { greedy.values[tau_g - 2] } else { 0.0 };
            Ok(CriticalGainResult {
                lambda,
                c,
                tau: tau_g,
                method,
                gamma_at,
                exact: false,
                tau_upper,
                witness,
                witness_gain,
                search_nodes: 0,
            })
        }
        GainMethod::Exhaustive => {
            let exact = ExactSearch::new(src, lambda);
            let mut budget = Budget::new(budget);
            let mut probes: Vec<GammaProbe> = Vec::new();
            let mut probe = |k: usize, greedy: &mut GreedyRun<'_, K>, budget: &mut Budget| -> Result<(f64, Vec<usize>)> {
                greedy.value(k)?;
                let trace = exact.gamma(src, &greedy.prefix(k), budget)?;
                probes.push(GammaProbe { k, gamma: trace.total });
                Ok((trace.total, trace.points))
            };
            let crosses = |g: f64, k: usize| g <= c * k as f64;

            // invariant: gamma_lo > c lo, witnessed by `witness`
            let mut lo = tau_g - 1;
            let mut witness = greedy.prefix(lo);
            let mut witness_gain = if lo > 0 { greedy.values[lo - 1] } else { 0.0 };
            let (g, tuple) = probe(tau_g, &mut greedy, &mut budget)?;
            let mut hi;
            if crosses(g, tau_g) {
                hi = tau_g;
            } else {
                lo = tau_g;
                witness = tuple;
                witness_gain = g;
                let mut step = 1;
                loop {
                    if lo >= k_max {
                        return Err(Error::CriticalNotFound { k_max });
                    }
                    hi = (lo + step).min(k_max);
                    let (g, tuple) = probe(hi, &mut greedy, &mut budget)?;
                    if crosses(g, hi) {
                        break;
                    }
                    lo = hi;
                    witness = tuple;
                    witness_gain = g;
                    step *= 2;
                }
                while hi - lo > 1 {
                    let mid = lo + (hi - lo) / 2;
                    let (g, tuple) = probe(mid, &mut greedy, &mut budget)?;
                    if crosses(g, mid) {
                        hi = mid;
                    } else {
                        lo = mid;
                        witness = tuple;
                        witness_gain = g;
                    }
                }
            }
            probes.sort_by_key(|p| p.k);
            Ok(CriticalGainResult {
                lambda,
                c,
                tau: hi,
                method,
                gamma_at: probes,
                exact: true,
                tau_upper: Some(hi),
                witness,
                witness_gain,
                search_nodes: budget.used(),
            })
        }
    }
}

/// Reorders a multiset of points greedily by largest increment (lowest
/// original position on ties), which makes the increments non-increasing.
pub fn monotone_reorder<K: KernelSource + ?Sized>(points: &[usize], lambda: f64, src: &K) -> Result<InfoGainTrace> {
    if points.is_empty() {
        return Err(invalid("cannot reorder an empty multiset"));
    }
    let mut pool = CandidatePool::new(src, lambda, points.to_vec())?;
    let mut available: Vec<usize> = (0..points.len()).collect();
    let mut increments = Vec::with_capacity(points.len());
    let mut order = Vec::with_capacity(points.len());
    while !available.is_empty() {
        let (pos, _) = pool.best(available.iter().copied()).expect("nonempty");
        increments.push(pool.select(pos)?);
        order.push(points[pos]);
        available.retain(|&p| p != pos);
    }
    Ok(InfoGainTrace {
        lambda,
        points: order,
        increments,
        total: pool.total_gain(),
    })
}
