//! epsilon-independence and eluder dimension for the RKHS ball `B(S)`.
//!
//! `x` is epsilon-independent of `x_1..x_n` when two functions of the class
//! agree to within `eps^2` in summed squared error on the `x_i` but differ by
//! more than `eps` at `x`. For `B(S)` the pair enters only through
//! `D = theta_1 - theta_2`, which ranges over the ball of radius `2S`, and
//! since that ball is symmetric the signed criterion `f(x) - g(x) > eps` is
//! the same as the absolute one. So `x` is independent iff
//!
//! ```text
//! v* = sup { <D, x> : ||D|| <= 2S, sum_i <D, x_i>^2 <= eps^2 } > eps.
//! ```
//!
//! Three deciders are provided, all in terms of
//! `Delta gamma = log(1 + ||x||^2_{V^-1})` at `lambda = (eps / 2S)^2`:
//!
//! * [`independence_lemma1`]: `Delta gamma <= log(3/2)` implies dependence
//!   at every `eps' >= eps`.
//! * [`independence_lemma2`]: `Delta gamma > log 2` implies independence, with
//!   an explicit witness `theta_1 = (eps/2) V^-1 x / ||x||_{V^-1}`,
//!   `theta_2 = -theta_1`.
//! * [`independence_exact`]: computes `v*` with primal/dual certificates.

mod exact;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::gram::PosteriorState;
use crate::kernel::{GramMatrix, KernelSource};
use crate::linalg::distinct_indices;

/// Absolute slack on the witness norm and data constraints.
pub const WITNESS_TOL: f64 = 1e-9;

/// The exact oracle's primal/dual gap must be below this fraction of
/// `max(eps, v*)` for a verdict.
pub const GAP_RTOL: f64 = 1e-6;

/// Independence is declared only when the certified lower bound exceeds
/// `eps (1 + VERDICT_RTOL)`. Repeated points sit exactly at `v* = eps`.
pub const VERDICT_RTOL: f64 = 1e-12;

/// Largest number of distinct points accepted by the brute-force search.
pub const MAX_BRUTE_FORCE_POINTS: usize = 9;

pub const DEFAULT_BRUTE_FORCE_BUDGET: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndependenceMethod {
    Lemma1Sufficient,
    Lemma2Sufficient,
    ExactOracle,
    BruteForce,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Independent,
    Dependent,
    Inconclusive,
}

/// Constructive certificate of independence: `theta_1` as a combination of
/// `support = (x, x_1, .., x_n)`, with `theta_2 = -theta_1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub epsilon: f64,
    pub s: f64,
    pub support: Vec<usize>,
    pub coefficients: Vec<f64>,
    /// `||theta_1||`.
    pub theta_norm: f64,
    /// `sum_i <D, x_i>^2` with `D = 2 theta_1`.
    pub constraint_sum: f64,
    /// `<D, x>`.
    pub value_at_x: f64,
}

impl Witness {
    /// Evaluates the certificate quantities of `theta_1 = sum_a c_a z_a`.
    pub fn evaluate<K: KernelSource + ?Sized>(
        src: &K,
        support: Vec<usize>,
        coefficients: Vec<f64>,
        epsilon: f64,
        s: f64,
    ) -> Self {
        let g = GramMatrix::from_indices(src, &support);
        let m = support.len();
        let values: Vec<f64> = (0..m)
            .map(|a| (0..m).map(|b| g.entry(a, b) * coefficients[b]).sum())
            .collect();
        let norm_sq: f64 = values.iter().zip(&coefficients).map(|(v, c)| v * c).sum();
        let constraint_sum = values[1..].iter().map(|v| (2.0 * v).powi(2)).sum();
        Self {
            epsilon,
            s,
            support,
            coefficients,
            theta_norm: norm_sq.max(0.0).sqrt(),
            constraint_sum,
            value_at_x: 2.0 * values[0],
        }
    }

    pub fn verify(&self) -> Result<()> {
        if !(self.theta_norm <= self.s + WITNESS_TOL) {
            return Err(Error::WitnessInvalid(format!(
                "||theta_1|| = {} exceeds S = {}",
                self.theta_norm, self.s
            )));
        }
        if !(self.constraint_sum <= self.epsilon * self.epsilon + WITNESS_TOL) {
            return Err(Error::WitnessInvalid(format!(
                "data deviation {} exceeds eps^2 = {}",
                self.constraint_sum,
                self.epsilon * self.epsilon
            )));
        }
        if !(self.value_at_x > self.epsilon) {
            return Err(Error::WitnessInvalid(format!(
                "<D, x> = {} does not exceed eps = {}",
                self.value_at_x, self.epsilon
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndependenceVerdict {
    pub outcome: Outcome,
    pub method: IndependenceMethod,
    /// `Delta gamma((eps/2S)^2; x | predecessors)`, when computed.
    pub gain_increment: Option<f64>,
    /// Certified lower bound on `v*`, when computed.
    pub sup_value: Option<f64>,
    /// Certified upper bound on `v*`, when computed.
    pub sup_upper: Option<f64>,
    pub witness: Option<Witness>,
}

impl IndependenceVerdict {
    pub fn independent(&self) -> Option<bool> {
        match self.outcome {
            Outcome::Independent => Some(true),
            Outcome::Dependent => Some(false),
            Outcome::Inconclusive => None,
        }
    }

    fn from_increment(outcome: Outcome, method: IndependenceMethod, increment: f64) -> Self {
        Self {
            outcome,
            method,
            gain_increment: Some(increment),
            sup_value: None,
            sup_upper: None,
            witness: None,
        }
    }
}

fn check_scale(epsilon: f64, s: f64, allow_zero_eps: bool) -> Result<()> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(invalid(format!("S must be positive, got {s}")));
    }
    let eps_ok = if allow_zero_eps {
        epsilon >= 0.0 && epsilon.is_finite()
    } else {
        epsilon > 0.0 && epsilon.is_finite()
    };
    if !eps_ok {
        return Err(invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    Ok(())
}

/// `lambda = (eps / 2S)^2`.
pub fn matched_lambda(epsilon: f64, s: f64) -> f64 {
    (epsilon / (2.0 * s)).powi(2)
}

fn posterior<K: KernelSource + ?Sized>(src: &K, predecessors: &[usize], lambda: f64) -> Result<PosteriorState> {
    Ok(PosteriorState::new(lambda)?.extend_all(src, predecessors)?.0)
}

/// `Delta gamma(lambda; x | predecessors)`.
pub fn gain_increment<K: KernelSource + ?Sized>(src: &K, x: usize, predecessors: &[usize], lambda: f64) -> Result<f64> {
    posterior(src, predecessors, lambda)?.gain_increment(src, x)
}

/// Sufficient test for dependence.
pub fn independence_lemma1<K: KernelSource + ?Sized>(
    src: &K,
    x: usize,
    predecessors: &[usize],
    epsilon: f64,
    s: f64,
) -> Result<IndependenceVerdict> {
    check_scale(epsilon, s, false)?;
    let inc = gain_increment(src, x, predecessors, matched_lambda(epsilon, s))?;
    let outcome = if inc <= 1.5f64.ln() {
        Outcome::Dependent
    } else {
        Outcome::Inconclusive
    };
    Ok(IndependenceVerdict::from_increment(outcome, IndependenceMethod::Lemma1Sufficient, inc))
}

/// Sufficient test for independence, with a verified witness.
pub fn independence_lemma2<K: KernelSource + ?Sized>(
    src: &K,
    x: usize,
    predecessors: &[usize],
    epsilon: f64,
    s: f64,
) -> Result<IndependenceVerdict> {
    check_scale(epsilon, s, false)?;
    let lambda = matched_lambda(epsilon, s);
    let state = posterior(src, predecessors, lambda)?;
    lemma2_from_state(src, &state, x, epsilon, s)
}

fn lemma2_from_state<K: KernelSource + ?Sized>(
    src: &K,
    state: &PosteriorState,
    x: usize,
    epsilon: f64,
    s: f64,
) -> Result<IndependenceVerdict> {
    let lambda = state.lambda();
    let leverage = state.leverage(src, x)?;
    let inc = leverage.ln_1p();
    if !(inc > 2f64.ln()) {
        return Ok(IndependenceVerdict::from_increment(
            Outcome::Inconclusive,
            IndependenceMethod::Lemma2Sufficient,
            inc,
        ));
    }
    // V^-1 x = (x - sum_j alpha_j x_j) / lambda
    let alpha = state.dual_weights(src, x)?;
    let scale = 0.5 * epsilon / (lambda * leverage.sqrt());
    let mut support = Vec::with_capacity(alpha.len() + 1);
    support.push(x);
    support.extend_from_slice(state.points());
    let mut coefficients = Vec::with_capacity(alpha.len() + 1);
    coefficients.push(scale);
    coefficients.extend(alpha.iter().map(|a| -scale * a));
    let witness = Witness::evaluate(src, support, coefficients, epsilon, s);
    witness.verify()?;
    Ok(IndependenceVerdict {
        outcome: Outcome::Independent,
        method: IndependenceMethod::Lemma2Sufficient,
        gain_increment: Some(inc),
        sup_value: Some(witness.value_at_x),
        sup_upper: None,
        witness: Some(witness),
    })
}

/// Exact test: computes `v*` and compares with `eps`. `eps = 0` is allowed
/// and tests linear dependence.
pub fn independence_exact<K: KernelSource + ?Sized>(
    src: &K,
    x: usize,
    predecessors: &[usize],
    epsilon: f64,
    s: f64,
) -> Result<IndependenceVerdict> {
    check_scale(epsilon, s, true)?;
    for &i in std::iter::once(&x).chain(predecessors) {
        if i >= src.len() {
            return Err(Error::IdOutOfRange { id: i, len: src.len() });
        }
    }
    let mut support = Vec::with_capacity(predecessors.len() + 1);
    support.push(x);
    support.extend_from_slice(predecessors);
    let bounds = exact::sup_deviation(&GramMatrix::from_indices(src, &support), epsilon, s);
    let gap = bounds.upper - bounds.lower;
    let outcome = if bounds.lower > epsilon * (1.0 + VERDICT_RTOL) {
        Outcome::Independent
    } else if bounds.upper <= epsilon || gap <= GAP_RTOL * epsilon.max(bounds.lower) {
        Outcome::Dependent
    } else {
        Outcome::Inconclusive
    };
    Ok(IndependenceVerdict {
        outcome,
        method: IndependenceMethod::ExactOracle,
        gain_increment: None,
        sup_value: Some(bounds.lower),
        sup_upper: Some(bounds.upper),
        witness: None,
    })
}

/// Lemma 1 shortcut, then the Lemma 2 witness, then the exact oracle.
pub fn independence_chain<K: KernelSource + ?Sized>(
    src: &K,
    x: usize,
    predecessors: &[usize],
    epsilon: f64,
    s: f64,
) -> Result<IndependenceVerdict> {
    check_scale(epsilon, s, false)?;
    let state = posterior(src, predecessors, matched_lambda(epsilon, s))?;
    let verdict = lemma2_from_state(src, &state, x, epsilon, s)?;
    if verdict.outcome == Outcome::Independent {
        return Ok(verdict);
    }
    let inc = verdict.gain_increment.expect("lemma 2 computes the increment");
    if inc <= 1.5f64.ln() {
        return Ok(IndependenceVerdict::from_increment(
            Outcome::Dependent,
            IndependenceMethod::Lemma1Sufficient,
            inc,
        ));
    }
    let mut exact = independence_exact(src, x, predecessors, epsilon, s)?;
    exact.gain_increment = Some(inc);
    Ok(exact)
}

/// `{eps, 2 eps, 4 eps, 8 eps}`.
pub fn default_eps_prime_grid(epsilon: f64) -> Vec<f64> {
    [1.0, 2.0, 4.0, 8.0].iter().map(|m| m * epsilon).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridCell {
    pub eps_prime: f64,
    pub length: usize,
    pub exact: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EluderEstimate {
    pub epsilon: f64,
    pub s: f64,
    /// The `eps'` of the reported sequence.
    pub eps_prime: f64,
    pub sequence: Vec<usize>,
    /// Verdict of each element against its predecessors at `eps'`.
    pub verdicts: Vec<IndependenceVerdict>,
    pub lower_bound: usize,
    /// True only for a completed brute-force search.
    pub exact: bool,
    pub method: IndependenceMethod,
    pub grid: Vec<GridCell>,
}

/// Validates the `eps'` grid and drops values at or above `2 S sup ||x||`,
/// where no point can be independent even of the empty set.
fn usable_grid<K: KernelSource + ?Sized>(src: &K, epsilon: f64, s: f64, grid: &[f64]) -> Result<Vec<f64>> {
    check_scale(epsilon, s, false)?;
    if grid.is_empty() {
        return Err(invalid("eps' grid is empty"));
    }
    if let Some(bad) = grid.iter().find(|&&e| !(e >= epsilon && e.is_finite())) {
        return Err(invalid(format!("eps' grid value {bad} is below epsilon = {epsilon}")));
    }
    let cap = 2.0 * s * src.sup_norm();
    Ok(grid.iter().copied().filter(|&e| e < cap).collect())
}

fn empty_estimate(epsilon: f64, s: f64, method: IndependenceMethod, exact: bool) -> EluderEstimate {
    EluderEstimate {
        epsilon,
        s,
        eps_prime: epsilon,
        sequence: Vec::new(),
        verdicts: Vec::new(),
        lower_bound: 0,
        exact,
        method,
        grid: Vec::new(),
    }
}

/// Greedy lower bound on `dim_E(B(S), eps)`.
///
/// For every `eps'` in the grid, scans the points in index order and appends
/// each one that is `eps'`-independent of the sequence so far. A point that is
/// dependent on a prefix stays dependent on any longer sequence (the
/// constraint set only shrinks), so one pass suffices. The longest sequence
/// over the grid is returned.
pub fn eluder_lower_bound<K: KernelSource + ?Sized>(
    src: &K,
    epsilon: f64,
    s: f64,
    eps_prime_grid: &[f64],
) -> Result<EluderEstimate> {
    let grid = usable_grid(src, epsilon, s, eps_prime_grid)?;
    let mut best = empty_estimate(epsilon, s, IndependenceMethod::Lemma2Sufficient, false);
    let mut cells = Vec::with_capacity(grid.len());
    for &eps_prime in &grid {
        let mut sequence = Vec::new();
        let mut verdicts = Vec::new();
        for x in 0..src.len() {
            let verdict = independence_chain(src, x, &sequence, eps_prime, s)?;
            if verdict.outcome == Outcome::Independent {
                sequence.push(x);
                verdicts.push(verdict);
            }
        }
        cells.push(GridCell {
            eps_prime,
            length: sequence.len(),
            exact: false,
        });
        if sequence.len() > best.lower_bound {
            best.eps_prime = eps_prime;
            best.lower_bound = sequence.len();
            best.sequence = sequence;
            best.verdicts = verdicts;
        }
    }
    best.grid = cells;
    Ok(best)
}

/// Exact eluder dimension restricted to the `eps'` grid.
///
/// Repeated points are always dependent, so sequences are repeat-free over
/// the distinct points. Whether `x` may follow a sequence depends only on the
/// set of its predecessors, so the search is a reachability sweep over
/// subsets with one exact oracle call per (subset, point) pair. `budget` caps
/// oracle calls; on exhaustion the best sequence so far is returned with
/// `exact = false`.
pub fn eluder_brute_force<K: KernelSource + ?Sized>(
    src: &K,
    epsilon: f64,
    s: f64,
    eps_prime_grid: &[f64],
    budget: u64,
) -> Result<EluderEstimate> {
    let grid = usable_grid(src, epsilon, s, eps_prime_grid)?;
    let all: Vec<usize> = (0..src.len()).collect();
    let distinct = distinct_indices(src, &all);
    if distinct.len() > MAX_BRUTE_FORCE_POINTS {
        return Err(invalid(format!(
            "brute force supports at most {MAX_BRUTE_FORCE_POINTS} distinct points, got {}",
            distinct.len()
        )));
    }
    let n = distinct.len();
    let full = 1usize << n;
    let mut calls = 0u64;
    let mut exact = true;
    let mut best = empty_estimate(epsilon, s, IndependenceMethod::BruteForce, true);
    let mut cells = Vec::with_capacity(grid.len());

    'grid: for &eps_prime in &grid {
        // parent[mask] = (previous mask, appended point) for reachable masks
        let mut parent: Vec<Option<(usize, usize)>> = vec![None; full];
        let mut reachable = vec![false; full];
        reachable[0] = true;
        let mut cell_exact = true;
        let mut longest = 0usize;
        let mut longest_mask = 0usize;
        for mask in 0..full {
            if !reachable[mask] {
                continue;
            }
            let size = mask.count_ones() as usize;
            if size > longest {
                longest = size;
                longest_mask = mask;
            }
            let preds: Vec<usize> = (0..n).filter(|b| mask & (1 << b) != 0).map(|b| distinct[b]).collect();
            for b in 0..n {
                let next = mask | (1 << b);
                if next == mask || reachable[next] {
                    continue;
                }
                calls += 1;
                if calls > budget {
                    exact = false;
                    cells.push(GridCell {
                        eps_prime,
                        length: longest,
                        exact: false,
                    });
                    if longest > best.lower_bound {
                        best.eps_prime = eps_prime;
                        best.lower_bound = longest;
                        best.sequence = unwind(&parent, longest_mask, &distinct);
                    }
                    break 'grid;
                }
                match independence_exact(src, distinct[b], &preds, eps_prime, s)?.outcome {
                    Outcome::Independent => {
                        reachable[next] = true;
                        parent[next] = Some((mask, b));
                    }
                    Outcome::Dependent => {}
                    Outcome::Inconclusive => cell_exact = false,
                }
            }
        }
        exact &= cell_exact;
        cells.push(GridCell {
            eps_prime,
            length: longest,
            exact: cell_exact,
        });
        if longest > best.lower_bound {
            best.eps_prime = eps_prime;
            best.lower_bound = longest;
            best.sequence = unwind(&parent, longest_mask, &distinct);
        }
    }

    best.verdicts = best
        .sequence
        .iter()
        .enumerate()
        .map(|(i, &x)| independence_exact(src, x, &best.sequence[..i], best.eps_prime, s))
        .collect::<Result<_>>()?;
    best.exact = exact;
    best.grid = cells;
    Ok(best)
}

fn unwind(parent: &[Option<(usize, usize)>], mut mask: usize, distinct: &[usize]) -> Vec<usize> {
    let mut seq = Vec::new();
    while let Some((prev, b)) = parent[mask] {
        seq.push(distinct[b]);
        mask = prev;
    }
    seq.reverse();
    seq
}
