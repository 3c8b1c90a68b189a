//! Numerical checks of the two-sided relation between the eluder dimension
//! of `B(S)` and the critical information gain at `lambda = (eps / 2S)^2`:
//!
//! ```text
//! dim_E(eps) < tilde gamma(lambda, log 3/2)
//! dim_E(eps) > (tilde gamma(lambda, c) - 1) (c - log 2) / (log(1 + B^2/lambda) - log 2)
//! ```
//!
//! The second needs `c > log 2`, `eps < 2BS` and `||x|| <= B` on every point.
//!
//! Each side is computed either exactly or as an interval. A verdict is
//! `pass`/`fail` only when the intervals decide it; otherwise it is
//! `inconclusive`. A `fail` with both sides exact is a bug.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eluder::{
    eluder_brute_force, eluder_lower_bound, independence_exact, matched_lambda, IndependenceMethod, Outcome,
    DEFAULT_BRUTE_FORCE_BUDGET, MAX_BRUTE_FORCE_POINTS,
};
use crate::error::{invalid, Error, Result};
use crate::infogain::{critical_gain, monotone_reorder, CriticalGainResult, GainMethod, DEFAULT_EXHAUSTIVE_BUDGET};
use crate::kernel::{KernelSource, NORM_BOUND_SLACK};
use crate::linalg::distinct_indices;

pub const DEFAULT_K_MAX: usize = 10_000;

/// Slack on the `gamma <= k log(1 + B^2/lambda) + (d - k) log 2` step.
pub const CHAIN_TOL: f64 = 1e-9;

pub fn lemma1_threshold() -> f64 {
    1.5f64.ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DimensionMethod {
    /// Brute force when there are few distinct points, else the lower bound.
    #[default]
    Auto,
    BruteForce,
    LowerBound,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CriticalMethod {
    /// Exhaustive within budget, greedy otherwise.
    #[default]
    Auto,
    Greedy,
    Exhaustive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichOptions {
    pub dimension: DimensionMethod,
    pub critical: CriticalMethod,
    /// The `eps'` grid is `eps` times these multipliers (all `>= 1`).
    pub eps_prime_multipliers: Vec<f64>,
    pub k_max: usize,
    pub exhaustive_budget: u64,
    pub brute_force_budget: u64,
}

impl Default for SandwichOptions {
    fn default() -> Self {
        Self {
            dimension: DimensionMethod::Auto,
            critical: CriticalMethod::Auto,
            eps_prime_multipliers: vec![1.0, 2.0, 4.0, 8.0],
            k_max: DEFAULT_K_MAX,
            exhaustive_budget: DEFAULT_EXHAUSTIVE_BUDGET,
            brute_force_budget: DEFAULT_BRUTE_FORCE_BUDGET,
        }
    }
}

impl SandwichOptions {
    fn validate(&self) -> Result<()> {
        if self.eps_prime_multipliers.is_empty() {
            return Err(invalid("eps' multiplier grid is empty"));
        }
        if let Some(m) = self.eps_prime_multipliers.iter().find(|&&m| !(m >= 1.0 && m.is_finite())) {
            return Err(invalid(format!("eps' multipliers must be >= 1, got {m}")));
        }
        if self.k_max == 0 {
            return Err(invalid("k_max must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

/// `dim_E` as an interval `[lower, upper]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DimensionEstimate {
    pub lower: usize,
    pub upper: usize,
    pub exact: bool,
    pub method: IndependenceMethod,
    pub eps_prime: f64,
    pub sequence: Vec<usize>,
}

/// `tilde gamma` as an interval `[tau, tau_upper]`; `tau_upper = None` means
/// no upper bound was certified.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalSide {
    pub c: f64,
    pub tau: usize,
    pub tau_upper: Option<usize>,
    pub exact: bool,
    pub method: GainMethod,
    pub search_nodes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Theorem1Check {
    pub critical: CriticalSide,
    pub verdict: Verdict,
    pub pass: bool,
    pub exact: bool,
}

/// The counting argument behind the lower bound, replayed on the
/// `(tau - 1)`-tuple that certifies `gamma_d > c d`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decomposition {
    pub d: usize,
    /// The tuple reordered so that increments are non-increasing.
    pub points: Vec<usize>,
    pub increments: Vec<f64>,
    pub gamma: f64,
    /// `max { i : Delta_i > log 2 }` (0 if none).
    pub k: usize,
    pub cd: f64,
    /// `k log(1 + B^2/lambda) + (d - k) log 2`.
    pub gain_cap: f64,
    /// `c d < gamma <= gain_cap`.
    pub chain_holds: bool,
    /// The first `k` reordered points form an `eps`-independent sequence
    /// according to the exact oracle (`None` if a verdict was inconclusive).
    pub prefix_independent: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Theorem2Check {
    pub critical: CriticalSide,
    /// `(c - log 2) / (log(1 + B^2/lambda) - log 2)`.
    pub factor: f64,
    /// Right-hand side at `critical.tau`.
    pub rhs: f64,
    /// Right-hand side at `critical.tau_upper`.
    pub rhs_upper: Option<f64>,
    pub verdict: Verdict,
    pub pass: bool,
    pub exact: bool,
    pub decomposition: Decomposition,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SandwichReport {
    pub epsilon: f64,
    pub s: f64,
    pub b: f64,
    pub lambda: f64,
    pub dimension: DimensionEstimate,
    pub theorem1: Theorem1Check,
    pub theorem2: Option<Theorem2Check>,
    /// Why the lower-bound check was not run, when it was not.
    pub theorem2_skipped: Option<String>,
}

impl SandwichReport {
    /// A verdict of `fail` where every side involved was exact.
    pub fn exact_failure(&self) -> bool {
        let t1 = self.theorem1.exact && self.theorem1.verdict == Verdict::Fail;
        let t2 = self
            .theorem2
            .as_ref()
            .is_some_and(|t| t.exact && t.verdict == Verdict::Fail);
        t1 || t2
    }

    pub fn fully_exact(&self) -> bool {
        self.theorem1.exact && self.theorem2.as_ref().is_none_or(|t| t.exact)
    }
}

fn check_common(epsilon: f64, s: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    if !(s > 0.0 && s.is_finite()) {
        return Err(invalid(format!("S must be positive, got {s}")));
    }
    Ok(())
}

fn resolve_b<K: KernelSource + ?Sized>(src: &K, b: Option<f64>) -> Result<f64> {
    let sup = src.sup_norm();
    match b {
        None => Ok(sup),
        Some(b) => {
            if !(b > 0.0 && b.is_finite()) {
                return Err(invalid(format!("B must be positive, got {b}")));
            }
            for i in 0..src.len() {
                let norm_sq = src.diag(i);
                if norm_sq > b * b * (1.0 + NORM_BOUND_SLACK) {
                    return Err(Error::NormBoundViolated {
                        index: i,
                        value: norm_sq.sqrt(),
                        bound_sq: b * b,
                    });
                }
            }
            Ok(b)
        }
    }
}

fn theorem2_preconditions(epsilon: f64, s: f64, b: f64, c: f64) -> Result<()> {
    if !(c > 2f64.ln() && c.is_finite()) {
        return Err(invalid(format!("c must exceed log 2, got {c}")));
    }
    if !(epsilon < 2.0 * b * s) {
        return Err(invalid(format!(
            "epsilon = {epsilon} must be below 2 B S = {}",
            2.0 * b * s
        )));
    }
    Ok(())
}

/// Midpoint of `(log 2, log(1 + B^2/lambda))`.
pub fn default_c(b: f64, lambda: f64) -> f64 {
    0.5 * (2f64.ln() + (b * b / lambda).ln_1p())
}

fn estimate_dimension<K: KernelSource + ?Sized>(
    src: &K,
    epsilon: f64,
    s: f64,
    opts: &SandwichOptions,
) -> Result<DimensionEstimate> {
    let grid: Vec<f64> = opts.eps_prime_multipliers.iter().map(|m| m * epsilon).collect();
    let all: Vec<usize> = (0..src.len()).collect();
    let distinct = distinct_indices(src, &all).len();
    let brute = match opts.dimension {
        DimensionMethod::BruteForce => true,
        DimensionMethod::LowerBound => false,
        DimensionMethod::Auto => distinct <= MAX_BRUTE_FORCE_POINTS,
    };
    let est = if brute {
        eluder_brute_force(src, epsilon, s, &grid, opts.brute_force_budget)?
    } else {
        eluder_lower_bound(src, epsilon, s, &grid)?
    };
    // sequences never repeat a point
    let upper = if est.exact { est.lower_bound } else { distinct };
    Ok(DimensionEstimate {
        lower: est.lower_bound,
        upper,
        exact: est.exact,
        method: est.method,
        eps_prime: est.eps_prime,
        sequence: est.sequence,
    })
}

fn estimate_critical<K: KernelSource + ?Sized>(
    src: &K,
    lambda: f64,
    c: f64,
    opts: &SandwichOptions,
) -> Result<CriticalGainResult> {
    let run = |method| critical_gain(lambda, c, src, method, opts.k_max, opts.exhaustive_budget);
    match opts.critical {
        CriticalMethod::Greedy => run(GainMethod::Greedy),
        CriticalMethod::Exhaustive => run(GainMethod::Exhaustive),
        CriticalMethod::Auto => match run(GainMethod::Exhaustive) {
            Err(Error::BudgetExceeded { .. }) => run(GainMethod::Greedy),
            other => other,
        },
    }
}

fn critical_side(r: &CriticalGainResult) -> CriticalSide {
    CriticalSide {
        c: r.c,
        tau: r.tau,
        tau_upper: r.tau_upper,
        exact: r.exact,
        method: r.method,
        search_nodes: r.search_nodes,
    }
}

fn theorem1_check(dim: &DimensionEstimate, critical: CriticalSide) -> Theorem1Check {
    // dim_E < tau
    let verdict = if dim.upper < critical.tau {
        Verdict::Pass
    } else if critical.tau_upper.is_some_and(|t| dim.lower >= t) {
        Verdict::Fail
    } else {
        Verdict::Inconclusive
    };
    Theorem1Check {
        exact: dim.exact && critical.exact,
        pass: verdict == Verdict::Pass,
        verdict,
        critical,
    }
}

fn decomposition<K: KernelSource + ?Sized>(
    src: &K,
    critical: &CriticalGainResult,
    epsilon: f64,
    s: f64,
    b: f64,
) -> Result<Decomposition> {
    let lambda = critical.lambda;
    let c = critical.c;
    let d = critical.witness.len();
    let ln2 = 2f64.ln();
    let (points, increments, gamma) = if d == 0 {
        (Vec::new(), Vec::new(), 0.0)
    } else {
        let t = monotone_reorder(&critical.witness, lambda, src)?;
        (t.points, t.increments, t.total)
    };
    let k = increments.iter().rposition(|&v| v > ln2).map_or(0, |i| i + 1);
    let cd = c * d as f64;
    let gain_cap = k as f64 * (b * b / lambda).ln_1p() + (d - k) as f64 * ln2;
    let chain_holds = cd < gamma && gamma <= gain_cap + CHAIN_TOL * gain_cap.max(1.0);
    let mut prefix_independent = Some(true);
    for i in 0..k {
        match independence_exact(src, points[i], &points[..i], epsilon, s)?.outcome {
            Outcome::Independent => {}
            Outcome::Dependent => {
                prefix_independent = Some(false);
                break;
            }
            Outcome::Inconclusive => prefix_independent = None,
        }
    }
    Ok(Decomposition {
        d,
        points,
        increments,
        gamma,
        k,
        cd,
        gain_cap,
        chain_holds,
        prefix_independent,
    })
}

fn theorem2_check<K: KernelSource + ?Sized>(
    src: &K,
    dim: &DimensionEstimate,
    critical: &CriticalGainResult,
    epsilon: f64,
    s: f64,
    b: f64,
) -> Result<Theorem2Check> {
    let ln2 = 2f64.ln();
    let factor = (critical.c - ln2) / ((b * b / critical.lambda).ln_1p() - ln2);
    let rhs_at = |tau: usize| (tau as f64 - 1.0) * factor;
    let rhs = rhs_at(critical.tau);
    let rhs_upper = critical.tau_upper.map(rhs_at);
    // dim_E > rhs(tau), and rhs grows with tau
    let verdict = match rhs_upper {
        Some(hi) if dim.lower as f64 > hi => Verdict::Pass,
        _ if dim.upper as f64 <= rhs => Verdict::Fail,
        _ => Verdict::Inconclusive,
    };
    let side = critical_side(critical);
    Ok(Theorem2Check {
        exact: dim.exact && side.exact,
        pass: verdict == Verdict::Pass,
        verdict,
        factor,
        rhs,
        rhs_upper,
        decomposition: decomposition(src, critical, epsilon, s, b)?,
        critical: side,
    })
}

/// Checks `dim_E(eps) < tilde gamma((eps/2S)^2, log 3/2)`.
pub fn verify_theorem1<K: KernelSource + ?Sized>(
    src: &K,
    epsilon: f64,
    s: f64,
    opts: &SandwichOptions,
) -> Result<SandwichReport> {
    check_common(epsilon, s)?;
    opts.validate()?;
    let lambda = matched_lambda(epsilon, s);
    let dimension = estimate_dimension(src, epsilon, s, opts)?;
    let critical = estimate_critical(src, lambda, lemma1_threshold(), opts)?;
    Ok(SandwichReport {
        epsilon,
        s,
        b: src.sup_norm(),
        lambda,
        theorem1: theorem1_check(&dimension, critical_side(&critical)),
        dimension,
        theorem2: None,
        theorem2_skipped: Some("not requested".into()),
    })
}

/// Checks both bounds. `b` defaults to the largest point norm and `c` to
/// [`default_c`].
pub fn verify_theorem2<K: KernelSource + ?Sized>(
    src: &K,
    epsilon: f64,
    s: f64,
    b: Option<f64>,
    c: Option<f64>,
    opts: &SandwichOptions,
) -> Result<SandwichReport> {
    check_common(epsilon, s)?;
    opts.validate()?;
    let b = resolve_b(src, b)?;
    let lambda = matched_lambda(epsilon, s);
    let c = c.unwrap_or_else(|| default_c(b, lambda));
    theorem2_preconditions(epsilon, s, b, c)?;
    let dimension = estimate_dimension(src, epsilon, s, opts)?;
    full_report(src, epsilon, s, b, c, dimension, opts)
}

fn full_report<K: KernelSource + ?Sized>(
    src: &K,
    epsilon: f64,
    s: f64,
    b: f64,
    c: f64,
    dimension: DimensionEstimate,
    opts: &SandwichOptions,
) -> Result<SandwichReport> {
    let lambda = matched_lambda(epsilon, s);
    let critical1 = estimate_critical(src, lambda, lemma1_threshold(), opts)?;
    let critical2 = estimate_critical(src, lambda, c, opts)?;
    Ok(SandwichReport {
        epsilon,
        s,
        b,
        lambda,
        theorem1: theorem1_check(&dimension, critical_side(&critical1)),
        theorem2: Some(theorem2_check(src, &dimension, &critical2, epsilon, s, b)?),
        dimension,
        theorem2_skipped: None,
    })
}

/// One cell of a sweep. `c` is `None` when the default was requested.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub epsilon: f64,
    pub c: Option<f64>,
    pub report: Option<SandwichReport>,
    pub error: Option<String>,
}

/// Cross product of `epsilon_grid` and `c_grid` (or the default `c` per
/// `epsilon` when `c_grid` is `None`), in grid order. Cells run in parallel.
/// Cells where the lower-bound preconditions fail still report the upper
/// bound; other failures are recorded per cell.
pub fn sweep<K: KernelSource + ?Sized>(
    src: &K,
    epsilon_grid: &[f64],
    s: f64,
    b: Option<f64>,
    c_grid: Option<&[f64]>,
    opts: &SandwichOptions,
) -> Result<Vec<SweepCell>> {
    if epsilon_grid.is_empty() {
        return Err(invalid("epsilon grid is empty"));
    }
    if c_grid.is_some_and(|g| g.is_empty()) {
        return Err(invalid("c grid is empty"));
    }
    opts.validate()?;
    let b = resolve_b(src, b)?;
    let cs: Vec<Option<f64>> = match c_grid {
        Some(g) => g.iter().copied().map(Some).collect(),
        None => vec![None],
    };
    let cells: Vec<(f64, Option<f64>)> = epsilon_grid
        .iter()
        .flat_map(|&e| cs.iter().map(move |&c| (e, c)))
        .collect();
    Ok(cells
        .par_iter()
        .map(|&(epsilon, c)| {
            let result = sweep_cell(src, epsilon, s, b, c, opts);
            match result {
                Ok(report) => SweepCell {
                    epsilon,
                    c,
                    report: Some(report),
                    error: None,
                },
                Err(e) => SweepCell {
                    epsilon,
                    c,
                    report: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect())
}

fn sweep_cell<K: KernelSource + ?Sized>(
    src: &K,
    epsilon: f64,
    s: f64,
    b: f64,
    c: Option<f64>,
    opts: &SandwichOptions,
) -> Result<SandwichReport> {
    check_common(epsilon, s)?;
    let lambda = matched_lambda(epsilon, s);
    let c = c.unwrap_or_else(|| default_c(b, lambda));
    let dimension = estimate_dimension(src, epsilon, s, opts)?;
    match theorem2_preconditions(epsilon, s, b, c) {
        Ok(()) => full_report(src, epsilon, s, b, c, dimension, opts),
        Err(e) => {
            let critical = estimate_critical(src, lambda, lemma1_threshold(), opts)?;
            Ok(SandwichReport {
                epsilon,
                s,
                b,
                lambda,
                theorem1: theorem1_check(&dimension, critical_side(&critical)),
                dimension,
                theorem2: None,
                theorem2_skipped: Some(e.to_string()),
            })
        }
    }
}
