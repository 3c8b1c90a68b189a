//! Desk-scale experiments with the polynomial-eigendecay kernel and the
//! comparison of two regret exponents.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::infogain::{critical_gain, max_info_gain, GainMethod};
use crate::kernel::{truncation_error_bound, GramMatrix, Kernel, KernelOnPoints, KernelSpec, PointSet};

pub const DEFAULT_POOL_SIZE: usize = 512;
pub const DEFAULT_GROWTH_LAMBDA: f64 = 0.1;
pub const DEFAULT_T_GRID: [usize; 6] = [16, 32, 64, 128, 256, 512];
pub const DEFAULT_SCALING_LAMBDAS: [f64; 4] = [1e-3, 1e-4, 1e-5, 1e-6];
pub const DEFAULT_SCALING_C: f64 = 0.5;
pub const DEFAULT_SCALING_K_MAX: usize = 100_000;

/// Tolerance of the (non-gating) comparison between fitted and theory
/// slopes.
pub const SLOPE_TOLERANCE: f64 = 0.2;

/// Candidate pool drawn uniformly from `[0,1]^d`.
pub fn sample_pool(d: usize, size: usize, seed: u64) -> Result<PointSet> {
    if d == 0 {
        return Err(invalid("d must be at least 1"));
    }
    if size == 0 {
        return Err(invalid("pool size must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..size).map(|_| (0..d).map(|_| rng.gen::<f64>()).collect()).collect();
    PointSet::from_rows(rows)
}

fn eigendecay_gram(beta: f64, num_terms: usize, pool: &PointSet) -> Result<GramMatrix> {
    let kernel = Kernel::new(KernelSpec::Eigendecay {
        beta,
        num_terms,
        amplitude: 1.0,
    })?;
    let src = KernelOnPoints::new(&kernel, pool)?;
    Ok(GramMatrix::from_source(&src))
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::GridTooShort(format!("need at least 2 points for a slope, got {}", x.len())));
    }
    if x.iter().chain(y).any(|&v| !(v > 0.0)) {
        return Err(invalid("log-log fit needs positive values"));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::GridTooShort("grid values are all equal".into()));
    }
    Ok(sxy / sxx)
}

/// Upper half of a grid (at least two points).
fn tail_start(len: usize) -> usize {
    (len / 2).min(len.saturating_sub(2))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthFit {
    pub beta: f64,
    pub d: usize,
    pub num_terms: usize,
    pub lambda: f64,
    pub pool_size: usize,
    pub seed: u64,
    pub t_values: Vec<usize>,
    pub gamma: Vec<f64>,
    /// Slope of `log gamma_T` against `log T` over the upper half of the grid.
    pub fitted_exponent: f64,
    /// `(d + 1) / (beta + d)`.
    pub theory_exponent: f64,
    pub within_tolerance: bool,
    pub truncation_error: f64,
}

/// Greedy `gamma_T` growth for the eigendecay kernel on a random pool.
pub fn growth_experiment(
    beta: f64,
    d: usize,
    num_terms: usize,
    lambda: f64,
    t_grid: &[usize],
    pool_size: usize,
    seed: u64,
) -> Result<GrowthFit> {
    if !(beta > 2.0) {
        return Err(invalid(format!("beta must exceed 2, got {beta}")));
    }
    if t_grid.len() < 2 {
        return Err(Error::GridTooShort(format!("T grid needs at least 2 values, got {}", t_grid.len())));
    }
    if t_grid[0] == 0 || t_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("T grid must be positive and strictly increasing"));
    }
    let pool = sample_pool(d, pool_size, seed)?;
    let gram = eigendecay_gram(beta, num_terms, &pool)?;
    let t_max = *t_grid.last().expect("nonempty");
    let trace = max_info_gain(lambda, t_max, &gram, GainMethod::Greedy, 0)?;
    let totals = trace.prefix_totals();
    let gamma: Vec<f64> = t_grid.iter().map(|&t| totals[t - 1]).collect();
    let start = tail_start(t_grid.len());
    let xs: Vec<f64> = t_grid[start..].iter().map(|&t| t as f64).collect();
    let fitted_exponent = log_log_slope(&xs, &gamma[start..])?;
    let theory_exponent = (d as f64 + 1.0) / (beta + d as f64);
    Ok(GrowthFit {
        beta,
        d,
        num_terms,
        lambda,
        pool_size,
        seed,
        t_values: t_grid.to_vec(),
        gamma,
        fitted_exponent,
        theory_exponent,
        within_tolerance: (fitted_exponent - theory_exponent).abs() <= SLOPE_TOLERANCE,
        truncation_error: truncation_error_bound(beta, num_terms, 1.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Winner {
    Yang,
    Wang,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegretExponents {
    pub d: usize,
    pub beta: f64,
    /// `(d + 1)/(d + beta) + 1/2`, via maximum information gain.
    pub yang_exponent: f64,
    /// `(10(beta + d) + 7 beta)/(beta(beta - 1)) + 1/2`, via eluder dimension.
    pub wang_exponent: f64,
    /// Smaller exponent; ties go to `yang`.
    pub winner: Winner,
}

/// Exponents of `T` in the two regret bounds under `beta`-polynomial decay.
pub fn regret_exponents(d: usize, beta: f64) -> Result<RegretExponents> {
    if d == 0 {
        return Err(invalid("d must be at least 1"));
    }
    let df = d as f64;
    if !(beta > 2.0 + 1.0 / df) || !beta.is_finite() {
        return Err(invalid(format!("beta must exceed 2 + 1/d = {}, got {beta}", 2.0 + 1.0 / df)));
    }
    let yang_exponent = (df + 1.0) / (df + beta) + 0.5;
    let wang_exponent = (10.0 * (beta + df) + 7.0 * beta) / (beta * (beta - 1.0)) + 0.5;
    let winner = if wang_exponent < yang_exponent { Winner::Wang } else { Winner::Yang };
    Ok(RegretExponents {
        d,
        beta,
        yang_exponent,
        wang_exponent,
        winner,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingRow {
    pub lambda: f64,
    pub tau: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingFit {
    pub beta: f64,
    pub d: usize,
    pub num_terms: usize,
    pub c: f64,
    pub pool_size: usize,
    pub seed: u64,
    pub rows: Vec<ScalingRow>,
    /// Slope of `log tau` against `log(1/lambda)`.
    pub fitted_slope: f64,
    /// `(beta + d) / (beta (beta - 1))`.
    pub theory_slope: f64,
    pub within_tolerance: bool,
}

/// Greedy critical gain over a decreasing `lambda` grid.
#[allow(clippy::too_many_arguments)]
pub fn critical_gain_scaling(
    beta: f64,
    d: usize,
    num_terms: usize,
    lambda_grid: &[f64],
    c: f64,
    pool_size: usize,
    seed: u64,
    k_max: usize,
) -> Result<ScalingFit> {
    if !(beta > 2.0) {
        return Err(invalid(format!("beta must exceed 2, got {beta}")));
    }
    if lambda_grid.len() < 2 {
        return Err(Error::GridTooShort(format!(
            "lambda grid needs at least 2 values, got {}",
            lambda_grid.len()
        )));
    }
    if lambda_grid.windows(2).any(|w| w[0] <= w[1]) {
        return Err(invalid("lambda grid must be strictly decreasing"));
    }
    let pool = sample_pool(d, pool_size, seed)?;
    let gram = eigendecay_gram(beta, num_terms, &pool)?;
    let rows = lambda_grid
        .par_iter()
        .map(|&lambda| {
            critical_gain(lambda, c, &gram, GainMethod::Greedy, k_max, 0).map(|r| ScalingRow { lambda, tau: r.tau })
        })
        .collect::<Result<Vec<_>>>()?;
    let inv: Vec<f64> = rows.iter().map(|r| 1.0 / r.lambda).collect();
    let taus: Vec<f64> = rows.iter().map(|r| r.tau as f64).collect();
    let fitted_slope = log_log_slope(&inv, &taus)?;
    let theory_slope = (beta + d as f64) / (beta * (beta - 1.0));
    Ok(ScalingFit {
        beta,
        d,
        num_terms,
        c,
        pool_size,
        seed,
        rows,
        fitted_slope,
        theory_slope,
        within_tolerance: (fitted_slope - theory_slope).abs() <= SLOPE_TOLERANCE,
    })
}
