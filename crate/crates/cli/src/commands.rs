//! Subcommand dispatch. Every command produces one result value, rendered
//! either as a JSON document `{"version", "config", "result"}` or as a flat
//! CSV table.

use serde::Serialize;

use rkhs_complexity::casestudy::{critical_gain_scaling, growth_experiment, regret_exponents};
use rkhs_complexity::eluder::{default_eps_prime_grid, eluder_brute_force, eluder_lower_bound};
use rkhs_complexity::infogain::{critical_gain, info_gain, max_info_gain, GainMethod};
use rkhs_complexity::sandwich::{sweep, CriticalMethod, DimensionMethod, SandwichOptions, Verdict};
use rkhs_complexity::KernelOnPoints;

use crate::args::{
    CaseStudyArgs, CaseStudyMode, Command, CriticalArg, CriticalArgs, DimensionArg, EluderArgs, EluderMethodArg,
    ExponentsArgs, Format, GainArgs, GainMethodArg, MaxGainArgs, SandwichArgs,
};
use crate::error::CliError;
use crate::input::load;
use crate::output::{g12, opt, opt_g12, to_json, Table};

/// Rendered output plus an optional failure to report after writing it.
pub struct Rendered {
    pub bytes: Vec<u8>,
    pub status: Option<CliError>,
}

#[derive(Serialize)]
struct Document<'a, R: Serialize> {
    version: &'static str,
    config: &'a Command,
    result: R,
}

fn render<R: Serialize>(cmd: &Command, result: R, table: impl FnOnce(&R) -> Table) -> Result<Vec<u8>, CliError> {
    match cmd.output().format {
        Format::Json => to_json(&Document {
            version: env!("CARGO_PKG_VERSION"),
            config: cmd,
            result,
        })
        .map_err(|e| CliError::Output(e.to_string())),
        Format::Csv => table(&result).to_bytes().map_err(|e| CliError::Output(e.to_string())),
    }
}

pub fn run(cmd: &Command) -> Result<Rendered, CliError> {
    let done = |bytes| Rendered { bytes, status: None };
    match cmd {
        Command::Gain(a) => gain(cmd, a).map(done),
        Command::Maxgain(a) => maxgain(cmd, a).map(done),
        Command::Critical(a) => critical(cmd, a).map(done),
        Command::Eluder(a) => eluder(cmd, a).map(done),
        Command::Sandwich(a) => sandwich(cmd, a),
        Command::Casestudy(a) => casestudy(cmd, a).map(done),
        Command::Exponents(a) => exponents(cmd, a).map(done),
    }
}

fn check_positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Validation(format!("--{name} must be positive, got {v}")))
    }
}

fn gain_method(m: GainMethodArg) -> GainMethod {
    match m {
        GainMethodArg::Greedy => GainMethod::Greedy,
        GainMethodArg::Exhaustive => GainMethod::Exhaustive,
    }
}

fn trace_table(lambda: f64, points: &[usize], increments: &[f64]) -> Table {
    let mut t = Table::new(vec!["lambda", "step", "point", "increment", "total"]);
    let mut total = 0.0;
    for (i, (&p, &inc)) in points.iter().zip(increments).enumerate() {
        total += inc;
        t.push(vec![g12(lambda), (i + 1).to_string(), p.to_string(), g12(inc), g12(total)]);
    }
    t
}

fn gain(cmd: &Command, a: &GainArgs) -> Result<Vec<u8>, CliError> {
    check_positive("lambda", a.lambda)?;
    let (kernel, points) = load(&a.data)?;
    let src = KernelOnPoints::new(&kernel, &points)?;
    let seq = a.sequence.clone().unwrap_or_else(|| (0..points.len()).collect());
    let trace = info_gain(a.lambda, &seq, &src)?;
    render(cmd, trace, |t| trace_table(t.lambda, &t.points, &t.increments))
}

fn maxgain(cmd: &Command, a: &MaxGainArgs) -> Result<Vec<u8>, CliError> {
    check_positive("lambda", a.lambda)?;
    if a.t == 0 {
        return Err(CliError::Validation("--t must be at least 1".into()));
    }
    let (kernel, points) = load(&a.data)?;
    let src = KernelOnPoints::new(&kernel, &points)?;
    let trace = max_info_gain(a.lambda, a.t, &src, gain_method(a.method), a.budget)?;
    render(cmd, trace, |t| trace_table(t.lambda, &t.points, &t.increments))
}

fn critical(cmd: &Command, a: &CriticalArgs) -> Result<Vec<u8>, CliError> {
    check_positive("lambda", a.lambda)?;
    check_positive("c", a.c)?;
    let (kernel, points) = load(&a.data)?;
    let src = KernelOnPoints::new(&kernel, &points)?;
    let r = critical_gain(a.lambda, a.c, &src, gain_method(a.method), a.k_max, a.budget)?;
    render(cmd, r, |r| {
        let mut t = Table::new(vec!["lambda", "c", "tau", "tau_upper", "method", "exact", "k", "gamma_k", "ck"]);
        for p in &r.gamma_at {
            t.push(vec![
                g12(r.lambda),
                g12(r.c),
                r.tau.to_string(),
                opt(r.tau_upper),
                r.method.to_string(),
                r.exact.to_string(),
                p.k.to_string(),
                g12(p.gamma),
                g12(r.c * p.k as f64),
            ]);
        }
        t
    })
}

fn eluder(cmd: &Command, a: &EluderArgs) -> Result<Vec<u8>, CliError> {
    check_positive("epsilon", a.epsilon)?;
    check_positive("s", a.s)?;
    let (kernel, points) = load(&a.data)?;
    let src = KernelOnPoints::new(&kernel, &points)?;
    let grid = a.eps_prime_grid.clone().unwrap_or_else(|| default_eps_prime_grid(a.epsilon));
    let est = match a.method {
        EluderMethodArg::LowerBound => eluder_lower_bound(&src, a.epsilon, a.s, &grid)?,
        EluderMethodArg::BruteForce => eluder_brute_force(&src, a.epsilon, a.s, &grid, a.budget)?,
    };
    render(cmd, est, |e| {
        let mut t = Table::new(vec![
            "epsilon",
            "s",
            "eps_prime",
            "dimension",
            "exact",
            "position",
            "point",
            "method",
            "gain_increment",
            "sup_value",
        ]);
        for (i, (&p, v)) in e.sequence.iter().zip(&e.verdicts).enumerate() {
            t.push(vec![
                g12(e.epsilon),
                g12(e.s),
                g12(e.eps_prime),
                e.lower_bound.to_string(),
                e.exact.to_string(),
                (i + 1).to_string(),
                p.to_string(),
                enum_name(&v.method),
                opt_g12(v.gain_increment),
                opt_g12(v.sup_value),
            ]);
        }
        t
    })
}

/// snake_case name of a unit enum variant.
fn enum_name<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        _ => String::new(),
    }
}

/// Column names of the sandwich CSV, one row per (epsilon, c) cell.
pub const SANDWICH_COLUMNS: [&str; 27] = [
    "epsilon",
    "c",
    "s",
    "b",
    "lambda",
    "dim_lower",
    "dim_upper",
    "dim_exact",
    "dim_method",
    "eps_prime",
    "tau1",
    "tau1_upper",
    "tau1_exact",
    "thm1_verdict",
    "tau2",
    "tau2_upper",
    "tau2_exact",
    "factor",
    "rhs",
    "rhs_upper",
    "thm2_verdict",
    "decomp_d",
    "decomp_k",
    "decomp_gamma",
    "chain_holds",
    "prefix_independent",
    "error",
];

fn sandwich(cmd: &Command, a: &SandwichArgs) -> Result<Rendered, CliError> {
    check_positive("s", a.s)?;
    for &e in &a.epsilon {
        check_positive("epsilon", e)?;
    }
    if let Some(cs) = &a.c {
        if let Some(c) = cs.iter().find(|&&c| !(c > 2f64.ln() && c.is_finite())) {
            return Err(CliError::Validation(format!("--c values must exceed log 2, got {c}")));
        }
    }
    let (kernel, points) = load(&a.data)?;
    let src = KernelOnPoints::new(&kernel, &points)?;
    let (dimension, critical) = if a.exact {
        (DimensionMethod::BruteForce, CriticalMethod::Exhaustive)
    } else {
        let d = match a.dimension {
            DimensionArg::Auto => DimensionMethod::Auto,
            DimensionArg::BruteForce => DimensionMethod::BruteForce,
            DimensionArg::LowerBound => DimensionMethod::LowerBound,
        };
        let c = match a.critical {
            CriticalArg::Auto => CriticalMethod::Auto,
            CriticalArg::Greedy => CriticalMethod::Greedy,
            CriticalArg::Exhaustive => CriticalMethod::Exhaustive,
        };
        (d, c)
    };
    let opts = SandwichOptions {
        dimension,
        critical,
        eps_prime_multipliers: a.eps_prime_multipliers.clone(),
        k_max: a.k_max,
        exhaustive_budget: a.exhaustive_budget,
        brute_force_budget: a.brute_force_budget,
    };
    let cells = sweep(&src, &a.epsilon, a.s, a.b, a.c.as_deref(), &opts)?;

    let mut status = None;
    if let Some(c) = cells.iter().find(|c| c.error.is_some()) {
        status = Some(CliError::Numerical(format!(
            "cell epsilon = {}: {}",
            c.epsilon,
            c.error.as_deref().unwrap_or_default()
        )));
    }
    for cell in &cells {
        let Some(r) = &cell.report else { continue };
        let undecided = r.theorem1.verdict == Verdict::Inconclusive
            || r.theorem2.as_ref().is_some_and(|t| t.verdict == Verdict::Inconclusive);
        if r.exact_failure() {
            status = Some(CliError::TheoremCheck(format!(
                "exact-mode bound violated at epsilon = {}",
                cell.epsilon
            )));
            break;
        }
        if a.exact && (undecided || !r.fully_exact()) {
            status = Some(CliError::TheoremCheck(format!(
                "exact mode left a check undecided at epsilon = {}",
                cell.epsilon
            )));
        }
    }

    let bytes = render(cmd, &cells, |cells| {
        let mut t = Table::new(SANDWICH_COLUMNS.to_vec());
        for cell in cells.iter() {
            let mut row = vec![String::new(); SANDWICH_COLUMNS.len()];
            row[0] = g12(cell.epsilon);
            row[1] = opt_g12(cell.c);
            if let Some(r) = &cell.report {
                let t1 = &r.theorem1;
                row[2] = g12(r.s);
                row[3] = g12(r.b);
                row[4] = g12(r.lambda);
                row[5] = r.dimension.lower.to_string();
                row[6] = r.dimension.upper.to_string();
                row[7] = r.dimension.exact.to_string();
                row[8] = enum_name(&r.dimension.method);
                row[9] = g12(r.dimension.eps_prime);
                row[10] = t1.critical.tau.to_string();
                row[11] = opt(t1.critical.tau_upper);
                row[12] = t1.critical.exact.to_string();
                row[13] = enum_name(&t1.verdict);
                if let Some(t2) = &r.theorem2 {
                    row[1] = g12(t2.critical.c);
                    row[14] = t2.critical.tau.to_string();
                    row[15] = opt(t2.critical.tau_upper);
                    row[16] = t2.critical.exact.to_string();
                    row[17] = g12(t2.factor);
                    row[18] = g12(t2.rhs);
                    row[19] = opt_g12(t2.rhs_upper);
                    row[20] = enum_name(&t2.verdict);
                    row[21] = t2.decomposition.d.to_string();
                    row[22] = t2.decomposition.k.to_string();
                    row[23] = g12(t2.decomposition.gamma);
                    row[24] = t2.decomposition.chain_holds.to_string();
                    row[25] = opt(t2.decomposition.prefix_independent);
                } else {
                    row[26] = r.theorem2_skipped.clone().unwrap_or_default();
                }
            }
            if let Some(e) = &cell.error {
                row[26] = e.clone();
            }
            t.push(row);
        }
        t
    })?;
    Ok(Rendered { bytes, status })
}

fn casestudy(cmd: &Command, a: &CaseStudyArgs) -> Result<Vec<u8>, CliError> {
    match a.mode {
        CaseStudyMode::Growth => {
            check_positive("lambda", a.lambda)?;
            let fit = growth_experiment(a.beta, a.d, a.num_terms, a.lambda, &a.t_grid, a.pool_size, a.seed)?;
            render(cmd, fit, |f| {
                let mut t = Table::new(vec![
                    "beta",
                    "d",
                    "lambda",
                    "t",
                    "gamma",
                    "fitted_exponent",
                    "theory_exponent",
                ]);
                for (&tv, &g) in f.t_values.iter().zip(&f.gamma) {
                    t.push(vec![
                        g12(f.beta),
                        f.d.to_string(),
                        g12(f.lambda),
                        tv.to_string(),
                        g12(g),
                        g12(f.fitted_exponent),
                        g12(f.theory_exponent),
                    ]);
                }
                t
            })
        }
        CaseStudyMode::Scaling => {
            check_positive("c", a.c)?;
            let fit = critical_gain_scaling(
                a.beta,
                a.d,
                a.num_terms,
                &a.lambda_grid,
                a.c,
                a.pool_size,
                a.seed,
                a.k_max,
            )?;
            render(cmd, fit, |f| {
                let mut t = Table::new(vec!["beta", "d", "c", "lambda", "tau", "fitted_slope", "theory_slope"]);
                for r in &f.rows {
                    t.push(vec![
                        g12(f.beta),
                        f.d.to_string(),
                        g12(f.c),
                        g12(r.lambda),
                        r.tau.to_string(),
                        g12(f.fitted_slope),
                        g12(f.theory_slope),
                    ]);
                }
                t
            })
        }
    }
}

fn exponents(cmd: &Command, a: &ExponentsArgs) -> Result<Vec<u8>, CliError> {
    let r = regret_exponents(a.d, a.beta)?;
    render(cmd, r, |r| {
        let mut t = Table::new(vec!["d", "beta", "yang_exponent", "wang_exponent", "winner"]);
        t.push(vec![
            r.d.to_string(),
            g12(r.beta),
            g12(r.yang_exponent),
            g12(r.wang_exponent),
            enum_name(&r.winner),
        ]);
        t
    })
}
