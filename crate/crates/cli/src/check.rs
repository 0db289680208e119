use std::path::PathBuf;

use ncs_laser::observables::{effective_w, trace_distance_diagonal};
use ncs_laser::{build_solution, Params, Rates, Solution, TruncatedLiouvillian};
use serde::Serialize;

use crate::config::{CommonArgs, Source};
use crate::output;
use crate::Failure;

const RESIDUAL_TOL: f64 = 1e-9;
const TAIL_TOL: f64 = 1e-10;
const ORACLE_TOL: f64 = 1e-7;
const LEAKAGE_TOL: f64 = 1e-10;
const ROBUST_TOL: f64 = 1e-9;
const CLOSURE_TOL: f64 = 1e-12;
const ORACLE_MIN: usize = 20;
const ORACLE_MARGIN: usize = 10;
const ORACLE_TAIL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub value: Option<f64>,
    pub tolerance: Option<f64>,
    pub status: Status,
    pub detail: String,
}

fn bounded(name: &'static str, value: f64, tolerance: f64, detail: impl Into<String>) -> Check {
    let status = if value <= tolerance { Status::Pass } else { Status::Fail };
    Check {
        name,
        value: Some(value),
        tolerance: Some(tolerance),
        status,
        detail: detail.into(),
    }
}

fn skipped(name: &'static str, detail: impl Into<String>) -> Check {
    Check {
        name,
        value: None,
        tolerance: None,
        status: Status::Skipped,
        detail: detail.into(),
    }
}

#[derive(Debug, Serialize)]
struct Report {
    params: Option<Params>,
    rates: Option<Rates>,
    nmax: Option<usize>,
    oracle_ntrunc: Option<usize>,
    checks: Vec<Check>,
    passed: bool,
}

fn recurrence_checks(sol: &Solution, tol: f64) -> Result<Vec<Check>, Failure> {
    let dg = &sol.diagnostics;
    let violations = match sol.deviation.bound_violation() {
        Some(n) => bounded("deviation_bound", 1.0, 0.0, format!("d(n) leaves its bound at n = {n}")),
        None => bounded("deviation_bound", 0.0, 0.0, "0 < d(n) < bound for all n"),
    };
    let eq23 = effective_w(sol)?.eq23_residual.into_iter().fold(0.0, f64::max);
    Ok(vec![
        violations,
        bounded(
            "seed_agreement",
            sol.deviation.seed_disagreement,
            tol,
            "two seed runs of the deviation sweep",
        ),
        bounded("eq7_residual", dg.eq7, RESIDUAL_TOL, "energy balance"),
        bounded("eq8_residual", dg.eq8, RESIDUAL_TOL, "photon balance"),
        bounded("eq9_residual", dg.eq9, RESIDUAL_TOL, "definition of d(n)"),
        bounded(
            "eq11_residual",
            dg.eq11,
            RESIDUAL_TOL,
            "deformed-annihilation eigen-equation",
        ),
        bounded("transition_balance", eq23, RESIDUAL_TOL, "(n+1) w_n balance"),
        bounded(
            "truncation_tail",
            sol.rhof.tail_bound,
            TAIL_TOL,
            format!("certified mass beyond nmax = {}", sol.nmax),
        ),
    ])
}

fn oracle_cutoff(sol: &Solution) -> usize {
    let mut tail = 0.0;
    let mut n = sol.nmax;
    while n > 0 && tail + sol.rhof.get(n) <= ORACLE_TAIL {
        tail += sol.rhof.get(n);
        n -= 1;
    }
    (n + ORACLE_MARGIN).max(ORACLE_MIN)
}

fn oracle_checks(rates: &Rates, sol: &Solution, ntrunc: usize) -> Result<Vec<Check>, Failure> {
    let l = TruncatedLiouvillian::build(rates, ntrunc)?;
    let ss = l.steady_state()?;
    let wider = TruncatedLiouvillian::build(rates, ntrunc + 20)?.steady_state()?;
    let (f, fw) = (ss.rhof(), wider.rhof());
    let robust = (0..=ntrunc + 20)
        .map(|n| (f.get(n) - fw.get(n)).abs())
        .fold(0.0, f64::max);
    let coherence = (1..ntrunc).map(|n| (ss.u(n) - sol.u(n)).abs()).fold(0.0, f64::max);
    Ok(vec![
        bounded(
            "oracle_closure",
            l.closure_defect.max(l.trace_defect()),
            CLOSURE_TOL,
            "sector invariance and trace preservation",
        ),
        bounded(
            "oracle_trace_distance",
            trace_distance_diagonal(&sol.rhof, &f),
            ORACLE_TOL,
            format!("N = {ntrunc}"),
        ),
        bounded("oracle_leakage", ss.leakage, LEAKAGE_TOL, "population at the cutoff"),
        bounded(
            "oracle_truncation_robustness",
            robust,
            ROBUST_TOL,
            format!("N = {ntrunc} -> {}", ntrunc + 20),
        ),
        bounded("oracle_coherence", coherence, ORACLE_TOL, "u(n) = rho_f(n) / sqrt(eta)"),
    ])
}

fn uncoupled_checks(rates: &Rates) -> Result<Vec<Check>, Failure> {
    let ss = TruncatedLiouvillian::build(rates, 10)?.steady_state()?;
    let total = rates.r12 + rates.r21;
    let mut err = (ss.rho11[0] - rates.r21 / total)
        .abs()
        .max((ss.rho22[0] - rates.r12 / total).abs());
    for n in 1..ss.rho11.len() {
        err = err.max(ss.rho11[n].abs()).max(ss.rho22[n].abs());
    }
    Ok(vec![
        skipped("recurrence", "g = 0 has no normalized parameters"),
        bounded(
            "uncoupled_closed_form",
            err,
            1e-12,
            "vacuum times (R21|1><1| + R12|2><2|) / (R12 + R21)",
        ),
    ])
}

pub fn run(common: &CommonArgs, oracle_max: usize) -> Result<Vec<PathBuf>, Failure> {
    let cfg = common.resolve()?;
    let source = cfg.require_source()?;
    let mut report = Report {
        params: None,
        rates: None,
        nmax: None,
        oracle_ntrunc: None,
        checks: Vec::new(),
        passed: false,
    };
    match source {
        Source::Raw(r) if r.g == 0.0 => {
            report.rates = Some(r);
            report.checks = uncoupled_checks(&r)?;
        }
        _ => {
            let p = source.params()?;
            let rates = match source {
                Source::Raw(r) => r,
                Source::Normalized(p) => Rates::from_normalized(&p, 1.0),
            };
            let sol = build_solution(&p, &cfg.options)?;
            report.params = Some(p);
            report.rates = Some(rates);
            report.nmax = Some(sol.nmax);
            report.checks = recurrence_checks(&sol, cfg.options.tol)?;
            let ntrunc = oracle_cutoff(&sol);
            if ntrunc <= oracle_max {
                report.oracle_ntrunc = Some(ntrunc);
                report.checks.extend(oracle_checks(&rates, &sol, ntrunc)?);
            } else {
                report.checks.push(skipped(
                    "oracle",
                    format!("needs N = {ntrunc} above --oracle-max {oracle_max}"),
                ));
            }
        }
    }
    let failed: Vec<String> = report
        .checks
        .iter()
        .filter(|c| c.status == Status::Fail)
        .map(|c| c.name.to_string())
        .collect();
    report.passed = failed.is_empty();
    for c in &report.checks {
        let tag = match c.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skipped => "SKIP",
        };
        match (c.value, c.tolerance) {
            (Some(v), Some(t)) => println!("{tag} {}: {v:.3e} (tol {t:.0e}) {}", c.name, c.detail),
            _ => println!("{tag} {}: {}", c.name, c.detail),
        }
    }
    output::ensure_dir(&cfg.out)?;
    let path = output::write_json(&cfg.out, "check", &report)?;
    if failed.is_empty() {
        Ok(vec![path])
    } else {
        Err(Failure::Check(failed))
    }
}
