mod check;
mod config;
mod figures;
mod output;
mod sweep;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, Parser, Subcommand};
use ncs_laser::{build_solution, strong_coupling_solution, BalanceDiagnostics, Options, Params, Solution};
use serde::Serialize;

use config::CommonArgs;
use output::{Cell, Table};

#[derive(Debug)]
pub enum Failure {
    Invalid(String),
    Numeric(String),
    Check(Vec<String>),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 1,
            Failure::Numeric(_) | Failure::Check(_) => 2,
            Failure::Io(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Invalid(m) => write!(f, "invalid input: {m}"),
            Failure::Numeric(m) => write!(f, "solver failure: {m}"),
            Failure::Check(names) => write!(f, "failed checks: {}", names.join(", ")),
            Failure::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<ncs_laser::Error> for Failure {
    fn from(e: ncs_laser::Error) -> Self {
        match e {
            ncs_laser::Error::InvalidRate { .. } | ncs_laser::Error::InvalidParameter { .. } => {
                Failure::Invalid(e.to_string())
            }
            other => Failure::Numeric(other.to_string()),
        }
    }
}

/// Stationary state of the incoherently pumped single-atom laser.
#[derive(Debug, Parser)]
#[command(name = "ncs-laser", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one parameter set; writes solution.json and the distributions.
    Solve(CommonArgs),
    /// Emit the data behind one of the figures fig1..fig6.
    Figure {
        name: String,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Residual suite and master-equation comparison; writes check.json.
    Check {
        #[command(flatten)]
        common: CommonArgs,
        /// Largest Fock cutoff the master-equation oracle may use.
        #[arg(long, default_value_t = 160)]
        oracle_max: usize,
    },
    /// Sweep one parameter over a range.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Parameter to vary; must belong to the given parameter source.
        #[arg(long)]
        param: String,
        #[arg(long, allow_hyphen_values = true)]
        from: f64,
        #[arg(long, allow_hyphen_values = true)]
        to: f64,
        #[arg(long, default_value_t = 11)]
        points: usize,
        /// Logarithmic spacing.
        #[arg(long)]
        log: bool,
    },
}

#[derive(Serialize)]
struct SolutionDoc<'a> {
    params: &'a Params,
    nmax: usize,
    buffer: usize,
    d: &'a [f64],
    f11: &'a [f64],
    rho11: &'a [f64],
    rho22: &'a [f64],
    rhof: &'a [f64],
    ground_weight: f64,
    diagnostics: &'a BalanceDiagnostics<f64>,
}

fn solution_doc(sol: &Solution) -> SolutionDoc<'_> {
    let n = sol.nmax;
    SolutionDoc {
        params: &sol.params,
        nmax: n,
        buffer: sol.deviation.buffer,
        d: &sol.deviation.d[..=n],
        f11: &sol.f11.f[..n],
        rho11: &sol.rho11.p[..=n],
        rho22: &sol.rho22.p[..=n],
        rhof: &sol.rhof.p[..=n],
        ground_weight: sol.ground_weight,
        diagnostics: &sol.diagnostics,
    }
}

fn solve(common: &CommonArgs) -> Result<Vec<PathBuf>, Failure> {
    let cfg = common.resolve()?;
    let p = cfg.require_source()?.params()?;
    let sol = build_solution(&p, &cfg.options)?;
    let sc = strong_coupling_solution(
        &p,
        &Options {
            nmax: ncs_laser::NmaxPolicy::Fixed(sol.nmax),
            ..cfg.options
        },
    )?;
    output::ensure_dir(&cfg.out)?;
    let mut table = Table::new(&[
        "n (photons)",
        "rho11 (probability)",
        "rho22 (probability)",
        "rhof (probability)",
        "rho_sc (probability)",
    ]);
    for n in 0..=sol.nmax {
        table.push(vec![
            Cell::from(n),
            sol.rho11.get(n).into(),
            sol.rho22.get(n).into(),
            sol.rhof.get(n).into(),
            sc.get(n).into(),
        ]);
    }
    Ok(vec![
        output::write_json(&cfg.out, "solution", &solution_doc(&sol))?,
        table.write(&cfg.out, "distributions", cfg.format)?,
    ])
}

fn run(cli: Cli) -> Result<Vec<PathBuf>, Failure> {
    match cli.command {
        Command::Solve(common) => solve(&common),
        Command::Figure { name, common } => figures::run(&name, &common),
        Command::Check { common, oracle_max } => check::run(&common, oracle_max),
        Command::Sweep {
            common,
            param,
            from,
            to,
            points,
            log,
        } => sweep::run(
            &common,
            &sweep::Spec {
                param,
                from,
                to,
                points,
                log,
            },
        ),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            if let Failure::Invalid(_) = e {
                let mut cmd = Cli::command();
                cmd.build();
                let name = std::env::args().nth(1).unwrap_or_default();
                let usage = match cmd.find_subcommand_mut(&name) {
                    Some(sub) => sub.render_usage(),
                    None => cmd.render_usage(),
                };
                eprintln!("{usage}");
            }
            ExitCode::from(e.code())
        }
    }
}
