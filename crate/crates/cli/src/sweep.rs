use std::path::PathBuf;

use ncs_laser::observables::{g2, mean_photon, trace_distance_diagonal};
use ncs_laser::phasespace::s0_search;
use ncs_laser::{build_solution, strong_coupling_solution};
use rayon::prelude::*;

use crate::config::CommonArgs;
use crate::output::{self, Cell, Table};
use crate::Failure;

#[derive(Debug, Clone)]
pub struct Spec {
    pub param: String,
    pub from: f64,
    pub to: f64,
    pub points: usize,
    pub log: bool,
}

impl Spec {
    pub fn values(&self) -> Result<Vec<f64>, Failure> {
        if self.points < 2 {
            return Err(Failure::Invalid(format!("--points must be >= 2, got {}", self.points)));
        }
        if !(self.from.is_finite() && self.to.is_finite()) {
            return Err(Failure::Invalid("sweep range must be finite".into()));
        }
        if self.log && !(self.from > 0.0 && self.to > 0.0) {
            return Err(Failure::Invalid("--log needs a positive range".into()));
        }
        let last = (self.points - 1) as f64;
        Ok((0..self.points)
            .map(|k| {
                let t = k as f64 / last;
                if self.log {
                    (self.from.ln() + t * (self.to.ln() - self.from.ln())).exp()
                } else {
                    self.from + t * (self.to - self.from)
                }
            })
            .collect())
    }
}

pub fn run(common: &CommonArgs, spec: &Spec) -> Result<Vec<PathBuf>, Failure> {
    let cfg = common.resolve()?;
    let base = cfg.require_source()?;
    let sources = spec
        .values()?
        .into_iter()
        .map(|v| base.with_field(&spec.param, v).map(|s| (v, s)))
        .collect::<Result<Vec<_>, _>>()?;
    // Validate every point before spending time on any of them.
    let points = sources
        .iter()
        .map(|(v, s)| s.params().map(|p| (*v, p)))
        .collect::<Result<Vec<_>, _>>()?;
    let opts = cfg.options;
    let rows: Vec<Vec<Cell>> = points
        .par_iter()
        .map(|(v, p)| -> Result<Vec<Cell>, Failure> {
            let sol = build_solution(p, &opts)?;
            let sc = strong_coupling_solution(p, &opts)?;
            Ok(vec![
                Cell::from(*v),
                p.a0sq.into(),
                p.nu0.into(),
                p.mu0.into(),
                p.eta.into(),
                sol.nmax.into(),
                mean_photon(&sol.rhof).into(),
                g2(&sol.rhof)?.into(),
                trace_distance_diagonal(&sol.rhof, &sc).into(),
                s0_search(&sol.rhof, 1e-4).s0.into(),
                sol.diagnostics.max().into(),
            ])
        })
        .collect::<Result<_, _>>()?;
    let swept = format!("{} (input)", spec.param);
    let mut table = Table::new(&[
        swept.as_str(),
        "a0sq (1)",
        "nu0 (1)",
        "mu0 (1)",
        "eta (1)",
        "nmax (photons)",
        "mean_n (photons)",
        "g2 (1)",
        "trace_distance_sc (1)",
        "s0 (1)",
        "max_residual (1)",
    ]);
    rows.into_iter().for_each(|r| table.push(r));
    output::ensure_dir(&cfg.out)?;
    Ok(vec![table.write(&cfg.out, "sweep", cfg.format)?])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(from: f64, to: f64, points: usize, log: bool) -> Spec {
        Spec {
            param: "a0sq".into(),
            from,
            to,
            points,
            log,
        }
    }

    #[test]
    fn linear_and_log_spacing() {
        assert_eq!(spec(0.0, 1.0, 3, false).values().unwrap(), vec![0.0, 0.5, 1.0]);
        let v = spec(1.0, 100.0, 3, true).values().unwrap();
        assert!((v[1] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_specs_are_rejected() {
        assert!(spec(0.0, 1.0, 1, false).values().is_err());
        assert!(spec(0.0, 1.0, 3, true).values().is_err());
        assert!(spec(f64::NAN, 1.0, 3, false).values().is_err());
    }
}
