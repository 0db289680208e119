use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use ncs_laser::{normalize, NmaxPolicy, Options, Params, Rates};

use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Flags shared by every subcommand; unset flags fall back to the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Pump parameter a0^2.
    #[arg(long, allow_hyphen_values = true)]
    pub a0sq: Option<f64>,
    /// Loss excess nu0.
    #[arg(long, allow_hyphen_values = true)]
    pub nu0: Option<f64>,
    /// Dephasing parameter mu0.
    #[arg(long, allow_hyphen_values = true)]
    pub mu0: Option<f64>,
    /// Coupling parameter eta = g^2 / kappa^2.
    #[arg(long, allow_hyphen_values = true)]
    pub eta: Option<f64>,
    /// Field decay rate.
    #[arg(long, allow_hyphen_values = true)]
    pub kappa: Option<f64>,
    /// Atom-field coupling.
    #[arg(long, allow_hyphen_values = true)]
    pub g: Option<f64>,
    /// Pump rate R12.
    #[arg(long, allow_hyphen_values = true)]
    pub r12: Option<f64>,
    /// Atomic decay rate R21.
    #[arg(long, allow_hyphen_values = true)]
    pub r21: Option<f64>,
    /// Dephasing rate.
    #[arg(long, allow_hyphen_values = true)]
    pub gamma: Option<f64>,
    /// Photon-number cutoff: `auto` or an integer.
    #[arg(long)]
    pub nmax: Option<String>,
    /// Seed-agreement tolerance of the deviation sweep, in (0, 1e-6].
    #[arg(long)]
    pub tol: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// File of `key = value` lines using the flag names.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

const KEYS: [&str; 13] = [
    "a0sq", "nu0", "mu0", "eta", "kappa", "g", "r12", "r21", "gamma", "nmax", "tol", "out", "format",
];
const NORMALIZED: [&str; 4] = ["a0sq", "nu0", "mu0", "eta"];
const RAW: [&str; 5] = ["kappa", "g", "r12", "r21", "gamma"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Source {
    Normalized(Params),
    Raw(Rates),
}

impl Source {
    pub fn params(&self) -> Result<Params, Failure> {
        match self {
            Source::Normalized(p) => Ok(*p),
            Source::Raw(r) => normalize(r).map_err(Failure::from),
        }
    }

    /// Copy with one named field replaced.
    pub fn with_field(&self, name: &str, value: f64) -> Result<Source, Failure> {
        let mut s = *self;
        let slot = match &mut s {
            Source::Normalized(p) => match name {
                "a0sq" => &mut p.a0sq,
                "nu0" => &mut p.nu0,
                "mu0" => &mut p.mu0,
                "eta" => &mut p.eta,
                _ => {
                    return Err(Failure::Invalid(format!(
                        "cannot sweep `{name}` with normalized parameters"
                    )))
                }
            },
            Source::Raw(r) => match name {
                "kappa" => &mut r.kappa,
                "g" => &mut r.g,
                "r12" => &mut r.r12,
                "r21" => &mut r.r21,
                "gamma" => &mut r.gamma,
                _ => return Err(Failure::Invalid(format!("cannot sweep `{name}` with raw rates"))),
            },
        };
        *slot = value;
        Ok(s)
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub source: Option<Source>,
    pub options: Options,
    pub out: PathBuf,
    pub format: Format,
}

impl RunConfig {
    pub fn require_source(&self) -> Result<Source, Failure> {
        self.source.ok_or_else(|| {
            Failure::Invalid(
                "no parameters given: pass --a0sq --nu0 --mu0 --eta or --kappa --g --r12 --r21 --gamma".into(),
            )
        })
    }
}

pub fn parse_config_file(path: &Path) -> Result<BTreeMap<String, String>, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Failure::Invalid(format!("{}:{}: expected key = value", path.display(), i + 1)))?;
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(Failure::Invalid(format!(
                "{}:{}: unknown key `{key}`",
                path.display(),
                i + 1
            )));
        }
        map.insert(key.to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn number(key: &str, value: &str) -> Result<f64, Failure> {
    value
        .parse()
        .map_err(|_| Failure::Invalid(format!("`{key}` must be a number, got `{value}`")))
}

fn nmax_policy(value: &str) -> Result<NmaxPolicy, Failure> {
    if value == "auto" {
        return Ok(NmaxPolicy::Auto);
    }
    match value.parse::<usize>() {
        Ok(n) if n >= 1 => Ok(NmaxPolicy::Fixed(n)),
        _ => Err(Failure::Invalid(format!(
            "`nmax` must be `auto` or a positive integer, got `{value}`"
        ))),
    }
}

impl CommonArgs {
    fn flag_values(&self) -> BTreeMap<String, String> {
        let numbers = [
            ("a0sq", self.a0sq),
            ("nu0", self.nu0),
            ("mu0", self.mu0),
            ("eta", self.eta),
            ("kappa", self.kappa),
            ("g", self.g),
            ("r12", self.r12),
            ("r21", self.r21),
            ("gamma", self.gamma),
            ("tol", self.tol),
        ];
        let mut map: BTreeMap<String, String> = numbers
            .into_iter()
            .filter_map(|(k, v)| v.map(|v| (k.to_string(), v.to_string())))
            .collect();
        if let Some(n) = &self.nmax {
            map.insert("nmax".into(), n.clone());
        }
        if let Some(o) = &self.out {
            map.insert("out".into(), o.display().to_string());
        }
        if let Some(f) = self.format {
            map.insert("format".into(), if f == Format::Csv { "csv" } else { "json" }.into());
        }
        map
    }

    /// Flags over config file over defaults.
    pub fn resolve(&self) -> Result<RunConfig, Failure> {
        let mut merged = match &self.config {
            Some(path) => parse_config_file(path)?,
            None => BTreeMap::new(),
        };
        merged.extend(self.flag_values());

        let get = |k: &str| merged.get(k).map(|v| number(k, v)).transpose();
        let normalized: Vec<Option<f64>> = NORMALIZED.iter().map(|k| get(k)).collect::<Result<_, _>>()?;
        let raw: Vec<Option<f64>> = RAW.iter().map(|k| get(k)).collect::<Result<_, _>>()?;
        let any_norm = normalized.iter().any(Option::is_some);
        let any_raw = raw.iter().any(Option::is_some);
        let source = match (any_norm, any_raw) {
            (true, true) => {
                return Err(Failure::Invalid(
                    "give either normalized parameters or raw rates, not both".into(),
                ))
            }
            (false, false) => None,
            (true, false) => {
                let missing: Vec<&str> = NORMALIZED
                    .iter()
                    .zip(&normalized)
                    .filter(|(_, v)| v.is_none())
                    .map(|(k, _)| *k)
                    .collect();
                if !missing.is_empty() {
                    return Err(Failure::Invalid(format!("missing --{}", missing.join(", --"))));
                }
                let v: Vec<f64> = normalized.into_iter().flatten().collect();
                let p = Params::new(v[0], v[1], v[2], v[3])?;
                Some(Source::Normalized(p))
            }
            (false, true) => {
                let missing: Vec<&str> = RAW
                    .iter()
                    .zip(&raw)
                    .filter(|(_, v)| v.is_none())
                    .map(|(k, _)| *k)
                    .collect();
                if !missing.is_empty() {
                    return Err(Failure::Invalid(format!("missing --{}", missing.join(", --"))));
                }
                let v: Vec<f64> = raw.into_iter().flatten().collect();
                let r = Rates {
                    kappa: v[0],
                    g: v[1],
                    r12: v[2],
                    r21: v[3],
                    gamma: v[4],
                };
                r.validate()?;
                Some(Source::Raw(r))
            }
        };

        let mut options = Options::default();
        if let Some(t) = get("tol")? {
            if !(t > 0.0 && t <= 1e-6) {
                return Err(Failure::Invalid(format!("`tol` must lie in (0, 1e-6], got {t}")));
            }
            options.tol = t;
        }
        if let Some(n) = merged.get("nmax") {
            options.nmax = nmax_policy(n)?;
        }
        let format = match merged.get("format").map(String::as_str) {
            None | Some("csv") => Format::Csv,
            Some("json") => Format::Json,
            Some(other) => return Err(Failure::Invalid(format!("`format` must be csv or json, got `{other}`"))),
        };
        let out = merged
            .get("out")
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("."));
        Ok(RunConfig {
            source,
            options,
            out,
            format,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig1_flags() -> CommonArgs {
        CommonArgs {
            a0sq: Some(1.0),
            nu0: Some(1.0),
            mu0: Some(3.0),
            eta: Some(5.0),
            ..Default::default()
        }
    }

    #[test]
    fn defaults() {
        let cfg = fig1_flags().resolve().unwrap();
        assert_eq!(cfg.format, Format::Csv);
        assert_eq!(cfg.options.nmax, NmaxPolicy::Auto);
        assert_eq!(cfg.out, PathBuf::from("."));
        assert_eq!(
            cfg.source,
            Some(Source::Normalized(Params {
                a0sq: 1.0,
                nu0: 1.0,
                mu0: 3.0,
                eta: 5.0
            }))
        );
    }

    #[test]
    fn mixed_sources_are_rejected() {
        let args = CommonArgs {
            kappa: Some(1.0),
            ..fig1_flags()
        };
        assert!(matches!(args.resolve(), Err(Failure::Invalid(_))));
    }

    #[test]
    fn partial_source_names_missing_flags() {
        let args = CommonArgs {
            a0sq: Some(1.0),
            eta: Some(5.0),
            ..Default::default()
        };
        match args.resolve() {
            Err(Failure::Invalid(msg)) => assert!(msg.contains("--nu0") && msg.contains("--mu0")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn nmax_values() {
        assert_eq!(nmax_policy("auto").unwrap(), NmaxPolicy::Auto);
        assert_eq!(nmax_policy("40").unwrap(), NmaxPolicy::Fixed(40));
        assert!(nmax_policy("0").is_err());
        assert!(nmax_policy("many").is_err());
    }

    #[test]
    fn sweep_field_must_match_source() {
        let s = Source::Normalized(Params {
            a0sq: 1.0,
            nu0: 1.0,
            mu0: 3.0,
            eta: 5.0,
        });
        assert!(s.with_field("r12", 2.0).is_err());
        match s.with_field("eta", 7.0).unwrap() {
            Source::Normalized(p) => assert_eq!(p.eta, 7.0),
            other => panic!("{other:?}"),
        }
    }
}
