//! Stationary photon statistics as phase-averaged nonlinear coherent states.
//!
//! The ground-state block `rho11` is the diagonal of the eigenstate of the
//! deformed annihilation operator `A_F = sqrt(F(a a^+)) a` with
//!
//! ```text
//! F11(n) = 1/2 + (1/2 + nu0/n)(1 + d(n))
//! ```
//!
//! and eigenvalue `a0`. Its Fock weights are
//! `|<n|a0;F>|^2 ∝ a0sq^n / (n! prod_{m=1..n} F(m))`. The excited block and
//! the field follow from `rho22(n) = (1 + d(n+1)) rho11(n+1)`; both are again
//! phase-averaged NCSs with the deformations
//! `F22(n) = F11(n) phi(n)/phi(n+1)` and
//! `Ff(n) = F11(n)(1 + phi(n))/(1 + phi(n+1))`.
//!
//! Everything is carried in log space; the weights decay like `1/(n!)^2`.

use serde::{Deserialize, Serialize};

use crate::deviation::{self, DeviationTable};
use crate::error::{Error, Result};
use crate::fock::{log_add_exp, log_sum_exp, FockDistribution, Label};
use crate::observables;
use crate::params::{validate_normalized, NormalizedParams};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeformationKind {
    Ground,
    Excited,
    Field,
}

/// `F(n)` for `n = 1..=nmax`; `f[0]` holds `F(1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeformationTable<T> {
    pub kind: DeformationKind,
    pub f: Vec<T>,
    pub params: NormalizedParams<T>,
}

impl<T: Real> DeformationTable<T> {
    pub fn nmax(&self) -> usize {
        self.f.len()
    }

    /// `F(n)` for `n >= 1`.
    #[inline]
    pub fn get(&self, n: usize) -> T {
        assert!(n >= 1, "deformation functions start at n = 1");
        self.f[n - 1]
    }
}

fn f11_value<T: Real>(p: &NormalizedParams<T>, n: usize, d_n: T) -> T {
    let half = T::lit(0.5);
    half + (half + p.nu0 / T::from_usize_lossy(n)) * (T::one() + d_n)
}

fn deformation_from_d<T: Real>(
    kind: DeformationKind,
    p: &NormalizedParams<T>,
    d: &[T],
    nmax: usize,
) -> Result<DeformationTable<T>> {
    let needed = match kind {
        DeformationKind::Ground => nmax,
        DeformationKind::Excited | DeformationKind::Field => nmax + 1,
    };
    if d.len() <= needed {
        return Err(Error::InsufficientLength {
            needed,
            have: d.len().saturating_sub(1),
        });
    }
    let mut f = Vec::with_capacity(nmax);
    for n in 1..=nmax {
        let f11 = f11_value(p, n, d[n]);
        let value = match kind {
            DeformationKind::Ground => f11,
            DeformationKind::Excited => f11 * deviation::phi_ratio(p, n, d[n], d[n + 1]),
            DeformationKind::Field => {
                let phi_n = deviation::phi(p, n, d[n])?;
                let phi_next = deviation::phi(p, n + 1, d[n + 1])?;
                f11 * (T::one() + phi_n) / (T::one() + phi_next)
            }
        };
        if !(value > T::zero()) {
            return Err(Error::Domain {
                index: n,
                reason: format!("{kind:?} deformation {value} is not positive"),
            });
        }
        f.push(value);
    }
    Ok(DeformationTable { kind, f, params: *p })
}

/// Deformation of the given kind for `n = 1..=nmax`.
pub fn deformation<T: Real>(
    kind: DeformationKind,
    dev: &DeviationTable<T>,
    nmax: usize,
) -> Result<DeformationTable<T>> {
    deformation_from_d(kind, &dev.params, &dev.d, nmax)
}

/// `L(n) = n ln a0sq - ln n! - sum_{m<=n} ln F(m)` for `n = 0..=nmax`.
///
/// Without pump every `n >= 1` entry is `-inf`.
pub fn ncs_log_weights<T: Real>(a0sq: T, f: &DeformationTable<T>, nmax: usize) -> Result<Vec<T>> {
    if nmax > f.nmax() {
        return Err(Error::InsufficientLength {
            needed: nmax,
            have: f.nmax(),
        });
    }
    let ln_a = a0sq.ln();
    let mut logs = Vec::with_capacity(nmax + 1);
    logs.push(T::zero());
    for n in 1..=nmax {
        let prev = logs[n - 1];
        logs.push(prev + ln_a - T::from_usize_lossy(n).ln() - f.get(n).ln());
    }
    Ok(logs)
}

/// How far the photon-number distributions are carried.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NmaxPolicy {
    /// Extend until the one-step ratio of `rho11` is below `1e-4` and the
    /// certified tail is below `1e-15` of the total mass.
    Auto,
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions<T> {
    pub tol: T,
    pub nmax: NmaxPolicy,
    /// Lower limit on `nmax` under [`NmaxPolicy::Auto`].
    pub min_nmax: usize,
}

impl<T: Real> Default for SolveOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(1e-12).max(T::epsilon() * T::lit(64.0)).min(T::lit(1e-6)),
            nmax: NmaxPolicy::Auto,
            min_nmax: 4,
        }
    }
}

impl<T: Real> SolveOptions<T> {
    pub fn fixed(nmax: usize) -> Self {
        Self {
            nmax: NmaxPolicy::Fixed(nmax),
            ..Self::default()
        }
    }

    pub fn with_min_nmax(mut self, n: usize) -> Self {
        self.min_nmax = n;
        self
    }
}

const RATIO_STOP: f64 = 1e-4;
const TAIL_STOP: f64 = 1e-15;
const AUTO_CAP: usize = 1 << 20;

/// Maximum of the stationarity residuals, see [`observables::balance_residuals`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BalanceDiagnostics<T> {
    pub eq7: T,
    pub eq8: T,
    pub eq9: T,
    pub eq11: T,
}

impl<T: Real> BalanceDiagnostics<T> {
    pub fn max(&self) -> T {
        self.eq7.max(self.eq8).max(self.eq9).max(self.eq11)
    }
}

/// Joint stationary distributions, `sum(rho11 + rho22) = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyStateSolution<T> {
    pub params: NormalizedParams<T>,
    /// Deviation function up to `nmax + 3`.
    pub deviation: DeviationTable<T>,
    /// Deformations for `n = 1..=nmax + 2`.
    pub f11: DeformationTable<T>,
    pub f22: DeformationTable<T>,
    pub ff: DeformationTable<T>,
    pub rho11: FockDistribution<T>,
    pub rho22: FockDistribution<T>,
    pub rhof: FockDistribution<T>,
    /// Natural logs of the jointly normalized blocks for `n = 0..=nmax + 2`.
    pub log11: Vec<T>,
    pub log22: Vec<T>,
    pub logf: Vec<T>,
    pub ground_weight: T,
    pub nmax: usize,
    pub diagnostics: BalanceDiagnostics<T>,
}

impl<T: Real> SteadyStateSolution<T> {
    /// `u(n) = rho_f(n) / sqrt(eta)`; the coherence block in the field basis.
    pub fn u(&self, n: usize) -> T {
        self.rhof.get(n) / self.params.eta.sqrt()
    }

    /// `ln rho_f(n+1) - ln rho_f(n)`, finite far below the `f64` range.
    pub fn log_ratio_f(&self, n: usize) -> T {
        self.logf[n + 1] - self.logf[n]
    }

    /// Last index covered by the log tables.
    pub fn log_extent(&self) -> usize {
        self.logf.len() - 1
    }
}

struct Blocks<T> {
    log11: Vec<T>,
    log22: Vec<T>,
    logf: Vec<T>,
    rho11: FockDistribution<T>,
    rho22: FockDistribution<T>,
    rhof: FockDistribution<T>,
    ground_weight: T,
    nmax: usize,
}

// One-step ratio rho11(n+1)/rho11(n) = a0sq / ((n+1) F11(n+1)).
fn ground_ratio<T: Real>(p: &NormalizedParams<T>, f11: &DeformationTable<T>, n: usize) -> T {
    p.a0sq / (T::from_usize_lossy(n + 1) * f11.get(n + 1))
}

// Relative bound on the mass beyond `nmax`, given the largest one-step
// ratio `r` of rho11 above it.
fn tail_bound<T: Real>(p: &NormalizedParams<T>, r: T, l11_nmax: T, ln_total: T, nmax: usize) -> T {
    if p.a0sq == T::zero() {
        return T::zero();
    }
    if r >= T::one() {
        return T::infinity();
    }
    let two = T::lit(2.0);
    let phi_den = two * p.nu0 + T::from_usize_lossy(nmax + 1);
    let phi_sup = if phi_den > T::zero() {
        two * p.a0sq / phi_den
    } else {
        T::infinity()
    };
    (l11_nmax - ln_total).exp() * r / (T::one() - r) * (T::one() + phi_sup)
}

fn sup_ratio_above<T: Real>(p: &NormalizedParams<T>, f11: &DeformationTable<T>, nmax: usize) -> T {
    (nmax..f11.nmax())
        .map(|m| ground_ratio(p, f11, m))
        .fold(T::zero(), T::max)
}

fn auto_nmax<T: Real>(p: &NormalizedParams<T>, f11: &DeformationTable<T>, l11: &[T], min_nmax: usize) -> Option<usize> {
    let top = f11.nmax() - 1;
    let stop = T::lit(RATIO_STOP);
    // Ratios must stay below the threshold from the candidate to the end.
    let mut first_small = None;
    for n in (0..=top).rev() {
        if ground_ratio(p, f11, n) < stop {
            first_small = Some(n);
        } else {
            break;
        }
    }
    let start = first_small?.max(min_nmax);
    if start + 3 > top {
        return None;
    }
    // Ratios are all below the threshold from `start` on, so the suffix
    // maximum is monotone and cheap to carry.
    let mut sup = vec![T::zero(); top + 2];
    for m in (start..=top).rev() {
        sup[m] = sup[m + 1].max(ground_ratio(p, f11, m));
    }
    let mut ln_total = log_sum_exp(&l11[..start]);
    for n in start..top - 2 {
        ln_total = log_add_exp(ln_total, l11[n]);
        if tail_bound(p, sup[n], l11[n], ln_total, n) < T::lit(TAIL_STOP) {
            return Some(n);
        }
    }
    None
}

// Log blocks from d(0..) and F11(1..); needs d and F11 up to nmax + 3.
fn assemble<T: Real>(p: &NormalizedParams<T>, d: &[T], f11: &DeformationTable<T>, nmax: usize) -> Result<Blocks<T>> {
    let l11_full = ncs_log_weights(p.a0sq, f11, nmax + 3)?;
    let n_log = nmax + 2;
    let log22_raw: Vec<T> = (0..=n_log)
        .map(|n| (T::one() + d[n + 1]).ln() + l11_full[n + 1])
        .collect();
    let log11_raw = l11_full[..=n_log].to_vec();

    let mut joint = Vec::with_capacity(2 * (nmax + 1));
    joint.extend_from_slice(&log11_raw[..=nmax]);
    joint.extend_from_slice(&log22_raw[..=nmax]);
    let ln_total = log_sum_exp(&joint);
    if !ln_total.is_finite() {
        return Err(Error::Truncation(format!("log normalization is {ln_total}")));
    }

    let log11: Vec<T> = log11_raw.iter().map(|&l| l - ln_total).collect();
    let log22: Vec<T> = log22_raw.iter().map(|&l| l - ln_total).collect();
    let logf: Vec<T> = log11.iter().zip(&log22).map(|(&a, &b)| log_add_exp(a, b)).collect();

    let tb = tail_bound(p, sup_ratio_above(p, f11, nmax), log11[nmax], T::zero(), nmax);
    let block = |logs: &[T], label| FockDistribution {
        p: logs[..=nmax].iter().map(|&l| l.exp()).collect(),
        ln_p: logs[..=nmax].to_vec(),
        nmax,
        tail_bound: tb,
        label,
    };
    let rho11 = block(&log11, Label::Rho11);
    let rho22 = block(&log22, Label::Rho22);
    let rhof = block(&logf, Label::Rhof);
    let ground_weight = rho11.mass();
    Ok(Blocks {
        log11,
        log22,
        logf,
        rho11,
        rho22,
        rhof,
        ground_weight,
        nmax,
    })
}

// Resolves nmax under the policy given a way to produce d(0..=n).
fn resolve_nmax<T, D>(p: &NormalizedParams<T>, opts: &SolveOptions<T>, mut d_upto: D) -> Result<(usize, Vec<T>)>
where
    T: Real,
    D: FnMut(usize) -> Result<Vec<T>>,
{
    match opts.nmax {
        NmaxPolicy::Fixed(nmax) => {
            // Extra room above nmax so the tail bound sees the decay beyond it.
            let extent = 2 * nmax + 8;
            Ok((nmax, d_upto(extent)?))
        }
        NmaxPolicy::Auto => {
            let mut n_try = 64usize.max(2 * opts.min_nmax + 8);
            loop {
                let d = d_upto(n_try + 4)?;
                let f11 = deformation_from_d(DeformationKind::Ground, p, &d, n_try + 4)?;
                let l11 = ncs_log_weights(p.a0sq, &f11, n_try + 4)?;
                let found = if p.a0sq == T::zero() {
                    Some(opts.min_nmax)
                } else {
                    auto_nmax(p, &f11, &l11, opts.min_nmax)
                };
                if let Some(nmax) = found {
                    return Ok((nmax, d));
                }
                if n_try >= AUTO_CAP {
                    return Err(Error::Truncation(format!(
                        "no truncation index below {AUTO_CAP} meets the ratio/tail criteria"
                    )));
                }
                n_try *= 2;
            }
        }
    }
}

/// Solves the stationary state for `p`.
pub fn build_solution<T: Real>(p: &NormalizedParams<T>, opts: &SolveOptions<T>) -> Result<SteadyStateSolution<T>> {
    validate_normalized(p)?;
    let mut last_table = None;
    let (nmax, _) = resolve_nmax(p, opts, |n| {
        let t = deviation::solve(p, n, opts.tol)?;
        let d = t.d.clone();
        last_table = Some(t);
        Ok(d)
    })?;
    let mut dev = last_table.expect("resolve_nmax solved at least once");
    dev.d.truncate(nmax + 4);
    dev.nmax = nmax + 3;

    let f11 = deformation(DeformationKind::Ground, &dev, nmax + 3)?;
    let f22 = deformation(DeformationKind::Excited, &dev, nmax + 2)?;
    let ff = deformation(DeformationKind::Field, &dev, nmax + 2)?;
    let blocks = assemble(p, &dev.d, &f11, nmax)?;
    let mut f11_trim = f11;
    f11_trim.f.truncate(nmax + 2);

    let mut sol = SteadyStateSolution {
        params: *p,
        deviation: dev,
        f11: f11_trim,
        f22,
        ff,
        rho11: blocks.rho11,
        rho22: blocks.rho22,
        rhof: blocks.rhof,
        log11: blocks.log11,
        log22: blocks.log22,
        logf: blocks.logf,
        ground_weight: blocks.ground_weight,
        nmax: blocks.nmax,
        diagnostics: BalanceDiagnostics {
            eq7: T::zero(),
            eq8: T::zero(),
            eq9: T::zero(),
            eq11: T::zero(),
        },
    };
    sol.diagnostics = observables::balance_residuals(&sol).max();
    Ok(sol)
}

/// Stationary blocks with `d ≡ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct StrongCoupling<T> {
    pub rho11: FockDistribution<T>,
    pub rho22: FockDistribution<T>,
    pub rhof: FockDistribution<T>,
    pub ground_weight: T,
}

pub fn strong_coupling_blocks<T: Real>(p: &NormalizedParams<T>, opts: &SolveOptions<T>) -> Result<StrongCoupling<T>> {
    validate_normalized(p)?;
    let (nmax, d) = resolve_nmax(p, opts, |n| Ok(vec![T::zero(); n + 1]))?;
    let f11 = deformation_from_d(DeformationKind::Ground, p, &d, nmax + 3)?;
    let b = assemble(p, &d, &f11, nmax)?;
    Ok(StrongCoupling {
        rho11: b.rho11,
        rho22: b.rho22,
        rhof: b.rhof,
        ground_weight: b.ground_weight,
    })
}

/// Field distribution of the strong-coupling approximation, normalized.
pub fn strong_coupling_solution<T: Real>(
    p: &NormalizedParams<T>,
    opts: &SolveOptions<T>,
) -> Result<FockDistribution<T>> {
    Ok(strong_coupling_blocks(p, opts)?.rhof.with_label(Label::RhoSc))
}
