//! Scalar and per-`n` observables of stationary distributions: trace
//! distance, moments, stationarity residuals and the intensity-dependent
//! transition probabilities `w_n`.
//!
//! Superoperators act on diagonal sequences as `(J x)(n) = (n+1) x(n+1)` and
//! `(N x)(n) = n x(n)`.

use crate::error::{Error, Result};
use crate::fock::{FockDistribution, Label};
use crate::ncs_state::{BalanceDiagnostics, SteadyStateSolution};
use crate::params::NormalizedParams;
use crate::scalar::Real;

/// Half the l1 distance; the trace distance of commuting diagonal states.
pub fn trace_distance_diagonal<T: Real>(a: &FockDistribution<T>, b: &FockDistribution<T>) -> T {
    let len = a.p.len().max(b.p.len());
    let sum = (0..len).fold(T::zero(), |acc, n| acc + (a.get(n) - b.get(n)).abs());
    T::lit(0.5) * sum
}

pub fn mean_photon<T: Real>(d: &FockDistribution<T>) -> T {
    d.p.iter()
        .enumerate()
        .fold(T::zero(), |acc, (n, &p)| acc + T::from_usize_lossy(n) * p)
}

/// `sum n(n-1) p(n) / mean^2`.
pub fn g2<T: Real>(d: &FockDistribution<T>) -> Result<T> {
    let mean = mean_photon(d);
    if mean <= T::zero() {
        return Err(Error::Domain {
            index: 0,
            reason: "g2 is undefined for zero mean photon number".into(),
        });
    }
    let second = d.p.iter().enumerate().fold(T::zero(), |acc, (n, &p)| {
        let nf = T::from_usize_lossy(n);
        acc + nf * (nf - T::one()) * p
    });
    Ok(second / (mean * mean))
}

/// Elementwise relative residuals of the four stationarity relations.
#[derive(Debug, Clone, PartialEq)]
pub struct BalanceResiduals<T> {
    /// Excitation balance `(2 nu0 + N + 1) rho22 = (2 a0sq - J) rho11`.
    pub eq7: Vec<T>,
    /// Photon balance `(N+1) rho22 = J{rho11 + (2/eta)(mu0 + N - J) rho_f}`.
    pub eq8: Vec<T>,
    /// Definition of the deviation `d(N) rho11 = (2/eta)(mu0 + N - J) rho_f`.
    pub eq9: Vec<T>,
    /// Eigen relation `(n+1) F11(n+1) rho11(n+1) = a0sq rho11(n)`.
    pub eq11: Vec<T>,
}

impl<T: Real> BalanceResiduals<T> {
    pub fn max(&self) -> BalanceDiagnostics<T> {
        let m = |v: &[T]| v.iter().copied().fold(T::zero(), T::max);
        BalanceDiagnostics {
            eq7: m(&self.eq7),
            eq8: m(&self.eq8),
            eq9: m(&self.eq9),
            eq11: m(&self.eq11),
        }
    }
}

const RESIDUAL_FLOOR: f64 = 1e-30;

fn rel<T: Real>(lhs: T, rhs: T) -> T {
    let scale = lhs.abs().max(rhs.abs()).max(T::lit(RESIDUAL_FLOOR));
    (lhs - rhs).abs() / scale
}

/// Residuals from log-space blocks on `n = 0..=nmax`.
///
/// `d` must reach `nmax + 1` and the logs `nmax + 2`. Each index is
/// evaluated relative to the largest log weight it touches, so entries far
/// below the floating-point range are still checked.
pub fn balance_residuals_from_logs<T: Real>(
    p: &NormalizedParams<T>,
    d: &[T],
    log11: &[T],
    log22: &[T],
    logf: &[T],
    nmax: usize,
) -> BalanceResiduals<T> {
    let two = T::lit(2.0);
    let half = T::lit(0.5);
    let mut out = BalanceResiduals {
        eq7: Vec::with_capacity(nmax + 1),
        eq8: Vec::with_capacity(nmax + 1),
        eq9: Vec::with_capacity(nmax + 1),
        eq11: Vec::with_capacity(nmax + 1),
    };
    for n in 0..=nmax {
        let shift = [log11[n], log11[n + 1], log22[n], logf[n], logf[n + 1], logf[n + 2]]
            .into_iter()
            .fold(T::neg_infinity(), T::max);
        if shift == T::neg_infinity() {
            for v in [&mut out.eq7, &mut out.eq8, &mut out.eq9, &mut out.eq11] {
                v.push(T::zero());
            }
            continue;
        }
        let e = |l: T| (l - shift).exp();
        let (r11, r11n, r22) = (e(log11[n]), e(log11[n + 1]), e(log22[n]));
        let (rf, rfn, rfnn) = (e(logf[n]), e(logf[n + 1]), e(logf[n + 2]));
        let nf = T::from_usize_lossy(n);
        let n1 = nf + T::one();
        let n2 = n1 + T::one();

        out.eq7
            .push(rel((two * p.nu0 + n1) * r22, two * p.a0sq * r11 - n1 * r11n));
        out.eq8.push(rel(
            n1 * r22,
            n1 * (r11n + two / p.eta * ((p.mu0 + n1) * rfn - n2 * rfnn)),
        ));
        out.eq9
            .push(rel(d[n] * r11, two / p.eta * ((p.mu0 + nf) * rf - n1 * rfn)));
        let f11_next = half + (half + p.nu0 / n1) * (T::one() + d[n + 1]);
        out.eq11.push(rel(n1 * f11_next * r11n, p.a0sq * r11));
    }
    out
}

/// Residuals of a solved state over `0..=nmax`.
pub fn balance_residuals<T: Real>(sol: &SteadyStateSolution<T>) -> BalanceResiduals<T> {
    balance_residuals_from_logs(
        &sol.params,
        &sol.deviation.d,
        &sol.log11,
        &sol.log22,
        &sol.logf,
        sol.nmax,
    )
}

/// Residuals of arbitrary blocks (e.g. an approximation) against the exact
/// relations with deviation `d`.
pub fn balance_residuals_of_blocks<T: Real>(
    p: &NormalizedParams<T>,
    d: &[T],
    rho11: &FockDistribution<T>,
    rho22: &FockDistribution<T>,
    nmax: usize,
) -> BalanceResiduals<T> {
    let ln = |x: T| x.ln();
    let log11: Vec<T> = (0..=nmax + 2).map(|n| ln(rho11.get(n))).collect();
    let log22: Vec<T> = (0..=nmax + 2).map(|n| ln(rho22.get(n))).collect();
    let logf: Vec<T> = (0..=nmax + 2).map(|n| ln(rho11.get(n) + rho22.get(n))).collect();
    balance_residuals_from_logs(p, d, &log11, &log22, &logf, nmax)
}

/// Effective transition probabilities in units of `g^2 / kappa`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionProfile<T> {
    pub w: Vec<T>,
    /// `(n + 1) w_n`.
    pub total: Vec<T>,
    /// Relative residual of `(n+1) w_n {rho22(n) - rho11(n+1)} = 2 kappa (n+1) rho_f(n+1)`.
    pub eq23_residual: Vec<T>,
    pub params: NormalizedParams<T>,
    pub source: Label,
}

/// `w_n` for `n = 0..=nmax` of the solution.
///
/// Uses ratios of log weights, so `n` is not limited by underflow of
/// `rho_f`. Indices where `rho_f(n+1)` vanishes identically end the profile.
pub fn effective_w<T: Real>(sol: &SteadyStateSolution<T>) -> Result<TransitionProfile<T>> {
    let p = &sol.params;
    let two = T::lit(2.0);
    let mut w = Vec::new();
    let mut total = Vec::new();
    let mut eq23 = Vec::new();
    for n in 0..=sol.nmax {
        if sol.logf[n + 1] == T::neg_infinity() {
            break;
        }
        let n1 = T::from_usize_lossy(n + 1);
        let n2 = n1 + T::one();
        let ratio = n2 / n1 * (sol.logf[n + 2] - sol.logf[n + 1]).exp();
        let bracket = p.mu0 + n1 * (T::one() - ratio);
        if !(bracket > T::zero()) {
            return Err(Error::Domain {
                index: n,
                reason: format!("transition-probability bracket {bracket} is not positive"),
            });
        }
        let wn = T::one() / bracket;
        let shift = sol.logf[n + 1];
        let lhs = p.eta * wn * ((sol.log22[n] - shift).exp() - (sol.log11[n + 1] - shift).exp());
        eq23.push(rel(lhs, two));
        w.push(wn);
        total.push(n1 * wn);
    }
    Ok(TransitionProfile {
        w,
        total,
        eq23_residual: eq23,
        params: *p,
        source: sol.rhof.label,
    })
}

/// Large-`n` expansion of `w_n` through `1/n^2`, units `g^2 / kappa`.
pub fn w_asymptotic<T: Real>(p: &NormalizedParams<T>, n: usize) -> T {
    let nf = T::from_usize_lossy(n);
    T::one() / nf - (T::one() + p.mu0 - p.a0sq * p.eta / (nf + p.eta)) / (nf * nf)
}

/// Steady-state mismatch of the constant-coefficient photon balance
/// `w (<n>+1)(p2 - p1) = 2 kappa (<n>+1)(p1 + p2)`.
pub fn conventional_balance<T: Real>(w_const: T, mean_n: T, p1: T, p2: T, kappa: T) -> T {
    let n1 = mean_n + T::one();
    w_const * n1 * (p2 - p1) - T::lit(2.0) * kappa * n1 * (p1 + p2)
}

/// Start of the excess tail of `approx` over `exact` and its mass.
///
/// The crossing index is the smallest `n` beyond which `approx(k) > exact(k)`
/// for every `k` up to the end of the longer distribution.
pub fn excess_tail<T: Real>(exact: &FockDistribution<T>, approx: &FockDistribution<T>) -> (usize, T) {
    let len = exact.p.len().max(approx.p.len());
    let end = approx.support_end();
    let mut crossing = end + 1;
    for n in (0..=end.min(len - 1)).rev() {
        if approx.get(n) > exact.get(n) {
            crossing = n;
        } else {
            break;
        }
    }
    let mass = (crossing..approx.p.len()).fold(T::zero(), |acc, n| acc + approx.p[n]);
    (crossing, mass)
}

/// Mass of `d` on `from..`.
pub fn tail_mass<T: Real>(d: &FockDistribution<T>, from: usize) -> T {
    d.p.iter().skip(from).fold(T::zero(), |acc, &x| acc + x)
}
