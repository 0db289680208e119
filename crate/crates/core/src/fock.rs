//! Diagonal photon-number distributions.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Rho11,
    Rho22,
    Rhof,
    RhoSc,
    Custom,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Label::Rho11 => "rho11",
            Label::Rho22 => "rho22",
            Label::Rhof => "rhof",
            Label::RhoSc => "rho_sc",
            Label::Custom => "custom",
        };
        f.write_str(s)
    }
}

/// `p(n)` for `n = 0..=nmax` plus a bound on the mass beyond `nmax`.
#[derive(Debug, Clone, PartialEq)]
pub struct FockDistribution<T> {
    pub p: Vec<T>,
    /// `ln p(n)`, kept finite where `p(n)` underflows.
    pub ln_p: Vec<T>,
    pub nmax: usize,
    pub tail_bound: T,
    pub label: Label,
}

/// `ln(e^a + e^b)` that tolerates `-inf` operands.
pub fn log_add_exp<T: Real>(a: T, b: T) -> T {
    let hi = a.max(b);
    if hi == T::neg_infinity() {
        return hi;
    }
    let lo = a.min(b);
    hi + (lo - hi).exp().ln_1p()
}

/// `ln sum_i e^{x_i}` with a single max shift.
pub fn log_sum_exp<T: Real>(xs: &[T]) -> T {
    let hi = xs.iter().copied().fold(T::neg_infinity(), T::max);
    if hi == T::neg_infinity() {
        return hi;
    }
    let s = xs.iter().fold(T::zero(), |acc, &x| acc + (x - hi).exp());
    hi + s.ln()
}

impl<T: Real> FockDistribution<T> {
    /// Normalizes raw probabilities.
    pub fn from_weights(weights: Vec<T>, tail_bound: T, label: Label) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidParameter {
                field: "p",
                reason: "empty distribution".into(),
            });
        }
        if let Some(n) = weights.iter().position(|w| !(*w >= T::zero()) || !w.is_finite()) {
            return Err(Error::Domain {
                index: n,
                reason: format!("weight {} is not a finite non-negative number", weights[n]),
            });
        }
        let total = weights.iter().fold(T::zero(), |a, &b| a + b);
        if total <= T::zero() {
            return Err(Error::InvalidParameter {
                field: "p",
                reason: "total weight is zero".into(),
            });
        }
        let nmax = weights.len() - 1;
        let p: Vec<T> = weights.into_iter().map(|w| w / total).collect();
        Ok(Self {
            ln_p: p.iter().map(|x| x.ln()).collect(),
            p,
            nmax,
            tail_bound,
            label,
        })
    }

    /// Normalizes `exp(log_weights)` with one max shift.
    pub fn from_log_weights(log_weights: &[T], tail_bound: T, label: Label) -> Result<Self> {
        let norm = log_sum_exp(log_weights);
        if !norm.is_finite() {
            return Err(Error::InvalidParameter {
                field: "log_weights",
                reason: format!("log normalization is {norm}"),
            });
        }
        let ln_p = log_weights.iter().map(|&l| l - norm).collect::<Vec<_>>();
        Ok(Self {
            nmax: ln_p.len() - 1,
            p: ln_p.iter().map(|&l| l.exp()).collect(),
            ln_p,
            tail_bound,
            label,
        })
    }

    pub fn vacuum() -> Self {
        Self::fock(0)
    }

    /// `|n><n|`.
    pub fn fock(n: usize) -> Self {
        let mut p = vec![T::zero(); n + 1];
        p[n] = T::one();
        Self {
            ln_p: p.iter().map(|x| x.ln()).collect(),
            p,
            nmax: n,
            tail_bound: T::zero(),
            label: Label::Custom,
        }
    }

    /// Phase-averaged coherent state, truncated where the tail falls below
    /// `tail` of the total.
    pub fn poisson(mean: T, tail: T) -> Self {
        if mean <= T::zero() {
            return Self::vacuum();
        }
        let ln_mean = mean.ln();
        let mut logs = vec![T::zero()];
        let mut n = 0usize;
        loop {
            n += 1;
            let next = logs[n - 1] + ln_mean - T::from_usize_lossy(n).ln();
            logs.push(next);
            let ratio = mean / T::from_usize_lossy(n + 1);
            if ratio < T::lit(0.5) {
                // Successive ratios keep shrinking, so the rest is geometric-bounded.
                let rel = (next - log_sum_exp(&logs)).exp() * ratio / (T::one() - ratio);
                if rel < tail || rel == T::zero() {
                    return Self::from_log_weights(&logs, rel, Label::Custom).expect("finite logs");
                }
            }
        }
    }

    /// Geometric distribution `p(n) ∝ x^n`, 0 < x < 1.
    pub fn thermal(x: T, tail: T) -> Self {
        let mut logs = vec![T::zero()];
        let lx = x.ln();
        loop {
            let bound = (logs[logs.len() - 1] + lx).exp() / (T::one() - x);
            if bound < tail || bound == T::zero() {
                break;
            }
            let last = logs[logs.len() - 1];
            logs.push(last + lx);
        }
        let tb = (logs[logs.len() - 1] + lx).exp();
        Self::from_log_weights(&logs, tb, Label::Custom).expect("finite logs")
    }

    /// Zero-padded access.
    #[inline]
    pub fn get(&self, n: usize) -> T {
        self.p.get(n).copied().unwrap_or_else(T::zero)
    }

    pub fn mass(&self) -> T {
        self.p.iter().fold(T::zero(), |a, &b| a + b)
    }

    /// Last index with a positive entry.
    pub fn support_end(&self) -> usize {
        self.p.iter().rposition(|&x| x > T::zero()).unwrap_or(0)
    }

    pub fn normalized(&self) -> Self {
        let m = self.mass();
        let ln_m = m.ln();
        Self {
            p: self.p.iter().map(|&x| x / m).collect(),
            ln_p: self.ln_p.iter().map(|&l| l - ln_m).collect(),
            nmax: self.nmax,
            tail_bound: self.tail_bound / m,
            label: self.label,
        }
    }

    pub fn with_label(mut self, label: Label) -> Self {
        self.label = label;
        self
    }

    /// Checks non-negativity, unit mass to `1e-12` and `tail_bound <= 1e-12`.
    pub fn validate(&self) -> Result<()> {
        if let Some(n) = self.p.iter().position(|&x| !(x >= T::zero())) {
            return Err(Error::Domain {
                index: n,
                reason: format!("negative probability {}", self.p[n]),
            });
        }
        let mass = self.mass();
        let tol = T::lit(1e-12).max(T::epsilon() * T::lit(64.0));
        if (mass - T::one()).abs() > tol {
            return Err(Error::InvalidParameter {
                field: "p",
                reason: format!("total probability {mass} differs from 1"),
            });
        }
        if !(self.tail_bound <= tol) {
            return Err(Error::Truncation(format!(
                "{} truncated at nmax = {} leaves tail bound {:e}",
                self.label,
                self.nmax,
                self.tail_bound.to_f64_lossy()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_weights_survive_underflow() {
        let d = FockDistribution::<f64>::from_log_weights(&[0.0, -800.0], 0.0, Label::Custom).unwrap();
        assert_eq!(d.p[1], 0.0);
        assert_eq!(d.ln_p[1], -800.0);
        assert_eq!(d.normalized().ln_p[1], -800.0);
    }

    #[test]
    fn zero_tail_runs_to_underflow() {
        let p = FockDistribution::<f64>::poisson(2.0, 0.0);
        assert!(p.p.len() > 100 && p.p.len() < 400);
        let t = FockDistribution::<f64>::thermal(0.5, 0.0);
        assert!(t.p.len() > 1000 && t.p.len() < 1200);
    }

    #[test]
    fn log_helpers() {
        assert_eq!(log_add_exp(f64::NEG_INFINITY, f64::NEG_INFINITY), f64::NEG_INFINITY);
        assert!((log_add_exp(0.0f64, 0.0) - 2f64.ln()).abs() < 1e-15);
        assert!((log_sum_exp(&[-1000.0f64, -1000.0]) - (-1000.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn poisson_is_normalized_with_small_tail() {
        let d = FockDistribution::<f64>::poisson(3.0, 1e-15);
        d.validate().unwrap();
        assert!(d.tail_bound < 1e-15);
        let mean: f64 = d.p.iter().enumerate().map(|(n, p)| n as f64 * p).sum();
        assert!((mean - 3.0).abs() < 1e-12);
    }

    #[test]
    fn from_weights_rejects_negative() {
        assert!(FockDistribution::from_weights(vec![0.5f64, -0.1], 0.0, Label::Custom).is_err());
        assert!(FockDistribution::from_weights(vec![0.0f64, 0.0], 0.0, Label::Custom).is_err());
    }

    #[test]
    fn truncation_is_reported() {
        let mut d = FockDistribution::<f64>::fock(2);
        d.tail_bound = 1e-3;
        assert!(matches!(d.validate(), Err(Error::Truncation(_))));
    }
}
