//! s-parametrized quasiprobabilities of Fock-diagonal states and the
//! nonclassicality order `s0`.
//!
//! For a phase-symmetric state `P(alpha; s)` depends on `r = |alpha|` only
//! and is the mixture `sum_n p(n) k_n(r; s)` of the Fock kernels
//!
//! ```text
//! k_n(r; s) = 2/(pi(1-s)) c^n exp(-2r^2/(1-s)) L_n(4r^2/(1-s^2)),  c = (s+1)/(s-1).
//! ```
//!
//! `m_n = c^n L_n(x)` is run through the Laguerre recurrence directly, which
//! stays finite at `s = -1` where `c -> 0` and `x -> inf`. Every evaluation
//! carries a rounding-error estimate; near `s = 1` the alternating series
//! cancels heavily and only values whose sign survives the estimate are
//! used as witnesses of negativity.

use std::cmp::Ordering;
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{log_add_exp, log_sum_exp, FockDistribution};
use crate::scalar::Real;

/// Real number stored as sign and log-magnitude; survives underflow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedLog<T> {
    /// -1, 0 or 1.
    pub sign: i8,
    pub ln_abs: T,
}

impl<T: Real> SignedLog<T> {
    pub fn zero() -> Self {
        Self {
            sign: 0,
            ln_abs: T::neg_infinity(),
        }
    }

    pub fn value(&self) -> T {
        match self.sign {
            0 => T::zero(),
            s => T::lit(f64::from(s)) * self.ln_abs.exp(),
        }
    }

    fn cmp(&self, other: &Self) -> Ordering {
        match self.sign.cmp(&other.sign) {
            Ordering::Equal => match self.sign {
                0 => Ordering::Equal,
                1 => self.ln_abs.partial_cmp(&other.ln_abs).unwrap_or(Ordering::Equal),
                _ => other.ln_abs.partial_cmp(&self.ln_abs).unwrap_or(Ordering::Equal),
            },
            o => o,
        }
    }
}

/// A quasiprobability value with an estimate of its rounding error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuasiValue<T> {
    pub value: SignedLog<T>,
    /// Log of the absolute error estimate.
    pub ln_err: T,
}

impl<T: Real> QuasiValue<T> {
    pub fn get(&self) -> T {
        self.value.value()
    }

    /// `value + error`: the true value is certainly below this.
    pub fn upper_bound(&self) -> SignedLog<T> {
        let (v, e) = (self.value, self.ln_err);
        if e == T::neg_infinity() {
            return v;
        }
        match v.sign {
            0 => SignedLog { sign: 1, ln_abs: e },
            1 => {
                let hi = v.ln_abs.max(e);
                let lo = v.ln_abs.min(e);
                SignedLog {
                    sign: 1,
                    ln_abs: hi + (lo - hi).exp().ln_1p(),
                }
            }
            _ => {
                let diff = e - v.ln_abs;
                if diff < T::zero() {
                    SignedLog {
                        sign: -1,
                        ln_abs: v.ln_abs + (-diff.exp()).ln_1p(),
                    }
                } else if diff > T::zero() {
                    SignedLog {
                        sign: 1,
                        ln_abs: e + (-(-diff).exp()).ln_1p(),
                    }
                } else {
                    SignedLog::zero()
                }
            }
        }
    }
}

fn rescale_threshold<T: Real>() -> T {
    if T::max_value() > T::lit(1e300) {
        T::lit(1e250)
    } else {
        T::lit(1e30)
    }
}

const ERROR_FACTOR: f64 = 8.0;

/// Orders past the end of the weights used to bound the omitted terms.
const TAIL_LOOKAHEAD: usize = 8;

/// Weights split as `mant * unit^k` so the series needs no per-term
/// logarithms; `unit^5` is the rescaling threshold.
#[derive(Debug, Clone)]
pub struct ScaledWeights<T> {
    mant: Vec<T>,
    k: Vec<i32>,
    ln_w: Vec<T>,
    /// `sup_{k >= n} ln(w_{k+1} / w_k)`.
    ln_ratio_sup: Vec<T>,
    ln_unit: T,
}

impl<T: Real> ScaledWeights<T> {
    pub fn new(ln_weights: &[T]) -> Self {
        let ln_unit = rescale_threshold::<T>().ln() / T::lit(5.0);
        // Trailing zeros add nothing.
        let len = ln_weights
            .iter()
            .rposition(|&l| l > T::neg_infinity())
            .map_or(0, |i| i + 1);
        let mut mant = Vec::with_capacity(len);
        let mut k = Vec::with_capacity(len);
        for &l in &ln_weights[..len] {
            if l > T::neg_infinity() {
                let kn = (l / ln_unit).ceil();
                mant.push((l - kn * ln_unit).exp());
                k.push(kn.to_f64_lossy() as i32);
            } else {
                mant.push(T::zero());
                k.push(0);
            }
        }
        let ln_w = ln_weights[..len].to_vec();
        let mut ln_ratio_sup = vec![T::neg_infinity(); len];
        for n in (0..len.saturating_sub(1)).rev() {
            let step = if ln_w[n] == T::neg_infinity() {
                T::infinity()
            } else {
                ln_w[n + 1] - ln_w[n]
            };
            ln_ratio_sup[n] = step.max(ln_ratio_sup[n + 1]);
        }
        Self {
            mant,
            k,
            ln_w,
            ln_ratio_sup,
            ln_unit,
        }
    }

    /// `sum_n w_n k_n(r; s)` with its error estimate.
    ///
    /// `tail` bounds the probability beyond the last weight; it enters the
    /// estimate multiplied by the largest `|c^n L_n|` just past the end,
    /// since for `s > 0` the kernels grow like `|c|^n` and truncation can
    /// dominate.
    pub fn series(&self, tail: T, r: T, s: T) -> QuasiValue<T> {
        assert!(s < T::one(), "s-ordered kernel requires s < 1, got {s}");
        let one = T::one();
        let two = T::lit(2.0);
        let one_m = one - s;
        let c = (s + one) / (s - one);
        let y = -T::lit(4.0) * r * r / (one_m * one_m);
        let ln_pref = (two / (T::PI() * one_m)).ln() - two * r * r / one_m;
        let unit = self.ln_unit.exp();
        let inv_unit = one / unit;
        let big = unit.powi(5);

        // True m is m * unit^km; the sums are in units of unit^kr.
        let mut m_prev = T::zero();
        let mut m = one;
        let mut km = 0i32;
        let mut acc = T::zero();
        let mut acc_abs = T::zero();
        let mut kr: Option<i32> = None;
        let mut cached = (0i32, one);
        let mut ln_m_tail = T::neg_infinity();
        let len = self.mant.len();
        let extra = if tail > T::zero() { TAIL_LOOKAHEAD } else { 0 };
        for n in 0..len + extra {
            let nf = T::from_usize_lossy(n);
            if n < len {
                let term = self.mant[n] * m;
                if term != T::zero() {
                    let kt = self.k[n] + km;
                    let mut kref = kr.unwrap_or(kt);
                    if kt > kref {
                        let f = unit.powi(kref - kt);
                        acc = acc * f;
                        acc_abs = acc_abs * f;
                        kref = kt;
                    }
                    let j = kt - kref;
                    if cached.0 != j {
                        cached = (j, unit.powi(j));
                    }
                    let t = term * cached.1;
                    acc = acc + t;
                    // Weights carry a relative error of about |ln w| eps.
                    acc_abs = acc_abs + (nf + one - self.ln_w[n]) * t.abs();
                    while acc_abs > unit {
                        acc = acc * inv_unit;
                        acc_abs = acc_abs * inv_unit;
                        kref += 1;
                    }
                    while acc_abs > T::zero() && acc_abs < inv_unit {
                        acc = acc * unit;
                        acc_abs = acc_abs * unit;
                        kref -= 1;
                    }
                    if kr != Some(kref) {
                        kr = Some(kref);
                        cached = (i32::MIN, one);
                    }
                }
            } else if m != T::zero() {
                ln_m_tail = ln_m_tail.max(m.abs().ln() + T::lit(f64::from(km)) * self.ln_unit);
            }
            let next = (((two * nf + one) * c - y) * m - nf * c * c * m_prev) / (nf + one);
            m_prev = m;
            m = next;
            if m.abs() > big || m_prev.abs() > big {
                m = m / big;
                m_prev = m_prev / big;
                km += 5;
            }
            if n % EXIT_STRIDE == EXIT_STRIDE - 1 && n + 1 < len {
                if let Some(k) = kr {
                    if self.remainder_negligible(n, m, m_prev, km, c, y, tail, len, acc_abs, k) {
                        break;
                    }
                }
            }
        }
        let ln_ref = kr.map_or(T::neg_infinity(), |k| T::lit(f64::from(k)) * self.ln_unit);
        let eps = T::epsilon() * T::lit(ERROR_FACTOR);
        let sign = if acc > T::zero() {
            1
        } else if acc < T::zero() {
            -1
        } else {
            0
        };
        let ln_err = log_add_exp((eps * acc_abs).ln() + ln_ref, tail.ln() + ln_m_tail) + ln_pref;
        QuasiValue {
            value: SignedLog {
                sign,
                ln_abs: acc.abs().ln() + ln_ref + ln_pref,
            },
            ln_err,
        }
    }
}

impl<T: Real> ScaledWeights<T> {
    // With `G = 3|c| + |y|/(n+1)`, `M_k = max(|m_k|, |c m_{k-1}|)` grows by
    // at most `G` per order, so once `rho G < 1/2` for the weight ratio
    // bound `rho` the remaining terms sum to less than `2 w_n rho M_{n+1}`.
    #[allow(clippy::too_many_arguments)]
    fn remainder_negligible(
        &self,
        n: usize,
        m: T,
        m_prev: T,
        km: i32,
        c: T,
        y: T,
        tail: T,
        len: usize,
        acc_abs: T,
        kr: i32,
    ) -> bool {
        let g = T::lit(3.0) * c.abs() + y.abs() / T::from_usize_lossy(n + 1);
        let ln_g = g.ln();
        let rho = self.ln_ratio_sup[n];
        if !(rho + ln_g < -T::lit(2.0).ln()) {
            return false;
        }
        let big_m = m.abs().max(c.abs() * m_prev.abs());
        if big_m == T::zero() {
            return false;
        }
        let ln_m = big_m.ln() + T::lit(f64::from(km)) * self.ln_unit;
        let mut ln_rem = self.ln_w[n] + rho + ln_m + T::lit(2.0).ln();
        if tail > T::zero() {
            let orders = T::from_usize_lossy(len + TAIL_LOOKAHEAD - n - 1);
            ln_rem = ln_rem.max(tail.ln() + ln_m + orders * ln_g);
        }
        let eps = T::epsilon() * T::lit(ERROR_FACTOR);
        ln_rem < (eps * acc_abs).ln() + T::lit(f64::from(kr)) * self.ln_unit - T::lit(EXIT_MARGIN)
    }
}

/// Orders between checks for an early exit.
const EXIT_STRIDE: usize = 32;

/// An exit needs the remainder this many e-folds below the error estimate.
const EXIT_MARGIN: f64 = 40.0;

/// `sum_n exp(ln_weights[n]) k_n(r; s)` with its error estimate.
pub fn kernel_series<T: Real>(ln_weights: &[T], tail: T, r: T, s: T) -> QuasiValue<T> {
    ScaledWeights::new(ln_weights).series(tail, r, s)
}

/// `k_n(r; s)`.
pub fn fock_kernel<T: Real>(n: usize, r: T, s: T) -> T {
    let mut w = vec![T::neg_infinity(); n + 1];
    w[n] = T::zero();
    kernel_series(&w, T::zero(), r, s).get()
}

/// `P(alpha; s)` at `|alpha| = r`.
pub fn quasi_prob<T: Real>(d: &FockDistribution<T>, r: T, s: T) -> T {
    kernel_series(&d.ln_p, d.tail_bound, r, s).get()
}

pub fn quasi_prob_with_error<T: Real>(d: &FockDistribution<T>, r: T, s: T) -> QuasiValue<T> {
    kernel_series(&d.ln_p, d.tail_bound, r, s)
}

/// `Q(r) = e^{-r^2} sum_n p(n) r^{2n} / n! / pi`, summed in log space.
pub fn q_closed_form<T: Real>(d: &FockDistribution<T>, r: T) -> T {
    let ln_r2 = (r * r).ln();
    let mut ln_fact = T::zero();
    let mut logs = Vec::with_capacity(d.p.len());
    for (n, &p) in d.p.iter().enumerate() {
        if n > 0 {
            ln_fact = ln_fact + T::from_usize_lossy(n).ln();
        }
        let pow = if n == 0 {
            T::zero()
        } else {
            T::from_usize_lossy(n) * ln_r2
        };
        logs.push(p.ln() + pow - ln_fact);
    }
    (log_sum_exp(&logs) - r * r).exp() / T::PI()
}

/// Uniform radii `0..=r_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid<T> {
    pub r_max: T,
    pub points: usize,
}

impl<T: Real> RadialGrid<T> {
    pub fn new(r_max: T, points: usize) -> Self {
        assert!(points >= 2, "radial grid needs at least two points");
        Self { r_max, points }
    }

    /// `r_max = sqrt(n_peak) + 6` with `n_peak` the mode plus three
    /// standard deviations; 2048 points.
    pub fn for_distribution(d: &FockDistribution<T>) -> Self {
        let mode =
            d.p.iter()
                .enumerate()
                .fold(
                    (0, T::neg_infinity()),
                    |best, (n, &p)| if p > best.1 { (n, p) } else { best },
                )
                .0;
        let mean =
            d.p.iter()
                .enumerate()
                .fold(T::zero(), |a, (n, &p)| a + T::from_usize_lossy(n) * p);
        let var = d.p.iter().enumerate().fold(T::zero(), |a, (n, &p)| {
            let dn = T::from_usize_lossy(n) - mean;
            a + dn * dn * p
        });
        let n_peak = T::from_usize_lossy(mode) + T::lit(3.0) * var.sqrt();
        Self::new(n_peak.sqrt() + T::lit(6.0), 2048)
    }

    pub fn radius(&self, i: usize) -> T {
        self.r_max * T::from_usize_lossy(i) / T::from_usize_lossy(self.points - 1)
    }

    pub fn radii(&self) -> impl Iterator<Item = T> + '_ {
        (0..self.points).map(|i| self.radius(i))
    }
}

/// Result of the radial minimization at one `s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialMin<T> {
    /// Computed minimum of `P(r; s)`.
    pub value: T,
    /// Certified upper bound of the true value at `r`.
    pub upper: SignedLog<T>,
    pub r: T,
}

const GOLDEN_ITERS: usize = 60;

/// Minimizes the certified upper bound of `P(r; s)` over the grid and
/// refines around the best grid point by golden-section search.
pub fn min_over_radius<T: Real>(d: &FockDistribution<T>, s: T, grid: &RadialGrid<T>) -> RadialMin<T> {
    let w = ScaledWeights::new(&d.ln_p);
    let eval = |r: T| w.series(d.tail_bound, r, s);
    let mut best_i = 0;
    let mut best = eval(grid.radius(0));
    for i in 1..grid.points {
        let v = eval(grid.radius(i));
        if v.upper_bound().cmp(&best.upper_bound()) == Ordering::Less {
            best = v;
            best_i = i;
        }
    }
    let mut a = grid.radius(best_i.saturating_sub(1));
    let mut b = grid.radius((best_i + 1).min(grid.points - 1));
    let mut r_best = grid.radius(best_i);
    let inv_phi = T::lit(0.5) * (T::lit(5.0).sqrt() - T::one());
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = eval(x1);
    let mut f2 = eval(x2);
    for _ in 0..GOLDEN_ITERS {
        if f1.upper_bound().cmp(&f2.upper_bound()) == Ordering::Less {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = eval(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = eval(x2);
        }
    }
    for (x, f) in [(x1, f1), (x2, f2)] {
        if f.upper_bound().cmp(&best.upper_bound()) == Ordering::Less {
            best = f;
            r_best = x;
        }
    }
    RadialMin {
        value: best.get(),
        upper: best.upper_bound(),
        r: r_best,
    }
}

/// Largest `s` probed; the `s -> 1` limit is singular.
pub const S_CAP: f64 = 0.999;

const S_LADDER: [f64; 8] = [S_CAP, 0.99, 0.95, 0.9, 0.8, 0.6, 0.3, 0.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonclassicalityReport<T> {
    /// Smallest `s` at which a certified non-positive value was found;
    /// `1` when none exists up to [`S_CAP`].
    pub s0: T,
    pub r_min: T,
    /// `(s, certified upper bound of min_r P(r; s))` in probing order.
    pub s_trace: Vec<(T, T)>,
    pub grid: RadialGrid<T>,
    pub tolerance: T,
}

pub fn s0_search<T: Real>(d: &FockDistribution<T>, tol_s: T) -> NonclassicalityReport<T> {
    s0_search_on(d, tol_s, &RadialGrid::for_distribution(d))
}

pub fn s0_search_on<T: Real>(d: &FockDistribution<T>, tol_s: T, grid: &RadialGrid<T>) -> NonclassicalityReport<T> {
    let mut trace = Vec::new();
    let mut probe = |s: T| {
        let m = min_over_radius(d, s, grid);
        trace.push((s, m.upper.value()));
        (m.upper.sign <= 0, m.r)
    };
    let report = |s0, r_min, s_trace| NonclassicalityReport {
        s0,
        r_min,
        s_trace,
        grid: *grid,
        tolerance: tol_s,
    };

    let mut lo = -T::one();
    let (neg, r) = probe(lo);
    if neg {
        return report(lo, r, trace);
    }
    // Negativity persists as s grows but certification fails near 1, so
    // walk down to the first certified witness.
    let mut found = None;
    let mut r_top = T::zero();
    for (k, &s) in S_LADDER.iter().enumerate() {
        let (neg, r) = probe(T::lit(s));
        if k == 0 {
            r_top = r;
        }
        if neg {
            found = Some((T::lit(s), r));
            break;
        }
    }
    let Some((mut hi, mut r_hi)) = found else {
        return report(T::one(), r_top, trace);
    };
    while hi - lo > tol_s {
        let mid = T::lit(0.5) * (lo + hi);
        let (neg, r) = probe(mid);
        if neg {
            hi = mid;
            r_hi = r;
        } else {
            lo = mid;
        }
    }
    report(hi, r_hi, trace)
}

fn gauss_legendre_panels(a: f64, b: f64, panels: usize, order: usize) -> Vec<(f64, f64)> {
    let rule = GaussLegendre::new(NonZeroUsize::new(order).expect("positive order"));
    let h = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * order);
    for k in 0..panels {
        let lo = a + h * k as f64;
        for (&x, &w) in rule.nodes().zip(rule.weights()) {
            out.push((lo + 0.5 * h * (x + 1.0), 0.5 * h * w));
        }
    }
    out
}

/// `integral_0^inf k_n(r; s) 2 pi r dr`, which is 1 for every `n`.
pub fn kernel_normalization<T: Real>(n: usize, s: T) -> T {
    let width = ((T::one() - s) * T::lit(0.5)).max(T::lit(0.5)).sqrt();
    let r_max = (T::from_usize_lossy(n) + T::one()).sqrt() + T::lit(10.0) * width;
    let nodes = gauss_legendre_panels(0.0, r_max.to_f64_lossy(), 64, 20);
    nodes.iter().fold(T::zero(), |acc, &(r, w)| {
        let r = T::lit(r);
        acc + T::lit(w) * fock_kernel(n, r, s) * T::lit(2.0) * T::PI() * r
    })
}

struct ConvolutionRule {
    radial: Vec<(f64, f64)>,
    angles: Vec<(f64, f64)>,
}

impl ConvolutionRule {
    // Exponential weight in t = 2 rho^2 / delta, truncated at t = 40.
    fn new(panels: usize, angles: usize) -> Self {
        let radial = gauss_legendre_panels(0.0, 40.0, panels, 16);
        // Trapezoid on the half circle; the integrand is even in the angle.
        let h = std::f64::consts::PI / angles as f64;
        let angles = (0..=angles)
            .map(|k| {
                let w = if k == 0 || k == angles { 0.5 * h } else { h };
                (h * k as f64, w)
            })
            .collect();
        Self { radial, angles }
    }

    fn apply<T: Real>(&self, d: &FockDistribution<T>, r: T, s_hi: T, delta: T) -> T {
        let mut total = T::zero();
        for &(t, wt) in &self.radial {
            let rho = (delta * T::lit(t) * T::lit(0.5)).sqrt();
            let mut ring = T::zero();
            for &(theta, wa) in &self.angles {
                let dist2 = r * r + rho * rho - T::lit(2.0) * r * rho * T::lit(theta.cos());
                let dist = dist2.max(T::zero()).sqrt();
                ring = ring + T::lit(wa) * quasi_prob(d, dist, s_hi);
            }
            total = total + T::lit(wt * (-t).exp()) * ring;
        }
        total / T::PI()
    }
}

/// Sup-norm deviation on the grid between `P(.; s_lo)` and the Gaussian
/// smoothing of `P(.; s_hi)` by `delta = s_hi - s_lo`:
///
/// ```text
/// P(alpha; s_lo) = 2/(pi delta) int P(beta; s_hi) exp(-2|alpha - beta|^2/delta) d^2 beta.
/// ```
///
/// Fails if the quadrature at double resolution disagrees by more than
/// `1e-9` relative to the largest value.
pub fn convolution_check<T: Real>(d: &FockDistribution<T>, s_hi: T, s_lo: T, grid: &RadialGrid<T>) -> Result<T> {
    if !(s_lo >= -T::one() && s_lo < s_hi && s_hi < T::one()) {
        return Err(Error::InvalidParameter {
            field: "s",
            reason: format!("need -1 <= s_lo < s_hi < 1, got s_lo = {s_lo}, s_hi = {s_hi}"),
        });
    }
    let delta = s_hi - s_lo;
    let coarse = ConvolutionRule::new(8, 48);
    let fine = ConvolutionRule::new(16, 96);
    let mut worst = T::zero();
    let mut scale = T::zero();
    let mut quad = T::zero();
    for r in grid.radii() {
        let a = coarse.apply(d, r, s_hi, delta);
        let b = fine.apply(d, r, s_hi, delta);
        let direct = quasi_prob(d, r, s_lo);
        quad = quad.max((a - b).abs());
        scale = scale.max(direct.abs());
        worst = worst.max((b - direct).abs());
    }
    if quad > T::lit(1e-9) * scale.max(T::min_positive_value()) {
        return Err(Error::Quadrature(format!(
            "convolution quadrature unresolved: refinement changes the result by {:e}",
            quad.to_f64_lossy()
        )));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::Label;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn kernel_examples() {
        assert_relative_eq!(fock_kernel(0, 0.0, -1.0), 1.0 / PI, epsilon = 1e-15);
        assert_relative_eq!(fock_kernel(1, 0.0, 0.0), -2.0 / PI, epsilon = 1e-15);
        for s in [-0.7, 0.0, 0.5, 0.9] {
            for r in [0.0, 0.4, 1.3] {
                let g = 2.0 / (PI * (1.0 - s)) * (-2.0 * r * r / (1.0 - s)).exp();
                assert_relative_eq!(fock_kernel(0, r, s), g, max_relative = 1e-14);
            }
        }
    }

    #[test]
    fn wigner_function_of_fock_states() {
        // W_n(r) = (2/pi)(-1)^n e^{-2r^2} L_n(4r^2)
        let r = 0.8f64;
        let x = 4.0 * r * r;
        let laguerre = [1.0, 1.0 - x, 0.5 * (x * x - 4.0 * x + 2.0)];
        for (n, l) in laguerre.iter().enumerate() {
            let expected = 2.0 / PI * (-1f64).powi(n as i32) * (-2.0 * r * r).exp() * l;
            assert_relative_eq!(fock_kernel(n, r, 0.0), expected, max_relative = 1e-13);
        }
    }

    #[test]
    fn q_function_matches_closed_form() {
        let d = FockDistribution::<f64>::poisson(4.0, 1e-16);
        for r in [0.0, 0.5, 2.0, 3.7, 6.0] {
            assert_relative_eq!(quasi_prob(&d, r, -1.0), q_closed_form(&d, r), max_relative = 1e-10);
        }
        let vac = FockDistribution::<f64>::vacuum();
        assert_relative_eq!(quasi_prob(&vac, 1.5, -1.0), (-2.25f64).exp() / PI, max_relative = 1e-14);
    }

    #[test]
    fn origin_alternating_sum() {
        let d = FockDistribution::from_weights(vec![0.5, 0.3, 0.2], 0.0, Label::Custom).unwrap();
        assert_relative_eq!(quasi_prob(&d, 0.0, 0.0), 2.0 / PI * (0.5 - 0.3 + 0.2), epsilon = 1e-15);
    }

    #[test]
    fn rescaling_keeps_large_orders_finite() {
        let mut w = vec![0.0; 400];
        w[399] = 1.0;
        let d = FockDistribution::from_weights(w, 0.0, Label::Custom).unwrap();
        let v = quasi_prob_with_error(&d, 20.0f64, -1.0);
        assert!(v.value.ln_abs.is_finite());
        assert_relative_eq!(v.get(), q_closed_form(&d, 20.0), max_relative = 1e-9);
    }

    #[test]
    fn trailing_zeros_do_not_change_the_witness() {
        let d = FockDistribution::<f64>::poisson(1.0, 1e-30);
        let mut p = d.p.clone();
        p.resize(20_000, 0.0);
        let padded = FockDistribution::from_weights(p, d.tail_bound, Label::Custom).unwrap();
        for r in [0.5, 4.0, 8.0] {
            let (a, b) = (
                quasi_prob_with_error(&d, r, 0.9),
                quasi_prob_with_error(&padded, r, 0.9),
            );
            assert_eq!(a.value, b.value);
        }
        assert_eq!(s0_search(&padded, 1e-3).s0, s0_search(&d, 1e-3).s0);
    }

    #[test]
    fn kernel_is_normalized() {
        for s in [-1.0, -0.3, 0.0, 0.3] {
            for n in [0, 1, 5, 17, 30] {
                assert!((kernel_normalization(n, s) - 1.0f64).abs() < 1e-6, "n={n} s={s}");
            }
        }
    }

    #[test]
    fn radial_minimum_examples() {
        let vac = FockDistribution::<f64>::vacuum();
        let grid = RadialGrid::for_distribution(&vac);
        let m = min_over_radius(&vac, 0.0, &grid);
        assert!(m.value > 0.0);
        assert!(m.r > 5.0);

        let one = FockDistribution::<f64>::fock(1);
        let grid = RadialGrid::for_distribution(&one);
        let m = min_over_radius(&one, 0.0, &grid);
        assert_relative_eq!(m.value, -2.0 / PI, epsilon = 1e-12);
        assert!(m.r < 1e-6);
        assert!(min_over_radius(&one, -0.99, &grid).value < 0.0);
    }

    #[test]
    fn s0_of_reference_states() {
        let one = FockDistribution::<f64>::fock(1);
        assert_eq!(s0_search(&one, 1e-3).s0, -1.0);
        let coherent = FockDistribution::<f64>::poisson(3.0, 1e-16);
        let rep = s0_search(&coherent, 1e-3);
        assert_eq!(rep.s0, 1.0);
        assert!(rep.s_trace.iter().all(|&(_, v)| v >= 0.0));
    }

    #[test]
    fn s0_bisection_is_consistent() {
        let d = FockDistribution::from_weights(vec![0.2f64, 0.8], 0.0, Label::Custom).unwrap();
        let rep = s0_search(&d, 1e-3);
        assert!(rep.s0 > -1.0 && rep.s0 < 1.0);
        for &(s, v) in &rep.s_trace {
            if s < rep.s0 - rep.tolerance {
                assert!(v > 0.0);
            }
            if s >= rep.s0 {
                assert!(v <= 0.0);
            }
        }
        // P(0; s) = 2/(pi(1-s)) (0.2 + 0.8 c) vanishes at s = -0.6.
        assert!((rep.s0 + 0.6).abs() <= 2e-3, "s0 = {}", rep.s0);
    }

    #[test]
    fn convolution_examples() {
        let grid = RadialGrid::new(4.0, 17);
        let vac = FockDistribution::<f64>::vacuum();
        assert!(convolution_check(&vac, 0.0, -1.0, &grid).unwrap() <= 1e-8);
        let one = FockDistribution::<f64>::fock(1);
        assert!(convolution_check(&one, 0.0, -1.0, &grid).unwrap() <= 1e-6);
        assert!(convolution_check(&one, -1.0, 0.0, &grid).is_err());
    }

    #[test]
    fn f32_kernel() {
        assert!((fock_kernel(1, 0.0f32, 0.0) + 2.0 / std::f32::consts::PI).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn q_function_is_non_negative(
            w in prop::collection::vec(0.0..1.0f64, 1..25).prop_filter("mass", |v| v.iter().sum::<f64>() > 1e-3),
            r in 0.0..7.0f64,
        ) {
            let d = FockDistribution::from_weights(w, 0.0, Label::Custom).unwrap();
            let q = quasi_prob(&d, r, -1.0);
            prop_assert!(q >= 0.0);
            let closed = q_closed_form(&d, r);
            prop_assert!((q - closed).abs() <= 1e-10 * closed.max(1e-300) + 1e-300);
        }
    }
}
