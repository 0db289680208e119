//! The deviation function `d(n)`.
//!
//! `d(n)` measures how far the excited-state photon statistics drift from the
//! shifted ground-state statistics, `rho22(n) / rho11(n + 1) = 1 + d(n + 1)`.
//! It obeys a second-order backward recurrence
//!
//! ```text
//! d(n) = (2/eta) [ (mu0 + n)(1 + phi(n+1)) - nt(n+1) phi(n+1) (1 + phi(n+2)) ]
//! nt(n)  = n / (1 + d(n))
//! phi(n) = a0sq / (nu0 + n/2 + (n/2) / (1 + d(n)))
//! ```
//!
//! The map contracts errors when swept towards `n = 0`, so the table is found
//! by sweeping down from an arbitrary positive seed pair placed far enough
//! above the range of interest. [`solve`] certifies that distance by running
//! two very different seed pairs and growing the buffer until they agree.

use crate::error::{Error, Result};
use crate::params::NormalizedParams;
use crate::scalar::Real;

/// How the two values above the sweep start were chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SeedPolicy<T> {
    /// Large-`n` asymptotic values at `n_start + 1`, `n_start + 2`, each
    /// also run scaled by `scale` to certify seed independence.
    Asymptotic { n_start: usize, scale: T },
    /// Explicit seeds supplied by the caller.
    Explicit { n_start: usize, seeds: (T, T) },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveConfig<T> {
    /// Sup-norm agreement required between the two seed runs.
    pub tol: T,
    pub initial_buffer: usize,
    pub buffer_cap: usize,
    /// Ratio between the second and the first seed pair.
    pub seed_scale: T,
}

impl<T: Real> SolveConfig<T> {
    pub fn with_tol(tol: T) -> Self {
        Self {
            tol,
            initial_buffer: 20,
            buffer_cap: 1 << 14,
            seed_scale: T::lit(100.0),
        }
    }
}

/// Converged `d(n)` for `n = 0..=nmax`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviationTable<T> {
    pub params: NormalizedParams<T>,
    pub nmax: usize,
    pub buffer: usize,
    pub d: Vec<T>,
    pub seed_policy: SeedPolicy<T>,
    /// Largest relative recurrence residual over `0..=nmax - 2`.
    pub max_residual: T,
    /// Sup-norm distance between the two seed runs on `0..=nmax`.
    pub seed_disagreement: T,
    /// Empirical per-step contraction factor of the seed difference, where
    /// it could be measured above round-off.
    pub contraction: Option<T>,
}

#[inline]
fn half<T: Real>() -> T {
    T::lit(0.5)
}

/// `nu0 + n/2 + (n/2)/(1 + d)`, which equals `F11(n) nt(n)`.
#[inline]
fn phi_denominator<T: Real>(p: &NormalizedParams<T>, n: usize, d_n: T) -> T {
    let half_n = half::<T>() * T::from_usize_lossy(n);
    p.nu0 + half_n + half_n / (T::one() + d_n)
}

/// `phi(n) = a0sq / [F11(n) nt(n)]` through the simplified denominator.
pub fn phi<T: Real>(p: &NormalizedParams<T>, n: usize, d_n: T) -> Result<T> {
    if n == 0 {
        return Err(Error::Domain {
            index: 0,
            reason: "phi is defined for n >= 1".into(),
        });
    }
    if d_n <= -T::one() {
        return Err(Error::Domain {
            index: n,
            reason: format!("d(n) = {d_n} must exceed -1"),
        });
    }
    if p.a0sq == T::zero() {
        return Ok(T::zero());
    }
    let den = phi_denominator(p, n, d_n);
    if den <= T::zero() {
        return Err(Error::Domain {
            index: n,
            reason: format!("phi denominator {den} is not positive"),
        });
    }
    Ok(p.a0sq / den)
}

/// `phi(n) / phi(n + 1)`, finite even without pump.
pub fn phi_ratio<T: Real>(p: &NormalizedParams<T>, n: usize, d_n: T, d_next: T) -> T {
    phi_denominator(p, n + 1, d_next) / phi_denominator(p, n, d_n)
}

/// `nt(n) = n / (1 + d(n))`.
#[inline]
pub fn n_tilde<T: Real>(n: usize, d_n: T) -> T {
    T::from_usize_lossy(n) / (T::one() + d_n)
}

/// Upper bound on the output of one recurrence step.
///
/// Infinite at `n = 0` when `nu0 = -1/2`.
pub fn upper_bound<T: Real>(p: &NormalizedParams<T>, n: usize) -> T {
    let two = T::lit(2.0);
    let nf = T::from_usize_lossy(n);
    let den = two * p.nu0 + nf + T::one();
    if den <= T::zero() {
        return T::infinity();
    }
    two / p.eta * (p.mu0 + nf) * (T::one() + two * p.a0sq / den)
}

/// Large-`n` expansion without its `O(1/n)` remainder.
pub fn asymptotic<T: Real>(p: &NormalizedParams<T>, n: usize) -> T {
    let two = T::lit(2.0);
    let nf = T::from_usize_lossy(n);
    two / p.eta * (nf + p.mu0 + p.a0sq * two * nf / (nf + p.eta))
}

// Positivity of d(n) needs both the pump factor and the bound denominator
// to be positive; only d(0) can escape it.
fn positivity_required<T: Real>(p: &NormalizedParams<T>, n: usize) -> bool {
    let nf = T::from_usize_lossy(n);
    p.mu0 + nf > T::zero() && T::lit(2.0) * p.nu0 + nf + T::one() > T::zero()
}

// Raw step; callers check positivity.
fn step_raw<T: Real>(p: &NormalizedParams<T>, n: usize, d_next: T, d_next2: T) -> Result<T> {
    let phi1 = phi(p, n + 1, d_next)?;
    let phi2 = phi(p, n + 2, d_next2)?;
    let nt1 = n_tilde(n + 1, d_next);
    let nf = T::from_usize_lossy(n);
    let two = T::lit(2.0);
    Ok(two / p.eta * ((p.mu0 + nf) * (T::one() + phi1) - nt1 * phi1 * (T::one() + phi2)))
}

/// One backward step: `d(n)` from `d(n + 1)` and `d(n + 2)`.
///
/// Positive inputs give an output in `(0, upper_bound(n)]` whenever
/// `mu0 + n > 0` and `2 nu0 + n + 1 > 0`, with equality only without pump;
/// a violation is reported as a domain error.
pub fn recurrence_step<T: Real>(p: &NormalizedParams<T>, n: usize, d_next: T, d_next2: T) -> Result<T> {
    if !(d_next > T::zero() && d_next2 > T::zero()) {
        return Err(Error::Domain {
            index: n,
            reason: format!("recurrence inputs must be positive, got ({d_next}, {d_next2})"),
        });
    }
    let d = step_raw(p, n, d_next, d_next2)?;
    let ub = upper_bound(p, n);
    let needs_positive = positivity_required(p, n);
    if !d.is_finite() || (needs_positive && d <= T::zero()) || d > ub {
        return Err(Error::Domain {
            index: n,
            reason: format!("step produced d = {d} outside (0, {ub}]"),
        });
    }
    Ok(d)
}

/// Interval of `d(n)` reachable in one step from any positive pair below
/// the upper bounds at `n + 1`, `n + 2`.
///
/// The step increases with `d(n + 1)` and decreases with `d(n + 2)`, so the
/// interval endpoints come from the corners of the input box.
pub fn first_step_bracket<T: Real>(p: &NormalizedParams<T>, n: usize) -> Result<(T, T)> {
    let ub1 = upper_bound(p, n + 1);
    let ub2 = upper_bound(p, n + 2);
    let lo = step_raw(p, n, T::zero(), ub2)?.max(T::zero());
    let hi = step_raw(p, n, ub1, T::zero())?;
    Ok((lo, hi.min(upper_bound(p, n))))
}

/// Sweeps down from `n_start` with `d(n_start + 1), d(n_start + 2) = seeds`.
///
/// Returns `d(0..=n_start + 2)`, seeds included.
pub fn sweep<T: Real>(p: &NormalizedParams<T>, n_start: usize, seeds: (T, T)) -> Result<Vec<T>> {
    let mut d = vec![T::zero(); n_start + 3];
    d[n_start + 1] = seeds.0;
    d[n_start + 2] = seeds.1;
    for n in (0..=n_start).rev() {
        d[n] = recurrence_step(p, n, d[n + 1], d[n + 2])?;
    }
    Ok(d)
}

fn sup_distance<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (x, y)| acc.max((*x - *y).abs()))
}

fn contraction_estimate<T: Real>(a: &[T], b: &[T], n_start: usize) -> Option<T> {
    let floor = T::epsilon() * T::lit(1e3);
    let mut first: Option<(usize, T)> = None;
    let mut last: Option<(usize, T)> = None;
    // Skip the first step: it already clamps any seed into the bound.
    for n in (0..n_start).rev() {
        let scale = a[n].abs().max(T::one());
        let e = (a[n] - b[n]).abs() / scale;
        if e <= floor {
            break;
        }
        if first.is_none() {
            first = Some((n, e));
        } else {
            last = Some((n, e));
        }
    }
    let ((n0, e0), (n1, e1)) = (first?, last?);
    let steps = T::from_usize_lossy(n0 - n1);
    Some((e1 / e0).powf(T::one() / steps))
}

fn relative_residual<T: Real>(stored: T, recomputed: T) -> T {
    let scale = recomputed.abs().max(T::lit(1e-300).max(T::min_positive_value()));
    (stored - recomputed).abs() / scale
}

/// Solves `d(0..=nmax)` to sup-norm seed agreement `tol`.
pub fn solve<T: Real>(p: &NormalizedParams<T>, nmax: usize, tol: T) -> Result<DeviationTable<T>> {
    solve_with(p, nmax, &SolveConfig::with_tol(tol))
}

pub fn solve_with<T: Real>(p: &NormalizedParams<T>, nmax: usize, config: &SolveConfig<T>) -> Result<DeviationTable<T>> {
    crate::params::validate_normalized(p)?;
    if !(config.tol > T::zero() && config.tol <= T::lit(1e-6)) {
        return Err(Error::InvalidParameter {
            field: "tol",
            reason: format!("must lie in (0, 1e-6], got {}", config.tol),
        });
    }
    let mut buffer = config.initial_buffer.max(2);
    loop {
        let n_start = nmax + buffer;
        let seeds_a = (asymptotic(p, n_start + 1), asymptotic(p, n_start + 2));
        let seeds_b = (seeds_a.0 * config.seed_scale, seeds_a.1 * config.seed_scale);
        let run_a = sweep(p, n_start, seeds_a)?;
        let run_b = sweep(p, n_start, seeds_b)?;
        let disagreement = sup_distance(&run_a[..=nmax], &run_b[..=nmax]);
        if disagreement <= config.tol {
            let contraction = contraction_estimate(&run_a, &run_b, n_start);
            let d = run_a[..=nmax].to_vec();
            let mut table = DeviationTable {
                params: *p,
                nmax,
                buffer,
                d,
                seed_policy: SeedPolicy::Asymptotic {
                    n_start,
                    scale: config.seed_scale,
                },
                max_residual: T::zero(),
                seed_disagreement: disagreement,
                contraction,
            };
            table.max_residual = table.residuals().fold(T::zero(), |acc, r| acc.max(r));
            return Ok(table);
        }
        if buffer >= config.buffer_cap {
            return Err(Error::Convergence {
                buffer,
                cap: config.buffer_cap,
                disagreement: disagreement.to_f64_lossy(),
            });
        }
        buffer = (buffer * 2).min(config.buffer_cap);
    }
}

impl<T: Real> DeviationTable<T> {
    /// Table from a single explicit sweep, without seed certification.
    pub fn from_sweep(p: &NormalizedParams<T>, nmax: usize, n_start: usize, seeds: (T, T)) -> Result<Self> {
        if n_start < nmax {
            return Err(Error::IndexOutOfRange {
                index: nmax,
                lo: 0,
                hi: n_start,
            });
        }
        let run = sweep(p, n_start, seeds)?;
        let mut table = Self {
            params: *p,
            nmax,
            buffer: n_start - nmax,
            d: run[..=nmax].to_vec(),
            seed_policy: SeedPolicy::Explicit { n_start, seeds },
            max_residual: T::zero(),
            seed_disagreement: T::nan(),
            contraction: None,
        };
        table.max_residual = table.residuals().fold(T::zero(), |acc, r| acc.max(r));
        Ok(table)
    }

    #[inline]
    pub fn d(&self, n: usize) -> T {
        self.d[n]
    }

    pub fn n_tilde(&self, n: usize) -> T {
        n_tilde(n, self.d[n])
    }

    pub fn phi(&self, n: usize) -> Result<T> {
        phi(&self.params, n, self.d[n])
    }

    /// Relative mismatch between the stored `d(n)` and one recurrence step
    /// from the stored `d(n + 1)`, `d(n + 2)`.
    pub fn residual(&self, n: usize) -> Result<T> {
        if self.nmax < 2 || n > self.nmax - 2 {
            return Err(Error::IndexOutOfRange {
                index: n,
                lo: 0,
                hi: self.nmax.saturating_sub(2),
            });
        }
        let recomputed = step_raw(&self.params, n, self.d[n + 1], self.d[n + 2])?;
        Ok(relative_residual(self.d[n], recomputed))
    }

    fn residuals(&self) -> impl Iterator<Item = T> + '_ {
        (0..=self.nmax.saturating_sub(2))
            .filter(|_| self.nmax >= 2)
            .map(|n| self.residual(n).unwrap_or(T::infinity()))
    }

    /// First index violating `0 < d(n) < upper_bound(n)`, if any.
    ///
    /// `d(0)` is exempt from positivity when `mu0 <= 0` or `nu0 = -1/2`,
    /// where the bound is not positive or not finite.
    pub fn bound_violation(&self) -> Option<usize> {
        self.d.iter().enumerate().position(|(n, &d)| {
            let needs_positive = positivity_required(&self.params, n);
            (needs_positive && d <= T::zero()) || d >= upper_bound(&self.params, n)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn fig1() -> NormalizedParams<f64> {
        NormalizedParams {
            a0sq: 1.0,
            nu0: 1.0,
            mu0: 3.0,
            eta: 5.0,
        }
    }

    #[test]
    fn phi_examples() {
        let p = NormalizedParams {
            a0sq: 1.0,
            nu0: 0.0,
            mu0: 1.0,
            eta: 5.0,
        };
        assert_relative_eq!(phi(&p, 1, 0.0).unwrap(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(phi(&fig1(), 2, 1.0).unwrap(), 0.4, epsilon = 1e-15);
        let vacuum = NormalizedParams { a0sq: 0.0, ..fig1() };
        assert_eq!(phi(&vacuum, 7, 3.0).unwrap(), 0.0);
        assert!(phi(&fig1(), 0, 1.0).is_err());
    }

    #[test]
    fn phi_matches_deformation_product() {
        // phi = a0sq / (F11 nt) with F11 written out literally.
        let p = fig1();
        for n in 1..20 {
            let d = 0.3 * n as f64;
            let f11 = 0.5 + (0.5 + p.nu0 / n as f64) * (1.0 + d);
            let literal = p.a0sq / (f11 * n_tilde(n, d));
            assert_relative_eq!(phi(&p, n, d).unwrap(), literal, max_relative = 1e-14);
        }
    }

    #[test]
    fn upper_bound_examples() {
        assert_relative_eq!(upper_bound(&fig1(), 0), 2.0, epsilon = 1e-14);
        assert_relative_eq!(
            upper_bound(&fig1(), 40),
            0.4 * 43.0 * (1.0 + 2.0 / 43.0),
            epsilon = 1e-12
        );
        assert!((upper_bound(&fig1(), 40) - 18.0).abs() < 1e-9);
        let no_pump = NormalizedParams {
            a0sq: 0.0,
            nu0: 0.3,
            mu0: 2.0,
            eta: 4.0,
        };
        assert_relative_eq!(upper_bound(&no_pump, 6), 0.5 * 8.0, epsilon = 1e-14);
        let edge = NormalizedParams::<f64> {
            a0sq: 1.0,
            nu0: -0.5,
            mu0: 0.5,
            eta: 1.0,
        };
        assert!(upper_bound(&edge, 0).is_infinite());
    }

    #[test]
    fn asymptotic_examples() {
        assert_relative_eq!(asymptotic(&fig1(), 50), 0.4 * (53.0 + 100.0 / 55.0), epsilon = 1e-12);
        let no_pump = NormalizedParams {
            a0sq: 0.0,
            nu0: 1.0,
            mu0: 3.0,
            eta: 5.0,
        };
        assert_relative_eq!(asymptotic(&no_pump, 10), 5.2, epsilon = 1e-14);
        // eta >> n: adiabatic form (2/eta)(n + mu0)
        let strong = NormalizedParams { eta: 1e9, ..fig1() };
        let adiabatic = 2.0 / strong.eta * (10.0 + strong.mu0);
        assert_relative_eq!(asymptotic(&strong, 10), adiabatic, max_relative = 1e-7);
    }

    #[test]
    fn zero_pump_step_is_closed_form() {
        let p = NormalizedParams {
            a0sq: 0.0,
            nu0: 0.5,
            mu0: 2.0,
            eta: 3.0,
        };
        for n in 0..10 {
            let d = recurrence_step(&p, n, 1.7, 0.2).unwrap();
            assert_eq!(d, 2.0 / 3.0 * (2.0 + n as f64));
        }
        let table = solve(&p, 30, 1e-12).unwrap();
        for n in 0..=30 {
            assert_relative_eq!(table.d(n), 2.0 / 3.0 * (2.0 + n as f64), max_relative = 1e-15);
        }
        for n in 0..=28 {
            assert!(table.residual(n).unwrap() < 1e-15);
        }
    }

    #[test]
    fn step_rejects_nonpositive_inputs() {
        assert!(recurrence_step(&fig1(), 3, 0.0, 1.0).is_err());
        assert!(recurrence_step(&fig1(), 3, 1.0, -2.0).is_err());
    }

    #[test]
    fn first_step_from_bound_seeds_lands_in_bracket() {
        let p = fig1();
        let d40 = recurrence_step(&p, 40, upper_bound(&p, 41), upper_bound(&p, 42)).unwrap();
        let (lo, hi) = first_step_bracket(&p, 40).unwrap();
        assert!(lo < d40 && d40 < hi, "{lo} < {d40} < {hi}");
        assert!(hi <= upper_bound(&p, 40));
    }

    #[test]
    fn solved_table_respects_bound_and_bracket() {
        let p = fig1();
        let table = solve(&p, 60, 1e-12).unwrap();
        assert_eq!(table.bound_violation(), None);
        for n in 0..=60 {
            let (lo, hi) = first_step_bracket(&p, n).unwrap();
            assert!(lo <= table.d(n) && table.d(n) <= hi);
        }
    }

    #[test]
    fn residual_detects_perturbation() {
        let mut table = solve(&fig1(), 40, 1e-12).unwrap();
        assert!(table.max_residual <= 1e-10);
        let n = 10;
        let original = table.d[n];
        table.d[n] += 1.0;
        assert_relative_eq!(table.residual(n).unwrap(), 1.0 / original, max_relative = 1e-9);
        assert!(matches!(table.residual(39), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn fixed_point_of_converged_table() {
        let table = solve(&fig1(), 40, 1e-12).unwrap();
        for n in 0..=38 {
            let again = recurrence_step(&table.params, n, table.d(n + 1), table.d(n + 2)).unwrap();
            assert!((again - table.d(n)).abs() <= 1e-12 * table.d(n));
        }
    }

    #[test]
    fn tol_outside_range_is_rejected() {
        assert!(solve(&fig1(), 10, 1e-3).is_err());
        assert!(solve(&fig1(), 10, 0.0).is_err());
    }

    #[test]
    fn explicit_seed_table() {
        let p = fig1();
        let t = DeviationTable::from_sweep(&p, 40, 60, (1.0, 1.0)).unwrap();
        let s = solve(&p, 40, 1e-12).unwrap();
        for n in 0..=40 {
            assert!((t.d(n) - s.d(n)).abs() < 1e-10);
        }
        assert!(DeviationTable::from_sweep(&p, 40, 30, (1.0, 1.0)).is_err());
    }

    #[test]
    fn negative_mu0_only_affects_d0() {
        let p = NormalizedParams {
            a0sq: 0.1,
            nu0: -0.5,
            mu0: -0.4,
            eta: 50.0,
        };
        let table = solve(&p, 30, 1e-12).unwrap();
        assert!(table.d(0) < 0.0);
        assert!(table.d[1..].iter().all(|&d| d > 0.0));
        assert_eq!(table.bound_violation(), None);
    }

    #[test]
    fn half_integer_nu0_allows_negative_d0() {
        let p = NormalizedParams {
            a0sq: 1.0,
            nu0: -0.5,
            mu0: 0.5,
            eta: 50.0,
        };
        let table = solve(&p, 60, 1e-12).unwrap();
        assert!(table.d(0) < 0.0);
        assert!(table.d[1..].iter().all(|&d| d > 0.0));
        assert_eq!(table.bound_violation(), None);
    }

    #[test]
    fn single_precision_solve() {
        let p = NormalizedParams::<f32> {
            a0sq: 1.0,
            nu0: 1.0,
            mu0: 3.0,
            eta: 50.0,
        };
        let table = solve(&p, 20, 1e-6).unwrap();
        let reference = solve(&p.cast::<f64>(), 20, 1e-12).unwrap();
        for n in 0..=20 {
            assert!((f64::from(table.d(n)) - reference.d(n)).abs() < 1e-5 * reference.d(n).max(1.0));
        }
    }
}
