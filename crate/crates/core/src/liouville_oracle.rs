//! Brute-force stationary state of the full master equation in a truncated
//! Fock space, used to certify the recurrence solution.
//!
//! The master equation (interaction picture, `hbar = 1`)
//!
//! ```text
//! drho/dt = -i[H, rho] + 2 kappa L_a rho + r12 L_{s+} rho + r21 L_{s-} rho + gamma L_{sz} rho
//! H = g (a^+ s- + a s+),   2 L_X rho = 2 X rho X^+ - X^+ X rho - rho X^+ X
//! ```
//!
//! is built from sparse ladder and qubit matrices. Its stationary state lives
//! in the phase-symmetric sector spanned by
//!
//! ```text
//! |n,1><n,1|,   |n,2><n,2|,   i(|n,2><n+1,1| - |n+1,1><n,2|)
//! ```
//!
//! whose coordinates are `rho11(n)`, `rho22(n)` and `c(n)`. The sector
//! generator is obtained column by column by applying the full Liouvillian
//! to each basis element and projecting back, so the sector equations are
//! never written out by hand. All of this is `f64` only.

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::{CooMatrix, CsrMatrix};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::{FockDistribution, Label};
use crate::params::{LaserRates, NormalizedParams};

type C = Complex64;

const I: C = C { re: 0.0, im: 1.0 };

/// Full truncated Liouvillian on `Fock(0..=N) ⊗ {|1>, |2>}`.
#[derive(Debug, Clone)]
pub struct FullLiouvillian {
    pub rates: LaserRates<f64>,
    pub ntrunc: usize,
    a: CsrMatrix<C>,
    n_op: CsrMatrix<C>,
    sp: CsrMatrix<C>,
    sm: CsrMatrix<C>,
    sz: CsrMatrix<C>,
    excited: CsrMatrix<C>,
    ground: CsrMatrix<C>,
    h: CsrMatrix<C>,
}

/// Index of `|n, k>`, `k = 0` for the ground state `|1>`.
#[inline]
fn idx(n: usize, k: usize) -> usize {
    2 * n + k
}

fn sparse(dim: usize, entries: impl IntoIterator<Item = (usize, usize, f64)>) -> CsrMatrix<C> {
    let mut coo = CooMatrix::new(dim, dim);
    for (i, j, v) in entries {
        if v != 0.0 {
            coo.push(i, j, C::new(v, 0.0));
        }
    }
    CsrMatrix::from(&coo)
}

// m X^+ = (X m^+)^+
fn mul_dag(m: &DMatrix<C>, x: &CsrMatrix<C>) -> DMatrix<C> {
    (x * &m.adjoint()).adjoint()
}

fn sandwich(x: &CsrMatrix<C>, m: &DMatrix<C>) -> DMatrix<C> {
    x * &mul_dag(m, x)
}

// {X, m} for Hermitian X.
fn anticomm(x: &CsrMatrix<C>, m: &DMatrix<C>) -> DMatrix<C> {
    x * m + mul_dag(m, x)
}

impl FullLiouvillian {
    pub fn new(rates: &LaserRates<f64>, ntrunc: usize) -> Result<Self> {
        rates.validate()?;
        if ntrunc < 2 {
            return Err(Error::InvalidParameter {
                field: "ntrunc",
                reason: format!("must be >= 2, got {ntrunc}"),
            });
        }
        let dim = 2 * (ntrunc + 1);
        let fock = 0..=ntrunc;
        let a = sparse(
            dim,
            (1..=ntrunc).flat_map(|n| (0..2).map(move |k| (idx(n - 1, k), idx(n, k), (n as f64).sqrt()))),
        );
        let n_op = sparse(
            dim,
            fock.clone()
                .flat_map(|n| (0..2).map(move |k| (idx(n, k), idx(n, k), n as f64))),
        );
        let sp = sparse(dim, fock.clone().map(|n| (idx(n, 1), idx(n, 0), 1.0)));
        let sm = sparse(dim, fock.clone().map(|n| (idx(n, 0), idx(n, 1), 1.0)));
        let sz = sparse(
            dim,
            fock.clone()
                .flat_map(|n| [(idx(n, 1), idx(n, 1), 1.0), (idx(n, 0), idx(n, 0), -1.0)]),
        );
        let excited = sparse(dim, fock.clone().map(|n| (idx(n, 1), idx(n, 1), 1.0)));
        let ground = sparse(dim, fock.map(|n| (idx(n, 0), idx(n, 0), 1.0)));
        // a^+ s- couples |n,2> -> |n+1,1>.
        let h = sparse(
            dim,
            (0..ntrunc).flat_map(|n| {
                let v = rates.g * ((n + 1) as f64).sqrt();
                [(idx(n + 1, 0), idx(n, 1), v), (idx(n, 1), idx(n + 1, 0), v)]
            }),
        );
        Ok(Self {
            rates: *rates,
            ntrunc,
            a,
            n_op,
            sp,
            sm,
            sz,
            excited,
            ground,
            h,
        })
    }

    pub fn dim(&self) -> usize {
        2 * (self.ntrunc + 1)
    }

    /// `L rho`.
    pub fn apply(&self, rho: &DMatrix<C>) -> DMatrix<C> {
        let r = &self.rates;
        let hr = &self.h * rho;
        let rh = mul_dag(rho, &self.h);
        let mut out = (hr - rh) * (-I);
        out += (sandwich(&self.a, rho) * C::from(2.0) - anticomm(&self.n_op, rho)) * C::from(r.kappa);
        // s- s+ projects on |1>, s+ s- on |2>.
        out += (sandwich(&self.sp, rho) * C::from(2.0) - anticomm(&self.ground, rho)) * C::from(0.5 * r.r12);
        out += (sandwich(&self.sm, rho) * C::from(2.0) - anticomm(&self.excited, rho)) * C::from(0.5 * r.r21);
        out += (sandwich(&self.sz, rho) - rho) * C::from(r.gamma);
        out
    }

    /// Fourth-order Runge-Kutta integration to `t_end`.
    pub fn evolve(&self, rho0: &DMatrix<C>, t_end: f64, dt: f64) -> DMatrix<C> {
        let steps = (t_end / dt).ceil().max(1.0) as usize;
        let h = C::from(t_end / steps as f64);
        let half = C::from(0.5);
        let mut rho = rho0.clone();
        for _ in 0..steps {
            let k1 = self.apply(&rho);
            let k2 = self.apply(&(&rho + &k1 * (h * half)));
            let k3 = self.apply(&(&rho + &k2 * (h * half)));
            let k4 = self.apply(&(&rho + &k3 * h));
            rho += (k1 + (k2 + k3) * C::from(2.0) + k4) * (h / C::from(6.0));
        }
        rho
    }
}

/// Number of sector coordinates: `rho11`, `rho22` on `0..=N`, `c` on `0..N`.
fn sector_dim(ntrunc: usize) -> usize {
    3 * ntrunc + 2
}

fn embed(ntrunc: usize, x: &[f64]) -> DMatrix<C> {
    let dim = 2 * (ntrunc + 1);
    let mut m = DMatrix::zeros(dim, dim);
    for n in 0..=ntrunc {
        m[(idx(n, 0), idx(n, 0))] = C::from(x[n]);
        m[(idx(n, 1), idx(n, 1))] = C::from(x[ntrunc + 1 + n]);
    }
    for n in 0..ntrunc {
        let c = x[2 * (ntrunc + 1) + n];
        m[(idx(n, 1), idx(n + 1, 0))] = I * c;
        m[(idx(n + 1, 0), idx(n, 1))] = -I * c;
    }
    m
}

fn project(ntrunc: usize, m: &DMatrix<C>) -> Vec<f64> {
    let mut x = vec![0.0; sector_dim(ntrunc)];
    for n in 0..=ntrunc {
        x[n] = m[(idx(n, 0), idx(n, 0))].re;
        x[ntrunc + 1 + n] = m[(idx(n, 1), idx(n, 1))].re;
    }
    for n in 0..ntrunc {
        let ab = m[(idx(n, 1), idx(n + 1, 0))].im;
        let ba = m[(idx(n + 1, 0), idx(n, 1))].im;
        x[2 * (ntrunc + 1) + n] = 0.5 * (ab - ba);
    }
    x
}

/// Generator restricted to the phase-symmetric sector.
#[derive(Debug, Clone)]
pub struct TruncatedLiouvillian {
    pub full: FullLiouvillian,
    pub generator: DMatrix<f64>,
    /// Largest Frobenius norm of the out-of-sector part of `L E` over the
    /// sector basis elements `E`.
    pub closure_defect: f64,
}

impl TruncatedLiouvillian {
    pub fn build(rates: &LaserRates<f64>, ntrunc: usize) -> Result<Self> {
        let full = FullLiouvillian::new(rates, ntrunc)?;
        let m = sector_dim(ntrunc);
        let mut generator = DMatrix::zeros(m, m);
        let mut closure_defect = 0.0f64;
        let mut e = vec![0.0; m];
        for j in 0..m {
            e[j] = 1.0;
            let image = full.apply(&embed(ntrunc, &e));
            let col = project(ntrunc, &image);
            let outside = (&image - embed(ntrunc, &col)).norm();
            closure_defect = closure_defect.max(outside);
            generator.set_column(j, &DVector::from_vec(col));
            e[j] = 0.0;
        }
        Ok(Self {
            full,
            generator,
            closure_defect,
        })
    }

    /// Units with `kappa = 1`.
    pub fn from_normalized(p: &NormalizedParams<f64>, ntrunc: usize) -> Result<Self> {
        Self::build(&LaserRates::from_normalized(p, 1.0), ntrunc)
    }

    pub fn ntrunc(&self) -> usize {
        self.full.ntrunc
    }

    fn trace_row(&self) -> DVector<f64> {
        let n = self.ntrunc();
        DVector::from_fn(sector_dim(n), |i, _| if i < 2 * (n + 1) { 1.0 } else { 0.0 })
    }

    /// Largest column sum of the population rows; zero for a
    /// trace-preserving generator.
    pub fn trace_defect(&self) -> f64 {
        let t = self.trace_row();
        (t.transpose() * &self.generator).amax()
    }

    /// Embeds sector coordinates as a full density matrix.
    pub fn embed(&self, x: &[f64]) -> DMatrix<C> {
        embed(self.ntrunc(), x)
    }

    pub fn steady_state(&self) -> Result<OracleSolution> {
        let n = self.ntrunc();
        let m = sector_dim(n);
        let sv = self.generator.clone().singular_values();
        let smax = sv.max();
        let null = sv.iter().filter(|&&s| s <= 1e-11 * smax).count();
        if null > 1 {
            return Err(Error::Solve(format!(
                "sector generator has {null}-dimensional null space; stationary state not unique at N = {n}"
            )));
        }
        let mut a = self.generator.clone();
        a.set_row(0, &self.trace_row().transpose());
        let mut b = DVector::zeros(m);
        b[0] = 1.0;
        let x = a
            .full_piv_lu()
            .solve(&b)
            .ok_or_else(|| Error::Solve("sector system is singular".into()))?;
        let residual = (&self.generator * &x).amax();
        let rho11 = x.rows(0, n + 1).iter().copied().collect::<Vec<_>>();
        let rho22 = x.rows(n + 1, n + 1).iter().copied().collect::<Vec<_>>();
        let coherence = x.rows(2 * (n + 1), n).iter().copied().collect::<Vec<_>>();
        if let Some(k) = rho11.iter().chain(&rho22).position(|&v| v < -1e-14) {
            return Err(Error::Domain {
                index: k % (n + 1),
                reason: "oracle population is negative".into(),
            });
        }
        Ok(OracleSolution {
            leakage: rho11[n] + rho22[n],
            rho11,
            rho22,
            coherence,
            residual,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub rho11: Vec<f64>,
    pub rho22: Vec<f64>,
    /// `c(n) = Im <n,2|rho|n+1,1>` for `n = 0..N`.
    pub coherence: Vec<f64>,
    /// Max-norm of the generator applied to the solution.
    pub residual: f64,
    /// Field population at the cutoff.
    pub leakage: f64,
}

impl OracleSolution {
    pub fn ntrunc(&self) -> usize {
        self.rho11.len() - 1
    }

    pub fn trace(&self) -> f64 {
        self.rho11.iter().chain(&self.rho22).sum()
    }

    pub fn rhof(&self) -> FockDistribution<f64> {
        let p: Vec<f64> = self
            .rho11
            .iter()
            .zip(&self.rho22)
            .map(|(a, b)| (a + b).max(0.0))
            .collect();
        FockDistribution {
            ln_p: p.iter().map(|x| x.ln()).collect(),
            p,
            nmax: self.ntrunc(),
            tail_bound: self.leakage,
            label: Label::Rhof,
        }
    }

    /// `u(n) = c(n-1) / sqrt(n)` for `n >= 1`, from
    /// `<n-1,2|rho|n,1> = sqrt(n)(v(n) + i u(n))`.
    pub fn u(&self, n: usize) -> f64 {
        assert!(n >= 1, "u(0) does not enter the state");
        self.coherence[n - 1] / (n as f64).sqrt()
    }

    /// Sector coordinates in the layout used by [`TruncatedLiouvillian::embed`].
    pub fn coordinates(&self) -> Vec<f64> {
        let mut x = self.rho11.clone();
        x.extend_from_slice(&self.rho22);
        x.extend_from_slice(&self.coherence);
        x
    }
}

/// Measured decay of a pure `v` perturbation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VDecay {
    /// Fitted late-time decay rate of the perturbation norm.
    pub rate: f64,
    /// `kappa + (r12 + r21)/2`.
    pub target: f64,
}

/// Evolves `rho = a v ⊗ |2><1| + h.c.` with diagonal real `v` under the full
/// Liouvillian and fits the exponential decay of its norm.
///
/// The field dissipator mixes the `v(n)` among themselves with rates
/// spaced by `2 kappa`, so the fit window `[3/kappa, 5/kappa]` isolates the
/// slowest mode.
pub fn v_decay_check(rates: &LaserRates<f64>, ntrunc: usize) -> Result<VDecay> {
    let full = FullLiouvillian::new(rates, ntrunc)?;
    let dim = full.dim();
    let mut rho = DMatrix::<C>::zeros(dim, dim);
    for m in 1..=6.min(ntrunc) {
        let e = C::from((m as f64).sqrt() * (-(m as f64) / 2.0).exp());
        rho[(idx(m - 1, 1), idx(m, 0))] = e;
        rho[(idx(m, 0), idx(m - 1, 1))] = e;
    }

    let fastest = rates.kappa * (2.0 * ntrunc as f64 + 1.0)
        + 0.5 * (rates.r12 + rates.r21)
        + 2.0 * rates.gamma
        + 2.0 * rates.g * (ntrunc as f64).sqrt();
    let dt = 0.1 / fastest;
    let (t0, t1) = (3.0 / rates.kappa, 5.0 / rates.kappa);
    let samples = 10;
    rho = full.evolve(&rho, t0, dt);
    let mut ts = vec![t0];
    let mut ys = vec![rho.norm().ln()];
    let step = (t1 - t0) / samples as f64;
    for k in 1..=samples {
        rho = full.evolve(&rho, step, dt);
        ts.push(t0 + step * k as f64);
        ys.push(rho.norm().ln());
    }
    if let Some(k) = ys.iter().position(|y| !y.is_finite()) {
        return Err(Error::Domain {
            index: k,
            reason: "perturbation norm left the floating-point range".into(),
        });
    }
    let nt = ts.len() as f64;
    let mt = ts.iter().sum::<f64>() / nt;
    let my = ys.iter().sum::<f64>() / nt;
    let cov: f64 = ts.iter().zip(&ys).map(|(t, y)| (t - mt) * (y - my)).sum();
    let var: f64 = ts.iter().map(|t| (t - mt) * (t - mt)).sum();
    Ok(VDecay {
        rate: -cov / var,
        target: rates.kappa + 0.5 * (rates.r12 + rates.r21),
    })
}

/// Sector coordinates and Frobenius distance between a full-space state
/// evolved to `t_end` and the sector steady state.
pub fn diagonality_distance(l: &TruncatedLiouvillian, rho0: &DMatrix<C>, t_end: f64, dt: f64) -> Result<f64> {
    let ss = l.steady_state()?;
    let target = l.embed(&ss.coordinates());
    let evolved = l.full.evolve(rho0, t_end, dt);
    Ok((evolved - target).norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn fig1_rates() -> LaserRates<f64> {
        LaserRates::new(5f64.sqrt(), 1.0, 4.0, 6.0, 1.0)
    }

    #[test]
    fn uncoupled_state_is_vacuum_times_pumped_atom() {
        let rates = LaserRates::new(0.0, 1.0, 4.0, 6.0, 1.0);
        let l = TruncatedLiouvillian::build(&rates, 6).unwrap();
        let ss = l.steady_state().unwrap();
        assert_relative_eq!(ss.rho11[0], 0.6, epsilon = 1e-12);
        assert_relative_eq!(ss.rho22[0], 0.4, epsilon = 1e-12);
        assert!(ss.rho11[1..].iter().all(|x| x.abs() < 1e-14));
    }

    #[test]
    fn sector_is_closed_and_trace_preserving() {
        let l = TruncatedLiouvillian::build(&fig1_rates(), 20).unwrap();
        assert!(l.closure_defect < 1e-12);
        assert!(l.trace_defect() < 1e-12);
    }

    #[test]
    fn stationary_solution_invariants() {
        let l = TruncatedLiouvillian::build(&fig1_rates(), 30).unwrap();
        let ss = l.steady_state().unwrap();
        assert_relative_eq!(ss.trace(), 1.0, epsilon = 1e-12);
        assert!(ss.residual < 1e-12);
        assert!(ss.leakage < 1e-15);
        let rhof = ss.rhof();
        for n in 1..10 {
            assert_relative_eq!(ss.u(n).abs(), rhof.p[n] / 5f64.sqrt(), max_relative = 1e-8);
        }
    }

    #[test]
    fn small_cutoff_is_accepted() {
        let l = TruncatedLiouvillian::build(&fig1_rates(), 2).unwrap();
        assert!(l.steady_state().is_ok());
        assert!(TruncatedLiouvillian::build(&fig1_rates(), 1).is_err());
    }

    #[test]
    fn v_decay_is_independent_of_coupling() {
        let with = v_decay_check(&fig1_rates(), 16).unwrap();
        let without = v_decay_check(&LaserRates { g: 0.0, ..fig1_rates() }, 16).unwrap();
        assert_relative_eq!(with.rate, without.rate, max_relative = 1e-6);
        assert_eq!(with.target, 6.0);
        let no_dephasing = v_decay_check(
            &LaserRates {
                gamma: 0.0,
                ..fig1_rates()
            },
            16,
        )
        .unwrap();
        assert_relative_eq!(no_dephasing.rate, no_dephasing.target, max_relative = 1e-3);
    }
}
