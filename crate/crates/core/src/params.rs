//! Physical rates of the single-atom laser and the four dimensionless
//! parameters every other module works with.
//!
//! With field decay `kappa`, coupling `g`, pump `r12`, atomic decay `r21`
//! and dephasing `gamma`:
//!
//! ```text
//! a0sq = r12 / (4 kappa)
//! nu0  = (r21 - 2 kappa) / (4 kappa)
//! mu0  = a0sq + nu0 + gamma / kappa
//! eta  = g^2 / kappa^2
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Raw rates of the master equation (all in 1/s, `g` in rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaserRates<T> {
    pub g: T,
    pub kappa: T,
    pub r12: T,
    pub r21: T,
    pub gamma: T,
}

/// Pump `a0sq`, loss excess `nu0`, dephasing `mu0`, coupling `eta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedParams<T> {
    pub a0sq: T,
    pub nu0: T,
    pub mu0: T,
    pub eta: T,
}

fn finite<T: Real>(field: &'static str, x: T, kind: fn(&'static str, String) -> Error) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(kind(field, format!("must be finite, got {x}")))
    }
}

fn rate_err(field: &'static str, reason: String) -> Error {
    Error::InvalidRate { field, reason }
}

fn param_err(field: &'static str, reason: String) -> Error {
    Error::InvalidParameter { field, reason }
}

impl<T: Real> LaserRates<T> {
    pub fn new(g: T, kappa: T, r12: T, r21: T, gamma: T) -> Self {
        Self {
            g,
            kappa,
            r12,
            r21,
            gamma,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("g", self.g),
            ("kappa", self.kappa),
            ("r12", self.r12),
            ("r21", self.r21),
            ("gamma", self.gamma),
        ];
        for (name, value) in fields {
            finite(name, value, rate_err)?;
        }
        if self.kappa <= T::zero() {
            return Err(rate_err("kappa", format!("must be > 0, got {}", self.kappa)));
        }
        for (name, value) in [
            ("g", self.g),
            ("r12", self.r12),
            ("r21", self.r21),
            ("gamma", self.gamma),
        ] {
            if value < T::zero() {
                return Err(rate_err(name, format!("must be >= 0, got {value}")));
            }
        }
        Ok(())
    }

    /// Rates reproducing `p` for a given field decay rate.
    pub fn from_normalized(p: &NormalizedParams<T>, kappa: T) -> Self {
        let four = T::lit(4.0);
        let two = T::lit(2.0);
        Self {
            g: p.eta.sqrt() * kappa,
            kappa,
            r12: four * kappa * p.a0sq,
            r21: four * kappa * p.nu0 + two * kappa,
            gamma: (p.mu0 - p.a0sq - p.nu0) * kappa,
        }
    }
}

/// Maps raw rates onto the normalized parameter set.
pub fn normalize<T: Real>(rates: &LaserRates<T>) -> Result<NormalizedParams<T>> {
    rates.validate()?;
    if rates.g <= T::zero() {
        return Err(rate_err("g", format!("must be > 0 to normalize, got {}", rates.g)));
    }
    let four_kappa = T::lit(4.0) * rates.kappa;
    let a0sq = rates.r12 / four_kappa;
    let nu0 = (rates.r21 - T::lit(2.0) * rates.kappa) / four_kappa;
    let mu0 = a0sq + nu0 + rates.gamma / rates.kappa;
    let ratio = rates.g / rates.kappa;
    Ok(NormalizedParams {
        a0sq,
        nu0,
        mu0,
        eta: ratio * ratio,
    })
}

/// Accepts parameters supplied directly, bypassing raw rates.
pub fn validate_normalized<T: Real>(p: &NormalizedParams<T>) -> Result<()> {
    for (name, value) in [("a0sq", p.a0sq), ("nu0", p.nu0), ("mu0", p.mu0), ("eta", p.eta)] {
        finite(name, value, param_err)?;
    }
    if p.a0sq < T::zero() {
        return Err(param_err("a0sq", format!("must be >= 0, got {}", p.a0sq)));
    }
    if p.nu0 < T::lit(-0.5) {
        return Err(param_err("nu0", format!("must be >= -1/2, got {}", p.nu0)));
    }
    if p.eta <= T::zero() {
        return Err(param_err("eta", format!("must be > 0, got {}", p.eta)));
    }
    // mu0 - a0sq - nu0 = gamma / kappa; allow round-off from the rate mapping.
    let slack = T::epsilon() * T::lit(64.0) * (T::one() + p.a0sq.abs() + p.nu0.abs() + p.mu0.abs());
    if p.mu0 < p.a0sq + p.nu0 - slack {
        return Err(param_err(
            "mu0",
            format!("must be >= a0sq + nu0 = {}, got {}", p.a0sq + p.nu0, p.mu0),
        ));
    }
    Ok(())
}

impl<T: Real> NormalizedParams<T> {
    pub fn new(a0sq: T, nu0: T, mu0: T, eta: T) -> Result<Self> {
        let p = Self { a0sq, nu0, mu0, eta };
        validate_normalized(&p)?;
        Ok(p)
    }

    /// Same parameters at a different coupling.
    pub fn with_eta(self, eta: T) -> Self {
        Self { eta, ..self }
    }

    pub fn cast<U: Real>(&self) -> NormalizedParams<U> {
        NormalizedParams {
            a0sq: U::lit(self.a0sq.to_f64_lossy()),
            nu0: U::lit(self.nu0.to_f64_lossy()),
            mu0: U::lit(self.mu0.to_f64_lossy()),
            eta: U::lit(self.eta.to_f64_lossy()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn assert_params(p: NormalizedParams<f64>, expected: [f64; 4]) {
        assert_relative_eq!(p.a0sq, expected[0], epsilon = 1e-14);
        assert_relative_eq!(p.nu0, expected[1], epsilon = 1e-14);
        assert_relative_eq!(p.mu0, expected[2], epsilon = 1e-14);
        assert_relative_eq!(p.eta, expected[3], epsilon = 1e-14);
    }

    #[test]
    fn figure_one_rates() {
        let rates = LaserRates::new(5f64.sqrt(), 1.0, 4.0, 6.0, 1.0);
        assert_params(normalize(&rates).unwrap(), [1.0, 1.0, 3.0, 5.0]);
    }

    #[test]
    fn zero_pump_and_boundary_loss() {
        let p = normalize(&LaserRates::new(1.0, 1.0, 0.0, 2.0, 0.0)).unwrap();
        assert_params(p, [0.0, 0.0, 0.0, 1.0]);
        let p = normalize(&LaserRates::new(1.0, 1.0, 4.0, 0.0, 0.0)).unwrap();
        assert_params(p, [1.0, -0.5, 0.5, 1.0]);
    }

    #[test]
    fn rejects_bad_rates_by_name() {
        let cases = [
            (LaserRates::new(0.0, 1.0, 1.0, 1.0, 1.0), "g"),
            (LaserRates::new(1.0, -1.0, 1.0, 1.0, 1.0), "kappa"),
            (LaserRates::new(1.0, 1.0, -1.0, 1.0, 1.0), "r12"),
            (LaserRates::new(1.0, 1.0, 1.0, -0.1, 1.0), "r21"),
            (LaserRates::new(1.0, 1.0, 1.0, 1.0, f64::NAN), "gamma"),
        ];
        for (rates, name) in cases {
            match normalize(&rates) {
                Err(Error::InvalidRate { field, .. }) => assert_eq!(field, name),
                other => panic!("expected InvalidRate({name}), got {other:?}"),
            }
        }
    }

    #[test]
    fn validate_normalized_examples() {
        let ok = NormalizedParams {
            a0sq: 1.0,
            nu0: 1.0,
            mu0: 3.0,
            eta: 5.0,
        };
        assert!(validate_normalized(&ok).is_ok());
        let bad_nu = NormalizedParams { nu0: -0.6, ..ok };
        assert!(matches!(
            validate_normalized(&bad_nu),
            Err(Error::InvalidParameter { field: "nu0", .. })
        ));
        let bad_eta = NormalizedParams { eta: 0.0, ..ok };
        assert!(matches!(
            validate_normalized(&bad_eta),
            Err(Error::InvalidParameter { field: "eta", .. })
        ));
        let bad_mu = NormalizedParams { mu0: 1.0, ..ok };
        assert!(matches!(
            validate_normalized(&bad_mu),
            Err(Error::InvalidParameter { field: "mu0", .. })
        ));
    }

    #[test]
    fn from_normalized_inverts_normalize() {
        let p = NormalizedParams {
            a0sq: 1.0,
            nu0: 1.0,
            mu0: 3.0,
            eta: 5.0,
        };
        let rates = LaserRates::from_normalized(&p, 2.5);
        assert_params(normalize(&rates).unwrap(), [1.0, 1.0, 3.0, 5.0]);
    }

    #[test]
    fn f32_mapping() {
        let p = normalize(&LaserRates::new(5f32.sqrt(), 1.0, 4.0, 6.0, 1.0)).unwrap();
        assert!((p.eta - 5.0).abs() < 1e-5);
        assert!((p.mu0 - 3.0).abs() < 1e-6);
    }

    fn rates_strategy() -> impl Strategy<Value = LaserRates<f64>> {
        (1e-3..1e3f64, 1e-3..1e3f64, 0.0..1e3f64, 0.0..1e3f64, 0.0..1e3f64)
            .prop_map(|(g, kappa, r12, r21, gamma)| LaserRates::new(g, kappa, r12, r21, gamma))
    }

    proptest! {
        #[test]
        fn normalized_rates_always_validate(rates in rates_strategy()) {
            let p = normalize(&rates).unwrap();
            prop_assert!(validate_normalized(&p).is_ok());
        }

        #[test]
        fn homogeneous_in_all_rates(rates in rates_strategy(), c in 1e-2..1e2f64) {
            let scaled = LaserRates::new(c * rates.g, c * rates.kappa, c * rates.r12, c * rates.r21, c * rates.gamma);
            let p = normalize(&rates).unwrap();
            let q = normalize(&scaled).unwrap();
            for (x, y) in [(p.a0sq, q.a0sq), (p.nu0, q.nu0), (p.mu0, q.mu0), (p.eta, q.eta)] {
                prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
            }
        }
    }
}
