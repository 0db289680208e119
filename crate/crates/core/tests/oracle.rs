use approx::assert_relative_eq;
use nalgebra::DMatrix;
use ncs_laser::liouville_oracle::{diagonality_distance, v_decay_check};
use ncs_laser::observables::trace_distance_diagonal;
use ncs_laser::{build_solution, Options, Params, Rates, TruncatedLiouvillian};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FIG1: Params = Params {
    a0sq: 1.0,
    nu0: 1.0,
    mu0: 3.0,
    eta: 5.0,
};

#[test]
fn coherence_is_field_distribution_over_sqrt_eta() {
    let sol = build_solution(&FIG1, &Options::default()).unwrap();
    let ss = TruncatedLiouvillian::from_normalized(&FIG1, 50)
        .unwrap()
        .steady_state()
        .unwrap();
    assert!(ss.leakage < 1e-30);
    assert!(ss.residual < 1e-12);
    for n in 1..40 {
        assert!((ss.u(n) - sol.u(n)).abs() <= 1e-7, "n = {n}");
        assert_relative_eq!(ss.u(n), sol.u(n), max_relative = 1e-8, epsilon = 1e-200);
    }
}

#[test]
fn uncoupled_atom_follows_the_pump_balance() {
    let rates = Rates::new(0.0, 1.0, 4.0, 6.0, 0.5);
    let ss = TruncatedLiouvillian::build(&rates, 10).unwrap().steady_state().unwrap();
    assert_relative_eq!(ss.rho11[0], 6.0 / 10.0, epsilon = 1e-12);
    assert_relative_eq!(ss.rho22[0], 4.0 / 10.0, epsilon = 1e-12);
    assert_relative_eq!(ss.trace(), 1.0, epsilon = 1e-12);
}

#[test]
fn v_decay_is_independent_of_coupling_and_linear_in_pump() {
    let base = v_decay_check(&Rates::new(5f64.sqrt(), 1.0, 4.0, 6.0, 0.0), 12).unwrap();
    let weak = v_decay_check(&Rates::new(0.0, 1.0, 4.0, 6.0, 0.0), 12).unwrap();
    let pumped = v_decay_check(&Rates::new(5f64.sqrt(), 1.0, 8.0, 6.0, 0.0), 12).unwrap();
    assert_relative_eq!(base.rate, weak.rate, max_relative = 1e-3);
    assert_relative_eq!(pumped.rate - base.rate, 2.0, max_relative = 0.05);
    assert_relative_eq!(base.rate, base.target, max_relative = 1e-3);
}

#[test]
fn random_initial_state_relaxes_to_the_sector_solution() {
    let l = TruncatedLiouvillian::from_normalized(&FIG1, 8).unwrap();
    let dim = l.full.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let a = DMatrix::<Complex64>::from_fn(dim, dim, |_, _| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    let rho = &a * a.adjoint();
    let rho0 = &rho / rho.trace();
    assert!(diagonality_distance(&l, &rho0, 50.0, 0.01).unwrap() < 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn recurrence_matches_master_equation(
        a0sq in 0.0f64..2.0,
        nu0 in -0.5f64..2.0,
        gamma in 0.0f64..5.0,
        eta in 0.5f64..20.0,
    ) {
        let p = Params { a0sq, nu0, mu0: a0sq + nu0 + gamma, eta };
        let sol = build_solution(&p, &Options::default()).unwrap();
        let ss = TruncatedLiouvillian::from_normalized(&p, 40).unwrap().steady_state().unwrap();
        prop_assert!(ss.leakage < 1e-10);
        prop_assert!(trace_distance_diagonal(&sol.rhof, &ss.rhof()) <= 1e-7);
    }
}
