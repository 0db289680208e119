use approx::assert_relative_eq;
use ncs_laser::phasespace::{
    convolution_check, fock_kernel, min_over_radius, quasi_prob, quasi_prob_with_error, s0_search, RadialGrid,
};
use ncs_laser::{build_solution, Distribution, Options, Params};

// Wigner function of |n><n| via Laguerre polynomials from the three-term recurrence.
fn wigner_fock(n: usize, r: f64) -> f64 {
    let x = 4.0 * r * r;
    let (mut l0, mut l1) = (1.0, 1.0 - x);
    if n == 0 {
        l1 = l0;
    }
    for k in 1..n {
        let l2 = ((2 * k + 1) as f64 - x) * l1 / (k + 1) as f64 - k as f64 * l0 / (k + 1) as f64;
        l0 = l1;
        l1 = l2;
    }
    let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
    2.0 / std::f64::consts::PI * sign * (-x / 2.0).exp() * l1
}

#[test]
fn wigner_kernel_matches_laguerre_formula() {
    for n in [0, 1, 2, 5, 12] {
        for r in [0.0, 0.3, 1.1, 2.4] {
            assert_relative_eq!(fock_kernel(n, r, 0.0), wigner_fock(n, r), epsilon = 1e-13);
        }
    }
}

#[test]
fn fock_states_are_maximally_nonclassical() {
    for n in 1..=3 {
        let report = s0_search(&Distribution::fock(n), 1e-4);
        assert!((report.s0 + 1.0).abs() <= 0.01, "n = {n}: {}", report.s0);
    }
}

#[test]
fn classical_mixtures_report_s0_one() {
    for d in [
        Distribution::vacuum(),
        Distribution::poisson(3.0, 1e-17),
        Distribution::thermal(0.6, 1e-17),
    ] {
        assert_eq!(s0_search(&d, 1e-4).s0, 1.0);
    }
}

#[test]
fn stationary_field_is_nonclassical() {
    let p = Params {
        a0sq: 1.0,
        nu0: 1.0,
        mu0: 3.0,
        eta: 5.0,
    };
    let sol = build_solution(&p, &Options::default()).unwrap();
    let report = s0_search(&sol.rhof, 1e-4);
    assert!(report.s0 < 1.0);
    let grid = RadialGrid::for_distribution(&sol.rhof);
    let at = min_over_radius(&sol.rhof, report.s0 + 2e-4, &grid);
    assert!(at.upper.value() <= 0.0);
    let below = min_over_radius(&sol.rhof, report.s0 - 2e-4, &grid);
    assert!(below.upper.sign > 0, "{below:?}");
}

#[test]
fn gaussian_smoothing_connects_orders() {
    let d = Distribution::from_weights(vec![0.2, 0.5, 0.3], 0.0, ncs_laser::Label::Custom).unwrap();
    let grid = RadialGrid::new(5.0, 24);
    assert!(convolution_check(&d, 0.5, -0.5, &grid).unwrap() < 1e-8);
    assert!(convolution_check(&d, 0.0, -1.0, &grid).unwrap() < 1e-8);
    assert!(convolution_check(&d, -1.0, 0.0, &grid).is_err());
}

#[test]
fn error_estimate_covers_single_precision() {
    let d64 = Distribution::poisson(4.0, 1e-17);
    let d32 = ncs_laser::FockDistribution::<f32>::poisson(4.0, 1e-9);
    for r in [0.0, 1.0, 2.0, 3.0] {
        for s in [-1.0, -0.3, 0.4] {
            let exact = quasi_prob(&d64, r, s);
            let v = quasi_prob_with_error(&d32, r as f32, s as f32);
            let err = (v.ln_err.exp() as f64).max(1e-6 * exact.abs());
            assert!((v.get() as f64 - exact).abs() <= 10.0 * err, "r = {r}, s = {s}");
        }
    }
}
