mod common;

use std::f64::consts::TAU;

use approx::assert_abs_diff_eq;
use photon_bell_core::phase_noise::monte_carlo_average;
use photon_bell_core::{
    average_polynomial, averaged_table, symbolic_correlator, symbolic_correlators,
    wrapped_gaussian_pdf, MeasurementStrategy, PhaseModel, PhasePolynomial, SubspaceState, C64,
};
use proptest::prelude::*;

/// Periodic trapezoid rule; spectrally accurate for smooth periodic integrands.
fn integrate(f: impl Fn(f64) -> f64) -> f64 {
    let n = 4096;
    (0..n).map(|i| f(i as f64 * TAU / n as f64)).sum::<f64>() * TAU / n as f64
}

#[test]
fn wrapped_gaussian_cosine_moment() {
    for &width in &[0.2, 0.9, 1.5] {
        for &center in &[0.0, 0.8, 2.5, 4.0] {
            let pdf = |phi: f64| wrapped_gaussian_pdf(phi, center, width).unwrap();
            assert_abs_diff_eq!(integrate(pdf), 1.0, epsilon = 1e-12);
            let moment = integrate(|phi| pdf(phi) * phi.cos());
            let expected = (-width * width / 2.0).exp() * f64::cos(center);
            assert!((moment - expected).abs() < 1e-9, "width {width} center {center}");
        }
    }
}

#[test]
fn narrow_wrapped_gaussian_matches_plain_gaussian() {
    let width = 0.3;
    for i in 0..20 {
        let x = -1.0 + 0.1 * i as f64;
        let plain = (-x * x / (2.0 * width * width)).exp() / (width * TAU.sqrt());
        assert_abs_diff_eq!(wrapped_gaussian_pdf(x, 0.0, width).unwrap(), plain, epsilon = 1e-12);
    }
}

fn strategy3() -> MeasurementStrategy {
    MeasurementStrategy::per_party(&[[0.2, -0.7], [0.5, 0.1], [-0.3, 0.9]], &[0.0, 1.1, 2.3]).unwrap()
}

#[test]
fn analytic_average_agrees_with_monte_carlo() {
    let state = SubspaceState::lossy_w_state(3, 0.85).unwrap();
    let strategy = strategy3();
    for &width in &[0.2, 0.4, 0.9, 1.5] {
        let model = PhaseModel::new(vec![0.4, 5.0], width).unwrap();
        for s in [[0, 1, 1], [1, 1, 1], [1, 0, 1]] {
            let poly = symbolic_correlator(&state, &strategy, &s).unwrap();
            let exact = average_polynomial(&poly, &model).unwrap().constant_term().re;
            let (mean, stderr) = monte_carlo_average(&poly, &model, 1234 + s[0] as u64, 100_000).unwrap();
            assert!((mean - exact).abs() < 4.0 * stderr, "width {width}: {mean} vs {exact} (se {stderr})");
        }
    }
}

#[test]
fn averaging_is_linear() {
    let model = PhaseModel::new(vec![0.3, 1.7], 0.6).unwrap();
    let p = PhasePolynomial::from_terms(2, [(vec![1, 0], C64::new(0.5, 0.1)), (vec![-1, 1], C64::new(0.2, -0.4))]).unwrap();
    let q = PhasePolynomial::from_terms(2, [(vec![1, 0], C64::new(-0.3, 0.0)), (vec![0, 2], C64::new(0.0, 0.7))]).unwrap();
    let (a, b) = (C64::new(1.5, 0.0), C64::new(-0.25, 0.0));
    let combined = p.scaled(a).plus(&q.scaled(b)).unwrap();
    let lhs = average_polynomial(&combined, &model).unwrap().constant_term();
    let rhs = a * average_polynomial(&p, &model).unwrap().constant_term()
        + b * average_polynomial(&q, &model).unwrap().constant_term();
    assert!((lhs - rhs).norm() < 1e-14);
}

#[test]
fn damping_grows_with_width() {
    let p = PhasePolynomial::from_terms(1, [(vec![1], C64::new(1.0, 0.0))]).unwrap();
    let mut last = f64::INFINITY;
    for i in 0..=30 {
        let width = 0.05 * i as f64;
        let v = average_polynomial(&p, &PhaseModel::new(vec![0.0], width).unwrap()).unwrap().constant_term().norm();
        assert!(v <= last);
        last = v;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn dephased_state_reproduces_symbolic_average(
        (state, amps, phases, centers) in (2usize..=5).prop_flat_map(|n| (
            common::random_state(n),
            prop::collection::vec((-1.2..1.2f64, -1.2..1.2f64), n),
            prop::collection::vec(0.0..TAU, n),
            prop::collection::vec(0.0..TAU, n - 1),
        )),
        width in 0.0..2.0f64,
    ) {
        let amps: Vec<[f64; 2]> = amps.into_iter().map(|(a, b)| [a, b]).collect();
        let strategy = MeasurementStrategy::per_party(&amps, &phases).unwrap();
        let model = PhaseModel::new(centers, width).unwrap();
        let choice = strategy.default_choice();
        let symbolic = symbolic_correlators(&state, &strategy, &choice).unwrap().average(&model).unwrap();
        let fast = averaged_table(&state, &strategy, &choice, &model).unwrap();
        for (a, b) in symbolic.values().iter().zip(fast.values()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
