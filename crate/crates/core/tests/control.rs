use cdf_core::checks::Verdict;
use cdf_core::control::{
    check_assumptions, fit_decay_rate, simulate_controlled, BoundaryFeedback, ControlGains, ControlSystem,
};
use cdf_core::linalg::Mat;
use cdf_core::solver::SolverConfig;
use cdf_core::{CdfError, Grid1D, StateField};
use proptest::prelude::*;

fn gaussian(cells: usize) -> StateField {
    let grid = Grid1D::periodic(0.0, 1.0, cells).unwrap();
    StateField::from_fn(grid, 2, |x, out| {
        let g = (-(x - 0.5) * (x - 0.5) / 0.02).exp();
        out[0] = g;
        out[1] = 0.5 * g;
    })
}

fn run(sys: &ControlSystem, gains: &ControlGains, horizon: f64) -> cdf_core::control::ControlledRun {
    let cfg = SolverConfig { end_time: horizon, ..SolverConfig::default() };
    simulate_controlled(sys, gains, &gaussian(200), &cfg).unwrap()
}

#[test]
fn jin_xin_passes_a1_a2_without_a3() {
    let r = check_assumptions(&ControlSystem::jin_xin(1.0));
    assert_eq!(r.a1.verdict, Verdict::Pass);
    assert_eq!(r.a2.verdict, Verdict::Pass);
    assert_eq!(r.a2.witness, vec![2.0]);
    assert_eq!(r.a3.verdict, Verdict::NotApplicable);
    assert!(r.passed());
}

#[test]
fn negative_damping_fails_a2() {
    let r = check_assumptions(&ControlSystem::jin_xin(-1.0));
    assert_eq!(r.a2.verdict, Verdict::Fail);
    assert_eq!(r.a2.witness, vec![-2.0]);
    assert!(!r.passed());
}

#[test]
fn zero_eigenvalue_of_a_fails_a3() {
    // A = [[0, 0], [0, 1]] has a zero speed and a = 0.
    let z = Mat::zeros(1, 1);
    let one = Mat::identity(1, 1);
    let sys = ControlSystem::from_blocks(z.clone(), z.clone(), z.clone(), one.clone(), one.clone(), one.clone(), one).unwrap();
    assert!(sys.is_characteristic());
    let r = check_assumptions(&sys);
    assert_eq!(r.a1.verdict, Verdict::Pass);
    assert_eq!(r.a3.verdict, Verdict::Fail);
    assert_eq!(r.a3.witness, vec![0.0]);
}

#[test]
fn positive_a_block_passes_a3() {
    // y_t + y_x = 0 decoupled from z_t = −z: zero speed for z, a = 1.
    let (z, one) = (Mat::zeros(1, 1), Mat::identity(1, 1));
    let sys = ControlSystem::from_blocks(one.clone(), z.clone(), z.clone(), z, one.clone(), one.clone(), one).unwrap();
    let r = check_assumptions(&sys);
    assert_eq!(r.a3.verdict, Verdict::Pass);
    assert!(r.passed());
}

#[test]
fn non_symmetrizing_a0_fails_a1() {
    let (z, one) = (Mat::zeros(1, 1), Mat::identity(1, 1));
    let x1 = Mat::from_element(1, 1, 2.0);
    let sys = ControlSystem::from_blocks(z.clone(), one.clone(), one.clone(), z, one.clone(), x1, one).unwrap();
    let r = check_assumptions(&sys);
    assert_eq!(r.a1.verdict, Verdict::Fail);
    assert!(r.a1.residual > 0.1);
}

#[test]
fn inconsistent_blocks_are_rejected() {
    let one = Mat::identity(1, 1);
    let two = Mat::identity(2, 2);
    assert!(ControlSystem::from_blocks(one.clone(), one.clone(), one.clone(), two, one.clone(), one.clone(), one).is_err());
}

#[test]
fn amplifying_gain_is_rejected() {
    let cfg = SolverConfig { end_time: 0.1, ..SolverConfig::default() };
    let err = simulate_controlled(&ControlSystem::jin_xin(1.0), &ControlGains::both(1.0), &gaussian(50), &cfg).unwrap_err();
    assert!(matches!(err, cdf_core::solver::SolverError::Model(CdfError::Configuration(_))));
    let gains = ControlGains { left: None, right: Some(BoundaryFeedback { gains: vec![-1.5] }) };
    assert!(simulate_controlled(&ControlSystem::jin_xin(1.0), &gains, &gaussian(50), &cfg).is_err());
}

#[test]
fn failing_assumptions_block_simulation() {
    let cfg = SolverConfig { end_time: 0.1, ..SolverConfig::default() };
    let err = simulate_controlled(&ControlSystem::jin_xin(-1.0), &ControlGains::both(0.0), &gaussian(50), &cfg).unwrap_err();
    assert!(matches!(err, cdf_core::solver::SolverError::Model(CdfError::Structural(_))));
}

#[test]
fn zero_initial_data_stays_zero() {
    let grid = Grid1D::periodic(0.0, 1.0, 50).unwrap();
    let f = StateField::uniform(grid, &[0.0, 0.0]);
    let cfg = SolverConfig { end_time: 1.0, ..SolverConfig::default() };
    let r = simulate_controlled(&ControlSystem::jin_xin(1.0), &ControlGains::both(0.5), &f, &cfg).unwrap();
    assert!(r.l2.iter().all(|v| *v == 0.0));
}

#[test]
fn absorbing_boundaries_drive_norm_below_1e_6() {
    let r = run(&ControlSystem::jin_xin(1.0), &ControlGains::both(0.0), 10.0);
    assert!(*r.l2.last().unwrap() < 1e-6);
    let fit = fit_decay_rate(&r.times, &r.l2, 0.2).unwrap();
    assert!(fit.nu > 0.0 && fit.residual <= 0.05, "{fit:?}");
}

#[test]
fn partial_reflection_decays_slower_than_absorption() {
    let sys = ControlSystem::jin_xin(1.0);
    let g0 = run(&sys, &ControlGains::both(0.0), 10.0);
    let g5 = run(&sys, &ControlGains::both(0.5), 10.0);
    let f0 = fit_decay_rate(&g0.times, &g0.l2, 0.2).unwrap();
    let f5 = fit_decay_rate(&g5.times, &g5.l2, 0.2).unwrap();
    assert!(f5.nu > 0.0 && f5.nu < f0.nu, "{} vs {}", f5.nu, f0.nu);
}

#[test]
fn one_sided_control_still_decays() {
    let gains = ControlGains { left: Some(BoundaryFeedback::uniform(0.3)), right: None };
    let r = run(&ControlSystem::jin_xin(1.0), &gains, 10.0);
    let fit = fit_decay_rate(&r.times, &r.l2, 0.2).unwrap();
    assert!(fit.nu > 0.0);
}

#[test]
fn stronger_damping_does_not_slow_reflecting_decay() {
    let gains = ControlGains::both(0.5);
    let f1 = {
        let r = run(&ControlSystem::jin_xin(1.0), &gains, 10.0);
        fit_decay_rate(&r.times, &r.l2, 0.2).unwrap()
    };
    let f2 = {
        let r = run(&ControlSystem::jin_xin(2.0), &gains, 10.0);
        fit_decay_rate(&r.times, &r.l2, 0.2).unwrap()
    };
    assert!(f2.nu >= f1.nu - f1.residual.max(f2.residual), "{} vs {}", f2.nu, f1.nu);
}

#[test]
fn pure_relaxation_decays_at_unit_rate() {
    // n = 0, m = 1, A = 0: z_t = −z on every cell.
    let empty = Mat::zeros(0, 0);
    let sys = ControlSystem::from_blocks(
        empty.clone(),
        Mat::zeros(0, 1),
        Mat::zeros(1, 0),
        Mat::zeros(1, 1),
        Mat::identity(1, 1),
        empty,
        Mat::identity(1, 1),
    )
    .unwrap();
    assert!(check_assumptions(&sys).passed());
    let grid = Grid1D::periodic(0.0, 1.0, 8).unwrap();
    let f = StateField::uniform(grid, &[1.0]);
    let cfg = SolverConfig { end_time: 5.0, dt: Some(0.01), ..SolverConfig::default() };
    let r = simulate_controlled(&sys, &ControlGains::both(0.0), &f, &cfg).unwrap();
    let fit = fit_decay_rate(&r.times, &r.l2, 0.2).unwrap();
    assert!((fit.nu - 1.0).abs() < 0.01, "{fit:?}");
}

#[test]
fn synthetic_exponential_is_recovered() {
    let t: Vec<f64> = (0..=100).map(|k| 0.05 * k as f64).collect();
    let n: Vec<f64> = t.iter().map(|t| 3.0 * (-2.0 * t).exp()).collect();
    let fit = fit_decay_rate(&t, &n, 0.2).unwrap();
    assert!((fit.nu - 2.0).abs() < 1e-6);
    assert!(fit.residual < 1e-12);
    assert!((fit.c - 1.0).abs() < 1e-9);
}

#[test]
fn fit_needs_points_above_floor() {
    assert!(fit_decay_rate(&[0.0, 1.0, 2.0], &[0.0, 0.0, 0.0], 0.0).is_err());
    assert!(fit_decay_rate(&[0.0], &[1.0], 0.0).is_err());
}

proptest! {
    #[test]
    fn decay_rate_is_scale_invariant(scale in 1e-6f64..1e6, rate in -3.0f64..3.0, wobble in 0.0f64..0.2) {
        let t: Vec<f64> = (0..60).map(|k| 0.1 * k as f64).collect();
        let n: Vec<f64> = t.iter().map(|t| (-rate * t + wobble * (3.0 * t).sin()).exp()).collect();
        let scaled: Vec<f64> = n.iter().map(|v| v * scale).collect();
        let a = fit_decay_rate(&t, &n, 0.2).unwrap();
        let b = fit_decay_rate(&t, &scaled, 0.2).unwrap();
        prop_assert!((a.nu - b.nu).abs() < 1e-9);
        prop_assert!((a.residual - b.residual).abs() < 1e-9);
    }

    #[test]
    fn passing_configurations_decay(e in 0.5f64..3.0, gain in -0.8f64..0.8) {
        let sys = ControlSystem::jin_xin(e);
        prop_assert!(check_assumptions(&sys).passed());
        let cfg = SolverConfig { end_time: 6.0, ..SolverConfig::default() };
        let r = simulate_controlled(&sys, &ControlGains::both(gain), &gaussian(60), &cfg).unwrap();
        let fit = fit_decay_rate(&r.times, &r.l2, 0.2).unwrap();
        prop_assert!(fit.nu > 0.0, "e = {}, gain = {}, ν = {}", e, gain, fit.nu);
    }
}
