use std::sync::Arc;

use cdf_core::checks::{check_all, check_concavity, check_kawashima, check_source_factorization, CheckConfig, CheckKind, Verdict};
use cdf_core::linalg::{expm, Mat};
use cdf_core::solver::{integrate, SolverConfig};
use cdf_core::stochastic::Reaction;
use cdf_core::zoo::audit::constant;
use cdf_core::zoo::axonal::steady_state_residual;
use cdf_core::zoo::*;
use cdf_core::{BalanceLaw, CdfSystem, Grid1D, StateField};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn run(sys: &dyn BalanceLaw, f0: &StateField, end: f64, dt: Option<f64>) -> cdf_core::solver::Trajectory {
    integrate(sys, f0, &SolverConfig { end_time: end, dt, snapshots: 1, ..SolverConfig::default() }).unwrap()
}

#[test]
fn optics_susceptibility_decays_without_field() {
    let sys = maxwell_optics_system(1.0).unwrap();
    let chi0 = 0.8;
    let f0 = StateField::uniform(Grid1D::periodic(0.0, 1.0, 4).unwrap(), &[0.0, 0.0, chi0]);
    let mut q = [0.0; 3];
    sys.source(&[0.0, 0.0, chi0], &mut q);
    assert_eq!(q, [0.0, 0.0, -chi0]);
    let traj = run(&sys, &f0, 1.0, Some(1e-3));
    for c in traj.final_field.cells() {
        assert!((c[2] - chi0 * (-1.0f64).exp()).abs() < 1e-3 * chi0);
        assert_eq!((c[0], c[1]), (0.0, 0.0));
    }
}

#[test]
fn optics_susceptibility_relaxes_to_field_squared() {
    // D = 2 has the fixed point χ(1 + χ)² = 4, i.e. χ = 1 and E = 1
    let sys = maxwell_optics_system(1.0).unwrap();
    let f0 = StateField::uniform(Grid1D::periodic(0.0, 1.0, 4).unwrap(), &[2.0, 0.0, 0.3]);
    let traj = run(&sys, &f0, 30.0, Some(0.01));
    for c in traj.final_field.cells() {
        let e = MaxwellOptics::electric_field(c);
        assert!((c[2] - e * e).abs() < 1e-6, "{c:?}");
        assert!((c[2] - 1.0).abs() < 1e-6);
    }
}

#[test]
fn optics_rejects_permittivity_singularity() {
    let sys = maxwell_optics_system(1.0).unwrap();
    assert!(sys.check_state(&[0.1, 0.0, -1.0]).is_err());
    assert!(sys.check_state(&[0.1, 0.0, 0.5]).is_ok());
}

#[test]
fn optics_structure_on_samples() {
    let sys = maxwell_optics_system(1.0).unwrap();
    let mut samples = vec![];
    for chi in [0.5, 1.0, 2.0] {
        for d in [-1.0, 0.0, 0.7] {
            for b in [-0.5, 1.0] {
                samples.push(vec![d, b, chi]);
            }
        }
    }
    let reports = check_all(&sys, &samples, &CheckConfig { derivatives: cdf_core::system::DerivativeMode::FiniteDifference, ..CheckConfig::default() }).unwrap();
    for r in &reports {
        assert_eq!(r.verdict, Verdict::Pass, "{r:?}");
    }
}

#[test]
fn optics_without_background_field_violates_kawashima() {
    let r = check_kawashima(&maxwell_optics_system(0.0).unwrap(), &CheckConfig::default()).unwrap();
    assert_eq!(r.verdict, Verdict::Fail);
    assert!(!r.witness_vector.is_empty());
}

fn euler() -> EulerDamping {
    euler_damping_system(PressureLaw::default(), 1.0).unwrap()
}

#[test]
fn euler_source_factors_through_density() {
    let sys = euler();
    let samples: Vec<Vec<f64>> = [(0.5, -0.3), (1.0, 0.0), (2.0, 1.1)].iter().map(|&(r, m)| vec![r, m]).collect();
    let r = check_source_factorization(&sys, &samples, &CheckConfig::default()).unwrap();
    assert_eq!(r.verdict, Verdict::Pass);
    assert!(r.residual <= 1e-10);
    for u in &samples {
        // convex entropy m²/(2ρ) + P(ρ): s_z = v and q = −m = −ρ·v
        let m = sys.dissipation(u);
        assert!((m[(0, 0)] - u[0]).abs() < 1e-14);
    }
}

#[test]
fn euler_at_rest_is_stationary() {
    let f0 = StateField::uniform(Grid1D::periodic(0.0, 1.0, 32).unwrap(), &[1.3, 0.0]);
    let traj = run(&euler(), &f0, 1.0, None);
    assert!(traj.final_field.data.iter().zip(&f0.data).all(|(a, b)| (a - b).abs() < 1e-14));
}

#[test]
fn euler_perturbation_decays() {
    // long wave with c·k ≈ 0.22 < 1/2: overdamped, so the L² distance has no
    // acoustic oscillation once the fast mode has died out; the slow mode
    // decays at (−1 + √(1 − 4c²k²))/2 ≈ −0.052
    let sys = euler();
    let length = 40.0;
    let k = std::f64::consts::TAU / length;
    let f0 = StateField::from_fn(Grid1D::periodic(0.0, length, 100).unwrap(), 2, |x, out| {
        out[0] = 1.0 + 0.05 * (k * x).sin();
        out[1] = 0.02 * (k * x).cos();
    });
    let traj = integrate(&sys, &f0, &SolverConfig { end_time: 100.0, ..SolverConfig::default() }).unwrap();
    let l2: Vec<f64> = traj.diagnostics.iter().map(|d| d.l2_to_equilibrium).collect();
    assert!(l2.last().unwrap() < &(1e-2 * l2[0]), "{} vs {}", l2.last().unwrap(), l2[0]);
    let settled = l2.len() / 5;
    assert!(l2[settled..].windows(2).all(|w| w[1] <= w[0]));
    // convex entropy is non-increasing from the start
    assert!(traj.diagnostics.windows(2).all(|w| w[1].total_entropy <= w[0].total_entropy + 1e-8));
}

#[test]
fn euler_rejects_vacuum() {
    assert!(euler().check_state(&[0.0, 0.0]).is_err());
    assert!(euler().check_state(&[-1.0, 0.0]).is_err());
    assert!(euler_damping_system(PressureLaw::default(), 0.0).is_err());
}

#[test]
fn cattaneo_local_equilibrium_has_no_source() {
    let sys = cattaneo_system(&CattaneoParams::default()).unwrap();
    for u in [0.5, 1.0, 2.0] {
        let mut q = [1.0; 2];
        sys.source(&[u, 0.0], &mut q);
        assert_eq!(q, [0.0, 0.0]);
    }
}

#[test]
fn cattaneo_front_moves_at_telegraph_speed() {
    let rep = cattaneo_front_speed(&FrontSpeedConfig::default()).unwrap();
    // √(λ/(c_v·τ₀)) at τ₀ = 0.1
    assert!((rep.predicted_speed - 10f64.sqrt()).abs() < 1e-12);
    assert!(rep.relative_error < 0.05, "{rep:?}");
}

#[test]
fn fourier_limit_converges_monotonically() {
    let rep = fourier_limit_study(&FourierLimitConfig::default()).unwrap();
    assert!(rep.monotone, "{rep:?}");
    let slope = rep.slope.unwrap();
    assert!((0.9..=2.1).contains(&slope), "{rep:?}");
}

#[test]
fn fourier_limit_is_insensitive_to_grid_refinement() {
    let coarse = FourierLimitConfig { taus: vec![1e-2], ..FourierLimitConfig::default() };
    let fine = FourierLimitConfig { cells: 800, ..coarse.clone() };
    let (a, b) = (fourier_limit_study(&coarse).unwrap().rows[0].error, fourier_limit_study(&fine).unwrap().rows[0].error);
    assert!((a - b).abs() <= 0.2 * a, "{a} vs {b}");
}

#[test]
fn fourier_limit_with_constant_temperature_is_exact() {
    let rep = fourier_limit_study(&FourierLimitConfig { amplitude: 0.0, ..FourierLimitConfig::default() }).unwrap();
    assert!(rep.rows.iter().all(|r| r.error == 0.0), "{rep:?}");
    assert!(rep.slope.is_none());
}

#[test]
fn fourier_limit_rejects_increasing_taus() {
    assert!(fourier_limit_study(&FourierLimitConfig { taus: vec![1e-3, 1e-2], ..FourierLimitConfig::default() }).is_err());
}

#[test]
fn thermomass_examples() {
    let sys = thermomass_system(&ThermomassParams::default()).unwrap();
    assert_eq!(sys.alpha(1.0), 0.5);
    for u in [0.5, 1.0, 3.0] {
        assert!((sys.noneq_temperature(&[u, 0.0]) - sys.temperature(u)).abs() < 1e-14);
    }
    assert!(sys.check_state(&[0.0, 0.0]).is_err());
    assert!(sys.check_state(&[-1.0, 0.0]).is_err());
}

#[test]
fn thermomass_factorization_on_random_admissible_samples() {
    let sys = thermomass_system(&ThermomassParams::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let samples: Vec<Vec<f64>> = (0..50)
        .map(|_| {
            let u: f64 = rng.random_range(0.5..2.0);
            // concavity cone w² < ρc_v²/(12γu³)
            let wmax = (1.0 / (12.0 * u * u * u)).sqrt();
            vec![u, rng.random_range(-0.9..0.9) * wmax]
        })
        .collect();
    let cfg = CheckConfig::default();
    let r = check_source_factorization(&sys, &samples, &cfg).unwrap();
    assert_eq!(r.verdict, Verdict::Pass);
    assert!(r.residual <= 1e-8);
    assert_eq!(check_concavity(&sys, &samples, &cfg).unwrap().verdict, Verdict::Pass);
}

#[test]
fn axonal_steady_state_starts_at_boundary_value() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20 {
        let n = rng.random_range(2..=4);
        let velocities: Vec<f64> = (0..n).map(|i| 0.5 + i as f64 + rng.random_range(0.0..0.4)).collect();
        let mut k = vec![0.0; n * n];
        for j in 0..n {
            for i in 0..n {
                if i != j {
                    k[i * n + j] = rng.random_range(0.1..1.0);
                }
            }
        }
        for j in 0..n {
            let s: f64 = (0..n).filter(|&i| i != j).map(|i| k[i * n + j]).sum();
            k[j * n + j] = -s;
        }
        let boundary: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..2.0)).collect();
        let p = AxonalParams { velocities, coupling: k, boundary: boundary.clone(), epsilon: rng.random_range(0.5..2.0) };
        let b0 = axonal_steady_state(&p, 0.0).unwrap();
        for i in 0..n {
            assert!((b0[i] - boundary[i]).abs() < 1e-13);
        }
    }
}

#[test]
fn two_population_steady_state_solves_the_ode() {
    let p = AxonalParams::two_population();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let xs: Vec<f64> = (0..100).map(|_| rng.random_range(0.0..10.0)).collect();
    assert!(steady_state_residual(&p, &xs, 1e-4).unwrap() <= 1e-8);
    // independent oracle: B(x) = Λ⁻¹·exp(KΛ⁻¹x)·Λ·U₀ with K·Λ⁻¹ = [[−1, ½], [1, −½]]
    let klinv = Mat::from_row_slice(2, 2, &[-1.0, 0.5, 1.0, -0.5]);
    for &x in &xs[..5] {
        let e = expm(&(&klinv * x));
        let lu0 = [1.0, 2.0];
        let b = axonal_steady_state(&p, x).unwrap();
        for i in 0..2 {
            let want = (e[(i, 0)] * lu0[0] + e[(i, 1)] * lu0[1]) / [1.0, 2.0][i];
            assert!((b[i] - want).abs() < 1e-12);
        }
    }
}

#[test]
fn axonal_relaxation_reaches_steady_profile() {
    let run = axonal_relaxation(&AxonalParams::two_population(), &AxonalRunConfig::default()).unwrap();
    assert!(run.sup_distance[0] > 0.1);
    assert!(run.sup_distance.iter().any(|d| *d < 1e-4), "{:?}", run.sup_distance.last());
}

#[test]
fn axonal_structural_violations_are_named() {
    let base = AxonalParams::two_population();
    let cases = [
        (AxonalParams { velocities: vec![1.0, 1.0], ..base.clone() }, "coincide"),
        (AxonalParams { coupling: vec![-1.0, 1.0, 0.5, -1.0], ..base.clone() }, "sums"),
        (AxonalParams { coupling: vec![1.0, -1.0, -1.0, 1.0], ..base.clone() }, "negative"),
        (AxonalParams { coupling: vec![0.0, 0.0, 0.0, 0.0], ..base.clone() }, "reducible"),
        (AxonalParams { velocities: vec![0.0, 1.0], ..base.clone() }, "invertible"),
    ];
    for (p, word) in cases {
        let err = axonal_system(&p).unwrap_err().to_string();
        assert!(err.contains(word), "{err}");
    }
}

#[test]
fn zero_wavenumber_gives_source_eigenvalues() {
    let a = Mat::from_row_slice(2, 2, &[2.0, 0.0, 1.0, 1.0]);
    let b = Mat::from_row_slice(2, 2, &[0.0, 0.0, 0.0, -3.0]);
    let spec = LinearSystemSpec::new(a.clone(), Mat::identity(2, 2), b.clone()).unwrap();
    let rows = dispersion_spectrum(&spec, &[0.0]).unwrap();
    let mut got = rows[0].re.clone();
    got.sort_by(f64::total_cmp);
    // A⁻¹B = [[0, 0], [0, −3]]
    assert!((got[0] + 3.0).abs() < 1e-12 && got[1].abs() < 1e-12);
    assert!(rows[0].im.iter().all(|v| v.abs() < 1e-12));
}

#[test]
fn damped_telegraph_spectrum_matches_quadratic() {
    let ks: Vec<f64> = (0..200).map(|i| 0.05 * i as f64).collect();
    let rows = dispersion_spectrum(&LinearSystemSpec::damped_telegraph(), &ks).unwrap();
    for r in &rows {
        // λ² + λ + k² = 0
        let disc = 1.0 - 4.0 * r.k * r.k;
        let want = if disc >= 0.0 { (-1.0 + disc.sqrt()) / 2.0 } else { -0.5 };
        assert!((r.growth() - want).abs() < 1e-9, "k = {}", r.k);
        assert!(r.re.iter().all(|v| *v <= 1e-12));
    }
    let big = dispersion_spectrum(&LinearSystemSpec::damped_telegraph(), &[100.0]).unwrap();
    assert!(big[0].re.iter().all(|v| (v + 0.5).abs() < 1e-9));
    assert!(classify(&rows, 1e-10).stable);
}

#[test]
fn anti_damped_growth_matches_dispersion() {
    let spec = LinearSystemSpec::anti_damped_telegraph();
    let ks: Vec<f64> = (0..=400).map(|i| 0.01 * i as f64).collect();
    let cls = classify(&dispersion_spectrum(&spec, &ks).unwrap(), 1e-10);
    assert!(!cls.stable && cls.max_growth > 0.0);
    // λ² − λ + k² = 0 peaks at k = 0 with λ = 1
    assert!((cls.max_growth - 1.0).abs() < 1e-12 && cls.k_at_max == 0.0);
    let run = time_domain_growth(&spec, &GrowthConfig::default()).unwrap();
    assert!((run.rate - cls.max_growth).abs() <= 0.1 * cls.max_growth, "{} vs {}", run.rate, cls.max_growth);
}

#[test]
fn damped_counterpart_decays_in_time() {
    let spec = LinearSystemSpec::damped_telegraph();
    let run = time_domain_growth(&spec, &GrowthConfig { horizon: 5.0, cells: 1000, ..GrowthConfig::default() }).unwrap();
    assert!(run.rate <= 0.0);
    assert!(run.l2.last().unwrap() < &run.l2[0]);
}

#[test]
fn singular_leading_matrix_is_rejected() {
    let z = Mat::zeros(2, 2);
    assert!(LinearSystemSpec::new(z.clone(), Mat::identity(2, 2), z).is_err());
}

fn species(m: f64, e0: f64) -> ReactiveSpecies {
    ReactiveSpecies { molar_mass: m, gas_constant: 1.0 / m, energy_ref: e0, entropy_ref: 0.0, heat_capacity: Some(constant(1.5)) }
}

fn reactive_state(rhos: &[f64], v: f64, theta: f64, sp: &[ReactiveSpecies]) -> Vec<f64> {
    let rho: f64 = rhos.iter().sum();
    let internal: f64 = rhos.iter().zip(sp).map(|(r, s)| r * (s.energy_ref + 1.5 * (theta - 1.0))).sum();
    let mut u = vec![rho * v, 0.0, 0.0, internal + 0.5 * rho * v * v];
    u.extend_from_slice(rhos);
    u
}

#[test]
fn reactive_flow_audit_reports_hessian_spectrum() {
    let sp = vec![species(1.0, 0.0), species(1.0, 0.2)];
    let fam = AuditFamily::ReactiveFlow(ReactiveFlowParams {
        species: sp.clone(),
        reactions: vec![Reaction { nu_plus: vec![1, 0], nu_minus: vec![0, 1], k_plus: 1.0, k_minus: 0.5 }],
        theta_ref: 1.0,
    });
    let states = vec![reactive_state(&[0.6, 0.4], 0.1, 1.2, &sp), reactive_state(&[0.2, 0.9], -0.3, 0.8, &sp)];
    let reports = pointwise_structural_audit(&fam, &states, &CheckConfig::default()).unwrap();
    let conc = reports.iter().find(|r| r.check == CheckKind::Concavity).unwrap();
    assert_eq!(conc.verdict, Verdict::Pass, "{conc:?}");
    assert_eq!(conc.witness_vector.len(), 6);
    let fac = reports.iter().find(|r| r.check == CheckKind::SourceFactorization).unwrap();
    assert_eq!(fac.verdict, Verdict::Pass, "{fac:?}");
}

#[test]
fn single_inert_species_factorizes_trivially() {
    let sp = vec![species(2.0, 0.0)];
    let fam = AuditFamily::ReactiveFlow(ReactiveFlowParams { species: sp.clone(), reactions: vec![], theta_ref: 1.0 });
    let states = vec![reactive_state(&[1.0], 0.2, 1.1, &sp)];
    let reports = pointwise_structural_audit(&fam, &states, &CheckConfig::default()).unwrap();
    let fac = reports.iter().find(|r| r.check == CheckKind::SourceFactorization).unwrap();
    assert_eq!(fac.verdict, Verdict::Pass);
    assert_eq!(fac.residual, 0.0);
}

fn radiation(b: Option<cdf_core::zoo::audit::Closure>) -> AuditFamily {
    AuditFamily::Radiation(RadiationParams {
        cv: 1.5,
        gas_constant: 1.0,
        coupling: 1.0,
        directions: vec![1.0, -1.0],
        planck_inverse: b,
        planck_floor: 0.1,
    })
}

fn radiation_state(intensities: [f64; 2]) -> Vec<f64> {
    // ρ = 1, v = 0.1, e = 1
    vec![1.0, 0.1, 0.0, 0.0, 1.0 + 0.005, intensities[0], intensities[1]]
}

#[test]
fn monotone_planck_closure_is_concave() {
    let fam = radiation(Some(Arc::new(|y: f64| y)));
    let reports = pointwise_structural_audit(&fam, &[radiation_state([0.8, 1.3])], &CheckConfig::default()).unwrap();
    for r in &reports {
        assert_eq!(r.verdict, Verdict::Pass, "{r:?}");
    }
}

#[test]
fn non_monotone_planck_closure_fails_concavity() {
    let fam = radiation(Some(Arc::new(|y: f64| 1.0 + (y - 2.0) * (y - 2.0))));
    let states = vec![radiation_state([1.0, 1.0])];
    let reports = pointwise_structural_audit(&fam, &states, &CheckConfig::default()).unwrap();
    let conc = reports.iter().find(|r| r.check == CheckKind::Concavity).unwrap();
    assert_eq!(conc.verdict, Verdict::Fail);
    assert_eq!(conc.witness_state, states[0]);
}

#[test]
fn missing_closure_is_not_applicable() {
    let reports = pointwise_structural_audit(&radiation(None), &[radiation_state([1.0, 1.0])], &CheckConfig::default()).unwrap();
    assert_eq!(reports.len(), 3);
    assert!(reports.iter().all(|r| r.verdict == Verdict::NotApplicable));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn axonal_residual_small_everywhere(x in 0.0f64..20.0, eps in 0.3f64..3.0) {
        let p = AxonalParams { epsilon: eps, ..AxonalParams::two_population() };
        prop_assert!(steady_state_residual(&p, &[x], 1e-4).unwrap() <= 1e-8);
    }

    #[test]
    fn damped_spectrum_never_grows(k in -50.0f64..50.0) {
        let rows = dispersion_spectrum(&LinearSystemSpec::damped_telegraph(), &[k]).unwrap();
        prop_assert!(rows[0].re.iter().all(|v| *v <= 1e-12));
    }
}
