use cdf_core::linalg::Mat;
use cdf_core::stochastic::markov::log_mean;
use cdf_core::stochastic::pea::PeaReduction;
use cdf_core::stochastic::{
    detailed_balance, fokker_planck_generator, mass_action_rhs, onsager_matrix, pea_experiment, positive_stability_check,
    simulate_mass_action, simulate_master, MarkovGenerator, OdeOptions, Reaction, ReactionNetwork, StepMode,
};
use cdf_core::StochasticError;
use nalgebra::DVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SLACK: f64 = 1e-8;

fn two_state() -> MarkovGenerator {
    MarkovGenerator::from_rates(2, &[(0, 1, 1.0), (1, 0, 2.0)]).unwrap()
}

fn ring(forward: f64, backward: f64) -> MarkovGenerator {
    let mut t = vec![];
    for j in 0..3 {
        t.push(((j + 1) % 3, j, forward));
        if backward > 0.0 {
            t.push((j, (j + 1) % 3, backward));
        }
    }
    MarkovGenerator::from_rates(3, &t).unwrap()
}

fn random_distribution(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    let v: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = v.iter().sum();
    DVector::from_iterator(n, v.into_iter().map(|x| x / s))
}

fn asymmetry(m: &Mat) -> f64 {
    (m - m.transpose()).amax()
}

fn non_increasing(series: &[f64], slack: f64) -> bool {
    series.windows(2).all(|w| w[1] <= w[0] + slack)
}

#[test]
fn two_state_steady_state_by_elimination() {
    // q₁₂·p₂ = q₂₁·p₁ with p₁ + p₂ = 1.
    let ps = two_state().steady_state().clone();
    let p1 = 1.0 / (1.0 + 2.0 / 1.0);
    assert!((ps[0] - p1).abs() < 1e-14 && (ps[1] - (1.0 - p1)).abs() < 1e-14);
}

#[test]
fn symmetric_rates_give_uniform_steady_state() {
    let g = MarkovGenerator::from_rates(4, &[(0, 1, 0.7), (1, 0, 0.7), (1, 2, 1.3), (2, 1, 1.3), (2, 3, 0.2), (3, 2, 0.2)]).unwrap();
    for v in g.steady_state().iter() {
        assert!((v - 0.25).abs() < 1e-12);
    }
}

#[test]
fn unidirectional_ring_violates_detailed_balance_by_one_third() {
    let g = ring(1.0, 0.0);
    for v in g.steady_state().iter() {
        assert!((v - 1.0 / 3.0).abs() < 1e-12);
    }
    let db = detailed_balance(&g);
    assert!(!db.holds);
    // q_{j+1,j}·p_j − q_{j,j+1}·p_{j+1} = 1·(1/3) − 0
    assert!((db.residual - 1.0 / 3.0).abs() < 1e-12);
}

#[test]
fn two_state_and_symmetric_ring_satisfy_detailed_balance() {
    assert!(detailed_balance(&two_state()).holds);
    assert!(detailed_balance(&ring(1.0, 1.0)).holds);
}

#[test]
fn reducible_generator_is_rejected() {
    let err = MarkovGenerator::from_rates(3, &[(1, 0, 1.0), (0, 1, 1.0), (2, 1, 1.0)]).unwrap_err();
    match err {
        StochasticError::Reducible { classes } => assert_eq!(classes, vec![vec![0, 1], vec![2]]),
        e => panic!("unexpected {e:?}"),
    }
}

#[test]
fn two_state_onsager_matrix() {
    let g = two_state();
    let p = DVector::from_vec(vec![0.5, 0.5]);
    let d = onsager_matrix(&g, &p).unwrap();
    // J₁ = q₁₂p₂ − q₂₁p₁
    assert!((d.j[0] - (0.5 - 1.0)).abs() < 1e-15);
    // oracle: M₁₂ = −q₁₂·p_s,2·(u₁ − u₂)/ln(u₁/u₂)
    let (u1, u2): (f64, f64) = (0.5 / (1.0 / 3.0), 0.5 / (2.0 / 3.0));
    let m12 = -(2.0 / 3.0) * (u1 - u2) / (u1 / u2).ln();
    assert!(((u1 - u2) / (u1 / u2).ln() - 0.75 / std::f64::consts::LN_2).abs() < 1e-15);
    assert!((d.m[(0, 1)] - m12).abs() < 1e-14);
    assert!(asymmetry(&d.m) < 1e-14);
    let j = g.rhs(&p);
    assert!((&j - &d.m * &d.x).amax() <= 1e-10);
    let sym = (&d.m + d.m.transpose()) * 0.5;
    assert!(sym.symmetric_eigenvalues().iter().all(|&l| l >= -1e-14));
    // eigenvalues {0, trace}
    let ps = positive_stability_check(&d.m, 1e-10);
    assert!(ps.pass);
    let tr = d.m.trace();
    let mut re: Vec<f64> = ps.eigenvalues.iter().map(|z| z.0).collect();
    re.sort_by(f64::total_cmp);
    assert!(re[0].abs() < 1e-14 && (re[1] - tr).abs() < 1e-12 && tr > 0.0);
}

#[test]
fn equilibrium_has_zero_flux() {
    let g = two_state();
    let d = onsager_matrix(&g, &g.steady_state().clone()).unwrap();
    assert!(d.j.amax() < 1e-14);
    assert!((&d.m * &d.x).amax() < 1e-14);
    assert!(d.x.iter().all(|v| (v + 1.0).abs() < 1e-14));
    assert_eq!(d.free_energy, 0.0);
}

#[test]
fn ring_onsager_matrix_is_asymmetric_but_exact() {
    let g = ring(1.0, 0.0);
    let p = DVector::from_vec(vec![0.2, 0.3, 0.5]);
    let d = onsager_matrix(&g, &p).unwrap();
    assert!(asymmetry(&d.m) > 1e-3);
    let j = DVector::from_vec(vec![0.5 - 0.2, 0.2 - 0.3, 0.3 - 0.5]);
    assert!((&j - &d.m * &d.x).amax() <= 1e-10);
}

#[test]
fn onsager_rejects_nonpositive_entries() {
    let err = onsager_matrix(&two_state(), &DVector::from_vec(vec![1.0, 0.0])).unwrap_err();
    assert!(matches!(err, StochasticError::Domain(_)));
}

#[test]
fn zero_matrix_is_not_positively_stable() {
    let r = positive_stability_check(&Mat::zeros(3, 3), 1e-10);
    assert!(!r.pass);
    assert_eq!(r.zero_count, 3);
}

#[test]
fn log_mean_matches_definition() {
    for &(a, b) in &[(1.5f64, 0.75f64), (2.0, 3.0), (1e-3, 7.0), (1.0 + 1e-5, 1.0)] {
        let exact: f64 = (a - b) / (a / b).ln();
        assert!((log_mean(a, b) - exact).abs() <= 1e-10 * exact, "{a} {b}");
        assert!((log_mean(a, b) - log_mean(b, a)).abs() <= 1e-14 * exact);
    }
}

#[test]
fn master_theorem_suite_over_random_generators() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for draw in 0..100 {
        let n = rng.random_range(2..=6);
        let g = if draw % 2 == 0 {
            MarkovGenerator::random(&mut rng, n, 0.4)
        } else {
            MarkovGenerator::random_reversible(&mut rng, n, 0.4)
        };
        let p = random_distribution(&mut rng, n);
        let d = onsager_matrix(&g, &p).unwrap();
        assert!((g.rhs(&p) - &d.m * &d.x).amax() <= 1e-10, "draw {draw}");
        let ones = DVector::from_element(n, 1.0 / (n as f64).sqrt());
        assert!((&d.m * ones).amax() <= 1e-10, "draw {draw}");
        let ps = positive_stability_check(&d.m, 1e-10);
        assert!(ps.pass, "draw {draw}: {ps:?}");
        let db = detailed_balance(&g);
        assert_eq!(asymmetry(&d.m) <= 1e-10, db.holds, "draw {draw}: residual {}", db.residual);
    }
}

#[test]
fn steady_start_is_constant() {
    let g = ring(1.0, 0.5);
    let t = simulate_master(&g, &g.steady_state().clone(), 2.0, 0.05, StepMode::Implicit).unwrap();
    for (s, f) in t.states.iter().zip(&t.free_energy) {
        assert!((s - g.steady_state()).amax() < 1e-12);
        assert!(f.abs() < 1e-12);
    }
}

#[test]
fn two_state_relaxes_at_rate_three() {
    let g = two_state();
    let p0 = DVector::from_vec(vec![1.0, 0.0]);
    let t = simulate_master(&g, &p0, 2.0, 1e-3, StepMode::Implicit).unwrap();
    for (tk, s) in t.times.iter().zip(&t.states) {
        let exact = 1.0 / 3.0 + (2.0 / 3.0) * (-3.0 * tk).exp();
        assert!((s[0] - exact).abs() < 1e-6, "t = {tk}");
        assert!((s.sum() - 1.0).abs() < 1e-10);
    }
    assert!(non_increasing(&t.free_energy, 1e-10));
}

#[test]
fn non_detailed_balance_ring_still_dissipates() {
    let g = ring(2.0, 0.3);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let p0 = random_distribution(&mut rng, 3);
    let t = simulate_master(&g, &p0, 10.0, 0.01, StepMode::Implicit).unwrap();
    assert!(non_increasing(&t.free_energy, 1e-10));
    assert!(t.free_energy.last().unwrap() < &1e-8);
    assert!(t.production.iter().all(|v| *v >= -1e-12));
}

#[test]
fn explicit_stepping_reports_step_size() {
    let g = ring(10.0, 10.0);
    let p0 = DVector::from_vec(vec![1.0, 0.0, 0.0]);
    assert!(matches!(simulate_master(&g, &p0, 1.0, 0.5, StepMode::Explicit), Err(StochasticError::StepSize { .. })));
    assert!(simulate_master(&g, &p0, 1.0, 0.01, StepMode::Explicit).is_ok());
}

#[test]
fn ornstein_uhlenbeck_steady_state_is_gaussian() {
    let fp = fokker_planck_generator(&|x| -x, &|_| 1.0, -5.0, 5.0, 200).unwrap();
    let w: Vec<f64> = fp.centers.iter().map(|x| (-x * x / 2.0).exp()).collect();
    let z: f64 = w.iter().sum();
    let l1: f64 = fp.generator.steady_state().iter().zip(&w).map(|(p, g)| (p - g / z).abs()).sum();
    assert!(l1 < 1e-3, "L1 = {l1:e}");
}

#[test]
fn pure_diffusion_steady_state_is_uniform() {
    let fp = fokker_planck_generator(&|_| 0.0, &|_| 1.0, -1.0, 1.0, 40).unwrap();
    assert!(fp.generator.steady_state().iter().all(|p| (p - 1.0 / 40.0).abs() < 1e-12));
}

#[test]
fn fokker_planck_rates_form_a_generator() {
    let fp = fokker_planck_generator(&|x| -2.0 * x + 0.3, &|x| 0.5 + 0.1 * x * x, -3.0, 3.0, 120).unwrap();
    let q = fp.generator.rates();
    for j in 0..q.ncols() {
        assert!(q.column(j).sum().abs() < 1e-10);
        for i in 0..q.nrows() {
            if i != j {
                assert!(q[(i, j)] >= 0.0);
            }
        }
    }
}

#[test]
fn tsallis_functional_decreases_for_ornstein_uhlenbeck() {
    let fp = fokker_planck_generator(&|x| -x, &|_| 1.0, -5.0, 5.0, 200).unwrap();
    let mut p0 = DVector::zeros(200);
    for (i, x) in fp.centers.iter().enumerate() {
        p0[i] = (-(x - 2.0) * (x - 2.0) / 0.1).exp();
    }
    p0 /= p0.sum();
    let t = simulate_master(&fp.generator, &p0, 2.0, 0.01, StepMode::Implicit).unwrap();
    let f2: Vec<f64> = t.states.iter().map(|p| fp.tsallis(p)).collect();
    assert!(non_increasing(&f2, 1e-10));
    assert!(f2.last().unwrap() < &f2[0]);
}

#[test]
fn coarse_fokker_planck_grid_is_rejected() {
    let err = fokker_planck_generator(&|x| -20.0 * x, &|_| 0.1, -5.0, 5.0, 20).unwrap_err();
    assert!(matches!(err, StochasticError::Discretization(_)));
}

fn isomerization() -> ReactionNetwork {
    ReactionNetwork::new(
        vec!["A".into(), "B".into()],
        vec![Reaction { nu_plus: vec![1, 0], nu_minus: vec![0, 1], k_plus: 2.0, k_minus: 1.0 }],
    )
    .unwrap()
}

#[test]
fn mass_action_rhs_examples() {
    let net = isomerization();
    assert_eq!(mass_action_rhs(&net, &[1.0, 0.0]).unwrap().as_slice(), &[-2.0, 2.0]);
    let ce = [1.0 / 3.0, 2.0 / 3.0];
    assert!(mass_action_rhs(&net, &ce).unwrap().amax() < 1e-15);
    assert!(matches!(mass_action_rhs(&net, &[1.0, -1e-3]), Err(StochasticError::Domain(_))));
}

#[test]
fn isomerization_reaches_two_to_one_ratio() {
    let net = isomerization().with_equilibrium(vec![1.0 / 3.0, 2.0 / 3.0]).unwrap();
    let t = simulate_mass_action(&net, &[1.0, 0.0], 20.0, &OdeOptions::default(), None).unwrap();
    let last = t.states.last().unwrap();
    assert!((last[0] - 1.0 / 3.0).abs() < 1e-9 && (last[1] - 2.0 / 3.0).abs() < 1e-9);
    assert!(non_increasing(t.free_energy.as_ref().unwrap(), 1e-10));
    assert!(t.warning.is_none());
}

#[test]
fn equilibrium_start_stays_put() {
    let ce = vec![1.0 / 3.0, 2.0 / 3.0];
    let net = isomerization().with_equilibrium(ce.clone()).unwrap();
    let t = simulate_mass_action(&net, &ce, 5.0, &OdeOptions::default(), None).unwrap();
    for s in &t.states {
        assert!((s[0] - ce[0]).abs() < 1e-14);
    }
    assert!(t.free_energy.unwrap().iter().all(|f| f.abs() < 1e-14));
}

#[test]
fn missing_equilibrium_warns_but_integrates() {
    let t = simulate_mass_action(&isomerization(), &[1.0, 0.0], 1.0, &OdeOptions::default(), None).unwrap();
    assert!(t.free_energy.is_none());
    assert!(t.warning.is_some());
    assert!(t.states.len() > 2);
}

#[test]
fn unbalanced_equilibrium_is_rejected() {
    assert!(isomerization().with_equilibrium(vec![0.5, 0.5]).is_err());
}

#[test]
fn michaelis_menten_conserves_enzyme_and_substrate() {
    let net = ReactionNetwork::michaelis_menten(3.0, 1.0, 0.7).unwrap();
    let t = simulate_mass_action(&net, &[1.0, 0.4, 0.1, 0.0], 10.0, &OdeOptions::default(), None).unwrap();
    let (e0, s0) = (0.4 + 0.1, 1.0 + 0.1);
    for s in &t.states {
        assert!((s[1] + s[2] - e0).abs() <= 1e-10);
        assert!((s[0] + s[2] + s[3] - s0).abs() <= 1e-10);
    }
    let w = net.conservation_laws();
    assert_eq!(w.ncols(), 2);
    let s = net.stoichiometry();
    assert!((w.transpose() * s).amax() < 1e-12);
}

#[test]
fn random_reversible_networks_dissipate() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let net = ReactionNetwork::random_reversible(&mut rng, 3, 3);
        let c0: Vec<f64> = (0..3).map(|_| rng.random_range(0.1..2.0)).collect();
        let t = simulate_mass_action(&net, &c0, 10.0, &OdeOptions::default(), None).unwrap();
        assert!(non_increasing(t.free_energy.as_ref().unwrap(), 1e-10));
        let w = net.conservation_laws();
        let inv0 = w.transpose() * DVector::from_column_slice(&c0);
        for s in &t.states {
            assert!((w.transpose() * s - &inv0).amax() <= 1e-10 * 10.0);
        }
    }
}

#[test]
fn free_energy_is_lyapunov_across_random_systems() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut systems = 0;
    for _ in 0..10 {
        let n = rng.random_range(2..=6);
        let g = MarkovGenerator::random(&mut rng, n, 0.5);
        let p0 = random_distribution(&mut rng, n);
        let t = simulate_master(&g, &p0, 5.0, 0.02, StepMode::Implicit).unwrap();
        assert!(non_increasing(&t.free_energy, SLACK));
        systems += 1;
    }
    for _ in 0..5 {
        let net = ReactionNetwork::random_reversible(&mut rng, 4, 3);
        let c0: Vec<f64> = (0..4).map(|_| rng.random_range(0.1..2.0)).collect();
        let t = simulate_mass_action(&net, &c0, 5.0, &OdeOptions::default(), None).unwrap();
        assert!(non_increasing(t.free_energy.as_ref().unwrap(), SLACK));
        systems += 1;
    }
    for _ in 0..5 {
        let (k, d) = (rng.random_range(0.5..2.0), rng.random_range(0.5..1.5));
        let fp = fokker_planck_generator(&move |x| -k * x, &move |_| d, -4.0, 4.0, 80).unwrap();
        let p0 = random_distribution(&mut rng, 80);
        let t = simulate_master(&fp.generator, &p0, 1.0, 0.01, StepMode::Implicit).unwrap();
        let f2: Vec<f64> = t.states.iter().map(|p| fp.tsallis(p)).collect();
        assert!(non_increasing(&f2, SLACK));
        systems += 1;
    }
    assert!(systems >= 20);
}

fn mm_pea(c0: &[f64]) -> cdf_core::stochastic::PeaReport {
    let net = ReactionNetwork::michaelis_menten(1.0, 1.0, 1.0).unwrap();
    pea_experiment(&net, &[0], &[1], c0, 5.0, &[1e-1, 1e-2, 1e-3, 1e-4], &OdeOptions::default()).unwrap()
}

#[test]
fn michaelis_menten_reduction_converges_linearly() {
    let rep = mm_pea(&[1.0, 0.5, 0.0, 0.0]);
    assert!(rep.t0 > 0.0);
    assert!(rep.rows.windows(2).all(|w| w[1].error < w[0].error), "{rep:?}");
    assert!(rep.slope.unwrap() >= 0.9, "{rep:?}");
}

#[test]
fn reduction_from_fast_equilibrium_still_converges() {
    // S·E = ES with k₁ = k₋₁ = 1
    let (s, e) = (1.0, 0.5);
    let rep = mm_pea(&[s, e, s * e, 0.0]);
    assert!(rep.rows.last().unwrap().error < 1e-3);
    assert!(rep.rows.last().unwrap().error < rep.rows[0].error);
}

#[test]
fn pure_fast_equilibrium_is_reached() {
    let net = ReactionNetwork::michaelis_menten(1.0, 1.0, 1.0).unwrap();
    let fast_only = ReactionNetwork::new(net.species.clone(), vec![net.reactions[0].clone()]).unwrap();
    let red = PeaReduction::new(&fast_only, &[0], &[]).unwrap();
    let c0 = [1.0, 0.5, 0.0, 0.0];
    let c = red.lift(&red.reduce(&c0), &c0, 0.0).unwrap();
    assert!((c[0] * c[1] - c[2]).abs() < 1e-10);
    let rep = pea_experiment(&fast_only, &[0], &[], &c0, 1.0, &[1e-2, 1e-3], &OdeOptions::default()).unwrap();
    // the layer has decayed by e^{-10} at t₀ for the largest ε
    assert!(rep.rows[0].error < 1e-4 && rep.rows[1].error < 1e-8, "{rep:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn simulation_stays_on_simplex(seed in any::<u64>(), n in 2usize..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = MarkovGenerator::random(&mut rng, n, 0.3);
        let p0 = random_distribution(&mut rng, n);
        let t = simulate_master(&g, &p0, 2.0, 0.05, StepMode::Implicit).unwrap();
        for s in &t.states {
            prop_assert!((s.sum() - 1.0).abs() <= 1e-10);
            prop_assert!(s.iter().all(|v| *v >= -1e-12));
        }
        prop_assert!(non_increasing(&t.free_energy, SLACK));
    }

    #[test]
    fn onsager_structure_holds(seed in any::<u64>(), n in 2usize..=6, reversible in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = if reversible { MarkovGenerator::random_reversible(&mut rng, n, 0.5) } else { MarkovGenerator::random(&mut rng, n, 0.5) };
        let p = random_distribution(&mut rng, n);
        let d = onsager_matrix(&g, &p).unwrap();
        prop_assert!(d.residual <= 1e-10);
        prop_assert!(positive_stability_check(&d.m, 1e-10).pass);
        prop_assert_eq!(asymmetry(&d.m) <= 1e-10, detailed_balance(&g).holds);
        // −dF/dt = XᵀMX ≥ 0 up to k_BT scaling
        prop_assert!(d.x.dot(&(&d.m * &d.x)) >= -1e-12);
    }

    #[test]
    fn rhs_annihilated_by_conservation_laws(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = ReactionNetwork::random_reversible(&mut rng, 4, 3);
        let c: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..3.0)).collect();
        let r = mass_action_rhs(&net, &c).unwrap();
        prop_assert!((net.conservation_laws().transpose() * r).amax() <= 1e-12);
    }
}

#[test]
fn steep_birth_death_steady_state_has_relative_accuracy() {
    // Masses span ~20 decades; the ratio of neighbours is the rate ratio.
    let fp = fokker_planck_generator(&|x| -0.5 * (0.5 + 4.0 * x + 0.2 * x * x * x), &|_| 0.5, -4.0, 4.0, 160).unwrap();
    let q = fp.generator.rates();
    let ps = fp.generator.steady_state();
    assert!(ps.iter().all(|v| *v > 0.0));
    assert!(ps.min() / ps.max() < 1e-15);
    for i in 0..ps.len() - 1 {
        let ratio = q[(i + 1, i)] / q[(i, i + 1)];
        assert!((ps[i + 1] / ps[i] - ratio).abs() <= 1e-12 * ratio, "cell {i}");
    }
}
