mod common;

use std::sync::Arc;

use gramsynth::control::ControlFunction;
use gramsynth::gramian::{assemble_mixed, assemble_symmetric, solve_gramian, GramianKind, SolveMethod};
use gramsynth::{make_benchmark, simpson_rule, solve_trajectory, BenchmarkParams, SolverConfig};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tight() -> SolverConfig {
    SolverConfig::with_tolerances(1e-12, 1e-14)
}

#[test]
fn van_loan_agrees_with_brute_quadrature() {
    let (a, b) = common::random_stable_lti(4, 2, 21);
    let exact = common::van_loan_gramian(&a, &b, 1.7);
    let quad = common::quadrature_gramian(&a, &b, 1.7, 2001);
    assert!((exact - quad).abs().max() < 1e-11);
}

#[test]
fn lti_gramians_match_the_controllability_gramian() {
    let (a, b) = common::random_stable_lti(4, 2, 5);
    let p = common::lti_problem(&a, &b, DVector::from_element(4, 0.5), DVector::zeros(4), 0.0, 2.0);
    let u = Arc::new(ControlFunction::zero(2, 0.0, 2.0));
    let traj = solve_trajectory(&p, u.clone(), &tight()).unwrap();
    let rule = simpson_rule(0.0, 2.0, 401).unwrap();
    let exact = common::van_loan_gramian(&a, &b, 2.0);

    let sym = assemble_symmetric(&traj, 2.0, &rule, &tight()).unwrap();
    assert_eq!(sym.kind, GramianKind::Symmetric);
    assert!((&sym.matrix - &exact).abs().max() < 1e-8 * exact.abs().max());
    let mixed = assemble_mixed(&traj, &u, 2.0, &rule, &tight()).unwrap();
    assert!((&mixed.matrix - &sym.matrix).abs().max() < 1e-10);

    // anchoring at t0 conjugates by the flow: N_0 = e^{-AT} W e^{-A^T T}
    let back = common::expm(&(&a * -2.0));
    let sym0 = assemble_symmetric(&traj, 0.0, &rule, &tight()).unwrap();
    let want0 = &back * &exact * back.transpose();
    let rel0 = (&sym0.matrix - &want0).abs().max() / want0.abs().max();
    assert!(rel0 < 1e-8, "{rel0:e}");
}

#[test]
fn simpson_gramian_converges_at_fourth_order() {
    let (a, b) = common::random_stable_lti(3, 1, 8);
    let p = common::lti_problem(&a, &b, DVector::zeros(3), DVector::zeros(3), 0.0, 3.0);
    let u = Arc::new(ControlFunction::zero(1, 0.0, 3.0));
    let traj = solve_trajectory(&p, u, &tight()).unwrap();
    let exact = common::van_loan_gramian(&a, &b, 3.0);
    let errs: Vec<f64> = [11, 21, 41]
        .iter()
        .map(|k| {
            let rule = simpson_rule(0.0, 3.0, *k).unwrap();
            (assemble_symmetric(&traj, 3.0, &rule, &tight()).unwrap().matrix - &exact).abs().max()
        })
        .collect();
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!((12.0..20.0).contains(&ratio), "{errs:?}");
    }
}

#[test]
fn pendulum_gramian_entries_refine_at_fourth_order() {
    let (_, p) = make_benchmark("pendulum", &BenchmarkParams::default()).unwrap();
    let u = Arc::new(ControlFunction::closed_form(1, 0.5, 1.5, |t, o| o[0] = 2.0 * t));
    let traj = solve_trajectory(&p, u, &tight()).unwrap();
    let g: Vec<DMatrix<f64>> = [51, 101, 201]
        .iter()
        .map(|k| assemble_symmetric(&traj, 1.5, &simpson_rule(0.5, 1.5, *k).unwrap(), &tight()).unwrap().matrix)
        .collect();
    let d1 = (&g[0] - &g[1]).abs().max();
    let d2 = (&g[1] - &g[2]).abs().max();
    assert!((8.0..=32.0).contains(&(d1 / d2)), "{d1:e} / {d2:e}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn spd_solves_meet_the_residual_gate(seed in 0u64..10_000, d in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = common::normal_matrix(&mut rng, d, d);
        let spd = &m * m.transpose() + DMatrix::identity(d, d) * 0.1;
        let y = common::normal_vector(&mut rng, d);
        let rule = simpson_rule(0.0, 1.0, 3).unwrap();
        let g = gramsynth::gramian::GramianMatrix {
            condition_estimate: gramsynth::gramian::condition_estimate(&spd, GramianKind::Symmetric),
            matrix: spd.clone(),
            kind: GramianKind::Symmetric,
            rule,
            regularization: 0.0,
        };
        let s = solve_gramian(&g, &y, 0.0).unwrap();
        prop_assert_eq!(s.method, SolveMethod::Cholesky);
        prop_assert!((&spd * &s.lambda - &y).norm() <= 1e-6 * y.norm());
        prop_assert!(g.condition_estimate >= 1.0);
    }
}
