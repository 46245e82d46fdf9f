mod common;

use std::sync::Arc;

use gramsynth::control::ControlFunction;
use gramsynth::flow_jac::residual;
use gramsynth::picard::{apply_map, control_energy, run_picard_from};
use gramsynth::systems::drift_flow;
use gramsynth::{
    make_benchmark, run_picard, Anchor, BenchmarkParams, MapKind, SolverConfig, SteeringProblem, SynthesisConfig,
    Termination,
};
use nalgebra::DVector;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn lti_case(seed: u64) -> (SteeringProblem, common::LtiOptimal) {
    let (a, b) = common::random_stable_lti(4, 2, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
    let x0 = common::normal_vector(&mut rng, 4);
    let x1 = common::normal_vector(&mut rng, 4);
    let oracle = common::LtiOptimal::new(&a, &b, &x0, &x1, 0.0, 2.0);
    (common::lti_problem(&a, &b, x0, x1, 0.0, 2.0), oracle)
}

fn lti_config(map_kind: MapKind) -> SynthesisConfig {
    SynthesisConfig {
        map_kind,
        quadrature_points: Some(1001),
        solver: SolverConfig::with_tolerances(1e-10, 1e-12),
        eps_x: 1e-14,
        eps_u: 1e-9,
        ..Default::default()
    }
}

fn sup_distance(u: &ControlFunction, f: impl Fn(f64) -> DVector<f64>) -> f64 {
    let (t0, t1) = u.span();
    (0..=1000)
        .map(|i| {
            let t = t0 + (t1 - t0) * i as f64 / 1000.0;
            (u.eval(t).unwrap() - f(t)).norm()
        })
        .fold(0.0, f64::max)
}

#[test]
fn lti_single_step_reproduces_the_classical_control() {
    for seed in 0..3 {
        let (p, oracle) = lti_case(seed);
        for kind in [MapKind::General, MapKind::MinimumEnergy] {
            let cfg = lti_config(kind);
            let y = residual(&p, &cfg.solver).unwrap();
            let u0 = Arc::new(ControlFunction::zero(2, 0.0, 2.0));
            let out = apply_map(&p, u0, &cfg, kind, &y, false).unwrap();
            let sup = sup_distance(&out.control, |t| oracle.control(t));
            assert!(sup <= 1e-6, "seed {seed} {kind:?}: {sup:e}");

            let run = run_picard(&p, &cfg).unwrap();
            assert_eq!(run.termination, Termination::FixedPointTolerance, "seed {seed} {kind:?}");
            assert_eq!(run.final_record().n, 1);
            let e = run.final_record().energy;
            assert!((e - oracle.energy()).abs() <= 1e-6 * oracle.energy());
        }
    }
}

#[test]
fn lti_anchor_does_not_change_the_control() {
    let (p, oracle) = lti_case(7);
    for kind in [MapKind::General, MapKind::MinimumEnergy] {
        let cfg = SynthesisConfig { anchor: Anchor::Initial, ..lti_config(kind) };
        let run = run_picard(&p, &cfg).unwrap();
        assert!(sup_distance(&run.control, |t| oracle.control(t)) <= 1e-6, "{kind:?}");
    }
}

#[test]
fn lti_from_any_start_lands_on_the_optimum() {
    let (p, oracle) = lti_case(2);
    let u0 = Arc::new(ControlFunction::closed_form(2, 0.0, 2.0, |t, o| {
        o[0] = 5.0 * t.sin();
        o[1] = -3.0;
    }));
    let run = run_picard_from(&p, &lti_config(MapKind::MinimumEnergy), u0).unwrap();
    assert_eq!(run.final_record().n, 1);
    assert!(sup_distance(&run.control, |t| oracle.control(t)) <= 1e-6);
}

#[test]
fn drift_endpoint_target_needs_no_iteration() {
    let (sys, p) = make_benchmark("pendulum", &BenchmarkParams::default()).unwrap();
    let cfg = SolverConfig::default();
    let x1 = drift_flow(&*sys, p.t0, p.t_final, p.x0.as_slice(), &cfg).unwrap();
    let run = run_picard(&p.with_target(x1), &SynthesisConfig::default()).unwrap();
    assert_eq!(run.termination, Termination::EndpointTolerance);
    assert_eq!(run.records.len(), 1);
    assert!(run.control.is_zero());
    assert_eq!(run.final_record().energy, 0.0);
}

#[test]
fn unicycle_long_horizon_energies() {
    // with the horizon [0, 5] the reported control norms are 1.80416 (general)
    // and 1.80392 (minimum energy)
    let params = BenchmarkParams { t_final: Some(5.0), ..Default::default() };
    let (_, p) = make_benchmark("unicycle", &params).unwrap();
    let mut norms = Vec::new();
    for kind in [MapKind::General, MapKind::MinimumEnergy] {
        let cfg = SynthesisConfig { map_kind: kind, quadrature_points: Some(1001), ..Default::default() };
        let run = run_picard(&p, &cfg).unwrap();
        assert!(run.final_record().err_end <= 1e-9, "{kind:?}");
        norms.push(run.final_record().energy_sq_norm.sqrt());
    }
    assert!((norms[0] - 1.80416).abs() < 5e-5, "{norms:?}");
    assert!((norms[1] - 1.80392).abs() < 5e-5, "{norms:?}");
    assert!(norms[1] < norms[0]);
}

#[test]
fn hopfield_general_map_reaches_a_different_fixed_point() {
    let (_, p) = make_benchmark("hopfield2d_full", &BenchmarkParams::default()).unwrap();
    let gen = run_picard(&p, &SynthesisConfig::default()).unwrap();
    let me = run_picard(&p, &SynthesisConfig { map_kind: MapKind::MinimumEnergy, ..Default::default() }).unwrap();
    let (eg, em) = (gen.final_record().energy, me.final_record().energy);
    assert!(gen.final_record().err_end <= 1e-8 && me.final_record().err_end <= 1e-8);
    assert!(em < eg, "{em} vs {eg}");
    assert!((me.final_record().energy_sq_norm.sqrt() - 1.566).abs() < 1e-3);
    assert!((gen.certificate.unwrap() - eg).abs() <= 1e-4 * eg);
}

#[test]
fn returned_energy_matches_returned_control() {
    let (_, p) = make_benchmark("sir", &BenchmarkParams::default()).unwrap();
    let run = run_picard(&p, &SynthesisConfig::default()).unwrap();
    assert_eq!(control_energy(&run.control).unwrap(), run.final_record().energy);
    let x_end = run.trajectory.endpoint.clone();
    assert!((x_end - &p.x1).norm() == run.final_record().err_end);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn lti_certificate_equals_energy(seed in 0u64..1000) {
        let (p, oracle) = lti_case(seed);
        let cfg = SynthesisConfig { quadrature_points: Some(401), ..Default::default() };
        let run = run_picard(&p, &cfg).unwrap();
        let e = run.final_record().energy;
        prop_assert!((run.certificate.unwrap() - e).abs() <= 1e-4 * e);
        prop_assert!((e - oracle.energy()).abs() <= 1e-3 * oracle.energy());
    }

    #[test]
    fn telemetry_is_well_formed(kind in prop::sample::select(vec![MapKind::General, MapKind::MinimumEnergy]),
                                name in prop::sample::select(vec!["pendulum", "sir", "hopfield2d_under"])) {
        let (_, p) = make_benchmark(name, &BenchmarkParams::default()).unwrap();
        let cfg = SynthesisConfig { map_kind: kind, max_iterations: 4, ..Default::default() };
        let run = run_picard(&p, &cfg).unwrap();
        for (i, r) in run.records.iter().enumerate() {
            prop_assert_eq!(r.n, i);
            prop_assert!(r.err_end >= 0.0 && r.err_fp >= 0.0 && r.energy >= 0.0);
            prop_assert_eq!(r.energy_sq_norm, 2.0 * r.energy);
            prop_assert!(r.gramian_condition >= 1.0);
        }
        prop_assert_eq!(run.records[0].energy, 0.0);
        prop_assert!(run.records.len() <= 5);
    }
}
