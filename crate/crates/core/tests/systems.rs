mod common;

use std::sync::Arc;

use gramsynth::systems::{drift_flow, jacobian_fd, LinearSystem, BENCHMARK_NAMES};
use gramsynth::{make_benchmark, BenchmarkParams, ControlAffineSystem, SolverConfig};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn small_params(name: &str) -> BenchmarkParams {
    if name == "mindy_like" {
        BenchmarkParams { dim: Some(6), inputs: Some(3), seed: Some(4), ..Default::default() }
    } else {
        BenchmarkParams::default()
    }
}

fn systems() -> Vec<Arc<dyn ControlAffineSystem>> {
    BENCHMARK_NAMES.iter().map(|n| make_benchmark(n, &small_params(n)).unwrap().0).collect()
}

fn check_jacobians(sys: &dyn ControlAffineSystem, t: f64, x: &[f64], u: &[f64]) -> Result<(), TestCaseError> {
    let d = sys.state_dim();
    let mut analytic = DMatrix::zeros(d, d);
    sys.drift_jacobian(t, x, &mut analytic);
    let fd = jacobian_fd(
        |tt, xx| {
            let mut out = vec![0.0; d];
            sys.drift(tt, xx, &mut out);
            out
        },
        t,
        x,
        1e-6,
    )
    .unwrap();
    let scale = 1.0 + analytic.abs().max();
    prop_assert!((&analytic - &fd).abs().max() <= 1e-6 * scale, "{}: drift Jacobian", sys.name());

    sys.closed_loop_jacobian(t, x, u, &mut analytic);
    let fd = jacobian_fd(
        |tt, xx| {
            let mut out = vec![0.0; d];
            sys.vector_field(tt, xx, u, &mut out);
            out
        },
        t,
        x,
        1e-6,
    )
    .unwrap();
    let scale = 1.0 + analytic.abs().max();
    prop_assert!((&analytic - &fd).abs().max() <= 1e-6 * scale, "{}: closed-loop Jacobian", sys.name());
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn analytic_jacobians_match_finite_differences(
        t in 0.0f64..2.0,
        raw in prop::collection::vec(-1.0f64..1.0, 6),
        uraw in prop::collection::vec(-2.0f64..2.0, 6),
    ) {
        for sys in systems() {
            let x = &raw[..sys.state_dim()];
            let u = &uraw[..sys.input_dim()];
            check_jacobians(&*sys, t, x, u)?;
        }
    }

    #[test]
    fn drift_flow_semigroup(s in 0.0f64..0.5, m in 0.5f64..1.0, e in 1.0f64..1.5) {
        let cfg = SolverConfig::with_tolerances(1e-11, 1e-13);
        for name in ["pendulum", "sir", "hopfield2d_full", "spacecraft"] {
            let (sys, p) = make_benchmark(name, &BenchmarkParams::default()).unwrap();
            let x = p.x0.as_slice();
            let direct = drift_flow(&*sys, s, e, x, &cfg).unwrap();
            let mid = drift_flow(&*sys, s, m, x, &cfg).unwrap();
            let composed = drift_flow(&*sys, m, e, mid.as_slice(), &cfg).unwrap();
            prop_assert!((&direct - &composed).norm() <= 1e-8 * (1.0 + direct.norm()), "{name}");
            let back = drift_flow(&*sys, e, s, direct.as_slice(), &cfg).unwrap();
            prop_assert!((&back - &p.x0).norm() <= 1e-7 * (1.0 + p.x0.norm()), "{name}");
        }
    }
}

#[test]
fn lti_drift_flow_is_matrix_exponential() {
    let (a, b) = common::random_stable_lti(4, 2, 9);
    let sys = LinearSystem::new(a.clone(), b).unwrap();
    let x = DVector::from_vec(vec![1.0, -0.5, 0.25, 2.0]);
    let cfg = SolverConfig::with_tolerances(1e-12, 1e-14);
    let got = drift_flow(&sys, 0.3, 1.8, x.as_slice(), &cfg).unwrap();
    let want = common::expm(&(&a * 1.5)) * &x;
    assert!((got - want).norm() < 1e-10);
}

#[test]
fn catalog_dimensions() {
    let dims: Vec<(usize, usize)> = systems().iter().map(|s| (s.state_dim(), s.input_dim())).collect();
    assert_eq!(dims, vec![(3, 2), (2, 1), (3, 1), (6, 3), (2, 2), (2, 1), (6, 3)]);
}

#[test]
fn state_dependent_input_matrices_are_flagged() {
    for sys in systems() {
        let d = sys.state_dim();
        let k = sys.input_dim();
        let x0 = vec![0.1; d];
        let x1 = vec![0.7; d];
        let (mut b0, mut b1) = (DMatrix::zeros(d, k), DMatrix::zeros(d, k));
        sys.input_matrix(0.2, &x0, &mut b0);
        sys.input_matrix(0.2, &x1, &mut b1);
        if sys.input_is_state_independent() {
            assert_eq!(b0, b1, "{}", sys.name());
        }
    }
}
