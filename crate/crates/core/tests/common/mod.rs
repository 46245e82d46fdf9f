//! Brute-force LTI oracles shared by the integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use gramsynth::systems::LinearSystem;
use gramsynth::SteeringProblem;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn normal_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(rng))
}

pub fn normal_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

/// Random `(A, B)` with every eigenvalue of `A` at real part <= -0.5.
pub fn random_stable_lti(d: usize, k: usize, seed: u64) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = normal_matrix(&mut rng, d, d) / (d as f64).sqrt();
    let shift = a.complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max) + 0.5;
    for i in 0..d {
        a[(i, i)] -= shift;
    }
    (a, normal_matrix(&mut rng, d, k))
}

pub fn lti_problem(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    x0: DVector<f64>,
    x1: DVector<f64>,
    t0: f64,
    t1: f64,
) -> SteeringProblem {
    let sys = LinearSystem::new(a.clone(), b.clone()).unwrap();
    SteeringProblem::new(Arc::new(sys), x0, x1, t0, t1).unwrap()
}

pub fn expm(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.exp()
}

/// `int_0^T e^{A s} B B^T e^{A^T s} ds` by Van Loan's block exponential.
pub fn van_loan_gramian(a: &DMatrix<f64>, b: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    let d = a.nrows();
    let mut m = DMatrix::zeros(2 * d, 2 * d);
    m.view_mut((0, 0), (d, d)).copy_from(&(-a));
    m.view_mut((0, d), (d, d)).copy_from(&(b * b.transpose()));
    m.view_mut((d, d), (d, d)).copy_from(&a.transpose());
    let e = expm(&(m * t));
    let f12 = e.view((0, d), (d, d)).into_owned();
    let f22 = e.view((d, d), (d, d)).into_owned();
    f22.transpose() * f12
}

/// The same Gramian by composite Simpson on `n` nodes of `e^{A s} B`.
pub fn quadrature_gramian(a: &DMatrix<f64>, b: &DMatrix<f64>, t: f64, n: usize) -> DMatrix<f64> {
    let d = a.nrows();
    let h = t / (n - 1) as f64;
    let mut w = DMatrix::zeros(d, d);
    for i in 0..n {
        let c = if i == 0 || i == n - 1 { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
        let p = expm(&(a * (i as f64 * h))) * b;
        w += &p * p.transpose() * (c * h / 3.0);
    }
    w
}

/// Classical minimum-energy control `u(t) = B^T e^{A^T (T-t)} W^-1 (x1 - e^{A (T-t0)} x0)`.
pub struct LtiOptimal {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub t0: f64,
    pub t1: f64,
    pub eta: DVector<f64>,
    pub gramian: DMatrix<f64>,
}

impl LtiOptimal {
    pub fn new(a: &DMatrix<f64>, b: &DMatrix<f64>, x0: &DVector<f64>, x1: &DVector<f64>, t0: f64, t1: f64) -> Self {
        let gramian = van_loan_gramian(a, b, t1 - t0);
        let y = x1 - expm(&(a * (t1 - t0))) * x0;
        let eta = gramian.clone().lu().solve(&y).unwrap();
        Self { a: a.clone(), b: b.clone(), t0, t1, eta, gramian }
    }

    pub fn control(&self, t: f64) -> DVector<f64> {
        self.b.transpose() * expm(&(self.a.transpose() * (self.t1 - t))) * &self.eta
    }

    /// `1/2 int |u|^2 = 1/2 eta^T W eta`.
    pub fn energy(&self) -> f64 {
        0.5 * self.eta.dot(&(&self.gramian * &self.eta))
    }
}
