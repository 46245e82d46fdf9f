//! Benchmark systems and their default steering setups.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use super::{ControlAffineSystem, SteeringProblem};
use crate::error::{Error, Result};

pub const BENCHMARK_NAMES: [&str; 7] = [
    "unicycle",
    "pendulum",
    "sir",
    "spacecraft",
    "hopfield2d_full",
    "hopfield2d_under",
    "mindy_like",
];

/// Optional overrides applied on top of a catalog entry.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkParams {
    /// State dimension (mindy_like only).
    pub dim: Option<usize>,
    /// Input dimension (mindy_like only).
    pub inputs: Option<usize>,
    /// Parameter seed (mindy_like only).
    pub seed: Option<u64>,
    pub t0: Option<f64>,
    pub t_final: Option<f64>,
    pub x0: Option<Vec<f64>>,
    pub x1: Option<Vec<f64>>,
    /// Named model coefficients, e.g. `lambda`, `beta` for the pendulum.
    pub coefficients: BTreeMap<String, f64>,
}

impl BenchmarkParams {
    fn coefficient(&self, key: &str, default: f64) -> f64 {
        self.coefficients.get(key).copied().unwrap_or(default)
    }

    fn check_keys(&self, system: &str, allowed: &[&str]) -> Result<()> {
        for key in self.coefficients.keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(Error::InvalidConfig(format!("`{system}` has no coefficient `{key}`")));
            }
        }
        Ok(())
    }
}

/// Build a catalog system together with its default boundary data.
pub fn make_benchmark(
    name: &str,
    params: &BenchmarkParams,
) -> Result<(Arc<dyn ControlAffineSystem>, SteeringProblem)> {
    let (system, x0, x1, t0, t_final): (Arc<dyn ControlAffineSystem>, Vec<f64>, Vec<f64>, f64, f64) =
        match name {
            "unicycle" => {
                params.check_keys(name, &[])?;
                (
                    Arc::new(Unicycle),
                    vec![0.5, 0.25, PI / 12.0],
                    vec![1.0, 0.75, 4.0 * PI / 3.0],
                    0.0,
                    2.0,
                )
            }
            "pendulum" => {
                params.check_keys(name, &["lambda", "beta"])?;
                let sys = Pendulum {
                    lambda: params.coefficient("lambda", 0.78),
                    beta: params.coefficient("beta", 0.13),
                };
                (Arc::new(sys), vec![0.0, 0.0], vec![PI, 0.0], 0.5, 1.5)
            }
            "sir" => {
                params.check_keys(name, &["lambda", "beta", "mu", "gamma"])?;
                let sys = Sir {
                    lambda: params.coefficient("lambda", 1.0),
                    beta: params.coefficient("beta", 2.0),
                    mu: params.coefficient("mu", 0.2),
                    gamma: params.coefficient("gamma", 1.0),
                };
                (Arc::new(sys), vec![1.0, 0.2, 0.1], vec![0.5, 0.25, 0.2], 0.0, 0.5)
            }
            "spacecraft" => {
                params.check_keys(name, &["j1", "j2", "j3"])?;
                let sys = Spacecraft::new([
                    params.coefficient("j1", 10.0),
                    params.coefficient("j2", 20.0),
                    params.coefficient("j3", 15.0),
                ]);
                (Arc::new(sys), vec![0.3, 0.2, 0.1, 0.0, 0.0, 0.0], vec![0.0; 6], 0.0, 5.0)
            }
            "hopfield2d_full" | "hopfield2d_under" => {
                params.check_keys(name, &[])?;
                let sys = if name == "hopfield2d_full" { Hopfield2d::full() } else { Hopfield2d::under() };
                (Arc::new(sys), vec![1.0, 1.0], vec![-1.0, -1.0], 0.0, 1.5)
            }
            "mindy_like" => {
                params.check_keys(name, &["beta", "alpha", "spectral_radius"])?;
                let d = params.dim.unwrap_or(100);
                let k = params.inputs.unwrap_or(d);
                let seed = params.seed.unwrap_or(0);
                let mut sys = mindy_like(d, k, seed)?;
                if let Some(rho) = params.coefficients.get("spectral_radius") {
                    sys = sys.with_spectral_radius(*rho)?;
                }
                sys.beta = params.coefficient("beta", sys.beta);
                if let Some(a) = params.coefficients.get("alpha") {
                    sys.alpha.fill(*a);
                }
                (Arc::new(sys), vec![1.0; d], vec![-0.5; d], 0.0, 3.0)
            }
            other => return Err(Error::UnknownSystem(other.to_string())),
        };

    let d = system.state_dim();
    let x0 = params.x0.clone().unwrap_or(x0);
    let x1 = params.x1.clone().unwrap_or(x1);
    if x0.len() != d || x1.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: if x0.len() != d { x0.len() } else { x1.len() } });
    }
    let problem = SteeringProblem::new(
        system.clone(),
        DVector::from_vec(x0),
        DVector::from_vec(x1),
        params.t0.unwrap_or(t0),
        params.t_final.unwrap_or(t_final),
    )?;
    Ok((system, problem))
}

/// Kinematic unicycle, state `(p_x, p_y, theta)`, input `(v, omega)`. Driftless.
#[derive(Debug, Clone, Copy)]
pub struct Unicycle;

impl ControlAffineSystem for Unicycle {
    fn name(&self) -> &str {
        "unicycle"
    }
    fn state_dim(&self) -> usize {
        3
    }
    fn input_dim(&self) -> usize {
        2
    }
    fn drift(&self, _t: f64, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn input_matrix(&self, _t: f64, x: &[f64], out: &mut DMatrix<f64>) {
        out.fill(0.0);
        out[(0, 0)] = x[2].cos();
        out[(1, 0)] = x[2].sin();
        out[(2, 1)] = 1.0;
    }
    fn drift_jacobian(&self, _t: f64, _x: &[f64], out: &mut DMatrix<f64>) {
        out.fill(0.0);
    }
    fn input_is_state_independent(&self) -> bool {
        false
    }
    fn input_jacobian_action(&self, _t: f64, x: &[f64], u: &[f64], out: &mut DMatrix<f64>) {
        out.fill(0.0);
        out[(0, 2)] = -x[2].sin() * u[0];
        out[(1, 2)] = x[2].cos() * u[0];
    }
}

/// Torque-controlled pendulum with periodically varying length.
#[derive(Debug, Clone, Copy)]
pub struct Pendulum {
    pub lambda: f64,
    pub beta: f64,
}

impl Pendulum {
    /// `(a(t), gamma(t), b(t))`.
    pub fn coefficients(&self, t: f64) -> (f64, f64, f64) {
        let b = (1.0 + 0.5 * t.cos()).powi(-2);
        let a = self.lambda * self.lambda * b.sqrt();
        let gamma = -b * t.sin() + self.beta * self.lambda;
        (a, gamma, b)
    }
}

impl ControlAffineSystem for Pendulum {
    fn name(&self) -> &str {
        "pendulum"
    }
    fn state_dim(&self) -> usize {
        2
    }
    fn input_dim(&self) -> usize {
        1
    }
    fn drift(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let (a, gamma, _) = self.coefficients(t);
        out[0] = x[1];
        out[1] = -a * x[0].sin() - gamma * x[1];
    }
    fn input_matrix(&self, t: f64, _x: &[f64], out: &mut DMatrix<f64>) {
        let (_, _, b) = self.coefficients(t);
        out[(0, 0)] = 0.0;
        out[(1, 0)] = b;
    }
    fn drift_jacobian(&self, t: f64, x: &[f64], out: &mut DMatrix<f64>) {
        let (a, gamma, _) = self.coefficients(t);
        out[(0, 0)] = 0.0;
        out[(0, 1)] = 1.0;
        out[(1, 0)] = -a * x[0].cos();
        out[(1, 1)] = -gamma;
    }
}

/// SIR epidemic model with the input acting on the susceptible compartment.
#[derive(Debug, Clone, Copy)]
pub struct Sir {
    pub lambda: f64,
    pub beta: f64,
    pub mu: f64,
    pub gamma: f64,
}

impl ControlAffineSystem for Sir {
    fn name(&self) -> &str {
        "sir"
    }
    fn state_dim(&self) -> usize {
        3
    }
    fn input_dim(&self) -> usize {
        1
    }
    fn drift(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        let (s, i, r) = (x[0], x[1], x[2]);
        out[0] = self.lambda - self.beta * s * i - self.mu * s;
        out[1] = self.beta * s * i - (self.mu + self.gamma) * i;
        out[2] = self.gamma * i - self.mu * r;
    }
    fn input_matrix(&self, _t: f64, x: &[f64], out: &mut DMatrix<f64>) {
        out[(0, 0)] = -x[0];
        out[(1, 0)] = 0.0;
        out[(2, 0)] = 0.0;
    }
    fn drift_jacobian(&self, _t: f64, x: &[f64], out: &mut DMatrix<f64>) {
        let (s, i) = (x[0], x[1]);
        out.fill(0.0);
        out[(0, 0)] = -self.beta * i - self.mu;
        out[(0, 1)] = -self.beta * s;
        out[(1, 0)] = self.beta * i;
        out[(1, 1)] = self.beta * s - (self.mu + self.gamma);
        out[(2, 1)] = self.gamma;
        out[(2, 2)] = -self.mu;
    }
    fn input_is_state_independent(&self) -> bool {
        false
    }
    fn input_jacobian_action(&self, _t: f64, _x: &[f64], u: &[f64], out: &mut DMatrix<f64>) {
        out.fill(0.0);
        out[(0, 0)] = -u[0];
    }
}

/// Rigid spacecraft: 3-2-1 Euler angles `(phi, theta, psi)` and body rates,
/// torques enter through `J^{-1}`.
#[derive(Debug, Clone, Copy)]
pub struct Spacecraft {
    pub inertia: [f64; 3],
}

impl Spacecraft {
    pub fn new(inertia: [f64; 3]) -> Self {
        Self { inertia }
    }

    fn euler_coefficients(&self) -> [f64; 3] {
        let [j1, j2, j3] = self.inertia;
        [(j2 - j3) / j1, (j3 - j1) / j2, (j1 - j2) / j3]
    }
}

impl ControlAffineSystem for Spacecraft {
    fn name(&self) -> &str {
        "spacecraft"
    }
    fn state_dim(&self) -> usize {
        6
    }
    fn input_dim(&self) -> usize {
        3
    }
    fn drift(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        let (phi, theta) = (x[0], x[1]);
        let (w1, w2, w3) = (x[3], x[4], x[5]);
        let (sp, cp) = phi.sin_cos();
        let (tt, ct) = (theta.tan(), theta.cos());
        out[0] = w1 + sp * tt * w2 + cp * tt * w3;
        out[1] = cp * w2 - sp * w3;
        out[2] = (sp * w2 + cp * w3) / ct;
        let [a1, a2, a3] = self.euler_coefficients();
        out[3] = a1 * w2 * w3;
        out[4] = a2 * w1 * w3;
        out[5] = a3 * w1 * w2;
    }
    fn input_matrix(&self, _t: f64, _x: &[f64], out: &mut DMatrix<f64>) {
        out.fill(0.0);
        for i in 0..3 {
            out[(3 + i, i)] = 1.0 / self.inertia[i];
        }
    }
    fn drift_jacobian(&self, _t: f64, x: &[f64], out: &mut DMatrix<f64>) {
        let (phi, theta) = (x[0], x[1]);
        let (w1, w2, w3) = (x[3], x[4], x[5]);
        let (sp, cp) = phi.sin_cos();
        let (st, ct) = theta.sin_cos();
        let tt = st / ct;
        let sec2 = 1.0 / (ct * ct);
        out.fill(0.0);
        out[(0, 0)] = cp * tt * w2 - sp * tt * w3;
        out[(0, 1)] = (sp * w2 + cp * w3) * sec2;
        out[(0, 3)] = 1.0;
        out[(0, 4)] = sp * tt;
        out[(0, 5)] = cp * tt;
        out[(1, 0)] = -sp * w2 - cp * w3;
        out[(1, 4)] = cp;
        out[(1, 5)] = -sp;
        out[(2, 0)] = (cp * w2 - sp * w3) / ct;
        out[(2, 1)] = (sp * w2 + cp * w3) * st * sec2;
        out[(2, 4)] = sp / ct;
        out[(2, 5)] = cp / ct;
        let [a1, a2, a3] = self.euler_coefficients();
        out[(3, 4)] = a1 * w3;
        out[(3, 5)] = a1 * w2;
        out[(4, 3)] = a2 * w3;
        out[(4, 5)] = a2 * w1;
        out[(5, 3)] = a3 * w2;
        out[(5, 4)] = a3 * w1;
    }
}

/// Two-neuron Hopfield network `-C x + W tanh(x)` with a full or single input.
#[derive(Debug, Clone)]
pub struct Hopfield2d {
    name: &'static str,
    input: DMatrix<f64>,
}

impl Hopfield2d {
    const DECAY: [f64; 2] = [0.5, 0.3];
    const WEIGHTS: [[f64; 2]; 2] = [[0.5, -1.5], [1.5, -0.5]];

    pub fn full() -> Self {
        Self { name: "hopfield2d_full", input: DMatrix::identity(2, 2) }
    }

    pub fn under() -> Self {
        Self { name: "hopfield2d_under", input: DMatrix::from_column_slice(2, 1, &[1.0, 0.5]) }
    }
}

impl ControlAffineSystem for Hopfield2d {
    fn name(&self) -> &str {
        self.name
    }
    fn state_dim(&self) -> usize {
        2
    }
    fn input_dim(&self) -> usize {
        self.input.ncols()
    }
    fn drift(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        let th = [x[0].tanh(), x[1].tanh()];
        for i in 0..2 {
            out[i] = -Self::DECAY[i] * x[i] + Self::WEIGHTS[i][0] * th[0] + Self::WEIGHTS[i][1] * th[1];
        }
    }
    fn input_matrix(&self, _t: f64, _x: &[f64], out: &mut DMatrix<f64>) {
        out.copy_from(&self.input);
    }
    fn drift_jacobian(&self, _t: f64, x: &[f64], out: &mut DMatrix<f64>) {
        let sech2 = [1.0 - x[0].tanh().powi(2), 1.0 - x[1].tanh().powi(2)];
        for i in 0..2 {
            for j in 0..2 {
                out[(i, j)] = Self::WEIGHTS[i][j] * sech2[j] - if i == j { Self::DECAY[i] } else { 0.0 };
            }
        }
    }
}

/// Hopfield-type surrogate of a whole-brain model:
/// `N(x) = -D x + W psi(x)`, `psi(x) = sqrt(a^2 + (b x + 1/2)^2) - sqrt(a^2 + (b x - 1/2)^2)`,
/// with the first `k` coordinate directions actuated.
#[derive(Debug, Clone)]
pub struct Mindy {
    pub weights: DMatrix<f64>,
    pub decay: DVector<f64>,
    pub alpha: DVector<f64>,
    pub beta: f64,
    pub inputs: usize,
}

impl Mindy {
    pub fn activation(&self, i: usize, x: f64) -> f64 {
        let a2 = self.alpha[i] * self.alpha[i];
        let bx = self.beta * x;
        (a2 + (bx + 0.5).powi(2)).sqrt() - (a2 + (bx - 0.5).powi(2)).sqrt()
    }

    pub fn activation_slope(&self, i: usize, x: f64) -> f64 {
        let a2 = self.alpha[i] * self.alpha[i];
        let bx = self.beta * x;
        let p = bx + 0.5;
        let m = bx - 0.5;
        self.beta * (p / (a2 + p * p).sqrt() - m / (a2 + m * m).sqrt())
    }

    /// Rescale the weights to a new spectral radius.
    pub fn with_spectral_radius(mut self, rho: f64) -> Result<Self> {
        let current = spectral_radius(&self.weights);
        if !(current > 0.0) || !(rho >= 0.0) {
            return Err(Error::InvalidConfig(format!("cannot rescale spectral radius {current} to {rho}")));
        }
        self.weights *= rho / current;
        Ok(self)
    }
}

fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Seeded surrogate: `W` i.i.d. normal rescaled to spectral radius 0.9,
/// decay uniform in `[0.3, 0.7]`, `alpha = 1`, `beta = 20/3`.
pub fn mindy_like(d: usize, k: usize, seed: u64) -> Result<Mindy> {
    if d == 0 || k == 0 || k > d {
        return Err(Error::InvalidConfig(format!("mindy_like needs 1 <= k <= d, got d = {d}, k = {k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<f64> = (0..d * d).map(|_| StandardNormal.sample(&mut rng)).collect();
    let weights = DMatrix::from_row_slice(d, d, &raw);
    let decay_dist = Uniform::new_inclusive(0.3, 0.7);
    let decay = DVector::from_iterator(d, (0..d).map(|_| decay_dist.sample(&mut rng)));
    let sys = Mindy {
        weights,
        decay,
        alpha: DVector::from_element(d, 1.0),
        beta: 20.0 / 3.0,
        inputs: k,
    };
    sys.with_spectral_radius(0.9)
}

impl ControlAffineSystem for Mindy {
    fn name(&self) -> &str {
        "mindy_like"
    }
    fn state_dim(&self) -> usize {
        self.decay.len()
    }
    fn input_dim(&self) -> usize {
        self.inputs
    }
    fn drift(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        let d = self.state_dim();
        let psi = DVector::from_iterator(d, (0..d).map(|i| self.activation(i, x[i])));
        let wpsi = &self.weights * psi;
        for i in 0..d {
            out[i] = -self.decay[i] * x[i] + wpsi[i];
        }
    }
    fn input_matrix(&self, _t: f64, _x: &[f64], out: &mut DMatrix<f64>) {
        out.fill(0.0);
        for j in 0..self.inputs {
            out[(j, j)] = 1.0;
        }
    }
    fn drift_jacobian(&self, _t: f64, x: &[f64], out: &mut DMatrix<f64>) {
        let d = self.state_dim();
        for j in 0..d {
            let slope = self.activation_slope(j, x[j]);
            for i in 0..d {
                out[(i, j)] = self.weights[(i, j)] * slope;
            }
            out[(j, j)] -= self.decay[j];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::jacobian_fd;

    #[test]
    fn unicycle_setup() {
        let (sys, p) = make_benchmark("unicycle", &BenchmarkParams::default()).unwrap();
        assert_eq!((sys.state_dim(), sys.input_dim()), (3, 2));
        assert_eq!(p.x0.as_slice(), &[0.5, 0.25, PI / 12.0]);
        assert_eq!(p.x1.as_slice(), &[1.0, 0.75, 4.0 * PI / 3.0]);
        assert_eq!((p.t0, p.t_final), (0.0, 2.0));
    }

    #[test]
    fn sir_setup_and_drift() {
        let (sys, p) = make_benchmark("sir", &BenchmarkParams::default()).unwrap();
        assert_eq!((sys.state_dim(), sys.input_dim()), (3, 1));
        assert_eq!(p.x0.as_slice(), &[1.0, 0.2, 0.1]);
        assert_eq!(p.x1.as_slice(), &[0.5, 0.25, 0.2]);
        assert_eq!((p.t0, p.t_final), (0.0, 0.5));
        // lambda - beta S I - mu S = 1 - 0.4 - 0.2
        let mut f = [0.0; 3];
        sys.drift(0.0, &[1.0, 0.2, 0.1], &mut f);
        assert!((f[0] - 0.4).abs() < 1e-15);
        assert!((f[1] - (0.4 - 1.2 * 0.2)).abs() < 1e-15);
        assert!((f[2] - (0.2 - 0.02)).abs() < 1e-15);
    }

    #[test]
    fn hopfield_full_setup() {
        let (sys, p) = make_benchmark("hopfield2d_full", &BenchmarkParams::default()).unwrap();
        let mut b = DMatrix::zeros(2, 2);
        sys.input_matrix(0.0, &[0.0, 0.0], &mut b);
        assert_eq!(b, DMatrix::identity(2, 2));
        assert_eq!(p.x0.as_slice(), &[1.0, 1.0]);
        assert_eq!(p.x1.as_slice(), &[-1.0, -1.0]);
        assert_eq!((p.t0, p.t_final), (0.0, 1.5));
    }

    #[test]
    fn unknown_name_and_bad_overrides() {
        assert!(matches!(make_benchmark("cartpole", &BenchmarkParams::default()), Err(Error::UnknownSystem(_))));
        let mut params = BenchmarkParams::default();
        params.coefficients.insert("zeta".into(), 1.0);
        assert!(make_benchmark("pendulum", &params).is_err());
        let params = BenchmarkParams { x0: Some(vec![0.0]), ..Default::default() };
        assert!(matches!(make_benchmark("pendulum", &params), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn pendulum_jacobian_at_quarter_turn() {
        let p = Pendulum { lambda: 0.78, beta: 0.13 };
        let x = [PI / 2.0, 0.0];
        let fd = jacobian_fd(
            |t, x: &[f64]| {
                let mut o = vec![0.0; 2];
                p.drift(t, x, &mut o);
                o
            },
            0.0,
            &x,
            1e-6,
        )
        .unwrap();
        let mut an = DMatrix::zeros(2, 2);
        p.drift_jacobian(0.0, &x, &mut an);
        assert!((fd - &an).amax() < 1e-6);
        // a(0) = lambda^2 * (1/1.5); cos(pi/2) ~ 0 so the (1,0) entry vanishes
        assert!(an[(1, 0)].abs() < 1e-15);
        assert!((an[(1, 1)] + 0.13 * 0.78).abs() < 1e-15);
    }

    #[test]
    fn mindy_surrogate_structure() {
        let sys = mindy_like(8, 3, 7).unwrap();
        assert!((spectral_radius(&sys.weights) - 0.9).abs() < 1e-10);
        assert!(sys.decay.iter().all(|d| (0.3..=0.7).contains(d)));
        let mut f = vec![1.0; 8];
        sys.drift(0.0, &[0.0; 8], &mut f);
        assert!(f.iter().all(|v| v.abs() < 1e-15));
        let again = mindy_like(8, 3, 7).unwrap();
        assert_eq!(sys.weights, again.weights);
        assert!(mindy_like(4, 5, 0).is_err());
    }
}
