//! Control-affine systems `x' = N_t(x) + B_t(x) u` and the benchmark catalog.

mod catalog;
mod linear;

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{integrate_endpoint, OdeProblem, SolverConfig};

pub use catalog::{
    make_benchmark, mindy_like, BenchmarkParams, Hopfield2d, Mindy, Pendulum, Sir, Spacecraft,
    Unicycle, BENCHMARK_NAMES,
};
pub use linear::LinearSystem;

/// Drift, input matrix and their state derivatives.
///
/// Matrices are written into caller-owned buffers that already have the right
/// shape (`d x d` for Jacobians, `d x k` for the input matrix).
pub trait ControlAffineSystem: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;

    /// `N_t(x)`.
    fn drift(&self, t: f64, x: &[f64], out: &mut [f64]);

    /// `B_t(x)`.
    fn input_matrix(&self, t: f64, x: &[f64], out: &mut DMatrix<f64>);

    /// `D_x N_t(x)`.
    fn drift_jacobian(&self, t: f64, x: &[f64], out: &mut DMatrix<f64>);

    /// Whether `B_t` is independent of the state; if so `D_x[B_t(x) u] = 0`.
    fn input_is_state_independent(&self) -> bool {
        true
    }

    /// `D_x[B_t(x) u]` for a fixed input `u`. Zero unless overridden.
    fn input_jacobian_action(&self, _t: f64, _x: &[f64], _u: &[f64], out: &mut DMatrix<f64>) {
        out.fill(0.0);
    }

    /// `D_x[N_t(x) + B_t(x) u]`.
    fn closed_loop_jacobian(&self, t: f64, x: &[f64], u: &[f64], out: &mut DMatrix<f64>) {
        self.drift_jacobian(t, x, out);
        if !self.input_is_state_independent() {
            let d = self.state_dim();
            let mut extra = DMatrix::zeros(d, d);
            self.input_jacobian_action(t, x, u, &mut extra);
            *out += extra;
        }
    }

    /// Full vector field `N_t(x) + B_t(x) u`.
    fn vector_field(&self, t: f64, x: &[f64], u: &[f64], out: &mut [f64]) {
        self.drift(t, x, out);
        let mut b = DMatrix::zeros(self.state_dim(), self.input_dim());
        self.input_matrix(t, x, &mut b);
        for (j, uj) in u.iter().enumerate() {
            if *uj != 0.0 {
                for (o, bij) in out.iter_mut().zip(b.column(j).iter()) {
                    *o += bij * uj;
                }
            }
        }
    }
}

/// Reference time at which flow Jacobians are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Anchor {
    /// `tau = t0` (index 1).
    Initial,
    /// `tau = T` (index 2).
    #[default]
    Final,
}

impl Anchor {
    pub fn from_index(i: u8) -> Result<Self> {
        match i {
            1 => Ok(Anchor::Initial),
            2 => Ok(Anchor::Final),
            other => Err(Error::InvalidConfig(format!("anchor index must be 1 or 2, got {other}"))),
        }
    }

    pub fn index(self) -> u8 {
        match self {
            Anchor::Initial => 1,
            Anchor::Final => 2,
        }
    }
}

/// Two-point steering task on `[t0, t_final]`.
#[derive(Clone)]
pub struct SteeringProblem {
    pub system: Arc<dyn ControlAffineSystem>,
    pub x0: DVector<f64>,
    pub x1: DVector<f64>,
    pub t0: f64,
    pub t_final: f64,
    pub anchor: Anchor,
}

impl fmt::Debug for SteeringProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SteeringProblem")
            .field("system", &self.system.name())
            .field("x0", &self.x0.as_slice())
            .field("x1", &self.x1.as_slice())
            .field("t0", &self.t0)
            .field("t_final", &self.t_final)
            .field("anchor", &self.anchor)
            .finish()
    }
}

impl SteeringProblem {
    pub fn new(
        system: Arc<dyn ControlAffineSystem>,
        x0: DVector<f64>,
        x1: DVector<f64>,
        t0: f64,
        t_final: f64,
    ) -> Result<Self> {
        let p = Self { system, x0, x1, t0, t_final, anchor: Anchor::default() };
        p.validate()?;
        Ok(p)
    }

    pub fn with_anchor(mut self, anchor: Anchor) -> Self {
        self.anchor = anchor;
        self
    }

    pub fn with_target(mut self, x1: DVector<f64>) -> Self {
        self.x1 = x1;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.system.state_dim();
        let k = self.system.input_dim();
        if k == 0 || k > d {
            return Err(Error::InvalidConfig(format!("input dimension {k} must satisfy 1 <= k <= d = {d}")));
        }
        if !(self.t0 < self.t_final) || !self.t0.is_finite() || !self.t_final.is_finite() {
            return Err(Error::InvalidConfig(format!("need t0 < T, got [{}, {}]", self.t0, self.t_final)));
        }
        if self.x0.len() != d || self.x1.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: self.x0.len().max(self.x1.len()) });
        }
        if self.x0.iter().chain(self.x1.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("boundary states must be finite".into()));
        }
        Ok(())
    }

    pub fn anchor_time(&self) -> f64 {
        match self.anchor {
            Anchor::Initial => self.t0,
            Anchor::Final => self.t_final,
        }
    }

    pub fn state_dim(&self) -> usize {
        self.system.state_dim()
    }

    pub fn input_dim(&self) -> usize {
        self.system.input_dim()
    }
}

/// Central-difference Jacobian; column `j` is `(f(x + h e_j) - f(x - h e_j)) / 2h`.
pub fn jacobian_fd<F>(f: F, t: f64, x: &[f64], h: f64) -> Result<DMatrix<f64>>
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
{
    if !(h > 0.0) {
        return Err(Error::InvalidConfig(format!("finite-difference step must be > 0, got {h}")));
    }
    let n = x.len();
    let f0 = f(t, x);
    let m = f0.len();
    let mut jac = DMatrix::zeros(m, n);
    let mut xp = x.to_vec();
    for j in 0..n {
        let orig = xp[j];
        xp[j] = orig + h;
        let fp = f(t, &xp);
        xp[j] = orig - h;
        let fm = f(t, &xp);
        xp[j] = orig;
        for i in 0..m {
            let v = (fp[i] - fm[i]) / (2.0 * h);
            if !v.is_finite() {
                return Err(Error::NonFiniteValue("finite-difference Jacobian"));
            }
            jac[(i, j)] = v;
        }
    }
    Ok(jac)
}

/// Drift flow `Phi_{s,t}(x)`; integrates backward when `t < s`.
pub fn drift_flow(
    system: &dyn ControlAffineSystem,
    s: f64,
    t: f64,
    x: &[f64],
    config: &SolverConfig,
) -> Result<DVector<f64>> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue("drift flow initial state"));
    }
    if s == t {
        return Ok(DVector::from_column_slice(x));
    }
    let problem = OdeProblem::new(|tt, y: &[f64], dy: &mut [f64]| system.drift(tt, y, dy), s, t, x.to_vec());
    let end = integrate_endpoint(problem, config)?;
    Ok(DVector::from_vec(end.y))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fd_identity_and_linear() {
        let x = [0.3, -1.2, 2.0];
        // a wide step keeps rounding out of the difference quotient
        let id = jacobian_fd(|_t, x: &[f64]| x.to_vec(), 0.0, &x, 0.25).unwrap();
        assert!((id - DMatrix::identity(3, 3)).amax() < 1e-12);

        let a = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.0, -1.0, 0.5, 3.0, 0.0, 0.0, -2.0]);
        let a2 = a.clone();
        let jac = jacobian_fd(
            move |_t, x: &[f64]| (&a2 * DVector::from_column_slice(x)).as_slice().to_vec(),
            0.0,
            &x,
            1e-3,
        )
        .unwrap();
        assert!((jac - a).amax() < 1e-10);
    }

    #[test]
    fn fd_rejects_bad_step_and_nan() {
        assert!(jacobian_fd(|_t, x: &[f64]| x.to_vec(), 0.0, &[1.0], 0.0).is_err());
        let err = jacobian_fd(|_t, x: &[f64]| vec![x[0].ln()], 0.0, &[0.0], 1e-3).unwrap_err();
        assert!(matches!(err, Error::NonFiniteValue(_)));
    }

    #[test]
    fn anchor_indices() {
        assert_eq!(Anchor::from_index(1).unwrap(), Anchor::Initial);
        assert_eq!(Anchor::from_index(2).unwrap().index(), 2);
        assert!(Anchor::from_index(3).is_err());
    }
}
