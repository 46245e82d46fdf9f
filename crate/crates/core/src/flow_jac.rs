//! Controlled trajectories, residual vectors, and the Jacobian–input products
//! obtained from augmented variational equations.
//!
//! Every product is propagated in `d x k` form: the state `y` is stacked with
//! the column-major matrix `Y`, so a solve never forms a `d x d` flow Jacobian.

use std::sync::Arc;

use nalgebra::{DMatrix, DMatrixView, DMatrixViewMut, DVector};
use rayon::prelude::*;

use crate::control::ControlFunction;
use crate::error::{Error, Result};
use crate::gramian::simpson_rule;
use crate::ode::{integrate, integrate_endpoint, DenseSolution, OdeProblem, SolverConfig};
use crate::systems::{drift_flow, Anchor, ControlAffineSystem, SteeringProblem};

/// Solution of the controlled state equation under a fixed control.
#[derive(Debug)]
pub struct Trajectory {
    pub system: Arc<dyn ControlAffineSystem>,
    pub control: Arc<ControlFunction>,
    pub solution: DenseSolution,
    pub endpoint: DVector<f64>,
}

impl Trajectory {
    pub fn span(&self) -> (f64, f64) {
        self.solution.t_span()
    }

    pub fn state(&self, t: f64) -> Result<DVector<f64>> {
        Ok(DVector::from_vec(self.solution.eval(t)?))
    }
}

/// Which propagation produced a [`JacobianProduct`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProductKind {
    /// `DPhi_{t,tau}(x_u(t)) B_t(x_u(t))`.
    FlowInput,
    /// `R_u(T,t) B_t(x_u(t))`.
    StmInput,
    /// `DPhi_{T,tau}(x_u(T)) R_u(T,t) B_t(x_u(t))`.
    ChainInput,
}

/// A `d x k` product sampled at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianProduct {
    pub t: f64,
    pub matrix: DMatrix<f64>,
    pub kind: ProductKind,
}

/// Integrate `x' = N_t(x) + B_t(x) u(t)` from `x0` over `[t0, T]`.
///
/// Evaluation failures of `u` surface as a non-finite state.
pub fn solve_trajectory(
    problem: &SteeringProblem,
    u: Arc<ControlFunction>,
    config: &SolverConfig,
) -> Result<Trajectory> {
    let system = problem.system.clone();
    let (d, k) = (system.state_dim(), system.input_dim());
    if u.input_dim() != k {
        return Err(Error::DimensionMismatch { expected: k, got: u.input_dim() });
    }
    let solution = {
        let sys = &*system;
        let control = &*u;
        let mut b = DMatrix::zeros(d, k);
        let mut uval = vec![0.0; k];
        let field = move |t: f64, x: &[f64], dx: &mut [f64]| {
            sys.drift(t, x, dx);
            if control.is_zero() {
                return;
            }
            if control.eval_into(t, &mut uval).is_err() {
                dx.fill(f64::NAN);
                return;
            }
            sys.input_matrix(t, x, &mut b);
            for (j, uj) in uval.iter().enumerate() {
                for i in 0..d {
                    dx[i] += b[(i, j)] * uj;
                }
            }
        };
        integrate(
            OdeProblem::new(field, problem.t0, problem.t_final, problem.x0.as_slice().to_vec()),
            config,
        )?
    };
    let endpoint = DVector::from_column_slice(solution.final_state());
    if endpoint.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue("trajectory endpoint"));
    }
    Ok(Trajectory { system, control: u, solution, endpoint })
}

/// Flow-transported endpoint mismatch `Phi_{T,tau}(x1) - Phi_{t0,tau}(x0)`.
pub fn residual(problem: &SteeringProblem, config: &SolverConfig) -> Result<DVector<f64>> {
    let sys = &*problem.system;
    match problem.anchor {
        Anchor::Initial => {
            let back = drift_flow(sys, problem.t_final, problem.t0, problem.x1.as_slice(), config)?;
            Ok(back - &problem.x0)
        }
        Anchor::Final => {
            let fwd = drift_flow(sys, problem.t0, problem.t_final, problem.x0.as_slice(), config)?;
            Ok(&problem.x1 - fwd)
        }
    }
}

/// Propagate the drift variational system `y' = N(y)`, `Y' = D_xN(y) Y` from
/// `(t_from, x, y0)` to `t_to`. Returns `(Phi_{t_from,t_to}(x), DPhi * y0)`.
pub fn propagate_flow_jacobian(
    system: &dyn ControlAffineSystem,
    t_from: f64,
    x: &[f64],
    y0: &DMatrix<f64>,
    t_to: f64,
    config: &SolverConfig,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let d = system.state_dim();
    let k = y0.ncols();
    if t_from == t_to {
        return Ok((DVector::from_column_slice(x), y0.clone()));
    }
    let mut z0 = Vec::with_capacity(d * (k + 1));
    z0.extend_from_slice(x);
    z0.extend_from_slice(y0.as_slice());
    let mut jac = DMatrix::zeros(d, d);
    let field = |s: f64, z: &[f64], dz: &mut [f64]| {
        let (y, ym) = z.split_at(d);
        let (dy, dym) = dz.split_at_mut(d);
        system.drift(s, y, dy);
        system.drift_jacobian(s, y, &mut jac);
        let yv = DMatrixView::from_slice(ym, d, k);
        let mut out = DMatrixViewMut::from_slice(dym, d, k);
        out.gemm(1.0, &jac, &yv, 0.0);
    };
    let end = integrate_endpoint(OdeProblem::new(field, t_from, t_to, z0), config)?;
    let y = DVector::from_column_slice(&end.y[..d]);
    let m = DMatrix::from_column_slice(d, k, &end.y[d..]);
    Ok((y, m))
}

fn input_at(traj: &Trajectory, t: f64) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let sys = &*traj.system;
    let x = traj.solution.eval(t)?;
    let mut b = DMatrix::zeros(sys.state_dim(), sys.input_dim());
    sys.input_matrix(t, &x, &mut b);
    Ok((x, b))
}

/// `DPhi_{t,tau}(x_u(t)) B_t(x_u(t))` via the coupled drift variational system.
pub fn flow_input_product(traj: &Trajectory, t: f64, tau: f64, config: &SolverConfig) -> Result<JacobianProduct> {
    let (x, b) = input_at(traj, t)?;
    let (_, matrix) = propagate_flow_jacobian(&*traj.system, t, &x, &b, tau, config)?;
    Ok(JacobianProduct { t, matrix, kind: ProductKind::FlowInput })
}

/// `R_u(t_to, t_from) y0` along the trajectory, linearized with control `u`.
///
/// With `y0 = I` this returns the full state-transition matrix.
pub fn stm_apply(
    traj: &Trajectory,
    u: &ControlFunction,
    t_from: f64,
    t_to: f64,
    y0: &DMatrix<f64>,
    config: &SolverConfig,
) -> Result<DMatrix<f64>> {
    if t_from == t_to {
        return Ok(y0.clone());
    }
    let sys = &*traj.system;
    let d = sys.state_dim();
    let k = y0.ncols();
    let needs_u = !sys.input_is_state_independent();
    let mut jac = DMatrix::zeros(d, d);
    let mut x = vec![0.0; d];
    let mut uval = vec![0.0; sys.input_dim()];
    let field = |s: f64, z: &[f64], dz: &mut [f64]| {
        if traj.solution.eval_into(s, &mut x).is_err() {
            dz.fill(f64::NAN);
            return;
        }
        if needs_u {
            if u.eval_into(s, &mut uval).is_err() {
                dz.fill(f64::NAN);
                return;
            }
            sys.closed_loop_jacobian(s, &x, &uval, &mut jac);
        } else {
            sys.drift_jacobian(s, &x, &mut jac);
        }
        let yv = DMatrixView::from_slice(z, d, k);
        let mut out = DMatrixViewMut::from_slice(dz, d, k);
        out.gemm(1.0, &jac, &yv, 0.0);
    };
    let end = integrate_endpoint(OdeProblem::new(field, t_from, t_to, y0.as_slice().to_vec()), config)?;
    Ok(DMatrix::from_vec(d, k, end.y))
}

/// `Lambda_u(t, T) = R_u(T, t) B_t(x_u(t))`, reading `x_u` from the dense
/// interpolant.
pub fn stm_input_product(
    traj: &Trajectory,
    u: &ControlFunction,
    t: f64,
    config: &SolverConfig,
) -> Result<JacobianProduct> {
    let (_, b) = input_at(traj, t)?;
    let t_final = traj.span().1;
    let matrix = stm_apply(traj, u, t, t_final, &b, config)?;
    Ok(JacobianProduct { t, matrix, kind: ProductKind::StmInput })
}

/// Transport an STM product from `T` to `tau` with the drift variational
/// system started at `x_u(T)`.
pub fn chain_product_from_stm(
    traj: &Trajectory,
    stm: JacobianProduct,
    tau: f64,
    config: &SolverConfig,
) -> Result<JacobianProduct> {
    let t_final = traj.span().1;
    if tau == t_final {
        return Ok(JacobianProduct { kind: ProductKind::ChainInput, ..stm });
    }
    let (_, matrix) =
        propagate_flow_jacobian(&*traj.system, t_final, traj.endpoint.as_slice(), &stm.matrix, tau, config)?;
    Ok(JacobianProduct { t: stm.t, matrix, kind: ProductKind::ChainInput })
}

/// `DPhi_{T,tau}(x_u(T)) R_u(T,t) B_t(x_u(t))`.
pub fn chain_input_product(
    traj: &Trajectory,
    u: &ControlFunction,
    t: f64,
    tau: f64,
    config: &SolverConfig,
) -> Result<JacobianProduct> {
    let stm = stm_input_product(traj, u, t, config)?;
    chain_product_from_stm(traj, stm, tau, config)
}

/// Flow-input products at every node, computed as an ordered parallel map.
pub fn sample_flow_input_products(
    traj: &Trajectory,
    nodes: &[f64],
    tau: f64,
    config: &SolverConfig,
) -> Result<Vec<DMatrix<f64>>> {
    nodes
        .par_iter()
        .map(|t| flow_input_product(traj, *t, tau, config).map(|p| p.matrix))
        .collect()
}

/// Chain products at every node, computed as an ordered parallel map.
pub fn sample_chain_products(
    traj: &Trajectory,
    u: &ControlFunction,
    nodes: &[f64],
    tau: f64,
    config: &SolverConfig,
) -> Result<Vec<DMatrix<f64>>> {
    nodes
        .par_iter()
        .map(|t| chain_input_product(traj, u, *t, tau, config).map(|p| p.matrix))
        .collect()
}

/// Residual of the flow-conjugate representation at time `t`:
/// `|x_u(t) - Phi_{tau,t}(Phi_{t0,tau}(x0) + I_u(t))|` where `I_u(t)` is the
/// Simpson approximation (on `nodes` points) of
/// `int_{t0}^t DPhi_{s,tau}(x_u(s)) B_s(x_u(s)) u(s) ds`.
pub fn flow_conjugate_check(
    problem: &SteeringProblem,
    traj: &Trajectory,
    t: f64,
    nodes: usize,
    config: &SolverConfig,
) -> Result<f64> {
    let (t0, t_final) = (problem.t0, problem.t_final);
    if !(t >= t0 && t <= t_final) {
        return Err(Error::InvalidConfig(format!("check time {t} outside [{t0}, {t_final}]")));
    }
    let tau = problem.anchor_time();
    let sys = &*problem.system;
    let d = sys.state_dim();
    let mut integral = DVector::zeros(d);
    if t > t0 {
        let rule = simpson_rule(t0, t, nodes)?;
        let samples = sample_flow_input_products(traj, &rule.nodes, tau, config)?;
        let controls: Vec<DVector<f64>> =
            rule.nodes.iter().map(|s| traj.control.eval(*s)).collect::<Result<_>>()?;
        for ((w, dk), uk) in rule.weights.iter().zip(&samples).zip(&controls) {
            integral += *w * (dk * uk);
        }
    }
    let shifted = drift_flow(sys, t0, tau, problem.x0.as_slice(), config)? + integral;
    let predicted = drift_flow(sys, tau, t, shifted.as_slice(), config)?;
    let actual = traj.state(t)?;
    Ok((actual - predicted).norm())
}
