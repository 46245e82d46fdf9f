//! Quadrature-assembled Gramians and their linear solves.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::control::ControlFunction;
use crate::error::{Error, Result};
use crate::flow_jac::{sample_chain_products, sample_flow_input_products, Trajectory};
use crate::ode::SolverConfig;

/// Composite Simpson rule on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub t0: f64,
    pub t1: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Weighted sum of samples taken at the nodes.
    pub fn integrate(&self, samples: &[f64]) -> f64 {
        self.weights.iter().zip(samples).map(|(w, s)| w * s).sum()
    }
}

/// `k` uniform nodes on `[t0, t1]` with weights `(h/3) [1, 4, 2, ..., 4, 1]`.
pub fn simpson_rule(t0: f64, t1: f64, k: usize) -> Result<QuadratureRule> {
    if k < 3 || k % 2 == 0 {
        return Err(Error::InvalidK(k));
    }
    if !(t1 > t0) || !t0.is_finite() || !t1.is_finite() {
        return Err(Error::InvalidConfig(format!("quadrature span [{t0}, {t1}] is empty")));
    }
    let nodes = crate::control::uniform_grid(t0, t1, k);
    let h = (t1 - t0) / (k - 1) as f64;
    let weights = (0..k)
        .map(|i| {
            let c = if i == 0 || i == k - 1 {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            c * h / 3.0
        })
        .collect();
    Ok(QuadratureRule { t0, t1, nodes, weights })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GramianKind {
    /// `int D D^T`, positive semidefinite.
    Symmetric,
    /// `int D C^T`, generally non-symmetric.
    Mixed,
}

#[derive(Debug, Clone)]
pub struct GramianMatrix {
    pub matrix: DMatrix<f64>,
    pub kind: GramianKind,
    pub rule: QuadratureRule,
    /// Shift `eps` of the last solve, applied as `+ eps Id`.
    pub regularization: f64,
    pub condition_estimate: f64,
}

/// Symmetric Gramian from flow-input samples `D_k`, reduced in index order.
pub fn symmetric_from_samples(samples: &[DMatrix<f64>], rule: &QuadratureRule) -> Result<GramianMatrix> {
    check_samples(samples, rule)?;
    let d = samples[0].nrows();
    let mut m = DMatrix::zeros(d, d);
    for (w, dk) in rule.weights.iter().zip(samples) {
        m.gemm(*w, dk, &dk.transpose(), 1.0);
    }
    let m = (&m + m.transpose()) * 0.5;
    finish(m, GramianKind::Symmetric, rule)
}

/// Mixed Gramian from flow-input samples `D_k` and chain samples `C_k`.
pub fn mixed_from_samples(
    d_samples: &[DMatrix<f64>],
    c_samples: &[DMatrix<f64>],
    rule: &QuadratureRule,
) -> Result<GramianMatrix> {
    check_samples(d_samples, rule)?;
    check_samples(c_samples, rule)?;
    let d = d_samples[0].nrows();
    let mut m = DMatrix::zeros(d, d);
    for ((w, dk), ck) in rule.weights.iter().zip(d_samples).zip(c_samples) {
        m.gemm(*w, dk, &ck.transpose(), 1.0);
    }
    finish(m, GramianKind::Mixed, rule)
}

fn check_samples(samples: &[DMatrix<f64>], rule: &QuadratureRule) -> Result<()> {
    if samples.len() != rule.len() {
        return Err(Error::DimensionMismatch { expected: rule.len(), got: samples.len() });
    }
    Ok(())
}

fn finish(matrix: DMatrix<f64>, kind: GramianKind, rule: &QuadratureRule) -> Result<GramianMatrix> {
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue("Gramian"));
    }
    let condition_estimate = condition_estimate(&matrix, kind);
    Ok(GramianMatrix { matrix, kind, rule: rule.clone(), regularization: 0.0, condition_estimate })
}

/// `int_{t0}^T DPhi_{t,tau} B (DPhi_{t,tau} B)^T dt` along `traj`.
pub fn assemble_symmetric(
    traj: &Trajectory,
    tau: f64,
    rule: &QuadratureRule,
    config: &SolverConfig,
) -> Result<GramianMatrix> {
    let samples = sample_flow_input_products(traj, &rule.nodes, tau, config)?;
    symmetric_from_samples(&samples, rule)
}

/// `int_{t0}^T DPhi_{t,tau} B (DPhi_{T,tau} R_u(T,t) B)^T dt` along `traj`.
pub fn assemble_mixed(
    traj: &Trajectory,
    u: &ControlFunction,
    tau: f64,
    rule: &QuadratureRule,
    config: &SolverConfig,
) -> Result<GramianMatrix> {
    let d_samples = sample_flow_input_products(traj, &rule.nodes, tau, config)?;
    let c_samples = sample_chain_products(traj, u, &rule.nodes, tau, config)?;
    mixed_from_samples(&d_samples, &c_samples, rule)
}

const CONDITION_CAP: f64 = 1e300;

fn ratio(max: f64, min: f64) -> f64 {
    if min > 0.0 {
        (max / min).min(CONDITION_CAP)
    } else {
        CONDITION_CAP
    }
}

fn diag_extremes(m: &DMatrix<f64>) -> (f64, f64) {
    let diag = m.diagonal().map(f64::abs);
    (diag.max(), diag.min())
}

/// Cheap condition proxy: squared extreme-diagonal ratio of the Cholesky
/// factor, `|U_ii|` ratio of an LU factor, or the singular-value ratio when
/// neither factorization exists.
pub fn condition_estimate(m: &DMatrix<f64>, kind: GramianKind) -> f64 {
    if kind == GramianKind::Symmetric {
        if let Some(ch) = m.clone().cholesky() {
            let (hi, lo) = diag_extremes(&ch.l());
            return ratio(hi, lo).powi(2).min(CONDITION_CAP);
        }
    } else {
        let lu = m.clone().lu();
        if lu.is_invertible() {
            let (hi, lo) = diag_extremes(&lu.u());
            return ratio(hi, lo);
        }
    }
    let sv = m.singular_values();
    ratio(sv.max(), sv.min())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    Cholesky,
    Lu,
    LeastSquares,
}

#[derive(Debug, Clone)]
pub struct GramianSolve {
    pub lambda: DVector<f64>,
    /// `|(G + eps Id) lambda - y|`.
    pub residual: f64,
    pub method: SolveMethod,
}

/// Solve `(G + eps Id) lambda = y`: Cholesky (symmetric) or partial-pivot LU
/// (mixed), falling back to minimum-norm least squares.
pub fn solve_gramian(g: &GramianMatrix, y: &DVector<f64>, eps: f64) -> Result<GramianSolve> {
    let d = g.matrix.nrows();
    if y.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: y.len() });
    }
    if !(eps >= 0.0) {
        return Err(Error::InvalidConfig(format!("regularization must be >= 0, got {eps}")));
    }
    let m = &g.matrix + DMatrix::identity(d, d) * eps;
    let limit = 1e-6 * y.norm();
    let residual_of = |lambda: &DVector<f64>| (&m * lambda - y).norm();

    let direct = match g.kind {
        GramianKind::Symmetric => m.clone().cholesky().map(|ch| (ch.solve(y), SolveMethod::Cholesky)),
        GramianKind::Mixed => m.clone().lu().solve(y).map(|l| (l, SolveMethod::Lu)),
    };
    if let Some((lambda, method)) = direct {
        if lambda.iter().all(|v| v.is_finite()) {
            let residual = residual_of(&lambda);
            if residual <= limit {
                return Ok(GramianSolve { lambda, residual, method });
            }
        }
    }

    let solve = least_squares_solve(&m, y)?;
    if !(solve.residual <= limit) {
        return Err(Error::SingularGramian { residual: solve.residual, limit });
    }
    Ok(solve)
}

/// Minimum-norm least-squares solution of `m lambda = y` with no residual
/// gate; used where a rank-deficient Gramian is tolerated.
pub fn least_squares_solve(m: &DMatrix<f64>, y: &DVector<f64>) -> Result<GramianSolve> {
    let d = m.nrows();
    let svd = m.clone().svd(true, true);
    let tol = svd.singular_values.max() * d as f64 * f64::EPSILON;
    let lambda = svd
        .solve(y, tol)
        .map_err(|e| Error::InvalidConfig(format!("least-squares solve failed: {e}")))?;
    let residual = (m * &lambda - y).norm();
    Ok(GramianSolve { lambda, residual, method: SolveMethod::LeastSquares })
}

/// `y^T lambda / 2`; at a fixed point of the symmetric map this is the
/// control energy.
pub fn energy_certificate(g: &GramianMatrix, y: &DVector<f64>, lambda: &DVector<f64>) -> f64 {
    debug_assert_eq!(g.kind, GramianKind::Symmetric);
    0.5 * y.dot(lambda)
}
