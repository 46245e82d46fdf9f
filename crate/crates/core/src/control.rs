//! Representations of open-loop controls `u : [t0, T] -> R^k`.

use std::fmt;
use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow_jac::{chain_product_from_stm, flow_input_product, stm_input_product, Trajectory};
use crate::ode::SolverConfig;

/// Which synthesis map produced a control.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapKind {
    /// Symmetric-Gramian steering map.
    #[default]
    General,
    /// Lagrange-multiplier map built on the mixed Gramian.
    MinimumEnergy,
}

/// How a synthesized control is evaluated between solver calls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalStrategy {
    /// Recompute the pointwise formula (one variational solve) per query.
    OnDemand,
    /// Precompute on a uniform grid and interpolate with a cubic spline.
    DenseInterpolant,
}

/// Pointwise closed-form control, e.g. a reference input.
pub type ControlMap = Arc<dyn Fn(f64, &mut [f64]) + Send + Sync>;

/// Uniformly sampled control with a not-a-knot cubic spline per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledControl {
    t0: f64,
    t1: f64,
    k: usize,
    /// Node values, `k` per node.
    values: Vec<f64>,
    /// Spline slopes at the nodes, `k` per node.
    slopes: Vec<f64>,
}

impl SampledControl {
    /// Build from `m >= 2` uniformly spaced samples over `[t0, t1]`; `values`
    /// holds `k` entries per node.
    pub fn new(t0: f64, t1: f64, k: usize, values: Vec<f64>) -> Result<Self> {
        if k == 0 || values.len() % k != 0 || values.len() / k < 2 || !(t1 > t0) {
            return Err(Error::InvalidConfig(format!(
                "sampled control needs >= 2 nodes over a positive span (got {} values for k = {k})",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue("sampled control values"));
        }
        let m = values.len() / k;
        let h = (t1 - t0) / (m - 1) as f64;
        let mut slopes = vec![0.0; values.len()];
        let mut channel = vec![0.0; m];
        for c in 0..k {
            for i in 0..m {
                channel[i] = values[i * k + c];
            }
            let s = spline_slopes(&channel, h);
            for i in 0..m {
                slopes[i * k + c] = s[i];
            }
        }
        Ok(Self { t0, t1, k, values, slopes })
    }

    pub fn from_fn(t0: f64, t1: f64, k: usize, m: usize, mut f: impl FnMut(f64, &mut [f64])) -> Result<Self> {
        let grid = uniform_grid(t0, t1, m);
        let mut values = vec![0.0; m * k];
        for (i, t) in grid.iter().enumerate() {
            f(*t, &mut values[i * k..(i + 1) * k]);
        }
        Self::new(t0, t1, k, values)
    }

    pub fn node_count(&self) -> usize {
        self.values.len() / self.k
    }

    pub fn nodes(&self) -> Vec<f64> {
        uniform_grid(self.t0, self.t1, self.node_count())
    }

    pub fn node_value(&self, i: usize) -> &[f64] {
        &self.values[i * self.k..(i + 1) * self.k]
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        let m = self.node_count();
        let h = (self.t1 - self.t0) / (m - 1) as f64;
        let pos = ((t - self.t0) / h).clamp(0.0, (m - 1) as f64);
        let i = (pos.floor() as usize).min(m - 2);
        let x = pos - i as f64;
        if x == 0.0 {
            out.copy_from_slice(self.node_value(i));
            return;
        }
        let (x2, x3) = (x * x, x * x * x);
        let h00 = 2.0 * x3 - 3.0 * x2 + 1.0;
        let h10 = x3 - 2.0 * x2 + x;
        let h01 = -2.0 * x3 + 3.0 * x2;
        let h11 = x3 - x2;
        let k = self.k;
        for c in 0..k {
            let (y0, y1) = (self.values[i * k + c], self.values[(i + 1) * k + c]);
            let (s0, s1) = (self.slopes[i * k + c], self.slopes[(i + 1) * k + c]);
            out[c] = h00 * y0 + h * h10 * s0 + h01 * y1 + h * h11 * s1;
        }
    }
}

/// Node slopes of the not-a-knot cubic spline on a uniform grid.
fn spline_slopes(y: &[f64], h: f64) -> Vec<f64> {
    let m = y.len();
    let delta: Vec<f64> = y.windows(2).map(|w| (w[1] - w[0]) / h).collect();
    match m {
        2 => vec![delta[0]; 2],
        3 => {
            // the parabola through all three nodes
            let curv = (delta[1] - delta[0]) / (2.0 * h);
            vec![delta[0] - curv * h, 0.5 * (delta[0] + delta[1]), delta[1] + curv * h]
        }
        _ => {
            let mut sub = vec![0.0; m];
            let mut diag = vec![0.0; m];
            let mut sup = vec![0.0; m];
            let mut rhs = vec![0.0; m];
            diag[0] = 1.0;
            sup[0] = 2.0;
            rhs[0] = 0.5 * (5.0 * delta[0] + delta[1]);
            for i in 1..m - 1 {
                sub[i] = 1.0;
                diag[i] = 4.0;
                sup[i] = 1.0;
                rhs[i] = 3.0 * (delta[i - 1] + delta[i]);
            }
            sub[m - 1] = 2.0;
            diag[m - 1] = 1.0;
            rhs[m - 1] = 0.5 * (delta[m - 3] + 5.0 * delta[m - 2]);
            // Thomas elimination
            for i in 1..m {
                let w = sub[i] / diag[i - 1];
                diag[i] -= w * sup[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
            let mut s = vec![0.0; m];
            s[m - 1] = rhs[m - 1] / diag[m - 1];
            for i in (0..m - 1).rev() {
                s[i] = (rhs[i] - sup[i] * s[i + 1]) / diag[i];
            }
            s
        }
    }
}

/// `m` uniformly spaced points covering `[t0, t1]` with exact endpoints.
pub fn uniform_grid(t0: f64, t1: f64, m: usize) -> Vec<f64> {
    assert!(m >= 2, "grid needs at least two points");
    let h = (t1 - t0) / (m - 1) as f64;
    (0..m).map(|i| if i == m - 1 { t1 } else { t0 + i as f64 * h }).collect()
}

/// Control produced by one application of a synthesis map.
///
/// Holds the multiplier and the trajectory of the control it was computed
/// from; its value at `t` is `P(t)^T lambda` where `P(t)` is the flow-input
/// product (general map) or the chained STM product (minimum-energy map).
pub struct SynthesizedControl {
    pub map: MapKind,
    pub lambda: DVector<f64>,
    pub anchor_time: f64,
    pub trajectory: Arc<Trajectory>,
    /// Control used in the closed-loop linearization of the minimum-energy
    /// map. Always cheap to evaluate (never an on-demand synthesized control).
    pub linearization: Option<Arc<ControlFunction>>,
    pub solver: SolverConfig,
    pub strategy: EvalStrategy,
    pub interpolant: Option<SampledControl>,
}

impl SynthesizedControl {
    /// The exact pointwise formula, one variational solve per call.
    pub fn eval_exact(&self, t: f64) -> Result<DVector<f64>> {
        let product = match self.map {
            MapKind::General => flow_input_product(&self.trajectory, t, self.anchor_time, &self.solver)?,
            MapKind::MinimumEnergy => {
                let lin = self.linearization.as_deref().unwrap_or(&*self.trajectory.control);
                let stm = stm_input_product(&self.trajectory, lin, t, &self.solver)?;
                chain_product_from_stm(&self.trajectory, stm, self.anchor_time, &self.solver)?
            }
        };
        Ok(product.matrix.tr_mul(&self.lambda))
    }
}

/// An input signal on `[t0, T]`.
pub enum ControlFunction {
    Zero { k: usize, span: (f64, f64) },
    ClosedForm { k: usize, span: (f64, f64), map: ControlMap },
    Sampled(SampledControl),
    Synthesized { inner: Box<SynthesizedControl>, cache: OnceLock<Arc<GridValues>> },
}

/// Values of a control on a uniform grid, `k` per node.
#[derive(Debug, Clone, PartialEq)]
pub struct GridValues {
    pub m: usize,
    pub k: usize,
    pub values: Vec<f64>,
}

impl GridValues {
    pub fn node(&self, i: usize) -> &[f64] {
        &self.values[i * self.k..(i + 1) * self.k]
    }
}

impl fmt::Debug for ControlFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ControlFunction::Zero { k, span } => f.debug_struct("Zero").field("k", k).field("span", span).finish(),
            ControlFunction::ClosedForm { k, span, .. } => {
                f.debug_struct("ClosedForm").field("k", k).field("span", span).finish()
            }
            ControlFunction::Sampled(s) => f.debug_struct("Sampled").field("nodes", &s.node_count()).finish(),
            ControlFunction::Synthesized { inner, .. } => f
                .debug_struct("Synthesized")
                .field("map", &inner.map)
                .field("lambda", &inner.lambda.as_slice())
                .field("strategy", &inner.strategy)
                .finish(),
        }
    }
}

impl ControlFunction {
    pub fn zero(k: usize, t0: f64, t1: f64) -> Self {
        ControlFunction::Zero { k, span: (t0, t1) }
    }

    pub fn closed_form(k: usize, t0: f64, t1: f64, map: impl Fn(f64, &mut [f64]) + Send + Sync + 'static) -> Self {
        ControlFunction::ClosedForm { k, span: (t0, t1), map: Arc::new(map) }
    }

    /// Constant input `c` on the whole span.
    pub fn constant(c: &[f64], t0: f64, t1: f64) -> Self {
        let c = c.to_vec();
        Self::closed_form(c.len(), t0, t1, move |_t, out| out.copy_from_slice(&c))
    }

    pub fn synthesized(inner: SynthesizedControl) -> Self {
        ControlFunction::Synthesized { inner: Box::new(inner), cache: OnceLock::new() }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            ControlFunction::Zero { k, .. } | ControlFunction::ClosedForm { k, .. } => *k,
            ControlFunction::Sampled(s) => s.k,
            ControlFunction::Synthesized { inner, .. } => inner.trajectory.system.input_dim(),
        }
    }

    pub fn span(&self) -> (f64, f64) {
        match self {
            ControlFunction::Zero { span, .. } | ControlFunction::ClosedForm { span, .. } => *span,
            ControlFunction::Sampled(s) => (s.t0, s.t1),
            ControlFunction::Synthesized { inner, .. } => inner.trajectory.span(),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, ControlFunction::Zero { .. })
    }

    /// True when evaluation needs a variational solve per query.
    pub fn is_on_demand(&self) -> bool {
        matches!(self, ControlFunction::Synthesized { inner, .. } if inner.interpolant.is_none())
    }

    pub fn as_synthesized(&self) -> Option<&SynthesizedControl> {
        match self {
            ControlFunction::Synthesized { inner, .. } => Some(inner),
            _ => None,
        }
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) -> Result<()> {
        match self {
            ControlFunction::Zero { .. } => out.fill(0.0),
            ControlFunction::ClosedForm { map, .. } => map(t, out),
            ControlFunction::Sampled(s) => s.eval_into(t, out),
            ControlFunction::Synthesized { inner, .. } => match &inner.interpolant {
                Some(s) => s.eval_into(t, out),
                None => out.copy_from_slice(inner.eval_exact(t)?.as_slice()),
            },
        }
        Ok(())
    }

    pub fn eval(&self, t: f64) -> Result<DVector<f64>> {
        let mut out = DVector::zeros(self.input_dim());
        self.eval_into(t, out.as_mut_slice())?;
        Ok(out)
    }

    /// Values on `m` uniform nodes over the span. Synthesized controls cache
    /// the most recently requested grid.
    pub fn grid_values(&self, m: usize) -> Result<Arc<GridValues>> {
        if let ControlFunction::Synthesized { cache, .. } = self {
            if let Some(v) = cache.get() {
                if v.m == m {
                    return Ok(v.clone());
                }
            }
        }
        let (t0, t1) = self.span();
        let k = self.input_dim();
        let grid = uniform_grid(t0, t1, m);
        let values = if self.is_on_demand() {
            use rayon::prelude::*;
            let rows: Vec<Vec<f64>> = grid
                .par_iter()
                .map(|t| self.eval(*t).map(|v| v.as_slice().to_vec()))
                .collect::<Result<_>>()?;
            rows.concat()
        } else {
            let mut values = vec![0.0; m * k];
            for (i, t) in grid.iter().enumerate() {
                self.eval_into(*t, &mut values[i * k..(i + 1) * k])?;
            }
            values
        };
        let gv = Arc::new(GridValues { m, k, values });
        if let ControlFunction::Synthesized { cache, .. } = self {
            let _ = cache.set(gv.clone());
        }
        Ok(gv)
    }

    /// A cheap-to-evaluate stand-in: on-demand synthesized controls are
    /// replaced by a spline through `m` grid samples, everything else is
    /// returned unchanged.
    pub fn snapshot(self: &Arc<Self>, m: usize) -> Result<Arc<ControlFunction>> {
        if !self.is_on_demand() {
            return Ok(self.clone());
        }
        let gv = self.grid_values(m)?;
        let (t0, t1) = self.span();
        Ok(Arc::new(ControlFunction::Sampled(SampledControl::new(t0, t1, gv.k, gv.values.clone())?)))
    }
}

/// Per-channel Chebyshev series `sum_j c_j T_j(s)` with `s` the affine image
/// of `t` in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebyshevControl {
    /// `k x (degree + 1)` coefficients.
    pub coefficients: DMatrix<f64>,
    pub t0: f64,
    pub t1: f64,
}

impl ChebyshevControl {
    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        let s = (2.0 * (t - self.t0) / (self.t1 - self.t0) - 1.0).clamp(-1.0, 1.0);
        for (c, o) in out.iter_mut().enumerate() {
            let (mut prev, mut cur) = (1.0, s);
            let mut acc = 0.0;
            for j in 0..self.coefficients.ncols() {
                let tj = match j {
                    0 => 1.0,
                    1 => s,
                    _ => {
                        let next = 2.0 * s * cur - prev;
                        prev = cur;
                        cur = next;
                        next
                    }
                };
                acc += self.coefficients[(c, j)] * tj;
            }
            *o = acc;
        }
    }

    pub fn into_control(self) -> ControlFunction {
        let (k, t0, t1) = (self.coefficients.nrows(), self.t0, self.t1);
        ControlFunction::closed_form(k, t0, t1, move |t, out| self.eval_into(t, out))
    }
}
