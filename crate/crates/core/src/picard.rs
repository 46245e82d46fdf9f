//! Gramian synthesis maps and their Picard iteration.

use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::{uniform_grid, ControlFunction, EvalStrategy, MapKind, SampledControl, SynthesizedControl};
use crate::error::{Error, Result};
use crate::flow_jac::{chain_input_product, residual, sample_flow_input_products, solve_trajectory, Trajectory};
use crate::gramian::{
    energy_certificate, least_squares_solve, mixed_from_samples, simpson_rule, solve_gramian, symmetric_from_samples, GramianKind,
    GramianMatrix, GramianSolve,
};
use crate::ode::SolverConfig;
use crate::systems::{Anchor, SteeringProblem};

/// Grid size used for `err_fp` and the control energy.
pub const METRIC_GRID: usize = 1001;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthesisConfig {
    pub map_kind: MapKind,
    pub anchor: Anchor,
    /// `N_max`.
    pub max_iterations: usize,
    /// Endpoint tolerance `eps_x`.
    pub eps_x: f64,
    /// Control-update tolerance `eps_u`.
    pub eps_u: f64,
    /// Simpson node count `K`; chosen from the state dimension when absent.
    pub quadrature_points: Option<usize>,
    /// Dense-interpolant grid size `M`; defaults to `4 K`.
    pub grid_points: Option<usize>,
    pub eval_strategy: Option<EvalStrategy>,
    /// Gramian shift `eps_reg`; defaults to 1e-6 for `d >= 64`, else 0.
    pub regularization: Option<f64>,
    pub solver: SolverConfig,
    /// Stop when `err_end` grows tenfold over three increasing iterations.
    pub divergence_guard: bool,
    /// Continue with the minimum-norm least-squares multiplier when the
    /// Gramian at `u^(0)` is singular (e.g. driftless systems at rest).
    pub allow_singular_start: bool,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self {
            map_kind: MapKind::General,
            anchor: Anchor::Final,
            max_iterations: 20,
            eps_x: 1e-10,
            eps_u: 1e-12,
            quadrature_points: None,
            grid_points: None,
            eval_strategy: None,
            regularization: None,
            solver: SolverConfig::default(),
            divergence_guard: true,
            allow_singular_start: true,
        }
    }
}

/// Dimension-dependent defaults filled in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedSettings {
    pub quadrature_points: usize,
    pub grid_points: usize,
    pub strategy: EvalStrategy,
    pub regularization: f64,
}

impl SynthesisConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations < 1 {
            return Err(Error::InvalidConfig("max_iterations must be >= 1".into()));
        }
        if !(self.eps_x > 0.0) || !(self.eps_u > 0.0) {
            return Err(Error::InvalidConfig("eps_x and eps_u must be > 0".into()));
        }
        if let Some(k) = self.quadrature_points {
            if k < 3 || k % 2 == 0 {
                return Err(Error::InvalidK(k));
            }
        }
        if matches!(self.grid_points, Some(m) if m < 2) {
            return Err(Error::InvalidConfig("grid_points must be >= 2".into()));
        }
        if matches!(self.regularization, Some(e) if !(e >= 0.0)) {
            return Err(Error::InvalidConfig("regularization must be >= 0".into()));
        }
        self.solver.validate()?;
        Ok(())
    }

    pub fn resolve(&self, d: usize) -> ResolvedSettings {
        let quadrature_points = self.quadrature_points.unwrap_or(match d {
            0..=10 => 201,
            11..=64 => 1001,
            _ => 5001,
        });
        let strategy = self
            .eval_strategy
            .unwrap_or(if d <= 8 { EvalStrategy::OnDemand } else { EvalStrategy::DenseInterpolant });
        ResolvedSettings {
            quadrature_points,
            grid_points: self.grid_points.unwrap_or(4 * quadrature_points),
            strategy,
            regularization: self.regularization.unwrap_or(if d >= 64 { 1e-6 } else { 0.0 }),
        }
    }
}

/// Telemetry of one Picard pass, measured at `u^(n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub n: usize,
    pub err_end: f64,
    pub err_fp: f64,
    /// `1/2 int |u|^2`.
    pub energy: f64,
    /// `int |u|^2`.
    pub energy_sq_norm: f64,
    pub gramian_condition: f64,
    pub wall_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    EndpointTolerance,
    FixedPointTolerance,
    MaxIterations,
    Diverged,
}

impl Termination {
    pub fn is_success(self) -> bool {
        !matches!(self, Termination::Diverged)
    }
}

/// One application of a synthesis map at `u`.
#[derive(Debug)]
pub struct MapOutput {
    /// The updated control.
    pub control: Arc<ControlFunction>,
    /// Trajectory of the input control.
    pub trajectory: Arc<Trajectory>,
    pub gramian: GramianMatrix,
    pub solve: GramianSolve,
    /// Residual vector `y_i`.
    pub residual: DVector<f64>,
}

pub fn apply_general_map(
    problem: &SteeringProblem,
    u: Arc<ControlFunction>,
    config: &SynthesisConfig,
) -> Result<MapOutput> {
    let y = residual(problem, &config.solver)?;
    apply_map(problem, u, config, MapKind::General, &y, false)
}

pub fn apply_minimum_energy_map(
    problem: &SteeringProblem,
    u: Arc<ControlFunction>,
    config: &SynthesisConfig,
) -> Result<MapOutput> {
    let y = residual(problem, &config.solver)?;
    apply_map(problem, u, config, MapKind::MinimumEnergy, &y, false)
}

/// Apply the map `kind` to `u` given the residual `y`. With `singular_ok` a
/// singular Gramian yields the least-squares multiplier instead of an error.
pub fn apply_map(
    problem: &SteeringProblem,
    u: Arc<ControlFunction>,
    config: &SynthesisConfig,
    kind: MapKind,
    y: &DVector<f64>,
    singular_ok: bool,
) -> Result<MapOutput> {
    let settings = config.resolve(problem.state_dim());
    let solver = &config.solver;
    let tau = problem.anchor_time();
    let traj = Arc::new(solve_trajectory(problem, u.clone(), solver)?);
    let rule = simpson_rule(problem.t0, problem.t_final, settings.quadrature_points)?;
    let d_samples = sample_flow_input_products(&traj, &rule.nodes, tau, solver)?;

    let (gramian, linearization, row_samples) = match kind {
        MapKind::General => (symmetric_from_samples(&d_samples, &rule)?, None, None),
        MapKind::MinimumEnergy => {
            // the STM only reads u when B depends on the state; an on-demand
            // control there would nest solves, so freeze it on a grid first
            let lin = if problem.system.input_is_state_independent() { u.clone() } else { u.snapshot(METRIC_GRID)? };
            let c_samples: Vec<DMatrix<f64>> = rule
                .nodes
                .par_iter()
                .map(|t| chain_input_product(&traj, &lin, *t, tau, solver).map(|p| p.matrix))
                .collect::<Result<_>>()?;
            (mixed_from_samples(&d_samples, &c_samples, &rule)?, Some(lin), Some(c_samples))
        }
    };
    let mut gramian = gramian;
    gramian.regularization = settings.regularization;
    let solve = match solve_gramian(&gramian, y, settings.regularization) {
        Err(Error::SingularGramian { .. }) if singular_ok => {
            let d = gramian.matrix.nrows();
            let shifted = &gramian.matrix + DMatrix::identity(d, d) * settings.regularization;
            least_squares_solve(&shifted, y)?
        }
        other => other?,
    };

    let mut inner = SynthesizedControl {
        map: kind,
        lambda: solve.lambda.clone(),
        anchor_time: tau,
        trajectory: traj.clone(),
        linearization,
        solver: *solver,
        strategy: settings.strategy,
        interpolant: None,
    };
    if settings.strategy == EvalStrategy::DenseInterpolant {
        let m = settings.grid_points;
        let k = problem.input_dim();
        let values: Vec<f64> = if m == rule.len() {
            let rows = row_samples.as_ref().unwrap_or(&d_samples);
            rows.iter().flat_map(|p| p.tr_mul(&solve.lambda).as_slice().to_vec()).collect()
        } else {
            let grid = uniform_grid(problem.t0, problem.t_final, m);
            let rows: Vec<DVector<f64>> = grid.par_iter().map(|t| inner.eval_exact(*t)).collect::<Result<_>>()?;
            rows.iter().flat_map(|r| r.as_slice().to_vec()).collect()
        };
        inner.interpolant = Some(SampledControl::new(problem.t0, problem.t_final, k, values)?);
    }
    Ok(MapOutput {
        control: Arc::new(ControlFunction::synthesized(inner)),
        trajectory: traj,
        gramian,
        solve,
        residual: y.clone(),
    })
}

/// `|x_u(T) - x1|`.
pub fn endpoint_error(traj: &Trajectory, x1: &DVector<f64>) -> f64 {
    (&traj.endpoint - x1).norm()
}

/// Grid supremum of `|u_next(t) - u(t)|` over `m` uniform points.
pub fn fixed_point_error(u_next: &ControlFunction, u: &ControlFunction, m: usize) -> Result<f64> {
    if u_next.input_dim() != u.input_dim() {
        return Err(Error::DimensionMismatch { expected: u.input_dim(), got: u_next.input_dim() });
    }
    let a = u_next.grid_values(m)?;
    let b = u.grid_values(m)?;
    Ok((0..m)
        .map(|i| a.node(i).iter().zip(b.node(i)).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt())
        .fold(0.0, f64::max))
}

/// `int |u|^2` over the control's span by Simpson's rule on `m` nodes.
pub fn control_sq_norm(u: &ControlFunction, m: usize) -> Result<f64> {
    let (t0, t1) = u.span();
    let rule = simpson_rule(t0, t1, m)?;
    let g = u.grid_values(m)?;
    let sq: Vec<f64> = (0..m).map(|i| g.node(i).iter().map(|v| v * v).sum()).collect();
    Ok(rule.integrate(&sq))
}

/// `E(u) = 1/2 int |u|^2` on the default metric grid.
pub fn control_energy(u: &ControlFunction) -> Result<f64> {
    Ok(0.5 * control_sq_norm(u, METRIC_GRID)?)
}

#[derive(Debug)]
pub struct PicardOutcome {
    /// The last control whose trajectory was verified.
    pub control: Arc<ControlFunction>,
    pub trajectory: Arc<Trajectory>,
    pub records: Vec<IterationRecord>,
    pub termination: Termination,
    /// Residual vector `y_i`.
    pub residual: DVector<f64>,
    /// Multiplier of the final map application.
    pub lambda: DVector<f64>,
    /// `1/2 y^T lambda` for the symmetric map.
    pub certificate: Option<f64>,
    /// Condition estimate of the Gramian at `u^(0)`.
    pub initial_condition: f64,
    /// Whether the Gramian at `u^(0)` was singular and the first multiplier
    /// came from least squares.
    pub singular_start: bool,
    pub settings: ResolvedSettings,
}

impl PicardOutcome {
    pub fn final_record(&self) -> &IterationRecord {
        self.records.last().expect("at least one iteration is recorded")
    }
}

/// Picard iteration from the zero control.
pub fn run_picard(problem: &SteeringProblem, config: &SynthesisConfig) -> Result<PicardOutcome> {
    let u0 = Arc::new(ControlFunction::zero(problem.input_dim(), problem.t0, problem.t_final));
    run_picard_from(problem, config, u0)
}

/// Picard iteration of the configured map from `u0`.
///
/// Each pass applies the map at `u^(n)`, then tests `err_end(u^(n))`,
/// `err_fp = |u^(n+1) - u^(n)|` and `n >= N_max` in that order.
pub fn run_picard_from(
    problem: &SteeringProblem,
    config: &SynthesisConfig,
    u0: Arc<ControlFunction>,
) -> Result<PicardOutcome> {
    config.validate()?;
    let problem = problem.clone().with_anchor(config.anchor);
    problem.validate()?;
    if u0.input_dim() != problem.input_dim() {
        return Err(Error::DimensionMismatch { expected: problem.input_dim(), got: u0.input_dim() });
    }
    let settings = config.resolve(problem.state_dim());
    let y = residual(&problem, &config.solver)?;

    let mut u = u0;
    let mut records: Vec<IterationRecord> = Vec::new();
    let mut initial_condition = f64::NAN;
    let mut singular_start = false;
    for n in 0.. {
        let start = Instant::now();
        let singular_ok = n == 0 && config.allow_singular_start;
        let out = apply_map(&problem, u.clone(), config, config.map_kind, &y, singular_ok)?;
        if n == 0 {
            initial_condition = out.gramian.condition_estimate;
            singular_start = out.solve.residual > 1e-6 * y.norm();
        }
        let err_end = endpoint_error(&out.trajectory, &problem.x1);
        let err_fp = fixed_point_error(&out.control, &u, METRIC_GRID)?;
        let sq = control_sq_norm(&u, METRIC_GRID)?;
        records.push(IterationRecord {
            n,
            err_end,
            err_fp,
            energy: 0.5 * sq,
            energy_sq_norm: sq,
            gramian_condition: out.gramian.condition_estimate,
            wall_time: start.elapsed().as_secs_f64(),
        });

        let termination = if err_end <= config.eps_x {
            Some(Termination::EndpointTolerance)
        } else if err_fp <= config.eps_u {
            Some(Termination::FixedPointTolerance)
        } else if n >= config.max_iterations {
            Some(Termination::MaxIterations)
        } else if config.divergence_guard && diverging(&records) {
            Some(Termination::Diverged)
        } else {
            None
        };
        if let Some(termination) = termination {
            let certificate = (out.gramian.kind == GramianKind::Symmetric)
                .then(|| energy_certificate(&out.gramian, &y, &out.solve.lambda));
            return Ok(PicardOutcome {
                control: u,
                trajectory: out.trajectory,
                records,
                termination,
                residual: y,
                lambda: out.solve.lambda,
                certificate,
                initial_condition,
                singular_start,
                settings,
            });
        }
        u = out.control;
    }
    unreachable!()
}

fn diverging(records: &[IterationRecord]) -> bool {
    let n = records.len();
    if n < 4 {
        return false;
    }
    let e: Vec<f64> = records[n - 4..].iter().map(|r| r.err_end).collect();
    e.windows(2).all(|w| w[1] > w[0]) && e[3] > 10.0 * e[0]
}
