//! Adaptive explicit Runge–Kutta integration with dense output.
//!
//! The driver works on flat `f64` state slices and integrates in either time
//! direction. Right-hand sides are `FnMut(t, y, dy)` so callers can keep
//! scratch buffers inside the closure.

mod controller;
mod dense;
mod tableau;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use controller::{adapt_step, ControllerGains, MAX_GROWTH, MAX_SHRINK};
pub use dense::DenseSolution;
pub use tableau::Method;

use tableau::{
    DOP853_D, DOP853_E3, DOP853_E5, DOP853_EXTRA_A, DOP853_EXTRA_C, DOPRI5_E, DOPRI5_P,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("step limit of {max_steps} exceeded at t = {t}")]
    StepLimitExceeded { max_steps: usize, t: f64 },
    #[error("non-finite state encountered at t = {t}")]
    NonFiniteState { t: f64 },
    #[error("step size underflow at t = {t} (h = {h})")]
    StepSizeUnderflow { t: f64, h: f64 },
    #[error("time {t} outside solution span [{start}, {end}]")]
    OutOfSpan { t: f64, start: f64, end: f64 },
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
}

/// Tolerances and step-control settings shared by every solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Initial step magnitude; `None` selects it automatically.
    pub initial_step: Option<f64>,
    pub controller_gains: ControllerGains,
    pub safety_factor: f64,
    pub method: Method,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            max_steps: 100_000,
            initial_step: None,
            controller_gains: ControllerGains::default(),
            safety_factor: 0.9,
            method: Method::Dop853,
        }
    }
}

impl SolverConfig {
    pub fn with_tolerances(rtol: f64, atol: f64) -> Self {
        Self { rtol, atol, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), OdeError> {
        if !(self.rtol > 0.0 && self.rtol.is_finite()) {
            return Err(OdeError::InvalidProblem(format!("rtol must be > 0, got {}", self.rtol)));
        }
        if !(self.atol > 0.0 && self.atol.is_finite()) {
            return Err(OdeError::InvalidProblem(format!("atol must be > 0, got {}", self.atol)));
        }
        if self.max_steps == 0 {
            return Err(OdeError::InvalidProblem("max_steps must be >= 1".into()));
        }
        if !(self.safety_factor > 0.0 && self.safety_factor <= 1.0) {
            return Err(OdeError::InvalidProblem("safety_factor must be in (0, 1]".into()));
        }
        if let Some(h) = self.initial_step {
            if !(h > 0.0 && h.is_finite()) {
                return Err(OdeError::InvalidProblem("initial_step must be > 0".into()));
            }
        }
        Ok(())
    }
}

/// Initial-value problem `y' = f(t, y)`, `y(t_start) = y0`.
pub struct OdeProblem<F> {
    pub vector_field: F,
    pub t_start: f64,
    /// May lie before `t_start`; the solver then integrates backward.
    pub t_end: f64,
    pub y0: Vec<f64>,
}

impl<F> OdeProblem<F>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    pub fn new(vector_field: F, t_start: f64, t_end: f64, y0: Vec<f64>) -> Self {
        Self { vector_field, t_start, t_end, y0 }
    }
}

/// Endpoint of a solve run without dense output.
#[derive(Debug, Clone)]
pub struct Endpoint {
    pub y: Vec<f64>,
    pub accepted: usize,
    pub rejected: usize,
}

/// Integrate and keep the continuous extension of every accepted step.
pub fn integrate<F>(problem: OdeProblem<F>, config: &SolverConfig) -> Result<DenseSolution, OdeError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let mut dense = DenseSolution::new(config.method, problem.y0.len(), problem.t_start, &problem.y0);
    let end = drive(problem, config, Some(&mut dense))?;
    dense.set_counts(end.accepted, end.rejected);
    Ok(dense)
}

/// Integrate and return only the final state. Skips the extra stages the
/// continuous extension would need.
pub fn integrate_endpoint<F>(problem: OdeProblem<F>, config: &SolverConfig) -> Result<Endpoint, OdeError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    drive(problem, config, None)
}

fn rms(v: impl Iterator<Item = f64>, n: usize) -> f64 {
    (v.map(|x| x * x).sum::<f64>() / n as f64).sqrt()
}

fn initial_step<F>(
    f: &mut F,
    t0: f64,
    y0: &[f64],
    f0: &[f64],
    span: f64,
    direction: f64,
    config: &SolverConfig,
) -> f64
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y0.len();
    let scale: Vec<f64> = y0.iter().map(|y| config.atol + y.abs() * config.rtol).collect();
    let d0 = rms(y0.iter().zip(&scale).map(|(y, s)| y / s), n);
    let d1 = rms(f0.iter().zip(&scale).map(|(y, s)| y / s), n);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(span);
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, d)| y + h0 * direction * d).collect();
    let mut f1 = vec![0.0; n];
    f(t0 + h0 * direction, &y1, &mut f1);
    let d2 = rms(f1.iter().zip(f0).zip(&scale).map(|((a, b), s)| (a - b) / s), n) / h0;
    let order = f64::from(config.method.error_order() + 1);
    let h1 = if d1 <= 1e-15 && d2 <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(1.0 / order)
    };
    let h = (100.0 * h0).min(h1).min(span);
    if h.is_finite() && h > 0.0 {
        h
    } else {
        span * 1e-3
    }
}

fn drive<F>(
    problem: OdeProblem<F>,
    config: &SolverConfig,
    mut dense: Option<&mut DenseSolution>,
) -> Result<Endpoint, OdeError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    config.validate()?;
    let OdeProblem { vector_field: mut f, t_start, t_end, y0 } = problem;
    if !(t_start.is_finite() && t_end.is_finite()) || t_start == t_end {
        return Err(OdeError::InvalidProblem(format!(
            "time span must be finite and non-degenerate, got [{t_start}, {t_end}]"
        )));
    }
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(OdeError::NonFiniteState { t: t_start });
    }
    let n = y0.len();
    let tab = config.method.tableau();
    let stages = tab.stages;
    let direction = (t_end - t_start).signum();
    let span = (t_end - t_start).abs();
    let h_min = 1e-14 * span;

    // k[s*n..(s+1)*n] holds stage s; slot `stages` holds f(t_new, y_new)
    let extended = match config.method {
        Method::Dop853 => 16,
        Method::Dopri5 => 7,
    };
    let mut k = vec![0.0; extended * n];
    let mut y = y0;
    let mut t = t_start;
    let mut f0 = vec![0.0; n];
    f(t, &y, &mut f0);
    if f0.iter().any(|v| !v.is_finite()) {
        return Err(OdeError::NonFiniteState { t });
    }
    let mut h_abs = match config.initial_step {
        Some(h) => h.min(span),
        None => initial_step(&mut f, t, &y, &f0, span, direction, config),
    };

    let mut y_new = vec![0.0; n];
    let mut y_stage = vec![0.0; n];
    let mut scale = vec![0.0; n];
    let mut coeff_buf = vec![0.0; 7 * n];
    let mut history: Vec<f64> = Vec::new();
    let mut accepted = 0usize;
    let mut rejected = 0usize;

    while direction * (t_end - t) > 0.0 {
        if accepted + rejected >= config.max_steps {
            return Err(OdeError::StepLimitExceeded { max_steps: config.max_steps, t });
        }
        let mut step_rejected = false;
        loop {
            if h_abs < h_min {
                return Err(OdeError::StepSizeUnderflow { t, h: h_abs });
            }
            let mut t_new = t + direction * h_abs;
            if direction * (t_new - t_end) >= 0.0 || (t_end - t_new).abs() < h_min {
                t_new = t_end;
            }
            let h = t_new - t;

            k[..n].copy_from_slice(&f0);
            for s in 1..stages {
                let row = tab.a[s];
                for j in 0..n {
                    let mut acc = 0.0;
                    for (r, a) in row.iter().enumerate() {
                        if *a != 0.0 {
                            acc += a * k[r * n + j];
                        }
                    }
                    y_stage[j] = y[j] + h * acc;
                }
                let ts = if tab.c[s] == 1.0 { t_new } else { t + tab.c[s] * h };
                let (_, rest) = k.split_at_mut(s * n);
                f(ts, &y_stage, &mut rest[..n]);
            }
            for j in 0..n {
                let mut acc = 0.0;
                for (r, b) in tab.b.iter().enumerate() {
                    if *b != 0.0 {
                        acc += b * k[r * n + j];
                    }
                }
                y_new[j] = y[j] + h * acc;
            }
            if y_new.iter().any(|v| !v.is_finite()) {
                if h_abs * MAX_SHRINK < h_min {
                    return Err(OdeError::NonFiniteState { t: t_new });
                }
                h_abs *= MAX_SHRINK;
                rejected += 1;
                step_rejected = true;
                if accepted + rejected >= config.max_steps {
                    return Err(OdeError::StepLimitExceeded { max_steps: config.max_steps, t });
                }
                continue;
            }
            {
                let (_, rest) = k.split_at_mut(stages * n);
                f(t_new, &y_new, &mut rest[..n]);
            }
            for j in 0..n {
                scale[j] = config.atol + config.rtol * y[j].abs().max(y_new[j].abs());
            }
            let err = error_norm(config.method, &k, n, h, &scale);
            if !err.is_finite() {
                h_abs *= MAX_SHRINK;
                rejected += 1;
                step_rejected = true;
                if accepted + rejected >= config.max_steps {
                    return Err(OdeError::StepLimitExceeded { max_steps: config.max_steps, t });
                }
                continue;
            }
            if err <= 1.0 {
                let mut next = adapt_step(err, h_abs, config, &history).abs();
                if step_rejected {
                    next = next.min(h_abs);
                }
                history.push(err);
                if history.len() > 2 {
                    history.remove(0);
                }
                if let Some(ds) = dense.as_deref_mut() {
                    build_dense(config.method, &mut f, &mut k, n, t, h, &y, &y_new, &mut y_stage, &mut coeff_buf);
                    let rows = if config.method == Method::Dop853 { 7 } else { 4 };
                    ds.push_step(t_new, &y_new, &coeff_buf[..rows * n]);
                }
                t = t_new;
                std::mem::swap(&mut y, &mut y_new);
                f0.copy_from_slice(&k[stages * n..(stages + 1) * n]);
                if f0.iter().any(|v| !v.is_finite()) {
                    return Err(OdeError::NonFiniteState { t });
                }
                h_abs = next;
                accepted += 1;
                break;
            }
            h_abs = adapt_step(err, h_abs, config, &history).abs();
            rejected += 1;
            step_rejected = true;
            if accepted + rejected >= config.max_steps {
                return Err(OdeError::StepLimitExceeded { max_steps: config.max_steps, t });
            }
        }
    }
    Ok(Endpoint { y, accepted, rejected })
}

fn error_norm(method: Method, k: &[f64], n: usize, h: f64, scale: &[f64]) -> f64 {
    match method {
        Method::Dopri5 => {
            let mut sum = 0.0;
            for j in 0..n {
                let mut e = 0.0;
                for (r, w) in DOPRI5_E.iter().enumerate() {
                    e += w * k[r * n + j];
                }
                let v = h * e / scale[j];
                sum += v * v;
            }
            (sum / n as f64).sqrt()
        }
        Method::Dop853 => {
            let (mut e5sq, mut e3sq) = (0.0, 0.0);
            for j in 0..n {
                let (mut e5, mut e3) = (0.0, 0.0);
                for r in 0..12 {
                    let kv = k[r * n + j];
                    e5 += DOP853_E5[r] * kv;
                    e3 += DOP853_E3[r] * kv;
                }
                e5 /= scale[j];
                e3 /= scale[j];
                e5sq += e5 * e5;
                e3sq += e3 * e3;
            }
            if e5sq == 0.0 && e3sq == 0.0 {
                return 0.0;
            }
            let denom = e5sq + 0.01 * e3sq;
            h.abs() * e5sq / (denom * n as f64).sqrt()
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn build_dense<F>(
    method: Method,
    f: &mut F,
    k: &mut [f64],
    n: usize,
    t: f64,
    h: f64,
    y_old: &[f64],
    y_new: &[f64],
    y_stage: &mut [f64],
    out: &mut [f64],
) where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    match method {
        Method::Dopri5 => {
            for (col, _) in DOPRI5_P[0].iter().enumerate() {
                for j in 0..n {
                    let mut acc = 0.0;
                    for (r, prow) in DOPRI5_P.iter().enumerate() {
                        acc += k[r * n + j] * prow[col];
                    }
                    out[col * n + j] = acc;
                }
            }
        }
        Method::Dop853 => {
            for (e, row) in DOP853_EXTRA_A.iter().enumerate() {
                let s = 13 + e;
                for j in 0..n {
                    let mut acc = 0.0;
                    for (r, a) in row.iter().enumerate().take(s) {
                        if *a != 0.0 {
                            acc += a * k[r * n + j];
                        }
                    }
                    y_stage[j] = y_old[j] + h * acc;
                }
                let (_, rest) = k.split_at_mut(s * n);
                f(t + DOP853_EXTRA_C[e] * h, y_stage, &mut rest[..n]);
            }
            let f_old = &k[..n];
            let f_new = &k[12 * n..13 * n];
            for j in 0..n {
                let dy = y_new[j] - y_old[j];
                out[j] = dy;
                out[n + j] = h * f_old[j] - dy;
                out[2 * n + j] = 2.0 * dy - h * (f_new[j] + f_old[j]);
            }
            for (r, drow) in DOP853_D.iter().enumerate() {
                for j in 0..n {
                    let mut acc = 0.0;
                    for (s, dcoef) in drow.iter().enumerate() {
                        if *dcoef != 0.0 {
                            acc += dcoef * k[s * n + j];
                        }
                    }
                    out[(3 + r) * n + j] = h * acc;
                }
            }
        }
    }
}
