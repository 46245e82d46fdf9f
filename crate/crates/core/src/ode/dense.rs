use super::{Method, OdeError};

/// Continuous solution assembled from per-step interpolants.
///
/// Knot times are stored in integration order (decreasing for backward
/// solves). Queries landing exactly on a knot return the stored discrete state.
#[derive(Debug, Clone)]
pub struct DenseSolution {
    method: Method,
    dim: usize,
    /// Knot times `t_0, ..., t_n`.
    times: Vec<f64>,
    /// Knot states, `dim` values per knot.
    states: Vec<f64>,
    /// Interpolant coefficients, `rows * dim` values per step.
    coeffs: Vec<f64>,
    rows: usize,
    accepted: usize,
    rejected: usize,
}

impl DenseSolution {
    pub(crate) fn new(method: Method, dim: usize, t0: f64, y0: &[f64]) -> Self {
        let rows = match method {
            Method::Dop853 => 7,
            Method::Dopri5 => 4,
        };
        Self {
            method,
            dim,
            times: vec![t0],
            states: y0.to_vec(),
            coeffs: Vec::new(),
            rows,
            accepted: 0,
            rejected: 0,
        }
    }

    pub(crate) fn push_step(&mut self, t_new: f64, y_new: &[f64], coeffs: &[f64]) {
        debug_assert_eq!(coeffs.len(), self.rows * self.dim);
        self.times.push(t_new);
        self.states.extend_from_slice(y_new);
        self.coeffs.extend_from_slice(coeffs);
    }

    pub(crate) fn set_counts(&mut self, accepted: usize, rejected: usize) {
        self.accepted = accepted;
        self.rejected = rejected;
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn method(&self) -> Method {
        self.method
    }

    /// `(t_start, t_end)` in integration order.
    pub fn t_span(&self) -> (f64, f64) {
        (self.times[0], *self.times.last().unwrap())
    }

    pub fn step_count(&self) -> usize {
        self.times.len() - 1
    }

    pub fn accepted_steps(&self) -> usize {
        self.accepted
    }

    pub fn rejected_steps(&self) -> usize {
        self.rejected
    }

    pub fn knot_times(&self) -> &[f64] {
        &self.times
    }

    pub fn knot_state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn final_state(&self) -> &[f64] {
        self.knot_state(self.times.len() - 1)
    }

    /// Interpolated state at `t`.
    pub fn eval(&self, t: f64) -> Result<Vec<f64>, OdeError> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(t, &mut out)?;
        Ok(out)
    }

    /// Interpolated state at `t`, written into `out`.
    ///
    /// Times within `1e-12 * |span|` outside the span are clamped onto it,
    /// which absorbs rounding in stage-time arithmetic of callers.
    pub fn eval_into(&self, t: f64, out: &mut [f64]) -> Result<(), OdeError> {
        let (a, b) = self.t_span();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let slack = 1e-12 * (hi - lo).max(f64::MIN_POSITIVE);
        if !(t >= lo - slack && t <= hi + slack) {
            return Err(OdeError::OutOfSpan { t, start: a, end: b });
        }
        let t = t.clamp(lo, hi);
        let forward = b >= a;
        let n = self.times.len();
        // index of the first knot strictly past t in integration order
        let idx = if forward {
            self.times.partition_point(|&s| s <= t)
        } else {
            self.times.partition_point(|&s| s >= t)
        };
        if idx > 0 && self.times[idx - 1] == t {
            out.copy_from_slice(self.knot_state(idx - 1));
            return Ok(());
        }
        let seg = idx.clamp(1, n - 1) - 1;
        let t_old = self.times[seg];
        let h = self.times[seg + 1] - t_old;
        let x = (t - t_old) / h;
        let y_old = self.knot_state(seg);
        let c = &self.coeffs[seg * self.rows * self.dim..(seg + 1) * self.rows * self.dim];
        match self.method {
            Method::Dop853 => {
                // nested form: F0 + (1-x)(F1 + x(F2 + (1-x)(F3 + ...)))
                for j in 0..self.dim {
                    let mut acc = 0.0;
                    for (i, r) in (0..self.rows).rev().enumerate() {
                        acc += c[r * self.dim + j];
                        if i % 2 == 0 {
                            acc *= x;
                        } else {
                            acc *= 1.0 - x;
                        }
                    }
                    out[j] = y_old[j] + acc;
                }
            }
            Method::Dopri5 => {
                for j in 0..self.dim {
                    let mut acc = 0.0;
                    for r in (0..self.rows).rev() {
                        acc = (acc + c[r * self.dim + j]) * x;
                    }
                    out[j] = y_old[j] + h * acc;
                }
            }
        }
        Ok(())
    }
}
