use nalgebra::DMatrix;

use super::ControlAffineSystem;
use crate::error::{Error, Result};

/// Linear time-invariant system `x' = A x + B u`.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

impl LinearSystem {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        if !a.is_square() || b.nrows() != a.nrows() {
            return Err(Error::InvalidConfig(format!(
                "LTI shapes incompatible: A is {}x{}, B is {}x{}",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols()
            )));
        }
        Ok(Self { a, b })
    }
}

impl ControlAffineSystem for LinearSystem {
    fn name(&self) -> &str {
        "lti"
    }
    fn state_dim(&self) -> usize {
        self.a.nrows()
    }
    fn input_dim(&self) -> usize {
        self.b.ncols()
    }
    fn drift(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        let n = self.a.nrows();
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..n).map(|j| self.a[(i, j)] * x[j]).sum();
        }
    }
    fn input_matrix(&self, _t: f64, _x: &[f64], out: &mut DMatrix<f64>) {
        out.copy_from(&self.b);
    }
    fn drift_jacobian(&self, _t: f64, _x: &[f64], out: &mut DMatrix<f64>) {
        out.copy_from(&self.a);
    }
}
