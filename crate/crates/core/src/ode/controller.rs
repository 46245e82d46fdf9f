//! Proportional–integral–derivative step-size control.

use serde::{Deserialize, Serialize};

use super::SolverConfig;

/// Largest growth factor applied to a step in one adaptation.
pub const MAX_GROWTH: f64 = 10.0;
/// Smallest shrink factor applied to a step in one adaptation.
pub const MAX_SHRINK: f64 = 0.2;

/// Coefficients `(p, i, d)` of the step-size controller.
///
/// With exponent `1/q` (`q` = error-estimator order + 1) the proposed factor is
///
/// ```text
/// safety * e_n^-(p+i+d)/q * e_{n-1}^(p+2d)/q * e_{n-2}^-d/q
/// ```
///
/// where `e_n` is the current scaled error norm. `(0, 1, 0)` is the classical
/// elementary controller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerGains {
    pub p: f64,
    pub i: f64,
    pub d: f64,
}

impl Default for ControllerGains {
    fn default() -> Self {
        Self { p: 0.0, i: 1.0, d: 0.0 }
    }
}

/// Propose the next step from the current error norm.
///
/// `history` holds previously accepted error norms, most recent last; missing
/// entries count as 1. The result keeps the sign of `h` and its magnitude is
/// clamped to `[MAX_SHRINK, MAX_GROWTH] * |h|`.
pub fn adapt_step(error_norm: f64, h: f64, config: &SolverConfig, history: &[f64]) -> f64 {
    let q = f64::from(config.method.error_order() + 1);
    let ControllerGains { p, i, d } = config.controller_gains;
    let beta1 = (p + i + d) / q;
    let beta2 = -(p + 2.0 * d) / q;
    let beta3 = d / q;

    let prev = history.last().copied().unwrap_or(1.0);
    let prev_prev = if history.len() >= 2 { history[history.len() - 2] } else { 1.0 };

    let factor = if error_norm <= 0.0 {
        MAX_GROWTH
    } else {
        let inv = |e: f64| if e > 0.0 { 1.0 / e } else { 1.0 };
        let raw = config.safety_factor
            * inv(error_norm).powf(beta1)
            * inv(prev).powf(beta2)
            * inv(prev_prev).powf(beta3);
        if raw.is_finite() {
            raw
        } else {
            MAX_GROWTH
        }
    };
    h * factor.clamp(MAX_SHRINK, MAX_GROWTH)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_error_scales_by_safety() {
        let cfg = SolverConfig::default();
        let h = adapt_step(1.0, 0.1, &cfg, &[]);
        assert!((h - 0.1 * cfg.safety_factor).abs() < 1e-15);
    }

    #[test]
    fn error_at_order_power_halves_the_step() {
        let cfg = SolverConfig::default();
        let q = cfg.method.error_order() + 1;
        let h = adapt_step(2f64.powi(q as i32), 0.4, &cfg, &[0.3, 0.7]);
        assert!((h - 0.4 * cfg.safety_factor / 2.0).abs() < 1e-14);
    }

    #[test]
    fn vanishing_error_hits_growth_clamp() {
        let cfg = SolverConfig::default();
        assert_eq!(adapt_step(0.0, 0.5, &cfg, &[]), 5.0);
        assert_eq!(adapt_step(1e-300, 0.5, &cfg, &[]), 5.0);
    }

    #[test]
    fn huge_error_hits_shrink_clamp_and_keeps_sign() {
        let cfg = SolverConfig::default();
        let h = adapt_step(1e30, -0.5, &cfg, &[]);
        assert!((h + 0.1).abs() < 1e-15);
    }

    #[test]
    fn derivative_gain_uses_history() {
        let cfg = SolverConfig {
            controller_gains: ControllerGains { p: 0.0, i: 1.0, d: 0.5 },
            ..SolverConfig::default()
        };
        let a = adapt_step(0.5, 1.0, &cfg, &[1.0, 1.0]);
        let b = adapt_step(0.5, 1.0, &cfg, &[0.5, 2.0]);
        assert!(a != b);
    }
}
