//! Expected one-step log growth of a two-asset portfolio under the
//! discretized return distribution.

use crate::error::{EcmError, Result};
use crate::model::{no_jump_rate, ModelParams};

use super::quadrature::{JumpMenu, NormalRule};

/// The discretized one-step return distribution at a fixed mispricing.
///
/// Each node carries a probability weight and the excess growth
/// `u = exp(y - r_f) - 1` of the risky asset over the risk-free asset, so the
/// portfolio growth relative to cash is `1 + lambda * u`.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub r_f: f64,
    pub weights: Vec<f64>,
    pub excess: Vec<f64>,
    /// `d u / d ln q` at each node.
    pub excess_slope: Vec<f64>,
}

impl Scenario {
    /// Branch weights are `1 - rho` (no correction) and `rho * eta_i`.
    /// Branches with zero weight are dropped, so `rho = 0` and `rho = 1` are
    /// both admissible here.
    pub fn new(
        params: &ModelParams,
        log_q: f64,
        menu: &JumpMenu,
        rule: &NormalRule,
    ) -> Result<Self> {
        if !log_q.is_finite() {
            return Err(EcmError::domain(
                "expected_log_growth",
                "q must be positive and finite",
            ));
        }
        if !(0.0..=1.0).contains(&params.rho) {
            return Err(EcmError::domain(
                "expected_log_growth",
                format!("rho = {} outside [0, 1]", params.rho),
            ));
        }
        let mut branches: Vec<(f64, f64, f64)> = Vec::with_capacity(menu.len() + 1);
        if params.rho < 1.0 {
            let slope = -params.rho * params.k_bar / (1.0 - params.rho);
            branches.push((1.0 - params.rho, no_jump_rate(params, log_q), slope));
        }
        if params.rho > 0.0 {
            for &(kappa, eta) in &menu.entries {
                branches.push((params.rho * eta, kappa * log_q + params.r_d, kappa));
            }
        }
        let n = branches.len() * rule.len();
        let mut weights = Vec::with_capacity(n);
        let mut excess = Vec::with_capacity(n);
        let mut excess_slope = Vec::with_capacity(n);
        for &(bw, drift, slope) in &branches {
            for (z, w) in rule.nodes.iter().zip(&rule.weights) {
                let y = drift + params.sigma * z - params.r_f;
                let u = y.exp_m1();
                weights.push(bw * w);
                excess.push(u);
                excess_slope.push((1.0 + u) * slope);
            }
        }
        Ok(Scenario {
            r_f: params.r_f,
            weights,
            excess,
            excess_slope,
        })
    }

    /// Expected log growth; `-inf` when some node ruins the portfolio.
    pub fn value(&self, lambda: f64) -> f64 {
        let mut acc = 0.0;
        for (w, u) in self.weights.iter().zip(&self.excess) {
            let x = lambda * u;
            if x <= -1.0 {
                return f64::NEG_INFINITY;
            }
            acc += w * x.ln_1p();
        }
        self.r_f + acc
    }

    /// `value(a) - value(b)` evaluated without cancellation. Both points must
    /// lie in the feasible interval.
    pub fn difference(&self, a: f64, b: f64) -> f64 {
        let d = a - b;
        self.weights
            .iter()
            .zip(&self.excess)
            .map(|(w, u)| w * (d * u / (1.0 + b * u)).ln_1p())
            .sum()
    }

    /// First and second derivatives in `lambda`.
    pub fn derivatives(&self, lambda: f64) -> (f64, f64) {
        let mut g = 0.0;
        let mut h = 0.0;
        for (w, u) in self.weights.iter().zip(&self.excess) {
            let r = u / (1.0 + lambda * u);
            g += w * r;
            h -= w * r * r;
        }
        (g, h)
    }

    /// `d^2 / (d lambda d ln q)` of the objective.
    pub fn cross_derivative(&self, lambda: f64) -> f64 {
        self.weights
            .iter()
            .zip(&self.excess)
            .zip(&self.excess_slope)
            .map(|((w, u), du)| {
                let den = 1.0 + lambda * u;
                w * du / (den * den)
            })
            .sum()
    }

    /// Open interval of allocations keeping every node's wealth positive.
    pub fn feasible_interval(&self) -> (f64, f64) {
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for &u in &self.excess {
            if u > 0.0 {
                lo = lo.max(-1.0 / u);
            } else if u < 0.0 {
                hi = hi.min(-1.0 / u);
            }
        }
        (lo, hi)
    }
}
