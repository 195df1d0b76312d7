//! Maximization of the expected log growth over the allocation fraction.

use serde::{Deserialize, Serialize};

use crate::error::{EcmError, Result};
use crate::model::ModelParams;

use super::objective::Scenario;
use super::quadrature::{discretize_jump_distribution, JumpMenu, NormalRule};

/// Search limit standing in for an infinite allocation bound. Only reached
/// when the discretized distribution has no losing node on one side.
pub const LAMBDA_CAP: f64 = 1e4;

pub const DEFAULT_JUMP_NODES: usize = 7;
pub const DEFAULT_GAUSS_NODES: usize = 21;
pub const DEFAULT_TOL: f64 = 1e-10;

/// Admissible range of the risky fraction; either side may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaBounds {
    pub lo: f64,
    pub hi: f64,
}

impl LambdaBounds {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(EcmError::domain(
                "lambda_bounds",
                format!("need lo <= hi, got [{lo}, {hi}]"),
            ));
        }
        Ok(LambdaBounds { lo, hi })
    }

    /// At most 200% long and 100% short.
    pub const fn leveraged() -> Self {
        LambdaBounds { lo: -1.0, hi: 2.0 }
    }

    pub const fn unbounded() -> Self {
        LambdaBounds {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        }
    }

    pub fn is_unbounded(&self) -> bool {
        self.lo == f64::NEG_INFINITY && self.hi == f64::INFINITY
    }

    pub fn clip(&self, lambda: f64) -> f64 {
        lambda.max(self.lo).min(self.hi)
    }

    pub fn contains(&self, lambda: f64) -> bool {
        lambda >= self.lo && lambda <= self.hi
    }

    pub fn label(&self) -> String {
        fn fmt(x: f64) -> String {
            if x == f64::INFINITY {
                "inf".into()
            } else if x == f64::NEG_INFINITY {
                "-inf".into()
            } else {
                format!("{x}")
            }
        }
        format!("[{},{}]", fmt(self.lo), fmt(self.hi))
    }
}

/// Golden-section search for the maximizer of a unimodal function on
/// `[lo, hi]`. `left_better(c, d)` must report whether `f(c) >= f(d)`.
pub fn golden_section_max(
    lo: f64,
    hi: f64,
    tol: f64,
    mut left_better: impl FnMut(f64, f64) -> bool,
) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    while b - a > tol {
        if left_better(c, d) {
            b = d;
            d = c;
            c = b - INV_PHI * (b - a);
        } else {
            a = c;
            c = d;
            d = a + INV_PHI * (b - a);
        }
        if !(c < d) {
            break;
        }
    }
    0.5 * (a + b)
}

/// Search interval: `bounds` intersected with the feasible interval pulled in
/// by `tol` on finite sides, with infinite sides capped at [`LAMBDA_CAP`].
fn search_interval(scenario: &Scenario, bounds: LambdaBounds, tol: f64) -> Result<(f64, f64)> {
    let (flo, fhi) = scenario.feasible_interval();
    let lo = if bounds.lo > flo + tol {
        bounds.lo
    } else {
        flo + tol
    };
    let hi = if bounds.hi < fhi - tol {
        bounds.hi
    } else {
        fhi - tol
    };
    let lo = lo.max(-LAMBDA_CAP);
    let hi = hi.min(LAMBDA_CAP);
    if lo > hi || lo.is_nan() || hi.is_nan() {
        return Err(EcmError::EmptyFeasibleInterval { lo, hi });
    }
    Ok((lo, hi))
}

/// Golden-section maximizer of the scenario objective within `bounds`.
pub fn maximize_golden(scenario: &Scenario, bounds: LambdaBounds, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(EcmError::domain(
            "optimal_lambda_numeric",
            "tol must be positive",
        ));
    }
    let (lo, hi) = search_interval(scenario, bounds, tol)?;
    if hi - lo <= tol {
        return Ok(0.5 * (lo + hi));
    }
    Ok(golden_section_max(lo, hi, tol, |c, d| {
        scenario.difference(c, d) >= 0.0
    }))
}

/// Solves the stationarity condition with Newton steps safeguarded by
/// bisection. The derivative is strictly decreasing, so the bracket always
/// contains the maximizer. Used to fill interpolation tables.
pub fn maximize_stationary(
    scenario: &Scenario,
    bounds: LambdaBounds,
    tol: f64,
    start: f64,
) -> Result<f64> {
    let (mut a, mut b) = search_interval(scenario, bounds, tol)?;
    if scenario.derivatives(a).0 <= 0.0 {
        return Ok(a);
    }
    if scenario.derivatives(b).0 >= 0.0 {
        return Ok(b);
    }
    let mut x = if start > a && start < b {
        start
    } else {
        0.5 * (a + b)
    };
    for _ in 0..200 {
        let (g, h) = scenario.derivatives(x);
        if g > 0.0 {
            a = x;
        } else if g < 0.0 {
            b = x;
        } else {
            return Ok(x);
        }
        let mut next = x - g / h;
        if !(next > a && next < b) {
            next = 0.5 * (a + b);
        }
        if (next - x).abs() <= 1e-14 * x.abs().max(1.0) || b - a <= 1e-14 * x.abs().max(1.0) {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

/// Crash-aware Kelly optimizer: a discrete correction-size menu and a
/// Gaussian quadrature rule.
#[derive(Debug, Clone, PartialEq)]
pub struct EcoKelly {
    pub menu: JumpMenu,
    pub rule: NormalRule,
}

impl EcoKelly {
    pub fn new(params: &ModelParams, jump_nodes: usize, gauss_nodes: usize) -> Result<Self> {
        if gauss_nodes < 3 {
            return Err(EcmError::domain(
                "expected_log_growth",
                "need at least 3 Gaussian nodes",
            ));
        }
        Ok(EcoKelly {
            menu: discretize_jump_distribution(params.k_bar, params.sigma_kappa, jump_nodes)?,
            rule: NormalRule::new(gauss_nodes)?,
        })
    }

    /// Seven correction sizes, 21 Gaussian nodes.
    pub fn with_defaults(params: &ModelParams) -> Result<Self> {
        Self::new(params, DEFAULT_JUMP_NODES, DEFAULT_GAUSS_NODES)
    }

    pub fn scenario(&self, params: &ModelParams, q: f64) -> Result<Scenario> {
        check_q(q)?;
        Scenario::new(params, q.ln(), &self.menu, &self.rule)
    }

    pub fn expected_log_growth(&self, params: &ModelParams, q: f64, lambda: f64) -> Result<f64> {
        Ok(self.scenario(params, q)?.value(lambda))
    }

    pub fn optimal_lambda(
        &self,
        params: &ModelParams,
        q: f64,
        bounds: LambdaBounds,
        tol: f64,
    ) -> Result<f64> {
        maximize_golden(&self.scenario(params, q)?, bounds, tol)
    }
}

fn check_q(q: f64) -> Result<()> {
    if q > 0.0 && q.is_finite() {
        Ok(())
    } else {
        Err(EcmError::domain(
            "expected_log_growth",
            format!("q = {q} must be positive"),
        ))
    }
}

/// Expected one-step log growth with `gauss_nodes` Gaussian nodes.
pub fn expected_log_growth(
    lambda: f64,
    params: &ModelParams,
    q: f64,
    menu: &JumpMenu,
    gauss_nodes: usize,
) -> Result<f64> {
    check_q(q)?;
    if gauss_nodes < 3 {
        return Err(EcmError::domain(
            "expected_log_growth",
            "need at least 3 Gaussian nodes",
        ));
    }
    let rule = NormalRule::new(gauss_nodes)?;
    Ok(Scenario::new(params, q.ln(), menu, &rule)?.value(lambda))
}

/// Maximizer of the expected log growth within `bounds`, 21 Gaussian nodes.
pub fn optimal_lambda_numeric(
    params: &ModelParams,
    q: f64,
    menu: &JumpMenu,
    bounds: LambdaBounds,
    tol: f64,
) -> Result<f64> {
    check_q(q)?;
    let rule = NormalRule::new(DEFAULT_GAUSS_NODES)?;
    maximize_golden(&Scenario::new(params, q.ln(), menu, &rule)?, bounds, tol)
}
