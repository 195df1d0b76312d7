//! Closed-form second-order approximation of the crash-aware Kelly fraction.

use crate::error::{EcmError, Result};
use crate::model::{no_jump_rate, ModelParams};

use super::solver::LambdaBounds;

/// Intermediate terms of the approximate Kelly fraction at one mispricing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproxSolutionTerms {
    /// Gross excess growth without a correction, `exp(rbar - r_f)`.
    pub a: f64,
    /// Gross excess growth of the mean correction, `exp(K ln q + r_D - r_f)`.
    pub b: f64,
    pub d: f64,
    pub h2: f64,
    /// Fourth order in `sigma`; negligible at daily volatilities.
    pub h3: f64,
}

impl ApproxSolutionTerms {
    pub fn new(params: &ModelParams, q: f64) -> Result<Self> {
        if !(q > 0.0 && q.is_finite()) {
            return Err(EcmError::domain(
                "optimal_lambda_approx",
                format!("q = {q} must be positive"),
            ));
        }
        if !(0.0..1.0).contains(&params.rho) {
            return Err(EcmError::domain(
                "optimal_lambda_approx",
                format!("rho = {} outside [0, 1)", params.rho),
            ));
        }
        let log_q = q.ln();
        let rho = params.rho;
        let s2 = params.sigma * params.sigma;
        let a = (no_jump_rate(params, log_q) - params.r_f).exp();
        let b = (params.k_bar * log_q + params.r_d - params.r_f).exp();
        let d = (1.0 - rho) * a + rho * b;
        let second = (1.0 - rho) * a * a + rho * b * b;
        Ok(ApproxSolutionTerms {
            a,
            b,
            d,
            h2: (2.0 * second - d) * s2,
            h3: second * 0.75 * s2 * s2,
        })
    }

    pub fn numerator(&self, sigma: f64) -> f64 {
        self.d * (1.0 + 0.5 * sigma * sigma) - 1.0
    }

    pub fn denominator(&self, rho: f64) -> f64 {
        (1.0 - rho) * (self.a - 1.0).powi(2) + rho * (self.b - 1.0).powi(2) + self.h2 + self.h3
    }
}

/// Approximate optimal fraction, clipped to `bounds`.
pub fn optimal_lambda_approx(params: &ModelParams, q: f64, bounds: LambdaBounds) -> Result<f64> {
    let terms = ApproxSolutionTerms::new(params, q)?;
    let den = terms.denominator(params.rho);
    if den == 0.0 || !den.is_finite() {
        return Err(EcmError::DegenerateApprox {
            a: terms.a,
            b: terms.b,
            h2: terms.h2,
            h3: terms.h3,
        });
    }
    Ok(bounds.clip(terms.numerator(params.sigma) / den))
}

/// Leading-order form: `(r_D - r_f + sigma^2/2) / (sigma^2 + (1-rho)(rbar - r_f)^2 + rho(K ln q + r_D - r_f)^2)`.
pub fn optimal_lambda_leading_order(params: &ModelParams, q: f64) -> Result<f64> {
    if !(q > 0.0 && q.is_finite()) {
        return Err(EcmError::domain(
            "optimal_lambda_approx",
            format!("q = {q} must be positive"),
        ));
    }
    let log_q = q.ln();
    let s2 = params.sigma * params.sigma;
    let rbar = no_jump_rate(params, log_q);
    let jump = params.k_bar * log_q + params.r_d - params.r_f;
    Ok((params.r_d - params.r_f + 0.5 * s2)
        / (s2 + (1.0 - params.rho) * (rbar - params.r_f).powi(2) + params.rho * jump * jump))
}
