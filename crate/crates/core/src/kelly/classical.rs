use serde::{Deserialize, Serialize};

use crate::error::{EcmError, Result};
use crate::model::ModelParams;

use super::solver::LambdaBounds;

/// Which drift the GBM Kelly fraction is fed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftMode {
    /// `mu = r_D`, the log drift of the normal price.
    #[default]
    DiscountRate,
    /// `mu = r_D + sigma^2 / 2`, the arithmetic drift.
    Arithmetic,
}

impl DriftMode {
    pub fn drift(self, params: &ModelParams) -> f64 {
        match self {
            DriftMode::DiscountRate => params.r_d,
            DriftMode::Arithmetic => params.r_d + 0.5 * params.sigma * params.sigma,
        }
    }
}

/// `(mu - r_f) / sigma^2`, clipped to `bounds`.
pub fn classical_kelly_lambda(mu: f64, r_f: f64, sigma: f64, bounds: LambdaBounds) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(EcmError::domain(
            "classical_kelly_lambda",
            format!("sigma = {sigma} must be > 0"),
        ));
    }
    Ok(bounds.clip((mu - r_f) / (sigma * sigma)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let u = LambdaBounds::unbounded();
        assert!((classical_kelly_lambda(2e-4, 0.0, 1e-2, u).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(classical_kelly_lambda(3e-4, 3e-4, 1e-2, u).unwrap(), 0.0);

        let p = ModelParams::base();
        let mu = DriftMode::DiscountRate.drift(&p);
        // ln(1.07) / 0.0289
        assert!(
            (classical_kelly_lambda(mu, 0.0, p.sigma, u).unwrap() - 2.341129704976291).abs()
                < 1e-12
        );
        assert_eq!(
            classical_kelly_lambda(mu, 0.0, p.sigma, LambdaBounds::leveraged()).unwrap(),
            2.0
        );
        let mu = DriftMode::Arithmetic.drift(&p);
        assert!(
            (classical_kelly_lambda(mu, 0.0, p.sigma, u).unwrap() - 2.841129704976291).abs()
                < 1e-12
        );

        assert!(classical_kelly_lambda(1e-4, 0.0, 0.0, u).is_err());
    }
}
