//! Gauss–Hermite rules and the discrete correction-size menu built from them.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{EcmError, Result};

/// Gauss–Hermite rule for the weight `exp(-x^2)` on the real line.
///
/// Nodes are ascending. A rule with `n` nodes integrates polynomials of
/// degree `2n - 1` exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(n: usize) -> Result<Self> {
        if n < 1 {
            return Err(EcmError::domain("gauss_hermite", "node count must be >= 1"));
        }
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        let pim4 = PI.powf(-0.25);
        let nf = n as f64;
        let m = n.div_ceil(2);
        let mut z = 0.0;
        for i in 0..m {
            // Asymptotic starting guesses for the largest roots, then
            // extrapolation from the two previous roots.
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * x[0],
                3 => 1.91 * z - 0.91 * x[1],
                _ => 2.0 * z - x[i - 2],
            };
            let mut pp = 0.0;
            for _ in 0..100 {
                // Orthonormal Hermite recurrence.
                let mut p1 = pim4;
                let mut p2 = 0.0;
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
                }
                pp = (2.0 * nf).sqrt() * p2;
                let dz = p1 / pp;
                z -= dz;
                if dz.abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            x[i] = z;
            x[n - 1 - i] = -z;
            w[i] = 2.0 / (pp * pp);
            w[n - 1 - i] = w[i];
        }
        if n % 2 == 1 {
            x[n / 2] = 0.0;
        }
        x.reverse();
        w.reverse();
        Ok(GaussHermite {
            nodes: x,
            weights: w,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Quadrature for the standard normal distribution: `E[f(Z)] ~ sum w_h f(z_h)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl NormalRule {
    pub fn new(n: usize) -> Result<Self> {
        let gh = GaussHermite::new(n)?;
        let total: f64 = gh.weights.iter().sum();
        Ok(NormalRule {
            nodes: gh
                .nodes
                .iter()
                .map(|x| std::f64::consts::SQRT_2 * x)
                .collect(),
            weights: gh.weights.iter().map(|w| w / total).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Discrete correction-size distribution `{(kappa_i, eta_i)}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpMenu {
    pub entries: Vec<(f64, f64)>,
}

impl JumpMenu {
    pub fn single(kappa: f64) -> Self {
        JumpMenu {
            entries: vec![(kappa, 1.0)],
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.entries.iter().map(|(k, e)| k * e).sum()
    }

    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        self.entries.iter().map(|(k, e)| e * (k - mu).powi(2)).sum()
    }
}

/// Maps `N(k_bar, sigma_kappa^2)` onto an `n`-point menu with Gauss–Hermite
/// nodes, so moments up to degree `2n - 1` are reproduced exactly.
pub fn discretize_jump_distribution(k_bar: f64, sigma_kappa: f64, n: usize) -> Result<JumpMenu> {
    if n < 1 {
        return Err(EcmError::domain(
            "discretize_jump_distribution",
            "node count must be >= 1",
        ));
    }
    if !(sigma_kappa >= 0.0) || !k_bar.is_finite() {
        return Err(EcmError::domain(
            "discretize_jump_distribution",
            format!("need finite k_bar and sigma_kappa >= 0, got ({k_bar}, {sigma_kappa})"),
        ));
    }
    let rule = NormalRule::new(n)?;
    let entries = rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .map(|(z, w)| (k_bar + sigma_kappa * z, *w))
        .collect();
    Ok(JumpMenu { entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn matches_reference_nodes() {
        // numpy.polynomial.hermite.hermgauss
        let gh = GaussHermite::new(7).unwrap();
        let x = [
            -2.65196136,
            -1.67355163,
            -0.81628788,
            0.0,
            0.81628788,
            1.67355163,
            2.65196136,
        ];
        let w = [
            0.00097178, 0.05451558, 0.42560725, 0.81026462, 0.42560725, 0.05451558, 0.00097178,
        ];
        for i in 0..7 {
            assert!((gh.nodes[i] - x[i]).abs() < 1e-8);
            assert!((gh.weights[i] - w[i]).abs() < 1e-8);
        }
        let gh = GaussHermite::new(21).unwrap();
        assert_relative_eq!(gh.nodes[20], 5.55035187, max_relative = 1e-8);
        assert_relative_eq!(gh.nodes[18], 4.12199555, max_relative = 1e-8);
        assert_relative_eq!(gh.weights[20], 3.72036507e-14, max_relative = 1e-7);
    }

    #[test]
    fn integrates_polynomials_exactly() {
        for n in [1usize, 2, 5, 7, 21, 40] {
            let rule = NormalRule::new(n).unwrap();
            // E[Z^k] for k < 2n: 0 for odd k, (k-1)!! for even k.
            for k in 0..(2 * n).min(12) {
                let got: f64 = rule
                    .nodes
                    .iter()
                    .zip(&rule.weights)
                    .map(|(z, w)| w * z.powi(k as i32))
                    .sum();
                let want = if k % 2 == 1 {
                    0.0
                } else {
                    (1..k).step_by(2).map(|v| v as f64).product()
                };
                assert!(
                    (got - want).abs() < 1e-11 * want.max(1.0),
                    "n={n} k={k}: {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn menu_examples() {
        let one = discretize_jump_distribution(0.3, 0.2, 1).unwrap();
        assert_eq!(one.entries, vec![(0.3, 1.0)]);

        let seven = discretize_jump_distribution(0.3, 0.2, 7).unwrap();
        let total: f64 = seven.entries.iter().map(|e| e.1).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(seven.entries.iter().all(|&(_, e)| e > 0.0 && e < 1.0));
        assert!((seven.mean() - 0.3).abs() < 1e-12);
        assert!((seven.variance() - 0.04).abs() < 1e-12);
        assert_eq!(seven.entries[3].0, 0.3);

        let degenerate = discretize_jump_distribution(0.45, 0.0, 5).unwrap();
        assert!(degenerate.entries.iter().all(|&(k, _)| k == 0.45));

        assert!(discretize_jump_distribution(0.3, 0.2, 0).is_err());
        assert!(discretize_jump_distribution(0.3, -0.2, 3).is_err());
    }
}
