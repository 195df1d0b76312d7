//! The reduced efficient-crashes price process.
//!
//! Between corrections the log-price drifts at a rate that grows with the
//! mispricing against the normal price; a correction pulls the log-price a
//! random fraction of the way back to the normal price.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{EcmError, Result};
use crate::rng::{self, Domain, Stream};

/// Business days per year. All stored rates are per step (one business day).
pub const TRADING_DAYS: f64 = 252.0;

/// Per-step log rate of an annual growth rate: `ln(1 + annual) / 252`.
pub fn per_step_rate(annual: f64) -> f64 {
    (1.0 + annual).ln() / TRADING_DAYS
}

/// Annual growth rate of a per-step log rate.
pub fn annual_rate(per_step: f64) -> f64 {
    (per_step * TRADING_DAYS).exp_m1()
}

/// Per-step volatility of an annual volatility: `annual / sqrt(252)`.
pub fn per_step_vol(annual: f64) -> f64 {
    annual / TRADING_DAYS.sqrt()
}

pub fn annual_vol(per_step: f64) -> f64 {
    per_step * TRADING_DAYS.sqrt()
}

/// Per-step parameters of the price process plus the risk-free rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Log discount rate of the asset.
    pub r_d: f64,
    /// Log growth rate of the normal price.
    pub r_n: f64,
    /// Gaussian volatility.
    pub sigma: f64,
    /// Probability of a correction per step.
    pub rho: f64,
    /// Mean relative correction size.
    pub k_bar: f64,
    /// Standard deviation of the relative correction size.
    pub sigma_kappa: f64,
    /// Risk-free log rate.
    pub r_f: f64,
    /// Initial price, also the initial normal price.
    pub p0: f64,
}

impl ModelParams {
    /// 7% yearly growth, 17% yearly volatility, one correction per 100 days
    /// on average removing about a third of the mispricing.
    pub fn base() -> Self {
        ModelParams {
            r_d: 1.07f64.ln() / TRADING_DAYS,
            r_n: 1.07f64.ln() / TRADING_DAYS,
            sigma: 0.17 / TRADING_DAYS.sqrt(),
            rho: 0.01,
            k_bar: 0.3,
            sigma_kappa: 0.2,
            r_f: 0.0,
            p0: 1.0,
        }
    }

    /// Checks the invariants required to generate paths.
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("r_d", self.r_d),
            ("r_n", self.r_n),
            ("sigma", self.sigma),
            ("rho", self.rho),
            ("k_bar", self.k_bar),
            ("sigma_kappa", self.sigma_kappa),
            ("r_f", self.r_f),
            ("p0", self.p0),
        ];
        if let Some((name, _)) = fields.iter().find(|(_, v)| !v.is_finite()) {
            return Err(EcmError::InvalidParams(format!("{name} must be finite")));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(EcmError::InvalidParams(format!(
                "rho = {} violates 0 <= rho < 1",
                self.rho
            )));
        }
        if self.sigma < 0.0 {
            return Err(EcmError::InvalidParams(format!(
                "sigma = {} must be >= 0",
                self.sigma
            )));
        }
        if self.sigma_kappa < 0.0 {
            return Err(EcmError::InvalidParams(format!(
                "sigma_kappa = {} must be >= 0",
                self.sigma_kappa
            )));
        }
        if self.p0 <= 0.0 {
            return Err(EcmError::InvalidParams(format!(
                "p0 = {} must be > 0",
                self.p0
            )));
        }
        Ok(())
    }

    /// Normal price at step `t`, evaluated in closed form.
    pub fn normal_price_at(&self, t: usize) -> f64 {
        self.p0 * (self.r_n * t as f64).exp()
    }
}

impl Default for ModelParams {
    fn default() -> Self {
        Self::base()
    }
}

/// Per-step no-correction return that keeps the expected log return at
/// `r_d` for any mispricing `q = N/p`.
pub fn expected_return(params: &ModelParams, q: f64) -> Result<f64> {
    if !(q > 0.0) || !q.is_finite() {
        return Err(EcmError::domain(
            "expected_return",
            format!("q = {q} must be positive"),
        ));
    }
    if !(params.rho < 1.0) {
        return Err(EcmError::domain(
            "expected_return",
            format!("rho = {} must be < 1", params.rho),
        ));
    }
    Ok(no_jump_rate(params, q.ln()))
}

/// `expected_return` in terms of `ln q`, unchecked.
#[inline]
pub(crate) fn no_jump_rate(params: &ModelParams, log_q: f64) -> f64 {
    params.r_d - params.rho * params.k_bar * log_q / (1.0 - params.rho)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    NoJump,
    Jump,
}

/// State of the process at one step together with the draws that produced it.
/// For the initial state the draw fields are zero and the branch is `NoJump`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathStep {
    pub price: f64,
    pub normal_price: f64,
    /// Inverted mispricing `normal_price / price`.
    pub q: f64,
    pub eps: f64,
    pub branch: Branch,
    pub kappa: Option<f64>,
    /// No-correction rate implied by the previous state's mispricing.
    pub expected_return: f64,
    /// Realized log return from the previous step; `price = prev.price * exp(log_return)`.
    pub log_return: f64,
}

impl PathStep {
    pub fn initial(price: f64, normal_price: f64) -> Self {
        PathStep {
            price,
            normal_price,
            q: normal_price / price,
            eps: 0.0,
            branch: Branch::NoJump,
            kappa: None,
            expected_return: 0.0,
            log_return: 0.0,
        }
    }

    /// `ln(price / normal_price)`.
    pub fn log_mispricing(&self) -> f64 {
        -self.q.ln()
    }
}

/// Advances the process by one step.
///
/// A correction happens when `uniform_draw <= rho`; `kappa_draw` is only read
/// in that case. Returns `None` when the new price is not a positive finite
/// number.
pub fn step(
    params: &ModelParams,
    state: &PathStep,
    uniform_draw: f64,
    gauss_draw: f64,
    kappa_draw: f64,
) -> Option<PathStep> {
    let log_q = state.q.ln();
    let rbar = no_jump_rate(params, log_q);
    let (branch, kappa, drift) = if uniform_draw > params.rho {
        (Branch::NoJump, None, rbar)
    } else {
        (
            Branch::Jump,
            Some(kappa_draw),
            params.r_d + kappa_draw * log_q,
        )
    };
    let log_return = drift + params.sigma * gauss_draw;
    let price = state.price * log_return.exp();
    if !(price.is_finite() && price > 0.0) {
        return None;
    }
    let normal_price = state.normal_price * params.r_n.exp();
    Some(PathStep {
        price,
        normal_price,
        q: normal_price / price,
        eps: gauss_draw,
        branch,
        kappa,
        expected_return: rbar,
        log_return,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedInfo {
    pub master_seed: u64,
    pub sim_index: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricePath {
    /// `horizon + 1` states; index 0 is the initial state.
    pub steps: Vec<PathStep>,
    pub params: ModelParams,
    pub seed_info: Option<SeedInfo>,
}

impl PricePath {
    pub fn horizon(&self) -> usize {
        self.steps.len() - 1
    }

    pub fn prices(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        self.steps.iter().map(|s| s.price)
    }

    pub fn terminal_price(&self) -> f64 {
        self.steps[self.steps.len() - 1].price
    }

    pub fn jump_count(&self) -> usize {
        self.steps
            .iter()
            .filter(|s| s.branch == Branch::Jump)
            .count()
    }
}

/// Generates a path started in the no-bubble state `p = N = p0`.
pub fn generate_path(
    params: &ModelParams,
    horizon: usize,
    stream: &mut Stream,
) -> Result<PricePath> {
    generate_path_from(
        params,
        PathStep::initial(params.p0, params.p0),
        horizon,
        stream,
    )
}

/// Generates a path from an arbitrary initial state.
///
/// Per step the draws are taken in the order uniform, gaussian, then the
/// correction size only when a correction happens.
pub fn generate_path_from(
    params: &ModelParams,
    start: PathStep,
    horizon: usize,
    stream: &mut Stream,
) -> Result<PricePath> {
    params.validate()?;
    if horizon < 1 {
        return Err(EcmError::domain("generate_path", "horizon must be >= 1"));
    }
    let mut steps = Vec::with_capacity(horizon + 1);
    steps.push(start);
    let mut state = start;
    for t in 1..=horizon {
        let uniform: f64 = stream.gen();
        let gauss: f64 = stream.sample(StandardNormal);
        let kappa = if uniform <= params.rho {
            let z: f64 = stream.sample(StandardNormal);
            params.k_bar + params.sigma_kappa * z
        } else {
            0.0
        };
        state = step(params, &state, uniform, gauss, kappa)
            .ok_or(EcmError::PathOverflow { sim: 0, step: t })?;
        steps.push(state);
    }
    Ok(PricePath {
        steps,
        params: *params,
        seed_info: None,
    })
}

/// Path `sim_index` of the ensemble addressed by `master_seed`.
pub fn generate_indexed_path(
    params: &ModelParams,
    horizon: usize,
    master_seed: u64,
    sim_index: u64,
) -> Result<PricePath> {
    let mut stream = rng::stream(master_seed, Domain::Path, sim_index);
    match generate_path(params, horizon, &mut stream) {
        Ok(mut path) => {
            path.seed_info = Some(SeedInfo {
                master_seed,
                sim_index,
            });
            Ok(path)
        }
        Err(EcmError::PathOverflow { step, .. }) => Err(EcmError::PathOverflow {
            sim: sim_index,
            step,
        }),
        Err(e) => Err(e),
    }
}

/// `count` independent paths. Path `j` depends only on `(master_seed, j)`;
/// the lowest-indexed failure is reported.
pub fn generate_ensemble(
    params: &ModelParams,
    horizon: usize,
    count: usize,
    master_seed: u64,
) -> Result<Vec<PricePath>> {
    if count < 1 {
        return Err(EcmError::domain("generate_ensemble", "count must be >= 1"));
    }
    params.validate()?;
    (0..count as u64)
        .into_par_iter()
        .map(|j| generate_indexed_path(params, horizon, master_seed, j))
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn base_no_noise() -> ModelParams {
        ModelParams {
            sigma: 0.0,
            ..ModelParams::base()
        }
    }

    #[test]
    fn base_params_match_reference_values() {
        let p = ModelParams::base();
        assert_eq!(p.r_d, 1.07f64.ln() / 252.0);
        assert_eq!(p.r_n, p.r_d);
        assert_eq!(p.sigma, 0.17 / 252f64.sqrt());
        assert_eq!(
            (p.rho, p.k_bar, p.sigma_kappa, p.r_f, p.p0),
            (0.01, 0.3, 0.2, 0.0, 1.0)
        );
        p.validate().unwrap();
    }

    #[test]
    fn validation_rejects_out_of_range() {
        let bad = [
            ModelParams {
                rho: 1.0,
                ..ModelParams::base()
            },
            ModelParams {
                rho: -0.1,
                ..ModelParams::base()
            },
            ModelParams {
                sigma: -1e-3,
                ..ModelParams::base()
            },
            ModelParams {
                sigma_kappa: -1e-3,
                ..ModelParams::base()
            },
            ModelParams {
                p0: 0.0,
                ..ModelParams::base()
            },
            ModelParams {
                r_d: f64::NAN,
                ..ModelParams::base()
            },
        ];
        for p in bad {
            assert!(p.validate().is_err(), "{p:?}");
        }
    }

    #[test]
    fn expected_return_examples() {
        let base = ModelParams::base();
        assert_eq!(expected_return(&base, 1.0).unwrap(), base.r_d);
        let no_jumps = ModelParams { rho: 0.0, ..base };
        assert_eq!(expected_return(&no_jumps, 0.37).unwrap(), base.r_d);
        // 40-digit evaluation of r_D - rho*K*ln(0.9)/(1-rho)
        assert_relative_eq!(
            expected_return(&base, 0.9).unwrap(),
            5.877609901651168e-4,
            max_relative = 1e-13
        );
        assert!(expected_return(&base, 0.0).is_err());
        assert!(expected_return(&base, -1.0).is_err());
    }

    #[test]
    fn deterministic_without_noise_and_jumps() {
        let p = ModelParams {
            rho: 0.0,
            ..base_no_noise()
        };
        let mut s = rng::stream(1, Domain::Path, 0);
        let path = generate_path(&p, 500, &mut s).unwrap();
        for (t, st) in path.steps.iter().enumerate() {
            assert_relative_eq!(st.price, (p.r_d * t as f64).exp(), max_relative = 1e-12);
        }
    }

    #[test]
    fn full_correction_returns_to_normal_price() {
        let p = base_no_noise();
        let state = PathStep::initial(1.5, 1.0);
        let next = step(&p, &state, 0.0, 0.3, 1.0).unwrap();
        assert_eq!(next.branch, Branch::Jump);
        assert!((next.price / next.normal_price).ln().abs() < 1e-15);
    }

    #[test]
    fn no_jump_step_amplifies_mispricing() {
        let p = base_no_noise();
        let factor = 1.0 + p.rho * p.k_bar / (1.0 - p.rho);
        let mut s = rng::stream(99, Domain::Path, 0);
        for _ in 0..10 {
            let m: f64 = s.gen_range(-1.0..1.0);
            let state = PathStep::initial(m.exp(), 1.0);
            let next = step(&p, &state, 0.5, 0.0, 0.0).unwrap();
            let m_next = (next.price / next.normal_price).ln();
            assert!((m_next - factor * m).abs() < 1e-14, "{m} -> {m_next}");
        }
    }

    #[test]
    fn overflow_is_reported_with_step() {
        let p = ModelParams {
            rho: 0.0,
            sigma: 0.0,
            r_d: 400.0,
            r_n: 0.0,
            ..ModelParams::base()
        };
        let err = generate_indexed_path(&p, 10, 3, 5).unwrap_err();
        assert_eq!(err, EcmError::PathOverflow { sim: 5, step: 2 });
    }

    #[test]
    fn paths_are_reproducible() {
        let p = ModelParams::base();
        let a = generate_indexed_path(&p, 1250, 42, 0).unwrap();
        let b = generate_indexed_path(&p, 1250, 42, 0).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.steps[0].price, 1.0);
        assert_eq!(a.steps[0].normal_price, 1.0);
        assert!(a.prices().all(|x| x > 0.0));
        for (t, s) in a.steps.iter().enumerate() {
            assert_eq!(s.q, s.normal_price / s.price);
            assert_relative_eq!(s.normal_price, p.normal_price_at(t), max_relative = 1e-12);
        }
    }

    #[test]
    fn ensemble_of_one_matches_indexed_path() {
        let p = ModelParams::base();
        let e = generate_ensemble(&p, 300, 1, 11).unwrap();
        assert_eq!(e[0], generate_indexed_path(&p, 300, 11, 0).unwrap());
        assert!(generate_ensemble(&p, 300, 0, 11).is_err());
    }
}
