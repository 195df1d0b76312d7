//! Experiment families over simulated ensembles.
//!
//! A plan names a family, the base parameters, the grid to sweep and the
//! strategies to run. Every simulation draws from streams addressed by
//! `(master_seed, sim_index)`, so cells of a sweep are coupled: path `j` of
//! one cell uses the same noise as path `j` of every other cell.
//!
//! Horizon grids are evaluated on prefixes. Path `j` is generated once up to
//! the largest horizon, and each shorter window is its leading segment,
//! which is exactly the path the same stream would produce at that horizon.

mod runner;

use serde::{Deserialize, Serialize};

use crate::error::{EcmError, Result};
use crate::kelly::DriftMode;
use crate::metrics::{Aggregation, Histogram, MetricsReport, Quartiles};
use crate::model::{per_step_rate, ModelParams, TRADING_DAYS};
use crate::rng::{self, Domain};
use crate::strategy::{SolverMode, StrategyId};

pub use runner::{
    run, run_error_scan, run_histogram, run_sensitivity, run_sign_test, run_window_sweep,
};

/// Default number of simulations per cell.
pub const DEFAULT_SIMS: usize = 10_000;
/// Reduced ensemble size for quick runs.
pub const DESK_SIMS: usize = 500;
pub const DEFAULT_BINS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Histogram,
    WindowSweep,
    ParamSensitivity,
    ErrorScan,
    SignTest,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Histogram => "histogram",
            Family::WindowSweep => "window_sweep",
            Family::ParamSensitivity => "param_sensitivity",
            Family::ErrorScan => "error_scan",
            Family::SignTest => "sign_test",
        }
    }
}

/// Parameter axis of a sensitivity scan. `Rates` moves `r_d` and `r_n`
/// together.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Rates,
    Sigma,
    Rho,
    KBar,
}

impl SweepParam {
    pub const ALL: [SweepParam; 4] = [
        SweepParam::Rates,
        SweepParam::Sigma,
        SweepParam::Rho,
        SweepParam::KBar,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Rates => "rates",
            SweepParam::Sigma => "sigma",
            SweepParam::Rho => "rho",
            SweepParam::KBar => "k_bar",
        }
    }

    /// `base` with this parameter set to `value` (per-step units).
    pub fn apply(self, base: &ModelParams, value: f64) -> ModelParams {
        let mut p = *base;
        match self {
            SweepParam::Rates => {
                p.r_d = value;
                p.r_n = value;
            }
            SweepParam::Sigma => p.sigma = value,
            SweepParam::Rho => p.rho = value,
            SweepParam::KBar => p.k_bar = value,
        }
        p
    }

    /// Default scan range in per-step units.
    pub fn default_values(self) -> Vec<f64> {
        match self {
            SweepParam::Rates => linspace(0.0, per_step_rate(0.20), 11),
            SweepParam::Sigma => linspace(0.05, 0.50, 10)
                .into_iter()
                .map(|s| s / TRADING_DAYS.sqrt())
                .collect(),
            SweepParam::Rho => linspace(0.0, 0.05, 11),
            SweepParam::KBar => linspace(0.0, 1.0, 11),
        }
    }
}

/// Parameter whose estimate is perturbed in an error scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorTarget {
    RD,
    RN,
    Sigma,
    Rho,
    KBar,
}

impl ErrorTarget {
    pub const ALL: [ErrorTarget; 5] = [
        ErrorTarget::RD,
        ErrorTarget::RN,
        ErrorTarget::Sigma,
        ErrorTarget::Rho,
        ErrorTarget::KBar,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ErrorTarget::RD => "r_d",
            ErrorTarget::RN => "r_n",
            ErrorTarget::Sigma => "sigma",
            ErrorTarget::Rho => "rho",
            ErrorTarget::KBar => "k_bar",
        }
    }

    fn tag(self) -> u32 {
        self as u32
    }

    /// `truth` with this parameter replaced by `(1 + eps) * truth`, clipped to
    /// `sigma >= 0`, `rho` in `[0, 1]` and `k_bar >= 0`.
    pub fn perturb(self, truth: &ModelParams, eps: f64) -> ModelParams {
        let mut p = *truth;
        let scale = 1.0 + eps;
        match self {
            ErrorTarget::RD => p.r_d *= scale,
            ErrorTarget::RN => p.r_n *= scale,
            ErrorTarget::Sigma => p.sigma = (p.sigma * scale).max(0.0),
            ErrorTarget::Rho => p.rho = (p.rho * scale).clamp(0.0, 1.0),
            ErrorTarget::KBar => p.k_bar = (p.k_bar * scale).max(0.0),
        }
        p
    }
}

/// One error-scan setting: the perturbed parameter and the relative error
/// standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorSpec {
    pub target: ErrorTarget,
    pub sigma_e: f64,
}

impl ErrorSpec {
    /// Standard normal draw behind simulation `sim`'s relative error.
    pub fn unit_draw(target: ErrorTarget, master_seed: u64, sim: u64) -> f64 {
        use rand_distr::{Distribution, StandardNormal};
        StandardNormal.sample(&mut rng::stream(
            master_seed,
            Domain::Perturbation(target.tag()),
            sim,
        ))
    }

    /// Parameter estimate used by simulation `sim`.
    pub fn estimate(&self, truth: &ModelParams, master_seed: u64, sim: u64) -> ModelParams {
        let eps = self.sigma_e * Self::unit_draw(self.target, master_seed, sim);
        self.target.perturb(truth, eps)
    }
}

/// Default error levels: 11 points from `1e-3` to `1e2`, log-spaced.
pub fn default_error_sigmas() -> Vec<f64> {
    (0..=10)
        .map(|k| 10f64.powf(-3.0 + 0.5 * k as f64))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignMode {
    Correct,
    Flipped,
}

impl SignMode {
    pub const ALL: [SignMode; 2] = [SignMode::Correct, SignMode::Flipped];

    pub fn name(self) -> &'static str {
        match self {
            SignMode::Correct => "correct",
            SignMode::Flipped => "flipped",
        }
    }
}

/// Rate-sign experiment: true rates `r_s ~ U(-limit, limit)` per year and an
/// estimate of magnitude `r_e ~ U(0, 2|r_s|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignTestSpec {
    /// Annual rate limit.
    pub rate_limit: f64,
}

impl Default for SignTestSpec {
    fn default() -> Self {
        SignTestSpec { rate_limit: 0.10 }
    }
}

/// Annual rates drawn for one sign-test simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateDraw {
    pub r_s: f64,
    pub r_e: f64,
}

impl RateDraw {
    pub fn draw(spec: &SignTestSpec, master_seed: u64, sim: u64) -> Self {
        use rand::Rng;
        let mut s = rng::stream(master_seed, Domain::Rates, sim);
        let r_s = spec.rate_limit * (2.0 * s.gen::<f64>() - 1.0);
        let r_e = 2.0 * r_s.abs() * s.gen::<f64>();
        RateDraw { r_s, r_e }
    }

    /// Estimated annual rate under `mode`.
    pub fn estimated(&self, mode: SignMode) -> f64 {
        let sign = if self.r_s > 0.0 {
            1.0
        } else if self.r_s < 0.0 {
            -1.0
        } else {
            0.0
        };
        match mode {
            SignMode::Correct => sign * self.r_e,
            SignMode::Flipped => -sign * self.r_e,
        }
    }

    /// `base` with `r_d = r_n = r_s`.
    pub fn true_params(&self, base: &ModelParams) -> ModelParams {
        SweepParam::Rates.apply(base, per_step_rate(self.r_s))
    }

    pub fn estimate_params(&self, base: &ModelParams, mode: SignMode) -> ModelParams {
        SweepParam::Rates.apply(base, per_step_rate(self.estimated(mode)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamScan {
    pub param: SweepParam,
    /// Per-step units.
    pub values: Vec<f64>,
}

impl ParamScan {
    pub fn with_defaults(param: SweepParam) -> Self {
        ParamScan {
            param,
            values: param.default_values(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Grid {
    Horizons {
        horizons: Vec<usize>,
    },
    Parameter {
        scans: Vec<ParamScan>,
    },
    ErrorSigmas {
        targets: Vec<ErrorTarget>,
        sigmas: Vec<f64>,
    },
}

/// 250 to 10,000 in steps of 250.
pub fn default_window_horizons() -> Vec<usize> {
    (1..=40).map(|k| 250 * k).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub family: Family,
    pub params: ModelParams,
    pub sims: usize,
    /// Window length for families whose grid is not a horizon grid.
    pub horizon: usize,
    pub grid: Grid,
    pub strategies: Vec<StrategyId>,
    pub master_seed: u64,
    /// Worker threads; `None` uses every core.
    pub workers: Option<usize>,
    pub drift: DriftMode,
    pub solver: SolverMode,
    pub aggregation: Aggregation,
    pub histogram_bins: usize,
    pub sign_test: SignTestSpec,
}

impl ExperimentPlan {
    fn new(
        family: Family,
        params: ModelParams,
        grid: Grid,
        strategies: &[StrategyId],
        master_seed: u64,
    ) -> Self {
        ExperimentPlan {
            family,
            params,
            sims: DEFAULT_SIMS,
            horizon: 2500,
            grid,
            strategies: strategies.to_vec(),
            master_seed,
            workers: None,
            drift: DriftMode::default(),
            solver: SolverMode::default(),
            aggregation: Aggregation::default(),
            histogram_bins: DEFAULT_BINS,
            sign_test: SignTestSpec::default(),
        }
    }

    /// Two- and ten-year runs of all six strategies.
    pub fn histogram(params: ModelParams, master_seed: u64) -> Self {
        Self::new(
            Family::Histogram,
            params,
            Grid::Horizons {
                horizons: vec![500, 2500],
            },
            &StrategyId::ALL,
            master_seed,
        )
    }

    pub fn window_sweep(params: ModelParams, master_seed: u64) -> Self {
        let grid = Grid::Horizons {
            horizons: default_window_horizons(),
        };
        Self::new(
            Family::WindowSweep,
            params,
            grid,
            &StrategyId::ALL,
            master_seed,
        )
    }

    /// Ten-year runs of the crash-aware strategies over every default range.
    pub fn sensitivity(params: ModelParams, master_seed: u64) -> Self {
        let grid = Grid::Parameter {
            scans: SweepParam::ALL
                .iter()
                .map(|&p| ParamScan::with_defaults(p))
                .collect(),
        };
        Self::new(
            Family::ParamSensitivity,
            params,
            grid,
            &StrategyId::ECO,
            master_seed,
        )
    }

    pub fn error_scan(params: ModelParams, master_seed: u64) -> Self {
        let grid = Grid::ErrorSigmas {
            targets: ErrorTarget::ALL.to_vec(),
            sigmas: default_error_sigmas(),
        };
        Self::new(
            Family::ErrorScan,
            params,
            grid,
            &StrategyId::ECO,
            master_seed,
        )
    }

    pub fn sign_test(params: ModelParams, master_seed: u64) -> Self {
        let grid = Grid::Horizons {
            horizons: default_window_horizons(),
        };
        Self::new(
            Family::SignTest,
            params,
            grid,
            &StrategyId::ECO,
            master_seed,
        )
    }

    /// Default plan for `family`.
    pub fn for_family(family: Family, params: ModelParams, master_seed: u64) -> Self {
        match family {
            Family::Histogram => Self::histogram(params, master_seed),
            Family::WindowSweep => Self::window_sweep(params, master_seed),
            Family::ParamSensitivity => Self::sensitivity(params, master_seed),
            Family::ErrorScan => Self::error_scan(params, master_seed),
            Family::SignTest => Self::sign_test(params, master_seed),
        }
    }

    pub fn with_sims(mut self, sims: usize) -> Self {
        self.sims = sims;
        self
    }

    pub fn with_workers(mut self, workers: Option<usize>) -> Self {
        self.workers = workers;
        self
    }

    pub fn with_grid(mut self, grid: Grid) -> Self {
        self.grid = grid;
        self
    }

    pub fn with_horizon(mut self, horizon: usize) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn with_strategies(mut self, strategies: &[StrategyId]) -> Self {
        self.strategies = strategies.to_vec();
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(EcmError::InvalidParams(msg));
        self.params.validate()?;
        if self.sims < 1 {
            return bad("sims must be >= 1".into());
        }
        if self.strategies.is_empty() {
            return bad("at least one strategy is required".into());
        }
        if self.workers == Some(0) {
            return bad("workers must be >= 1".into());
        }
        if !(self.sign_test.rate_limit >= 0.0 && self.sign_test.rate_limit < 1.0) {
            return bad(format!(
                "sign test rate limit {} must be in [0, 1)",
                self.sign_test.rate_limit
            ));
        }
        let horizons_ok = |h: &[usize]| !h.is_empty() && h.iter().all(|&t| t >= 1);
        match (&self.family, &self.grid) {
            (
                Family::Histogram | Family::WindowSweep | Family::SignTest,
                Grid::Horizons { horizons },
            ) => {
                if !horizons_ok(horizons) {
                    return bad("horizon grid must be nonempty with every horizon >= 1".into());
                }
            }
            (Family::ParamSensitivity, Grid::Parameter { scans }) => {
                if scans.is_empty() || scans.iter().any(|s| s.values.is_empty()) {
                    return bad("parameter grid must be nonempty".into());
                }
                for scan in scans {
                    for &v in &scan.values {
                        scan.param.apply(&self.params, v).validate()?;
                    }
                }
            }
            (Family::ErrorScan, Grid::ErrorSigmas { targets, sigmas }) => {
                if targets.is_empty() || sigmas.is_empty() {
                    return bad("error grid must be nonempty".into());
                }
                if let Some(s) = sigmas.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
                    return bad(format!("error sigma {s} must be finite and >= 0"));
                }
            }
            (family, _) => {
                return bad(format!("grid kind does not match family {}", family.name()))
            }
        }
        if !matches!(self.grid, Grid::Horizons { .. }) && self.horizon < 1 {
            return bad("horizon must be >= 1".into());
        }
        Ok(())
    }
}

/// Address of one grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellKey {
    /// Swept quantity: `T`, a parameter name, or `sigma_e`.
    pub axis: String,
    pub value: f64,
    pub horizon: usize,
    /// Error target or sign mode; empty when the family has none.
    pub variant: String,
}

/// Summary of one strategy in one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub key: CellKey,
    pub strategy: String,
    pub sims: usize,
    pub included: usize,
    pub defaults: usize,
    pub generation_failures: usize,
    pub solver_failures: usize,
    /// Percent of all simulations.
    pub prob_default: f64,
    /// Quartiles over runs that did not default.
    pub terminal_log_wealth: Option<Quartiles>,
    /// Percent of steps above buy-and-hold; runs that did not default.
    pub uptime: Option<Quartiles>,
    pub mean_lambda: Option<Quartiles>,
    /// Full metric suite; histogram runs only.
    pub report: Option<MetricsReport>,
    pub histogram: Option<Histogram>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub family: Family,
    pub master_seed: u64,
    pub sims: usize,
    pub rows: Vec<CellStats>,
}

impl SweepResult {
    /// Row for `strategy` at axis value `value` in `variant`.
    pub fn find(&self, value: f64, variant: &str, strategy: &str) -> Option<&CellStats> {
        self.rows
            .iter()
            .find(|r| r.key.value == value && r.key.variant == variant && r.strategy == strategy)
    }

    /// Rows of one strategy and variant in grid order.
    pub fn series<'a>(
        &'a self,
        variant: &'a str,
        strategy: &'a str,
    ) -> impl Iterator<Item = &'a CellStats> + 'a {
        self.rows
            .iter()
            .filter(move |r| r.key.variant == variant && r.strategy == strategy)
    }
}

/// `n` evenly spaced values from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n)
            .map(|i| {
                if i + 1 == n {
                    b
                } else {
                    a + (b - a) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}
