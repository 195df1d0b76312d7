//! Run configuration in annual, human-facing units.
//!
//! Rates are annual growth rates (`0.07` is 7% a year) and volatilities are
//! annual (`0.17`); both are converted to per-step units with a 252-day
//! year. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{EcmError, Result};
use crate::experiment::{
    default_error_sigmas, default_window_horizons, ErrorTarget, ExperimentPlan, Family, Grid,
    ParamScan, SignTestSpec, SweepParam, DEFAULT_BINS, DEFAULT_SIMS,
};
use crate::kelly::DriftMode;
use crate::metrics::Aggregation;
use crate::model::{annual_rate, annual_vol, per_step_rate, per_step_vol, ModelParams};
use crate::strategy::{SolverMode, StrategyId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    /// Annual growth rate of the discount price process.
    pub drift: f64,
    /// Annual growth rate of the normal price.
    pub normal_rate: f64,
    pub volatility: f64,
    /// Correction probability per step.
    pub rho: f64,
    pub k_bar: f64,
    pub sigma_kappa: f64,
    pub risk_free: f64,
    pub p0: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            drift: 0.07,
            normal_rate: 0.07,
            volatility: 0.17,
            rho: 0.01,
            k_bar: 0.3,
            sigma_kappa: 0.2,
            risk_free: 0.0,
            p0: 1.0,
        }
    }
}

impl ModelConfig {
    pub fn from_params(p: &ModelParams) -> Self {
        ModelConfig {
            drift: annual_rate(p.r_d),
            normal_rate: annual_rate(p.r_n),
            volatility: annual_vol(p.sigma),
            rho: p.rho,
            k_bar: p.k_bar,
            sigma_kappa: p.sigma_kappa,
            risk_free: annual_rate(p.r_f),
            p0: p.p0,
        }
    }

    /// Per-step parameters, checked field by field.
    pub fn to_params(&self) -> Result<ModelParams> {
        let field = |name: &str, v: f64, ok: bool, rule: &str| {
            if v.is_finite() && ok {
                Ok(())
            } else {
                Err(EcmError::config(
                    format!("model.{name}"),
                    format!("{v} must be {rule}"),
                ))
            }
        };
        field("drift", self.drift, self.drift > -1.0, "finite and > -1")?;
        field(
            "normal_rate",
            self.normal_rate,
            self.normal_rate > -1.0,
            "finite and > -1",
        )?;
        field(
            "risk_free",
            self.risk_free,
            self.risk_free > -1.0,
            "finite and > -1",
        )?;
        field(
            "volatility",
            self.volatility,
            self.volatility >= 0.0,
            "finite and >= 0",
        )?;
        field("rho", self.rho, (0.0..1.0).contains(&self.rho), "in [0, 1)")?;
        field("k_bar", self.k_bar, true, "finite")?;
        field(
            "sigma_kappa",
            self.sigma_kappa,
            self.sigma_kappa >= 0.0,
            "finite and >= 0",
        )?;
        field("p0", self.p0, self.p0 > 0.0, "finite and > 0")?;
        let p = ModelParams {
            r_d: per_step_rate(self.drift),
            r_n: per_step_rate(self.normal_rate),
            sigma: per_step_vol(self.volatility),
            rho: self.rho,
            k_bar: self.k_bar,
            sigma_kappa: self.sigma_kappa,
            r_f: per_step_rate(self.risk_free),
            p0: self.p0,
        };
        p.validate()
            .map_err(|e| EcmError::config("model", e.to_string()))?;
        Ok(p)
    }
}

/// Values of one sensitivity scan. Rates and volatility are annual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

impl ScanConfig {
    /// The default scan for `param`, expressed in annual units.
    pub fn with_defaults(param: SweepParam) -> Self {
        let values = param
            .default_values()
            .into_iter()
            .map(|v| match param {
                SweepParam::Rates => annual_rate(v),
                SweepParam::Sigma => annual_vol(v),
                SweepParam::Rho | SweepParam::KBar => v,
            })
            .collect();
        ScanConfig { param, values }
    }

    fn to_scan(&self) -> ParamScan {
        let values = self
            .values
            .iter()
            .map(|&v| match self.param {
                SweepParam::Rates => per_step_rate(v),
                SweepParam::Sigma => per_step_vol(v),
                SweepParam::Rho | SweepParam::KBar => v,
            })
            .collect();
        ParamScan {
            param: self.param,
            values,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Strategy labels such as `"ECO[-1,2]"`; the family default when absent.
    pub strategies: Option<Vec<String>>,
    /// Window lengths for the comparison, window sweep and sign test.
    pub horizons: Option<Vec<usize>>,
    /// Window length of sensitivity and error scans.
    pub window: usize,
    pub scans: Option<Vec<ScanConfig>>,
    pub error_targets: Option<Vec<ErrorTarget>>,
    pub error_sigmas: Option<Vec<f64>>,
    pub drift: DriftMode,
    pub solver: SolverMode,
    pub aggregation: Aggregation,
    pub histogram_bins: usize,
    /// Annual limit of the sign-test rate draw.
    pub sign_rate_limit: f64,
    /// Full price series written by `paths`.
    pub paths_kept: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            strategies: None,
            horizons: None,
            window: 2500,
            scans: None,
            error_targets: None,
            error_sigmas: None,
            drift: DriftMode::default(),
            solver: SolverMode::default(),
            aggregation: Aggregation::default(),
            histogram_bins: DEFAULT_BINS,
            sign_rate_limit: SignTestSpec::default().rate_limit,
            paths_kept: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub sims: usize,
    /// Path length for `paths`.
    pub horizon: usize,
    pub seed: u64,
    /// Worker threads; every core when absent.
    pub workers: Option<usize>,
    pub output_dir: PathBuf,
    pub formats: Vec<OutputFormat>,
    pub experiment: ExperimentConfig,
}

pub const DEFAULT_SEED: u64 = 20_240_611;

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelConfig::default(),
            sims: DEFAULT_SIMS,
            horizon: 1250,
            seed: DEFAULT_SEED,
            workers: None,
            output_dir: PathBuf::from("ecm-lab-out"),
            formats: vec![OutputFormat::Csv, OutputFormat::Json],
            experiment: ExperimentConfig::default(),
        }
    }
}

impl RunConfig {
    /// Parses a JSON document; errors name the offending key path.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            EcmError::config(
                if path == "." { String::new() } else { path },
                e.inner().to_string(),
            )
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| EcmError::config(path.display().to_string(), e.to_string()))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn params(&self) -> Result<ModelParams> {
        self.model.to_params()
    }

    pub fn validate(&self) -> Result<()> {
        self.params()?;
        if self.sims < 1 {
            return Err(EcmError::config("sims", "must be >= 1"));
        }
        if self.horizon < 1 {
            return Err(EcmError::config("horizon", "must be >= 1"));
        }
        if self.workers == Some(0) {
            return Err(EcmError::config("workers", "must be >= 1"));
        }
        let x = &self.experiment;
        if x.window < 1 {
            return Err(EcmError::config("experiment.window", "must be >= 1"));
        }
        if x.histogram_bins < 1 {
            return Err(EcmError::config(
                "experiment.histogram_bins",
                "must be >= 1",
            ));
        }
        if let Some(h) = &x.horizons {
            if h.is_empty() || h.contains(&0) {
                return Err(EcmError::config(
                    "experiment.horizons",
                    "must be nonempty with every horizon >= 1",
                ));
            }
        }
        self.strategy_ids(&[])?;
        if let Some(scans) = &x.scans {
            for (i, s) in scans.iter().enumerate() {
                if s.values.is_empty() {
                    return Err(EcmError::config(
                        format!("experiment.scans[{i}].values"),
                        "must be nonempty",
                    ));
                }
                let base = self.params()?;
                for (k, v) in s.to_scan().values.into_iter().enumerate() {
                    s.param.apply(&base, v).validate().map_err(|e| {
                        EcmError::config(
                            format!("experiment.scans[{i}].values[{k}]"),
                            e.to_string(),
                        )
                    })?;
                }
            }
        }
        if let Some(s) = &x.error_sigmas {
            if s.is_empty() {
                return Err(EcmError::config(
                    "experiment.error_sigmas",
                    "must be nonempty",
                ));
            }
            if let Some(k) = s.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(EcmError::config(
                    format!("experiment.error_sigmas[{k}]"),
                    "must be finite and >= 0",
                ));
            }
        }
        if matches!(&x.error_targets, Some(t) if t.is_empty()) {
            return Err(EcmError::config(
                "experiment.error_targets",
                "must be nonempty",
            ));
        }
        if !(x.sign_rate_limit >= 0.0 && x.sign_rate_limit < 1.0) {
            return Err(EcmError::config(
                "experiment.sign_rate_limit",
                "must be in [0, 1)",
            ));
        }
        Ok(())
    }

    fn strategy_ids(&self, default: &[StrategyId]) -> Result<Vec<StrategyId>> {
        match &self.experiment.strategies {
            None => Ok(default.to_vec()),
            Some(labels) => {
                if labels.is_empty() {
                    return Err(EcmError::config(
                        "experiment.strategies",
                        "must be nonempty",
                    ));
                }
                labels
                    .iter()
                    .enumerate()
                    .map(|(i, l)| {
                        StrategyId::from_label(l).ok_or_else(|| {
                            let known: Vec<&str> =
                                StrategyId::ALL.iter().map(|s| s.label()).collect();
                            EcmError::config(
                                format!("experiment.strategies[{i}]"),
                                format!(
                                    "unknown strategy `{l}`; expected one of {}",
                                    known.join(", ")
                                ),
                            )
                        })
                    })
                    .collect()
            }
        }
    }

    /// The experiment plan for `family` with every default filled in.
    pub fn plan(&self, family: Family) -> Result<ExperimentPlan> {
        self.validate()?;
        let x = &self.experiment;
        let mut plan = ExperimentPlan::for_family(family, self.params()?, self.seed);
        plan.sims = self.sims;
        plan.horizon = x.window;
        plan.workers = self.workers;
        plan.drift = x.drift;
        plan.solver = x.solver;
        plan.aggregation = x.aggregation;
        plan.histogram_bins = x.histogram_bins;
        plan.sign_test = SignTestSpec {
            rate_limit: x.sign_rate_limit,
        };
        plan.strategies = self.strategy_ids(&plan.strategies)?;
        match &mut plan.grid {
            Grid::Horizons { horizons } => {
                if let Some(h) = &x.horizons {
                    *horizons = h.clone();
                }
            }
            Grid::Parameter { scans } => {
                if let Some(s) = &x.scans {
                    *scans = s.iter().map(ScanConfig::to_scan).collect();
                }
            }
            Grid::ErrorSigmas { targets, sigmas } => {
                if let Some(t) = &x.error_targets {
                    *targets = t.clone();
                }
                *sigmas = x.error_sigmas.clone().unwrap_or_else(default_error_sigmas);
            }
        }
        plan.validate()
            .map_err(|e| EcmError::config("experiment", e.to_string()))?;
        Ok(plan)
    }

    /// Applies a `--horizon` override: the path length for `paths`, the
    /// single window for `compare`, the longest window for horizon sweeps
    /// and the scan window otherwise.
    pub fn override_horizon(&mut self, family: Option<Family>, horizon: usize) {
        match family {
            None => self.horizon = horizon,
            Some(Family::Histogram) => self.experiment.horizons = Some(vec![horizon]),
            Some(Family::WindowSweep | Family::SignTest) => {
                let grid: Vec<usize> = default_window_horizons()
                    .into_iter()
                    .filter(|&t| t < horizon)
                    .collect();
                self.experiment.horizons =
                    Some(grid.into_iter().chain(std::iter::once(horizon)).collect());
            }
            Some(Family::ParamSensitivity | Family::ErrorScan) => self.experiment.window = horizon,
        }
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(bytes)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
