//! Benchmark strategies and the self-financing wealth recursion.

use serde::{Deserialize, Serialize};

use crate::error::{EcmError, Result};
use crate::kelly::{
    classical_kelly_lambda, optimal_lambda_approx, DriftMode, EcoKelly, LambdaBounds, LambdaTable,
    DEFAULT_SPACING, DEFAULT_TOL,
};
use crate::model::{ModelParams, PricePath, SeedInfo};

/// How the crash-aware fraction is obtained at each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMode {
    /// Lazily filled interpolation table over `ln q`.
    #[default]
    Interpolated,
    /// Golden-section maximization at every step.
    Numeric,
    /// Closed-form second-order approximation.
    Approximate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StrategyKind {
    BuyAndHold,
    FixedFraction(f64),
    ClassicalKelly {
        bounds: LambdaBounds,
        drift: DriftMode,
    },
    EcoKelly {
        bounds: LambdaBounds,
        solver: SolverMode,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySpec {
    pub kind: StrategyKind,
    pub label: String,
}

impl StrategySpec {
    pub fn buy_and_hold() -> Self {
        StrategySpec {
            kind: StrategyKind::BuyAndHold,
            label: "B&H".into(),
        }
    }

    /// 60% risky, 40% risk-free.
    pub fn sixty_forty() -> Self {
        StrategySpec {
            kind: StrategyKind::FixedFraction(0.6),
            label: "60/40".into(),
        }
    }

    pub fn fixed_fraction(fraction: f64) -> Self {
        StrategySpec {
            kind: StrategyKind::FixedFraction(fraction),
            label: format!("FF({fraction})"),
        }
    }

    pub fn classical(bounds: LambdaBounds, drift: DriftMode) -> Self {
        StrategySpec {
            kind: StrategyKind::ClassicalKelly { bounds, drift },
            label: format!("CK{}", bounds.label()),
        }
    }

    pub fn eco(bounds: LambdaBounds, solver: SolverMode) -> Self {
        StrategySpec {
            kind: StrategyKind::EcoKelly { bounds, solver },
            label: format!("ECO{}", bounds.label()),
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Bounds every allocation of this strategy lies in, when it has any.
    pub fn bounds(&self) -> Option<LambdaBounds> {
        match self.kind {
            StrategyKind::ClassicalKelly { bounds, .. } | StrategyKind::EcoKelly { bounds, .. } => {
                Some(bounds)
            }
            _ => None,
        }
    }
}

/// The six strategies of the comparison suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StrategyId {
    BuyAndHold,
    SixtyForty,
    CkBounded,
    CkUnbounded,
    EcoBounded,
    EcoUnbounded,
}

impl StrategyId {
    pub const ALL: [StrategyId; 6] = [
        StrategyId::BuyAndHold,
        StrategyId::SixtyForty,
        StrategyId::CkBounded,
        StrategyId::CkUnbounded,
        StrategyId::EcoBounded,
        StrategyId::EcoUnbounded,
    ];

    pub const ECO: [StrategyId; 2] = [StrategyId::EcoBounded, StrategyId::EcoUnbounded];

    pub fn spec(self, drift: DriftMode, solver: SolverMode) -> StrategySpec {
        match self {
            StrategyId::BuyAndHold => StrategySpec::buy_and_hold(),
            StrategyId::SixtyForty => StrategySpec::sixty_forty(),
            StrategyId::CkBounded => StrategySpec::classical(LambdaBounds::leveraged(), drift),
            StrategyId::CkUnbounded => StrategySpec::classical(LambdaBounds::unbounded(), drift),
            StrategyId::EcoBounded => StrategySpec::eco(LambdaBounds::leveraged(), solver),
            StrategyId::EcoUnbounded => StrategySpec::eco(LambdaBounds::unbounded(), solver),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            StrategyId::BuyAndHold => "B&H",
            StrategyId::SixtyForty => "60/40",
            StrategyId::CkBounded => "CK[-1,2]",
            StrategyId::CkUnbounded => "CK[-inf,inf]",
            StrategyId::EcoBounded => "ECO[-1,2]",
            StrategyId::EcoUnbounded => "ECO[-inf,inf]",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.label() == label)
    }
}

/// Everything needed to pick fractions from a parameter estimate. The
/// crash-aware interpolation table is created on first use and shared by all
/// crash-aware strategies evaluated through this allocator.
#[derive(Debug, Clone)]
pub struct Allocator {
    params: ModelParams,
    engine: EcoKelly,
    table: Option<LambdaTable>,
    spacing: f64,
    tol: f64,
}

impl Allocator {
    pub fn new(params: ModelParams) -> Result<Self> {
        Ok(Self::with_engine(
            params,
            EcoKelly::with_defaults(&params)?,
            DEFAULT_SPACING,
            DEFAULT_TOL,
        ))
    }

    pub fn with_engine(params: ModelParams, engine: EcoKelly, spacing: f64, tol: f64) -> Self {
        Allocator {
            params,
            engine,
            table: None,
            spacing,
            tol,
        }
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// Fills the crash-aware table over a `ln q` range ahead of time.
    pub fn warm_up(&mut self, log_q_min: f64, log_q_max: f64) -> Result<()> {
        self.table_mut().prefill(log_q_min, log_q_max)
    }

    fn table_mut(&mut self) -> &mut LambdaTable {
        let (params, engine, spacing) = (self.params, &self.engine, self.spacing);
        self.table
            .get_or_insert_with(|| LambdaTable::new(params, engine.clone(), spacing))
    }

    /// Fraction held in the risky asset over the next step, given the
    /// mispricing `q` as seen through this allocator's parameters.
    pub fn allocate(&mut self, spec: &StrategySpec, q: f64) -> Result<f64> {
        if !(q > 0.0 && q.is_finite()) {
            return Err(EcmError::domain(
                "allocate",
                format!("q = {q} must be positive"),
            ));
        }
        match spec.kind {
            StrategyKind::BuyAndHold => Ok(1.0),
            StrategyKind::FixedFraction(f) => Ok(f),
            StrategyKind::ClassicalKelly { bounds, drift } => classical_kelly_lambda(
                drift.drift(&self.params),
                self.params.r_f,
                self.params.sigma,
                bounds,
            ),
            StrategyKind::EcoKelly { bounds, solver } => match solver {
                SolverMode::Interpolated => self.table_mut().lambda(q, bounds),
                SolverMode::Numeric => {
                    self.engine
                        .optimal_lambda(&self.params, q, bounds, self.tol)
                }
                SolverMode::Approximate => optimal_lambda_approx(&self.params, q, bounds),
            },
        }
    }
}

/// Allocation with an exact per-call solve.
pub fn allocate(spec: &StrategySpec, params: &ModelParams, q: f64) -> Result<f64> {
    let mut spec = spec.clone();
    if let StrategyKind::EcoKelly { bounds, .. } = spec.kind {
        spec.kind = StrategyKind::EcoKelly {
            bounds,
            solver: SolverMode::Numeric,
        };
    }
    Allocator::new(*params)?.allocate(&spec, q)
}

/// Wealth and allocation series of one strategy on one path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioPath {
    pub strategy: StrategySpec,
    /// `horizon + 1` values starting at 1.
    pub wealth: Vec<f64>,
    /// `lambda[t]` is held over `[t, t + 1]`; `horizon` values.
    pub lambda: Vec<f64>,
    /// First step at which wealth is zero.
    pub default_step: Option<usize>,
    pub source: Option<SeedInfo>,
}

impl PortfolioPath {
    pub fn horizon(&self) -> usize {
        self.lambda.len()
    }

    pub fn defaulted(&self) -> bool {
        self.default_step.is_some()
    }

    pub fn terminal_wealth(&self) -> f64 {
        self.wealth[self.wealth.len() - 1]
    }
}

/// One-step wealth multiplier `lambda * g + (1 - lambda) * e^{r_f}`.
#[inline]
pub fn growth_multiplier(lambda: f64, risky_growth: f64, cash_growth: f64) -> f64 {
    lambda * risky_growth + (1.0 - lambda) * cash_growth
}

/// Rebuilds the wealth series implied by `lambda` on `path`; a non-positive
/// multiplier zeroes the wealth from that step on.
pub fn wealth_from_allocations(
    lambda: &[f64],
    path: &PricePath,
) -> Result<(Vec<f64>, Option<usize>)> {
    if lambda.len() != path.horizon() {
        return Err(EcmError::HorizonMismatch {
            left: lambda.len(),
            right: path.horizon(),
        });
    }
    let cash = path.params.r_f.exp();
    let mut wealth = Vec::with_capacity(lambda.len() + 1);
    wealth.push(1.0);
    let mut default_step = None;
    let mut w = 1.0;
    for (t, &l) in lambda.iter().enumerate() {
        if default_step.is_none() {
            let m = growth_multiplier(l, path.steps[t + 1].log_return.exp(), cash);
            if m > 0.0 {
                w *= m;
            } else {
                w = 0.0;
                default_step = Some(t + 1);
            }
        }
        wealth.push(w);
    }
    Ok((wealth, default_step))
}

/// Runs several strategies over one path in lockstep, sharing the
/// allocator. A strategy whose allocation fails is reported as an error
/// without stopping the others.
///
/// The allocator's mispricing view starts from the path's initial normal
/// price and grows it at the allocator's `r_n`.
pub fn run_strategies(
    specs: &[StrategySpec],
    alloc: &mut Allocator,
    path: &PricePath,
) -> Vec<Result<PortfolioPath>> {
    let horizon = path.horizon();
    let cash = path.params.r_f.exp();
    let normal_growth = alloc.params().r_n.exp();
    let mut wealth: Vec<Vec<f64>> = specs
        .iter()
        .map(|_| Vec::with_capacity(horizon + 1))
        .collect();
    let mut lambda: Vec<Vec<f64>> = specs.iter().map(|_| Vec::with_capacity(horizon)).collect();
    let mut current = vec![1.0f64; specs.len()];
    let mut default_step: Vec<Option<usize>> = vec![None; specs.len()];
    let mut failure: Vec<Option<EcmError>> = vec![None; specs.len()];
    for w in &mut wealth {
        w.push(1.0);
    }

    let mut normal = path.steps[0].normal_price;
    for t in 0..horizon {
        let q = normal / path.steps[t].price;
        let growth = path.steps[t + 1].log_return.exp();
        for (k, spec) in specs.iter().enumerate() {
            if failure[k].is_some() {
                continue;
            }
            let l = if default_step[k].is_some() {
                0.0
            } else {
                match alloc.allocate(spec, q) {
                    Ok(l) => l,
                    Err(e) => {
                        failure[k] = Some(e);
                        continue;
                    }
                }
            };
            if default_step[k].is_none() {
                let m = growth_multiplier(l, growth, cash);
                if m > 0.0 {
                    current[k] *= m;
                } else {
                    current[k] = 0.0;
                    default_step[k] = Some(t + 1);
                }
            }
            lambda[k].push(l);
            wealth[k].push(current[k]);
        }
        normal *= normal_growth;
    }

    specs
        .iter()
        .enumerate()
        .zip(wealth.into_iter().zip(lambda))
        .map(|((k, spec), (wealth, lambda))| match failure[k].take() {
            Some(e) => Err(e),
            None => Ok(PortfolioPath {
                strategy: spec.clone(),
                wealth,
                lambda,
                default_step: default_step[k],
                source: path.seed_info,
            }),
        })
        .collect()
}

/// Simulates one strategy with allocations based on `params`.
pub fn simulate_portfolio(
    spec: &StrategySpec,
    params: &ModelParams,
    path: &PricePath,
) -> Result<PortfolioPath> {
    let mut alloc = Allocator::new(*params)?;
    run_strategies(std::slice::from_ref(spec), &mut alloc, path)
        .pop()
        .expect("one strategy in, one out")
}

/// The six-strategy suite, rebalanced every step, without trading costs.
pub fn standard_suite(drift: DriftMode, solver: SolverMode) -> Vec<StrategySpec> {
    StrategyId::ALL
        .iter()
        .map(|id| id.spec(drift, solver))
        .collect()
}

/// Runs the six-strategy suite with perfect knowledge of `params`.
pub fn run_all_strategies(
    params: &ModelParams,
    path: &PricePath,
) -> Result<Vec<Result<PortfolioPath>>> {
    let mut alloc = Allocator::new(*params)?;
    Ok(run_strategies(
        &standard_suite(DriftMode::default(), SolverMode::default()),
        &mut alloc,
        path,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::generate_indexed_path;

    fn path(params: &ModelParams, horizon: usize, sim: u64) -> PricePath {
        generate_indexed_path(params, horizon, 17, sim).unwrap()
    }

    #[test]
    fn simple_allocations() {
        let p = ModelParams::base();
        assert_eq!(
            allocate(&StrategySpec::sixty_forty(), &p, 0.77).unwrap(),
            0.6
        );
        assert_eq!(
            allocate(&StrategySpec::buy_and_hold(), &p, 1.9).unwrap(),
            1.0
        );
        assert!(allocate(&StrategySpec::buy_and_hold(), &p, 0.0).is_err());
    }

    #[test]
    fn cash_only_grows_at_risk_free() {
        let p = ModelParams {
            r_f: 1e-4,
            ..ModelParams::base()
        };
        let path = path(&p, 400, 0);
        let pf = simulate_portfolio(&StrategySpec::fixed_fraction(0.0), &p, &path).unwrap();
        assert!((pf.terminal_wealth() - (1e-4 * 400.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn buy_and_hold_replicates_price() {
        let p = ModelParams::base();
        let path = path(&p, 1000, 1);
        let pf = simulate_portfolio(&StrategySpec::buy_and_hold(), &p, &path).unwrap();
        for (w, s) in pf.wealth.iter().zip(&path.steps) {
            assert_eq!(*w, s.price);
        }
    }

    #[test]
    fn leverage_defaults_on_large_drop() {
        let p = ModelParams::base();
        let mut path = path(&p, 5, 2);
        path.steps[3].log_return = -(2f64.ln());
        let (wealth, default_step) = wealth_from_allocations(&[2.0; 5], &path).unwrap();
        assert_eq!(default_step, Some(3));
        assert!(wealth[3..].iter().all(|&w| w == 0.0));
        assert!(wealth[2] > 0.0);
    }

    #[test]
    fn suite_has_six_distinct_labels() {
        let p = ModelParams::base();
        let path = path(&p, 300, 3);
        let runs = run_all_strategies(&p, &path).unwrap();
        assert_eq!(runs.len(), 6);
        let labels: std::collections::HashSet<_> = runs
            .iter()
            .map(|r| r.as_ref().unwrap().strategy.label.clone())
            .collect();
        assert_eq!(labels.len(), 6);
        for (id, r) in StrategyId::ALL.iter().zip(&runs) {
            assert_eq!(id.label(), r.as_ref().unwrap().strategy.label);
        }
    }

    #[test]
    fn eco_fraction_lower_in_positive_bubble() {
        let p = ModelParams::base();
        let spec = StrategySpec::eco(LambdaBounds::unbounded(), SolverMode::Numeric);
        let at_normal = allocate(&spec, &p, 1.0).unwrap();
        let in_bubble = allocate(&spec, &p, 0.8).unwrap();
        assert!(in_bubble.abs() < at_normal.abs());
    }

    #[test]
    fn stored_allocations_reproduce_wealth() {
        let p = ModelParams::base();
        for sim in 0..20 {
            let path = path(&p, 800, sim);
            for r in run_all_strategies(&p, &path).unwrap() {
                let pf = r.unwrap();
                let (w, d) = wealth_from_allocations(&pf.lambda, &path).unwrap();
                assert_eq!(w, pf.wealth);
                assert_eq!(d, pf.default_step);
            }
        }
    }
}
