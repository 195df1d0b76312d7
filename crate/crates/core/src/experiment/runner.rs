use rayon::prelude::*;
use rayon::ThreadPool;

use super::{
    CellKey, CellStats, ErrorSpec, ExperimentPlan, Family, Grid, RateDraw, SignMode, SweepResult,
};
use crate::error::{EcmError, Result};
use crate::metrics::{Histogram, MetricsReport, PathMetrics, Quartiles};
use crate::model::{generate_indexed_path, PricePath};
use crate::strategy::{
    run_strategies, wealth_from_allocations, Allocator, PortfolioPath, StrategySpec,
};

/// Cheap per-window statistics of one run.
#[derive(Debug, Clone, Copy, PartialEq)]
struct WindowStats {
    log_wealth: f64,
    /// Percent.
    uptime: f64,
    mean_lambda: f64,
    defaulted: bool,
}

/// One strategy on one simulation: window statistics per horizon, plus full
/// metrics per horizon for histogram runs.
#[derive(Debug, Clone)]
struct Record {
    windows: Vec<WindowStats>,
    metrics: Vec<Option<PathMetrics>>,
}

/// `None` when allocation failed.
type SlotRecords = Option<Record>;
/// Per simulation: `Err` when the path could not be generated.
type SimRecords = std::result::Result<Vec<SlotRecords>, EcmError>;

/// Running sums over a portfolio for O(1) window queries.
struct Prefix<'a> {
    portfolio: &'a PortfolioPath,
    up: Vec<u32>,
    lambda: Vec<f64>,
}

impl<'a> Prefix<'a> {
    fn new(portfolio: &'a PortfolioPath, benchmark: &[f64]) -> Self {
        let n = portfolio.horizon();
        let mut up = Vec::with_capacity(n + 1);
        let mut lambda = Vec::with_capacity(n + 1);
        up.push(0);
        lambda.push(0.0);
        for t in 0..n {
            up.push(up[t] + u32::from(portfolio.wealth[t + 1] > benchmark[t + 1]));
            lambda.push(lambda[t] + portfolio.lambda[t]);
        }
        Prefix {
            portfolio,
            up,
            lambda,
        }
    }

    fn at(&self, horizon: usize) -> WindowStats {
        let w = self.portfolio.wealth[horizon];
        WindowStats {
            log_wealth: w.ln(),
            uptime: 100.0 * self.up[horizon] as f64 / horizon as f64,
            mean_lambda: self.lambda[horizon] / horizon as f64,
            defaulted: self.portfolio.default_step.is_some_and(|s| s <= horizon),
        }
    }
}

fn records_for(
    specs: &[StrategySpec],
    alloc: &mut Allocator,
    path: &PricePath,
    horizons: &[usize],
    full_metrics: bool,
) -> Result<Vec<SlotRecords>> {
    let (benchmark, _) = wealth_from_allocations(&vec![1.0; path.horizon()], path)?;
    let out = run_strategies(specs, alloc, path)
        .into_iter()
        .map(|res| {
            let portfolio = res.ok()?;
            let prefix = Prefix::new(&portfolio, &benchmark);
            let windows = horizons.iter().map(|&h| prefix.at(h)).collect();
            let metrics = if full_metrics {
                horizons
                    .iter()
                    .map(|&h| PathMetrics::of_prefix(&portfolio, &benchmark, h).ok())
                    .collect()
            } else {
                Vec::new()
            };
            Some(Record { windows, metrics })
        })
        .collect();
    Ok(out)
}

fn pool(workers: Option<usize>) -> Result<ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| EcmError::InvalidParams(format!("cannot start worker pool: {e}")))
}

/// Runs `f` for every simulation index in order-preserving parallel fashion.
/// `init` builds per-worker state.
fn simulate<A, I, F>(pool: &ThreadPool, sims: usize, init: I, f: F) -> Vec<SimRecords>
where
    I: Fn() -> A + Sync + Send,
    F: Fn(&mut A, u64) -> SimRecords + Sync + Send,
{
    pool.install(|| (0..sims as u64).into_par_iter().map_init(init, f).collect())
}

/// Folds the records of slot `slot`, horizon index `h` into one row.
fn summarize(
    plan: &ExperimentPlan,
    key: CellKey,
    strategy: &str,
    sims: &[SimRecords],
    slot: usize,
    h: usize,
) -> CellStats {
    let mut generation_failures = 0;
    let mut solver_failures = 0;
    let mut records: Vec<&Record> = Vec::with_capacity(sims.len());
    for sim in sims {
        match sim {
            Err(_) => generation_failures += 1,
            Ok(slots) => match &slots[slot] {
                None => solver_failures += 1,
                Some(r) => records.push(r),
            },
        }
    }
    let live: Vec<WindowStats> = records
        .iter()
        .map(|r| r.windows[h])
        .filter(|w| !w.defaulted)
        .collect();
    let defaults = records.len() - live.len();
    let quart = |f: fn(&WindowStats) -> f64| {
        let v: Vec<f64> = live.iter().map(f).collect();
        Quartiles::of(&v)
    };
    let (report, histogram) = if plan.family == Family::Histogram {
        let metrics: Vec<PathMetrics> = records
            .iter()
            .filter_map(|r| r.metrics.get(h).copied().flatten())
            .collect();
        let report = MetricsReport::from_paths_with(&metrics, plan.aggregation);
        let values: Vec<f64> = metrics
            .iter()
            .filter_map(|m| m.log_outperformance)
            .collect();
        (
            Some(report),
            Some(Histogram::new(&values, plan.histogram_bins)),
        )
    } else {
        (None, None)
    };
    CellStats {
        key,
        strategy: strategy.to_string(),
        sims: sims.len(),
        included: live.len(),
        defaults,
        generation_failures,
        solver_failures,
        prob_default: 100.0 * defaults as f64 / sims.len() as f64,
        terminal_log_wealth: quart(|w| w.log_wealth),
        uptime: quart(|w| w.uptime),
        mean_lambda: quart(|w| w.mean_lambda),
        report,
        histogram,
    }
}

fn specs(plan: &ExperimentPlan) -> Vec<StrategySpec> {
    plan.strategies
        .iter()
        .map(|id| id.spec(plan.drift, plan.solver))
        .collect()
}

fn horizon_grid(plan: &ExperimentPlan) -> Result<&[usize]> {
    match &plan.grid {
        Grid::Horizons { horizons } => Ok(horizons),
        _ => Err(EcmError::InvalidParams(format!(
            "{} needs a horizon grid",
            plan.family.name()
        ))),
    }
}

fn horizon_key(horizon: usize, variant: &str) -> CellKey {
    CellKey {
        axis: "T".into(),
        value: horizon as f64,
        horizon,
        variant: variant.into(),
    }
}

fn check_family(plan: &ExperimentPlan, family: Family) -> Result<()> {
    if plan.family != family {
        return Err(EcmError::InvalidParams(format!(
            "plan family {} passed to the {} runner",
            plan.family.name(),
            family.name()
        )));
    }
    plan.validate()
}

/// Fixed-horizon runs with the full metric suite and outperformance
/// histograms.
pub fn run_histogram(plan: &ExperimentPlan) -> Result<SweepResult> {
    check_family(plan, Family::Histogram)?;
    run_horizons(plan)
}

/// Median and quartile bands over a grid of window lengths.
pub fn run_window_sweep(plan: &ExperimentPlan) -> Result<SweepResult> {
    check_family(plan, Family::WindowSweep)?;
    run_horizons(plan)
}

fn run_horizons(plan: &ExperimentPlan) -> Result<SweepResult> {
    let horizons = horizon_grid(plan)?;
    let t_max = *horizons.iter().max().expect("validated nonempty");
    let specs = specs(plan);
    let alloc = Allocator::new(plan.params)?;
    let seed = plan.master_seed;
    let full = plan.family == Family::Histogram;
    let pool = pool(plan.workers)?;
    let sims = simulate(
        &pool,
        plan.sims,
        || alloc.clone(),
        |alloc, j| {
            let path = generate_indexed_path(&plan.params, t_max, seed, j)?;
            records_for(&specs, alloc, &path, horizons, full)
        },
    );
    let mut rows = Vec::new();
    for (h, &horizon) in horizons.iter().enumerate() {
        for (slot, id) in plan.strategies.iter().enumerate() {
            rows.push(summarize(
                plan,
                horizon_key(horizon, ""),
                id.label(),
                &sims,
                slot,
                h,
            ));
        }
    }
    Ok(SweepResult {
        family: plan.family,
        master_seed: seed,
        sims: plan.sims,
        rows,
    })
}

/// Crash-aware strategies with perfect knowledge across parameter values.
/// Path `j` of every cell reuses the same noise stream.
pub fn run_sensitivity(plan: &ExperimentPlan) -> Result<SweepResult> {
    check_family(plan, Family::ParamSensitivity)?;
    let Grid::Parameter { scans } = &plan.grid else {
        unreachable!("validated grid")
    };
    let specs = specs(plan);
    let pool = pool(plan.workers)?;
    let horizon = plan.horizon;
    let mut rows = Vec::new();
    for scan in scans {
        for &value in &scan.values {
            let params = scan.param.apply(&plan.params, value);
            let alloc = Allocator::new(params)?;
            let sims = simulate(
                &pool,
                plan.sims,
                || alloc.clone(),
                |alloc, j| {
                    let path = generate_indexed_path(&params, horizon, plan.master_seed, j)?;
                    records_for(&specs, alloc, &path, &[horizon], false)
                },
            );
            for (slot, id) in plan.strategies.iter().enumerate() {
                let key = CellKey {
                    axis: scan.param.name().into(),
                    value,
                    horizon,
                    variant: String::new(),
                };
                rows.push(summarize(plan, key, id.label(), &sims, slot, 0));
            }
        }
    }
    Ok(SweepResult {
        family: plan.family,
        master_seed: plan.master_seed,
        sims: plan.sims,
        rows,
    })
}

/// Paths at the true parameters, allocations from a per-simulation
/// perturbed estimate of one parameter.
pub fn run_error_scan(plan: &ExperimentPlan) -> Result<SweepResult> {
    check_family(plan, Family::ErrorScan)?;
    let Grid::ErrorSigmas { targets, sigmas } = &plan.grid else {
        unreachable!("validated grid")
    };
    let specs = specs(plan);
    let pool = pool(plan.workers)?;
    let (truth, horizon, seed) = (plan.params, plan.horizon, plan.master_seed);
    let mut rows = Vec::new();
    for &target in targets {
        for &sigma_e in sigmas {
            let spec = ErrorSpec { target, sigma_e };
            let sims = simulate(
                &pool,
                plan.sims,
                || (),
                |_, j| {
                    let path = generate_indexed_path(&truth, horizon, seed, j)?;
                    let estimate = spec.estimate(&truth, seed, j);
                    match Allocator::new(estimate) {
                        Ok(mut alloc) => records_for(&specs, &mut alloc, &path, &[horizon], false),
                        Err(_) => Ok(vec![None; specs.len()]),
                    }
                },
            );
            for (slot, id) in plan.strategies.iter().enumerate() {
                let key = CellKey {
                    axis: "sigma_e".into(),
                    value: sigma_e,
                    horizon,
                    variant: target.name().into(),
                };
                rows.push(summarize(plan, key, id.label(), &sims, slot, 0));
            }
        }
    }
    Ok(SweepResult {
        family: plan.family,
        master_seed: seed,
        sims: plan.sims,
        rows,
    })
}

/// Random true rates per simulation, estimated with the correct or the
/// flipped sign.
pub fn run_sign_test(plan: &ExperimentPlan) -> Result<SweepResult> {
    check_family(plan, Family::SignTest)?;
    let horizons = horizon_grid(plan)?;
    let t_max = *horizons.iter().max().expect("validated nonempty");
    let specs = specs(plan);
    let pool = pool(plan.workers)?;
    let (base, seed, sign_spec) = (plan.params, plan.master_seed, plan.sign_test);
    let sims = simulate(
        &pool,
        plan.sims,
        || (),
        |_, j| {
            let draw = RateDraw::draw(&sign_spec, seed, j);
            let path = generate_indexed_path(&draw.true_params(&base), t_max, seed, j)?;
            let mut slots = Vec::with_capacity(2 * specs.len());
            for mode in SignMode::ALL {
                match Allocator::new(draw.estimate_params(&base, mode)) {
                    Ok(mut alloc) => {
                        slots.extend(records_for(&specs, &mut alloc, &path, horizons, false)?)
                    }
                    Err(_) => slots.extend(std::iter::repeat_n(None, specs.len())),
                }
            }
            Ok(slots)
        },
    );
    let mut rows = Vec::new();
    for (h, &horizon) in horizons.iter().enumerate() {
        for (m, mode) in SignMode::ALL.iter().enumerate() {
            for (k, id) in plan.strategies.iter().enumerate() {
                let slot = m * specs.len() + k;
                rows.push(summarize(
                    plan,
                    horizon_key(horizon, mode.name()),
                    id.label(),
                    &sims,
                    slot,
                    h,
                ));
            }
        }
    }
    Ok(SweepResult {
        family: plan.family,
        master_seed: seed,
        sims: plan.sims,
        rows,
    })
}

/// Dispatches on the plan's family.
pub fn run(plan: &ExperimentPlan) -> Result<SweepResult> {
    match plan.family {
        Family::Histogram => run_histogram(plan),
        Family::WindowSweep => run_window_sweep(plan),
        Family::ParamSensitivity => run_sensitivity(plan),
        Family::ErrorScan => run_error_scan(plan),
        Family::SignTest => run_sign_test(plan),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::{ErrorTarget, ParamScan, SweepParam};
    use crate::model::ModelParams;
    use crate::strategy::StrategyId;

    fn small(plan: ExperimentPlan) -> ExperimentPlan {
        plan.with_sims(40).with_workers(Some(2))
    }

    #[test]
    fn histogram_counts_reconcile() {
        let plan =
            small(ExperimentPlan::histogram(ModelParams::base(), 3)).with_grid(Grid::Horizons {
                horizons: vec![60, 120],
            });
        let res = run(&plan).unwrap();
        assert_eq!(res.rows.len(), 12);
        for row in &res.rows {
            assert_eq!(
                row.sims,
                row.defaults + row.generation_failures + row.solver_failures + row.included
            );
            let hist = row.histogram.as_ref().unwrap();
            assert_eq!(hist.total(), row.included);
        }
    }

    #[test]
    fn prefix_windows_match_direct_runs() {
        let p = ModelParams::base();
        let plan = small(ExperimentPlan::window_sweep(p, 5)).with_grid(Grid::Horizons {
            horizons: vec![50, 200],
        });
        let res = run(&plan).unwrap();
        let short = small(ExperimentPlan::window_sweep(p, 5))
            .with_grid(Grid::Horizons { horizons: vec![50] });
        let direct = run(&short).unwrap();
        for id in StrategyId::ALL {
            assert_eq!(
                res.find(50.0, "", id.label()).unwrap(),
                direct.find(50.0, "", id.label()).unwrap()
            );
        }
    }

    #[test]
    fn single_cell_sweep_matches_histogram_cell() {
        let p = ModelParams::base();
        let grid = Grid::Horizons { horizons: vec![80] };
        let sweep =
            run(&small(ExperimentPlan::window_sweep(p, 9)).with_grid(grid.clone())).unwrap();
        let hist = run(&small(ExperimentPlan::histogram(p, 9)).with_grid(grid)).unwrap();
        for (a, b) in sweep.rows.iter().zip(&hist.rows) {
            assert_eq!(a.terminal_log_wealth, b.terminal_log_wealth);
            assert_eq!(a.uptime, b.uptime);
            assert_eq!(a.prob_default, b.prob_default);
        }
    }

    #[test]
    fn other_families_run() {
        let p = ModelParams::base();
        let sens = small(ExperimentPlan::sensitivity(p, 1))
            .with_horizon(60)
            .with_grid(Grid::Parameter {
                scans: vec![ParamScan {
                    param: SweepParam::Rho,
                    values: vec![0.0, 0.02],
                }],
            });
        assert_eq!(run(&sens).unwrap().rows.len(), 4);
        let err = small(ExperimentPlan::error_scan(p, 1))
            .with_horizon(60)
            .with_grid(Grid::ErrorSigmas {
                targets: vec![ErrorTarget::Rho],
                sigmas: vec![1e-3, 1e2],
            });
        let res = run(&err).unwrap();
        assert!(res
            .rows
            .iter()
            .all(|r| r.solver_failures == 0 && r.generation_failures == 0));
        let sign = small(ExperimentPlan::sign_test(p, 1)).with_grid(Grid::Horizons {
            horizons: vec![30, 60],
        });
        assert_eq!(run(&sign).unwrap().rows.len(), 8);
    }

    #[test]
    fn wrong_runner_is_rejected() {
        let plan = ExperimentPlan::histogram(ModelParams::base(), 1);
        assert!(run_window_sweep(&plan).is_err());
    }
}
