//! Performance metrics for ensembles of wealth series.
//!
//! Per-path metrics are computed from a wealth series and its buy-and-hold
//! benchmark and then aggregated across the ensemble, by default with the
//! median over every run for which the metric is defined. All reductions run
//! sequentially in simulation order with compensated summation, so the
//! result does not depend on how the per-path work was scheduled.

use serde::{Deserialize, Serialize};

use crate::error::{EcmError, Result};
use crate::model::TRADING_DAYS;
use crate::strategy::PortfolioPath;

/// Business days per month for the monthly return blocks.
pub const MONTH_DAYS: usize = 21;

/// Neumaier-compensated sum.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(compensated_sum(values.iter().copied()) / values.len() as f64)
    }
}

/// Linear-interpolation quantile of an ascending slice.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let pos = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        Some(sorted[i] + frac * (sorted[i + 1] - sorted[i]))
    } else {
        Some(sorted[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub lower: f64,
    pub median: f64,
    pub upper: f64,
}

impl Quartiles {
    pub fn of(values: &[f64]) -> Option<Self> {
        let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
        v.sort_by(f64::total_cmp);
        Some(Quartiles {
            lower: quantile_sorted(&v, 0.25)?,
            median: quantile_sorted(&v, 0.5)?,
            upper: quantile_sorted(&v, 0.75)?,
        })
    }

    pub fn iqr(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Metrics of one strategy on one path, measured against buy-and-hold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathMetrics {
    pub horizon: usize,
    pub terminal_wealth: f64,
    pub default_step: Option<usize>,
    /// `ln(W_T / P_T)`; missing after a default.
    pub log_outperformance: Option<f64>,
    /// Fraction of steps `1..=T` with wealth strictly above the benchmark.
    pub uptime: f64,
    pub mean_lambda: f64,
    pub sharpe: Option<f64>,
    pub sdrsr: Option<f64>,
    pub calmar: Option<f64>,
    /// Percent per year; -100 after a default.
    pub cagr: Option<f64>,
}

impl PathMetrics {
    /// `wealth` and `benchmark` hold `T + 1` values starting at 1; `lambda`
    /// holds `T` values.
    pub fn compute(
        wealth: &[f64],
        lambda: &[f64],
        default_step: Option<usize>,
        benchmark: &[f64],
    ) -> Result<Self> {
        if wealth.len() != benchmark.len() {
            return Err(EcmError::HorizonMismatch {
                left: wealth.len(),
                right: benchmark.len(),
            });
        }
        if wealth.len() != lambda.len() + 1 || wealth.len() < 2 {
            return Err(EcmError::HorizonMismatch {
                left: wealth.len(),
                right: lambda.len() + 1,
            });
        }
        let horizon = lambda.len();
        let default_step = default_step.filter(|&s| s <= horizon);
        let terminal_wealth = wealth[horizon];
        let up = wealth[1..]
            .iter()
            .zip(&benchmark[1..])
            .filter(|(w, p)| w > p)
            .count();
        let uptime = up as f64 / horizon as f64;
        let mean_lambda = compensated_sum(lambda.iter().copied()) / horizon as f64;
        if default_step.is_some() {
            return Ok(PathMetrics {
                horizon,
                terminal_wealth,
                default_step,
                log_outperformance: None,
                uptime,
                mean_lambda,
                sharpe: None,
                sdrsr: None,
                calmar: None,
                cagr: Some(-100.0),
            });
        }

        let returns: Vec<f64> = wealth.windows(2).map(|w| (w[1] / w[0]).ln()).collect();
        let n = returns.len() as f64;
        let mu = compensated_sum(returns.iter().copied()) / n;
        let constant = returns.iter().all(|&r| r == returns[0]);
        let var = compensated_sum(returns.iter().map(|r| (r - mu) * (r - mu))) / n;
        let sharpe = (!constant && var > 0.0).then(|| TRADING_DAYS.sqrt() * mu / var.sqrt());
        let downside = compensated_sum(returns.iter().map(|r| r.min(0.0).powi(2))) / n;
        let sdrsr = (downside > 0.0).then(|| TRADING_DAYS.sqrt() * mu / (2.0 * downside).sqrt());

        let monthly: Vec<f64> = (1..=horizon / MONTH_DAYS)
            .map(|k| (wealth[k * MONTH_DAYS] / wealth[(k - 1) * MONTH_DAYS]).ln())
            .collect();
        let calmar = monthly
            .iter()
            .copied()
            .reduce(f64::min)
            .filter(|&worst| worst < 0.0)
            .map(|worst| {
                compensated_sum(monthly.iter().copied()) / monthly.len() as f64 / worst.abs()
            });

        let log_growth = (terminal_wealth / wealth[0]).ln();
        let cagr = 100.0 * ((TRADING_DAYS / horizon as f64) * log_growth).exp_m1();
        Ok(PathMetrics {
            horizon,
            terminal_wealth,
            default_step,
            log_outperformance: Some((terminal_wealth / benchmark[horizon]).ln()),
            uptime,
            mean_lambda,
            sharpe,
            sdrsr,
            calmar,
            cagr: Some(cagr),
        })
    }

    /// Metrics of `portfolio` truncated to its first `horizon` steps.
    pub fn of_prefix(portfolio: &PortfolioPath, benchmark: &[f64], horizon: usize) -> Result<Self> {
        if horizon == 0 || horizon > portfolio.horizon() || benchmark.len() <= horizon {
            return Err(EcmError::HorizonMismatch {
                left: horizon,
                right: portfolio.horizon(),
            });
        }
        Self::compute(
            &portfolio.wealth[..=horizon],
            &portfolio.lambda[..horizon],
            portfolio.default_step,
            &benchmark[..=horizon],
        )
    }

    pub fn of_portfolio(portfolio: &PortfolioPath, benchmark: &[f64]) -> Result<Self> {
        Self::of_prefix(portfolio, benchmark, portfolio.horizon())
    }

    pub fn defaulted(&self) -> bool {
        self.default_step.is_some()
    }
}

/// Terminal log-outperformance over buy-and-hold for every non-defaulted run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutperformanceSample {
    pub values: Vec<f64>,
    pub excluded_defaults: usize,
}

impl OutperformanceSample {
    pub fn from_metrics(paths: &[PathMetrics]) -> Self {
        let values: Vec<f64> = paths.iter().filter_map(|p| p.log_outperformance).collect();
        OutperformanceSample {
            excluded_defaults: paths.len() - values.len(),
            values,
        }
    }

    pub fn total(&self) -> usize {
        self.values.len() + self.excluded_defaults
    }
}

/// Pairs each portfolio with the buy-and-hold run on the same path.
pub fn outperformance(
    portfolios: &[PortfolioPath],
    buy_and_hold: &[PortfolioPath],
) -> Result<OutperformanceSample> {
    if portfolios.len() != buy_and_hold.len() {
        return Err(EcmError::HorizonMismatch {
            left: portfolios.len(),
            right: buy_and_hold.len(),
        });
    }
    let mut values = Vec::with_capacity(portfolios.len());
    let mut excluded_defaults = 0;
    for (w, p) in portfolios.iter().zip(buy_and_hold) {
        if w.horizon() != p.horizon() {
            return Err(EcmError::HorizonMismatch {
                left: w.horizon(),
                right: p.horizon(),
            });
        }
        let wt = w.terminal_wealth();
        if w.defaulted() || wt <= 0.0 {
            excluded_defaults += 1;
        } else {
            values.push((wt / p.terminal_wealth()).ln());
        }
    }
    Ok(OutperformanceSample {
        values,
        excluded_defaults,
    })
}

/// How per-path metrics (uptime, the risk ratios and CAGR) are combined
/// across an ensemble. The outperformance and probability rows do not depend
/// on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Median over every run where the metric is defined; a defaulted run
    /// counts with its uptime and a CAGR of -100%.
    #[default]
    Median,
    /// Mean over the runs that did not default.
    Mean,
}

/// The nine comparison metrics of one strategy over one ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Percent of all runs ending above buy-and-hold.
    pub prob_outperf: Option<f64>,
    /// Mean positive outperformance over the magnitude of the mean negative one.
    pub avg_odds: Option<f64>,
    pub mean_outperf: Option<f64>,
    /// Percent of all runs ending at zero wealth.
    pub prob_default: Option<f64>,
    /// Percent of time above buy-and-hold, averaged over runs.
    pub uptime_fraction: Option<f64>,
    pub sharpe_ann: Option<f64>,
    pub calmar_mon: Option<f64>,
    pub sdrsr_ann: Option<f64>,
    pub cagr_pct_per_year: Option<f64>,
    pub sims: usize,
    pub included: usize,
    pub defaults: usize,
}

impl MetricsReport {
    /// Row labels in output order.
    pub const ROWS: [&'static str; 9] = [
        "Pr(W_T > P_T) [%]",
        "Average Odds",
        "Outperformance",
        "Pr(W_T = 0) [%]",
        "Fraction of Uptime [%]",
        "Sharpe Ratio (ann.)",
        "CALMAR (mon.)",
        "SDRSR (ann.)",
        "CAGR [%/y]",
    ];

    /// Report with [`Aggregation::Median`].
    pub fn from_paths(paths: &[PathMetrics]) -> Self {
        Self::from_paths_with(paths, Aggregation::Median)
    }

    pub fn from_paths_with(paths: &[PathMetrics], aggregation: Aggregation) -> Self {
        let sims = paths.len();
        let live: Vec<&PathMetrics> = paths.iter().filter(|p| !p.defaulted()).collect();
        let defaults = sims - live.len();
        let pct = |count: usize| (sims > 0).then(|| 100.0 * count as f64 / sims as f64);
        let avg = |f: &dyn Fn(&PathMetrics) -> Option<f64>| match aggregation {
            Aggregation::Median => {
                let v: Vec<f64> = paths.iter().filter_map(f).collect();
                Quartiles::of(&v).map(|q| q.median)
            }
            Aggregation::Mean => {
                let v: Vec<f64> = live.iter().filter_map(|p| f(p)).collect();
                mean(&v)
            }
        };

        let sample = OutperformanceSample::from_metrics(paths);
        let pos: Vec<f64> = sample.values.iter().copied().filter(|&o| o > 0.0).collect();
        let neg: Vec<f64> = sample.values.iter().copied().filter(|&o| o < 0.0).collect();
        let avg_odds = match (mean(&pos), mean(&neg)) {
            (Some(p), Some(n)) => Some(p / n.abs()),
            _ => None,
        };

        MetricsReport {
            prob_outperf: pct(pos.len()),
            avg_odds,
            mean_outperf: mean(&sample.values),
            prob_default: pct(defaults),
            uptime_fraction: avg(&|p| Some(p.uptime)).map(|u| 100.0 * u),
            sharpe_ann: avg(&|p| p.sharpe),
            calmar_mon: avg(&|p| p.calmar),
            sdrsr_ann: avg(&|p| p.sdrsr),
            cagr_pct_per_year: avg(&|p| p.cagr),
            sims,
            included: live.len(),
            defaults,
        }
    }

    /// Values in [`MetricsReport::ROWS`] order.
    pub fn values(&self) -> [Option<f64>; 9] {
        [
            self.prob_outperf,
            self.avg_odds,
            self.mean_outperf,
            self.prob_default,
            self.uptime_fraction,
            self.sharpe_ann,
            self.calmar_mon,
            self.sdrsr_ann,
            self.cagr_pct_per_year,
        ]
    }
}

/// Binned outperformance sample with its marker statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub mean: Option<f64>,
    pub median: Option<f64>,
    pub negative_mean: Option<f64>,
    pub positive_mean: Option<f64>,
}

impl Histogram {
    pub fn new(values: &[f64], bins: usize) -> Self {
        let bins = bins.max(1);
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let pos: Vec<f64> = values.iter().copied().filter(|&o| o > 0.0).collect();
        let neg: Vec<f64> = values.iter().copied().filter(|&o| o < 0.0).collect();
        let (edges, counts) = match (sorted.first(), sorted.last()) {
            (Some(&lo), Some(&hi)) if hi > lo => {
                let width = (hi - lo) / bins as f64;
                let edges: Vec<f64> = (0..=bins).map(|i| lo + width * i as f64).collect();
                let mut counts = vec![0usize; bins];
                for &v in values {
                    let k = (((v - lo) / width) as usize).min(bins - 1);
                    counts[k] += 1;
                }
                (edges, counts)
            }
            (Some(&lo), Some(_)) => (vec![lo, lo], vec![values.len()]),
            _ => (Vec::new(), Vec::new()),
        };
        Histogram {
            edges,
            counts,
            mean: mean(values),
            median: quantile_sorted(&sorted, 0.5),
            negative_mean: mean(&neg),
            positive_mean: mean(&pos),
        }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Largest per-trade fee that a strategy growing at `cagr` can pay when
/// trading every `rebalance_days` business days.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeeBound {
    pub rebalance_days: f64,
    pub max_fee_bp: f64,
}

impl FeeBound {
    pub fn rounded_bp(&self) -> i64 {
        self.max_fee_bp.round() as i64
    }
}

/// `(1 + CAGR)^(rebalance_days / 250) - 1`, in basis points.
pub fn max_fee(cagr_pct: f64, rebalance_days: f64) -> FeeBound {
    let growth = (1.0 + cagr_pct / 100.0).ln();
    let per_trade = (growth * rebalance_days / 250.0).exp_m1();
    FeeBound {
        rebalance_days,
        max_fee_bp: (per_trade * 1e4).max(0.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn pm(o: Option<f64>) -> PathMetrics {
        PathMetrics {
            horizon: 1,
            terminal_wealth: 1.0,
            default_step: if o.is_none() { Some(1) } else { None },
            log_outperformance: o,
            uptime: 0.0,
            mean_lambda: 0.0,
            sharpe: None,
            sdrsr: None,
            calmar: None,
            cagr: None,
        }
    }

    #[test]
    fn outperformance_examples() {
        let e = std::f64::consts::E;
        let m = PathMetrics::compute(&[1.0, e * 2.0], &[1.0], None, &[1.0, 2.0]).unwrap();
        assert_relative_eq!(m.log_outperformance.unwrap(), 1.0, max_relative = 1e-15);
        let m = PathMetrics::compute(&[1.0, 2.0], &[1.0], None, &[1.0, 2.0]).unwrap();
        assert_eq!(m.log_outperformance, Some(0.0));

        let r = MetricsReport::from_paths(&[pm(Some(1.0)), pm(Some(1.0)), pm(Some(-1.0))]);
        assert_relative_eq!(r.mean_outperf.unwrap(), 1.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(r.prob_outperf.unwrap(), 200.0 / 3.0, max_relative = 1e-15);
        assert_eq!(r.avg_odds, Some(1.0));
    }

    #[test]
    fn defaulted_runs_enter_median_cagr() {
        let w = [1.0, 1.1, 1.21];
        let ok = PathMetrics::compute(&w, &[1.0, 1.0], None, &w).unwrap();
        let dead = PathMetrics::compute(&[1.0, 0.0, 0.0], &[3.0, 0.0], Some(1), &w).unwrap();
        assert_eq!(dead.cagr, Some(-100.0));
        let paths = [ok, dead, dead];
        assert_eq!(
            MetricsReport::from_paths(&paths).cagr_pct_per_year,
            Some(-100.0)
        );
        assert_eq!(
            MetricsReport::from_paths_with(&paths, Aggregation::Mean).cagr_pct_per_year,
            ok.cagr
        );
    }

    #[test]
    fn probabilities_partition_runs() {
        let r = MetricsReport::from_paths(&[
            pm(Some(0.2)),
            pm(None),
            pm(Some(0.0)),
            pm(Some(-0.3)),
            pm(None),
        ]);
        let le_zero = 40.0;
        assert_relative_eq!(
            r.prob_outperf.unwrap() + le_zero + r.prob_default.unwrap(),
            100.0
        );
        assert_eq!((r.sims, r.included, r.defaults), (5, 3, 2));
    }

    #[test]
    fn constant_returns_have_no_sharpe() {
        let g: f64 = 1.001;
        let w: Vec<f64> = (0..=50).map(|t| g.powi(t)).collect();
        let bench = vec![1.0; 51];
        let m = PathMetrics::compute(&w, &[0.0; 50], None, &bench).unwrap();
        // Doubling keeps every ratio exact.
        let mut w2 = vec![1.0];
        for _ in 0..50 {
            let last = *w2.last().unwrap();
            w2.push(last * 2.0);
        }
        let m2 = PathMetrics::compute(&w2, &[0.0; 50], None, &bench).unwrap();
        assert_eq!(m2.sharpe, None);
        assert_eq!(m2.sdrsr, None);
        assert_eq!(m2.calmar, None);
        assert!(m.cagr.is_some());
    }

    #[test]
    fn constant_growth_cagr() {
        let g = 3e-4;
        let w: Vec<f64> = (0..=500).map(|t| (g * t as f64).exp()).collect();
        let m = PathMetrics::compute(&w, &[1.0; 500], None, &w).unwrap();
        assert_relative_eq!(
            m.cagr.unwrap(),
            100.0 * ((252.0 * g).exp() - 1.0),
            max_relative = 1e-12
        );
        assert_eq!(m.uptime, 0.0);
    }

    #[test]
    fn symmetric_returns_give_equal_denominators() {
        let mut w = vec![1.0];
        for k in 0..200 {
            let r: f64 = if k % 2 == 0 { 0.013 } else { -0.013 };
            let last = *w.last().unwrap();
            w.push(last * r.exp());
        }
        let m = PathMetrics::compute(&w, &[1.0; 200], None, &w).unwrap();
        let (s, d) = (m.sharpe.unwrap(), m.sdrsr.unwrap());
        assert!((s - d).abs() < 1e-12, "{s} vs {d}");
    }

    #[test]
    fn metrics_are_scale_free() {
        let w: Vec<f64> = (0..=300)
            .map(|t| 1.0 + 0.2 * (t as f64 * 0.1).sin() + 0.001 * t as f64)
            .collect();
        let p: Vec<f64> = (0..=300)
            .map(|t| 1.0 + 0.15 * (t as f64 * 0.07).cos() - 0.15 + 0.0005 * t as f64)
            .collect();
        let lam = vec![0.5; 300];
        let a = PathMetrics::compute(&w, &lam, None, &p).unwrap();
        let c = 4.0;
        let ws: Vec<f64> = w.iter().map(|x| x * c).collect();
        let ps: Vec<f64> = p.iter().map(|x| x * c).collect();
        let b = PathMetrics::compute(&ws, &lam, None, &ps).unwrap();
        assert_eq!(a.uptime, b.uptime);
        for (x, y) in [
            (a.sharpe, b.sharpe),
            (a.sdrsr, b.sdrsr),
            (a.calmar, b.calmar),
            (a.cagr, b.cagr),
            (a.log_outperformance, b.log_outperformance),
        ] {
            assert!((x.unwrap() - y.unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn fee_bound_examples() {
        assert_eq!(max_fee(10.610, 10.0).rounded_bp(), 40);
        assert_eq!(max_fee(11.424, 10.0).rounded_bp(), 43);
        assert_eq!(max_fee(9.277, 10.0).rounded_bp(), 36);
        assert_eq!(max_fee(10.610, 1.0).rounded_bp(), 4);
        assert_relative_eq!(
            max_fee(10.610, 10.0).max_fee_bp,
            40.41758561206405,
            max_relative = 1e-12
        );
    }

    #[test]
    fn histogram_markers() {
        let h = Histogram::new(&[0.5], 20);
        assert_eq!(h.total(), 1);
        assert_eq!(
            (h.mean, h.median, h.positive_mean),
            (Some(0.5), Some(0.5), Some(0.5))
        );
        let v = [-1.0, -0.5, 0.25, 0.5, 2.0];
        let h = Histogram::new(&v, 4);
        assert_eq!(h.total(), 5);
        assert_eq!(h.median, Some(0.25));
        assert_eq!(h.negative_mean, Some(-0.75));
    }

    #[test]
    fn quartiles_are_ordered() {
        let q = Quartiles::of(&[5.0, 1.0, 3.0, 2.0, 4.0]).unwrap();
        assert_eq!((q.lower, q.median, q.upper), (2.0, 3.0, 4.0));
        assert!(Quartiles::of(&[]).is_none());
    }
}
