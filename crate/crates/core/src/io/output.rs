//! CSV and JSON result files.
//!
//! Numbers are written with 17 significant digits so that re-reading a file
//! recovers every value exactly; missing values are written as `NA`. Column
//! orders are fixed and documented next to each writer.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{EcmError, Result};
use crate::experiment::SweepResult;
use crate::metrics::{max_fee, MetricsReport, Quartiles};
use crate::model::{Branch, PricePath};

/// `v` with 17 significant digits.
pub fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        "NA".into()
    } else if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v:.16e}")
    }
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), fmt_num)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn write_file(path: &Path, contents: &str) -> Result<PathBuf> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| EcmError::Io(format!("{}: {e}", dir.display())))?;
        }
    }
    fs::write(path, contents).map_err(|e| EcmError::Io(format!("{}: {e}", path.display())))?;
    Ok(path.to_path_buf())
}

/// Nine metric rows by one column per strategy:
/// `metric,<strategy>...`.
pub fn metrics_table(columns: &[(&str, &MetricsReport)]) -> String {
    let mut out = String::from("metric");
    for (label, _) in columns {
        out.push(',');
        out.push_str(&csv_field(label));
    }
    out.push('\n');
    for (row, name) in MetricsReport::ROWS.iter().enumerate() {
        out.push_str(&csv_field(name));
        for (_, report) in columns {
            out.push(',');
            out.push_str(&fmt_opt(report.values()[row]));
        }
        out.push('\n');
    }
    out
}

/// One metrics table per horizon of a histogram run.
pub fn metrics_tables(result: &SweepResult) -> Vec<(usize, String)> {
    let mut horizons: Vec<usize> = result.rows.iter().map(|r| r.key.horizon).collect();
    horizons.dedup();
    horizons
        .into_iter()
        .map(|h| {
            let cols: Vec<(&str, &MetricsReport)> = result
                .rows
                .iter()
                .filter(|r| r.key.horizon == h)
                .filter_map(|r| r.report.as_ref().map(|rep| (r.strategy.as_str(), rep)))
                .collect();
            (h, metrics_table(&cols))
        })
        .collect()
}

pub const SWEEP_COLUMNS: [&str; 21] = [
    "family",
    "axis",
    "value",
    "horizon",
    "variant",
    "strategy",
    "sims",
    "included",
    "defaults",
    "generation_failures",
    "solver_failures",
    "prob_default",
    "log_wealth_q25",
    "log_wealth_median",
    "log_wealth_q75",
    "uptime_q25",
    "uptime_median",
    "uptime_q75",
    "mean_lambda_q25",
    "mean_lambda_median",
    "mean_lambda_q75",
];

/// One row per cell and strategy in [`SWEEP_COLUMNS`] order.
pub fn sweep_csv(result: &SweepResult) -> String {
    let mut out = SWEEP_COLUMNS.join(",");
    out.push('\n');
    let q = |q: &Option<Quartiles>| match q {
        Some(q) => format!(
            "{},{},{}",
            fmt_num(q.lower),
            fmt_num(q.median),
            fmt_num(q.upper)
        ),
        None => "NA,NA,NA".into(),
    };
    for r in &result.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            result.family.name(),
            csv_field(&r.key.axis),
            fmt_num(r.key.value),
            r.key.horizon,
            csv_field(&r.key.variant),
            csv_field(&r.strategy),
            r.sims,
            r.included,
            r.defaults,
            r.generation_failures,
            r.solver_failures,
            fmt_num(r.prob_default),
            q(&r.terminal_log_wealth),
            q(&r.uptime),
            q(&r.mean_lambda),
        );
    }
    out
}

/// `horizon,strategy,bin,lower,upper,count`.
pub fn histogram_bins_csv(result: &SweepResult) -> String {
    let mut out = String::from("horizon,strategy,bin,lower,upper,count\n");
    for r in &result.rows {
        let Some(h) = &r.histogram else { continue };
        for (k, &count) in h.counts.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.key.horizon,
                csv_field(&r.strategy),
                k,
                fmt_num(h.edges[k]),
                fmt_num(h.edges[k + 1]),
                count
            );
        }
    }
    out
}

/// `horizon,strategy,count,mean,median,negative_mean,positive_mean`.
pub fn histogram_markers_csv(result: &SweepResult) -> String {
    let mut out = String::from("horizon,strategy,count,mean,median,negative_mean,positive_mean\n");
    for r in &result.rows {
        let Some(h) = &r.histogram else { continue };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.key.horizon,
            csv_field(&r.strategy),
            h.total(),
            fmt_opt(h.mean),
            fmt_opt(h.median),
            fmt_opt(h.negative_mean),
            fmt_opt(h.positive_mean)
        );
    }
    out
}

/// Rebalancing periods of the fee table, in business days.
pub const FEE_PERIODS: [f64; 2] = [1.0, 10.0];

/// `horizon,strategy,cagr_pct,rebalance_days,max_fee_bp,max_fee_bp_rounded`
/// for every strategy except buy-and-hold.
pub fn fees_csv(result: &SweepResult) -> String {
    let mut out =
        String::from("horizon,strategy,cagr_pct,rebalance_days,max_fee_bp,max_fee_bp_rounded\n");
    for r in &result.rows {
        let Some(cagr) = r.report.as_ref().and_then(|rep| rep.cagr_pct_per_year) else {
            continue;
        };
        if r.strategy == "B&H" {
            continue;
        }
        for days in FEE_PERIODS {
            let fee = max_fee(cagr, days);
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.key.horizon,
                csv_field(&r.strategy),
                fmt_num(cagr),
                days,
                fmt_num(fee.max_fee_bp),
                fee.rounded_bp()
            );
        }
    }
    out
}

/// Long format: `sim,t,price,normal_price,q,jump,kappa`.
pub fn paths_csv(paths: &[PricePath]) -> String {
    let mut out = String::from("sim,t,price,normal_price,q,jump,kappa\n");
    for (i, p) in paths.iter().enumerate() {
        let sim = p.seed_info.map_or(i as u64, |s| s.sim_index);
        for (t, s) in p.steps.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                sim,
                t,
                fmt_num(s.price),
                fmt_num(s.normal_price),
                fmt_num(s.q),
                u8::from(t > 0 && s.branch == Branch::Jump),
                fmt_opt(s.kappa)
            );
        }
    }
    out
}

/// One line per simulation of a `paths` run.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSummary {
    pub sim: u64,
    pub horizon: usize,
    /// The step at which the price overflowed when generation failed.
    pub outcome: std::result::Result<PathStats, usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathStats {
    pub terminal_price: f64,
    pub jumps: usize,
    pub min_log_q: f64,
    pub max_log_q: f64,
    pub terminal_log_q: f64,
}

impl PathStats {
    pub fn of(path: &PricePath) -> Self {
        let lq = path.steps.iter().map(|s| s.log_mispricing());
        PathStats {
            terminal_price: path.terminal_price(),
            jumps: path.jump_count(),
            min_log_q: lq.clone().fold(f64::INFINITY, f64::min),
            max_log_q: lq.fold(f64::NEG_INFINITY, f64::max),
            terminal_log_q: path.steps[path.horizon()].log_mispricing(),
        }
    }
}

/// `sim,horizon,status,failed_step,terminal_price,jumps,min_log_q,max_log_q,terminal_log_q`.
pub fn path_summary_csv(rows: &[PathSummary]) -> String {
    let mut out = String::from(
        "sim,horizon,status,failed_step,terminal_price,jumps,min_log_q,max_log_q,terminal_log_q\n",
    );
    for r in rows {
        let _ = match &r.outcome {
            Ok(s) => writeln!(
                out,
                "{},{},ok,NA,{},{},{},{},{}",
                r.sim,
                r.horizon,
                fmt_num(s.terminal_price),
                s.jumps,
                fmt_num(s.min_log_q),
                fmt_num(s.max_log_q),
                fmt_num(s.terminal_log_q)
            ),
            Err(step) => writeln!(
                out,
                "{},{},overflow,{},NA,NA,NA,NA,NA",
                r.sim, r.horizon, step
            ),
        };
    }
    out
}

/// Run record written next to the data files.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest<'a, C: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub seed: u64,
    pub config_sha256: String,
    pub config: &'a C,
    pub wall_time_seconds: f64,
    pub files: Vec<String>,
}

/// Collects output files under one directory.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    written: Vec<PathBuf>,
}

impl OutputDir {
    pub fn new(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| EcmError::Io(format!("{}: {e}", root.display())))?;
        Ok(OutputDir {
            root,
            written: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf> {
        let path = write_file(&self.root.join(name), contents)?;
        self.written.push(path.clone());
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let text = serde_json::to_string_pretty(value).map_err(|e| EcmError::Io(e.to_string()))?;
        self.write(name, &(text + "\n"))
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    /// File names written so far, relative to the root.
    pub fn names(&self) -> Vec<String> {
        self.written
            .iter()
            .map(|p| {
                p.strip_prefix(&self.root)
                    .unwrap_or(p)
                    .display()
                    .to_string()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::{run, ExperimentPlan, Grid};
    use crate::model::ModelParams;

    #[test]
    fn numbers_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0] {
            assert_eq!(fmt_num(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_opt(None), "NA");
        assert_eq!(fmt_num(f64::NAN), "NA");
    }

    #[test]
    fn table_has_nine_rows_and_six_columns() {
        let plan = ExperimentPlan::histogram(ModelParams::base(), 2)
            .with_sims(30)
            .with_grid(Grid::Horizons { horizons: vec![40] });
        let res = run(&plan).unwrap();
        let tables = metrics_tables(&res);
        assert_eq!(tables.len(), 1);
        let lines: Vec<&str> = tables[0].1.lines().collect();
        assert_eq!(lines.len(), 10);
        let fields = |l: &str| l.split(',').count() - l.matches("\"").count() / 2;
        assert!(lines.iter().all(|l| fields(l) == 7));
        assert_eq!(
            lines[0],
            "metric,B&H,60/40,\"CK[-1,2]\",\"CK[-inf,inf]\",\"ECO[-1,2]\",\"ECO[-inf,inf]\""
        );
        let bins = histogram_bins_csv(&res);
        let total: usize = bins
            .lines()
            .skip(1)
            .filter(|l| l.contains(",60/40,"))
            .map(|l| l.rsplit(',').next().unwrap().parse::<usize>().unwrap())
            .sum();
        assert_eq!(total, res.find(40.0, "", "60/40").unwrap().included);
        assert_eq!(
            sweep_csv(&res).lines().next().unwrap().split(',').count(),
            SWEEP_COLUMNS.len()
        );
    }
}
