//! Subcommand execution: config in, files out.

use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;

use super::config::{OutputFormat, RunConfig};
use super::output::{self, Manifest, OutputDir, PathStats, PathSummary};
use crate::error::{EcmError, Result};
use crate::experiment::{self, Family, SweepResult};
use crate::model::generate_indexed_path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Paths,
    Compare,
    SweepWindow,
    SweepParam,
    ErrorScan,
    SignTest,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::Paths,
        Command::Compare,
        Command::SweepWindow,
        Command::SweepParam,
        Command::ErrorScan,
        Command::SignTest,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Paths => "paths",
            Command::Compare => "compare",
            Command::SweepWindow => "sweep-window",
            Command::SweepParam => "sweep-param",
            Command::ErrorScan => "error-scan",
            Command::SignTest => "sign-test",
        }
    }

    /// The experiment family behind the command; `paths` has none.
    pub fn family(self) -> Option<Family> {
        match self {
            Command::Paths => None,
            Command::Compare => Some(Family::Histogram),
            Command::SweepWindow => Some(Family::WindowSweep),
            Command::SweepParam => Some(Family::ParamSensitivity),
            Command::ErrorScan => Some(Family::ErrorScan),
            Command::SignTest => Some(Family::SignTest),
        }
    }
}

/// Files written by a command and, for experiment commands, the result.
#[derive(Debug)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub result: Option<SweepResult>,
}

/// Runs `command` under `config` and writes its outputs. Configuration
/// problems surface as [`EcmError::Config`].
pub fn execute(command: Command, config: &RunConfig) -> Result<Outcome> {
    config.validate()?;
    let start = Instant::now();
    let plan = command.family().map(|f| config.plan(f)).transpose()?;
    let mut out = OutputDir::new(&config.output_dir)?;
    let csv = config.formats.contains(&OutputFormat::Csv);
    let json = config.formats.contains(&OutputFormat::Json);

    let result = match plan {
        None => {
            write_paths(config, &mut out, csv)?;
            None
        }
        Some(plan) => {
            log::info!(
                "{}: {} sims per cell, seed {}",
                command.name(),
                plan.sims,
                plan.master_seed
            );
            let result = experiment::run(&plan)?;
            if csv {
                write_result(&result, &mut out)?;
            }
            if json {
                out.write_json("result.json", &result)?;
            }
            Some(result)
        }
    };

    let mut files = out.names();
    files.push("manifest.json".into());
    let manifest = Manifest {
        tool: "ecm-lab",
        version: env!("CARGO_PKG_VERSION"),
        command: command.name(),
        seed: config.seed,
        config_sha256: config.hash(),
        config,
        wall_time_seconds: start.elapsed().as_secs_f64(),
        files,
    };
    out.write_json("manifest.json", &manifest)?;
    Ok(Outcome {
        files: out.written().to_vec(),
        result,
    })
}

fn write_result(result: &SweepResult, out: &mut OutputDir) -> Result<()> {
    out.write("sweep.csv", &output::sweep_csv(result))?;
    if result.family == Family::Histogram {
        for (h, table) in output::metrics_tables(result) {
            out.write(&format!("table_T{h}.csv"), &table)?;
        }
        out.write("histogram_bins.csv", &output::histogram_bins_csv(result))?;
        out.write(
            "histogram_markers.csv",
            &output::histogram_markers_csv(result),
        )?;
        out.write("fees.csv", &output::fees_csv(result))?;
    }
    Ok(())
}

fn write_paths(config: &RunConfig, out: &mut OutputDir, csv: bool) -> Result<()> {
    let params = config.params()?;
    let (horizon, seed) = (config.horizon, config.seed);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers.unwrap_or(0))
        .build()
        .map_err(|e| EcmError::Io(format!("cannot start worker pool: {e}")))?;
    let kept = config.experiment.paths_kept;
    let generated: Vec<(PathSummary, Option<crate::model::PricePath>)> = pool.install(|| {
        (0..config.sims as u64)
            .into_par_iter()
            .map(|j| match generate_indexed_path(&params, horizon, seed, j) {
                Ok(path) => {
                    let summary = PathSummary {
                        sim: j,
                        horizon,
                        outcome: Ok(PathStats::of(&path)),
                    };
                    (summary, ((j as usize) < kept).then_some(path))
                }
                Err(EcmError::PathOverflow { step, .. }) => (
                    PathSummary {
                        sim: j,
                        horizon,
                        outcome: Err(step),
                    },
                    None,
                ),
                Err(e) => (
                    PathSummary {
                        sim: j,
                        horizon,
                        outcome: Err(0),
                    },
                    {
                        log::warn!("simulation {j}: {e}");
                        None
                    },
                ),
            })
            .collect()
    });
    if csv {
        let paths: Vec<_> = generated.iter().filter_map(|(_, p)| p.clone()).collect();
        let summary: Vec<PathSummary> = generated.into_iter().map(|(s, _)| s).collect();
        out.write("paths.csv", &output::paths_csv(&paths))?;
        out.write("path_summary.csv", &output::path_summary_csv(&summary))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(dir: &std::path::Path) -> RunConfig {
        let mut cfg = RunConfig::from_json(
            r#"{"sims": 8, "horizon": 30, "experiment": {"horizons": [20], "window": 20,
            "error_sigmas": [0.001], "error_targets": ["rho"], "paths_kept": 3}}"#,
        )
        .unwrap();
        cfg.output_dir = dir.to_path_buf();
        cfg.workers = Some(1);
        cfg
    }

    #[test]
    fn every_command_writes_a_manifest() {
        let tmp = tempfile::tempdir().unwrap();
        for cmd in Command::ALL {
            let dir = tmp.path().join(cmd.name());
            let mut cfg = config(&dir);
            if cmd == Command::SweepParam {
                cfg.experiment.scans = Some(vec![super::super::config::ScanConfig {
                    param: experiment::SweepParam::Rho,
                    values: vec![0.0],
                }]);
            }
            let outcome = execute(cmd, &cfg).unwrap();
            assert!(dir.join("manifest.json").exists(), "{}", cmd.name());
            assert!(outcome.files.len() >= 2);
        }
        let paths = std::fs::read_to_string(tmp.path().join("paths/paths.csv")).unwrap();
        assert_eq!(paths.lines().count(), 1 + 3 * 31);
    }
}
