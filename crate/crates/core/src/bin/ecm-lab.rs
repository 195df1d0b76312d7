use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ecm_lab::experiment::{ErrorTarget, SweepParam};
use ecm_lab::io::{execute, Command, RunConfig, ScanConfig};
use ecm_lab::EcmError;

/// Monte Carlo laboratory for the efficient-crashes price model and the
/// crash-aware Kelly strategy.
///
/// Every subcommand reads an optional JSON config (annual units, 252 trading
/// days), applies the flag overrides and writes CSV tables plus a JSON
/// manifest to the output directory.
///
/// Exit codes: 0 success, 1 configuration error, 2 runtime failure.
#[derive(Parser, Debug)]
#[command(name = "ecm-lab", version, about, long_about)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Args, Debug)]
struct Global {
    /// JSON run configuration; unknown keys are rejected.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Simulations per cell.
    #[arg(long, global = true)]
    sims: Option<usize>,
    /// Path length for `paths`, evaluation window otherwise.
    #[arg(long, global = true)]
    horizon: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "ECM_LAB_WORKERS")]
    workers: Option<usize>,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Sample price paths: price, normal price, mispricing and jumps over
    /// time (the model illustration figures).
    Paths,
    /// Compare all six strategies at fixed horizons: metric tables, terminal
    /// log-outperformance histograms and break-even fee table.
    Compare,
    /// Sweep the evaluation window: median log-wealth, uptime, mean
    /// allocation and default probability against horizon.
    SweepWindow,
    /// Vary one model parameter with the others at base values.
    SweepParam {
        /// Parameter to scan: rates, sigma, rho or k_bar (default: all four).
        #[arg(long, value_parser = parse_param)]
        param: Option<SweepParam>,
    },
    /// Mis-estimate one parameter with multiplicative noise of increasing
    /// size and record the cost.
    ErrorScan {
        /// Parameter to perturb: r_d, r_n, sigma, rho or k_bar (default: all five).
        #[arg(long, value_parser = parse_target)]
        target: Option<ErrorTarget>,
    },
    /// Random short-term rates with correct and sign-flipped estimates.
    SignTest,
}

fn parse_param(s: &str) -> Result<SweepParam, String> {
    SweepParam::ALL
        .into_iter()
        .find(|p| p.name() == s)
        .ok_or_else(|| format!("expected one of rates, sigma, rho, k_bar; got `{s}`"))
}

fn parse_target(s: &str) -> Result<ErrorTarget, String> {
    ErrorTarget::ALL
        .into_iter()
        .find(|t| t.name() == s)
        .ok_or_else(|| format!("expected one of r_d, r_n, sigma, rho, k_bar; got `{s}`"))
}

fn build_config(cli: &Cli) -> Result<(Command, RunConfig), EcmError> {
    let g = &cli.global;
    let mut cfg = match &g.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    let command = match &cli.command {
        Sub::Paths => Command::Paths,
        Sub::Compare => Command::Compare,
        Sub::SweepWindow => Command::SweepWindow,
        Sub::SweepParam { param } => {
            if let Some(p) = param {
                let existing = cfg.experiment.scans.take().unwrap_or_default();
                let scan = existing
                    .into_iter()
                    .find(|s| s.param == *p)
                    .unwrap_or_else(|| ScanConfig::with_defaults(*p));
                cfg.experiment.scans = Some(vec![scan]);
            }
            Command::SweepParam
        }
        Sub::ErrorScan { target } => {
            if let Some(t) = target {
                cfg.experiment.error_targets = Some(vec![*t]);
            }
            Command::ErrorScan
        }
        Sub::SignTest => Command::SignTest,
    };
    if let Some(seed) = g.seed {
        cfg.seed = seed;
    }
    if let Some(sims) = g.sims {
        cfg.sims = sims;
    }
    if let Some(h) = g.horizon {
        cfg.override_horizon(command.family(), h);
    }
    if let Some(out) = &g.out {
        cfg.output_dir = out.clone();
    }
    if g.workers.is_some() {
        cfg.workers = g.workers;
    }
    cfg.validate()?;
    Ok((command, cfg))
}

fn is_config_error(e: &EcmError) -> bool {
    matches!(e, EcmError::Config { .. } | EcmError::InvalidParams(_))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.global.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let (command, cfg) = match build_config(&cli) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("ecm-lab: {e}");
            return ExitCode::from(if is_config_error(&e) { 1 } else { 2 });
        }
    };
    match execute(command, &cfg) {
        Ok(outcome) => {
            for f in &outcome.files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("ecm-lab: {e}");
            ExitCode::from(if is_config_error(&e) { 1 } else { 2 })
        }
    }
}
