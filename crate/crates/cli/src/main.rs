#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use fir_stats::{BinKind, RouteKey};

mod commands;
mod config;

use commands::{Classify, CmdResult, ExitKind, Failure};
use config::{AnalysisConfig, GeneratorKind, OUT_DIR_ENV};

/// Flight-plan arrival statistics: ingest, profile, segment, extract
/// intervals, fit distributions, simulate.
#[derive(Debug, Parser)]
#[command(name = "fir-stats", version)]
struct Cli {
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Significance level for homogeneity and goodness-of-fit tests.
    #[arg(long, global = true)]
    alpha: Option<f64>,
    #[arg(long, global = true, env = OUT_DIR_ENV)]
    out_dir: Option<PathBuf>,
    /// Input record file (repeatable); replaces `inputs` from the config.
    #[arg(long = "input", global = true)]
    inputs: Vec<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ProfileKind {
    Monthly,
    Hourly,
    Weekday,
}

impl From<ProfileKind> for BinKind {
    fn from(k: ProfileKind) -> Self {
        match k {
            ProfileKind::Monthly => BinKind::Monthly,
            ProfileKind::Hourly => BinKind::Hourly,
            ProfileKind::Weekday => BinKind::Weekday,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse inputs and write the canonical record dump plus a parse report.
    Ingest,
    /// Write monthly, hourly or weekday count profiles as CSV.
    Profile {
        #[arg(long, value_enum)]
        kind: ProfileKind,
        /// Restrict to one route, `ENTRY-EXIT`.
        #[arg(long)]
        route: Option<String>,
    },
    /// Segment a monthly or hourly profile into stationary periods (JSON).
    Segment {
        #[arg(long, value_enum, default_value = "hourly")]
        kind: ProfileKind,
        #[arg(long)]
        route: Option<String>,
    },
    /// Extract inter-arrival intervals per route and stationary period.
    Intervals {
        #[arg(long)]
        route: Option<String>,
        /// Fixed hour window `START-END` (inclusive) instead of segmentation.
        #[arg(long)]
        window: Option<String>,
    },
    /// Segment, extract, fit and test; one JSON report per (route, period).
    Analyze {
        #[arg(long)]
        route: Option<String>,
        #[arg(long)]
        window: Option<String>,
    },
    /// Generate a synthetic stream in the input CSV schema plus a truth file.
    Simulate {
        #[arg(long, value_enum)]
        generator: Option<GeneratorKind>,
    },
}

fn parse_route(route: &Option<String>) -> CmdResult<Option<RouteKey>> {
    route
        .as_deref()
        .map(|r| RouteKey::parse(r).ok_or_else(|| anyhow::anyhow!("route {r:?} is not ENTRY-EXIT")))
        .transpose()
        .or_usage()
}

fn parse_window(window: &Option<String>) -> CmdResult<Option<(usize, usize)>> {
    window.as_deref().map(commands::parse_window).transpose().or_usage()
}

fn resolve_config(cli: &Cli) -> CmdResult<AnalysisConfig> {
    let mut config = match &cli.config {
        Some(path) => AnalysisConfig::load(path).or_usage()?,
        None => AnalysisConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(alpha) = cli.alpha {
        config.alpha = alpha;
    }
    if let Some(dir) = &cli.out_dir {
        config.out_dir = dir.clone();
    }
    if !cli.inputs.is_empty() {
        config.inputs = cli.inputs.clone();
    }
    config.validate().or_usage()?;
    Ok(config)
}

fn run(cli: Cli) -> CmdResult<()> {
    let mut config = resolve_config(&cli)?;
    match &cli.command {
        Command::Ingest => commands::cmd_ingest(&config),
        Command::Profile { kind, route } => commands::cmd_profile(&config, (*kind).into(), parse_route(route)?.as_ref()),
        Command::Segment { kind, route } => {
            if matches!(kind, ProfileKind::Weekday) {
                return Err(Failure {
                    kind: ExitKind::Usage,
                    error: anyhow::anyhow!("weekday profiles are diagnostic only; segment monthly or hourly"),
                });
            }
            commands::cmd_segment(&config, (*kind).into(), parse_route(route)?.as_ref())
        }
        Command::Intervals { route, window } => {
            commands::cmd_intervals(&config, parse_route(route)?.as_ref(), parse_window(window)?)
        }
        Command::Analyze { route, window } => {
            commands::cmd_analyze(&config, parse_route(route)?.as_ref(), parse_window(window)?)
        }
        Command::Simulate { generator } => {
            if let Some(g) = generator {
                config.simulate.generator = *g;
            }
            commands::cmd_simulate(&config)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() { ExitCode::from(ExitKind::Usage as u8) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure { kind, error }) => {
            eprintln!("error: {error:#}");
            ExitCode::from(kind as u8)
        }
    }
}
