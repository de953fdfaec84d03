//! Command-line front end of the benchmark: `train`, `eval`, `sweep`,
//! `gallery` and `analyze`.
//!
//! Every command resolves a flat `key=value` [`RunConfig`] from an optional
//! file plus `--set` overrides and stores the resolved copy in its output
//! directory. Exit codes: 0 success, 2 configuration error, 3 runtime failure.

pub mod commands;
pub mod config;
pub mod error;
pub mod plot;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{AnalyzeKind, SweepKind};
pub use config::RunConfig;
pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "vgbench", version, about = "Visual-generalization benchmark for pixel-based control")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Options shared by every verb.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Flat key=value config file, applied before `--set`.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Override one setting; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Output directory; overrides `output_dir`.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train an agent; writes metrics.jsonl, checkpoint.bin, eval_curve.csv and learning_curve.png.
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate a checkpoint over the factor sweep; writes returns.csv, summary.json, table1.csv and table2.csv.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "FILE")]
        checkpoint: PathBuf,
    },
    /// Train one run per grid point; writes curves.csv, final.csv and sweep.png.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        kind: SweepKind,
        /// Comma-separated grid values; augmentation points chain kinds with '+'.
        #[arg(long)]
        grid: Option<String>,
    },
    /// Render one canonical state under a range of visual seeds; writes gallery.png and manifest.txt.
    Gallery {
        #[command(flatten)]
        common: Common,
        /// Seeds as `a..b` (inclusive) or a comma list; overrides `gallery_seeds`.
        #[arg(long)]
        seeds: Option<String>,
    },
    /// Encoder variance curves or attention overlays from one or more checkpoints.
    Analyze {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        kind: AnalyzeKind,
        /// Repeatable.
        #[arg(long = "checkpoint", value_name = "FILE")]
        checkpoints: Vec<PathBuf>,
    },
}

/// Builds the run configuration from a config file, `--set` pairs and extra
/// pairs contributed by verb-specific flags.
pub fn resolve(common: &Common, extra: &[(String, String)]) -> CliResult<RunConfig> {
    let mut pairs = Vec::new();
    if let Some(path) = &common.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        pairs.extend(config::parse_pairs(&text)?);
    }
    for s in &common.set {
        pairs.push(config::parse_assignment(s)?);
    }
    pairs.extend_from_slice(extra);
    if let Some(out) = &common.out {
        pairs.push(("output_dir".into(), out.display().to_string()));
    }
    RunConfig::from_pairs(&pairs)
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Train { common } => commands::train(&resolve(&common, &[])?),
        Command::Eval { common, checkpoint } => commands::eval(&resolve(&common, &[])?, &checkpoint),
        Command::Sweep { common, kind, grid } => {
            let cfg = resolve(&common, &[])?;
            let grid = commands::parse_grid(kind, grid.as_deref())?;
            commands::sweep(&cfg, kind, &grid)
        }
        Command::Gallery { common, seeds } => {
            let extra: Vec<_> = seeds.into_iter().map(|s| ("gallery_seeds".to_string(), s)).collect();
            commands::gallery_cmd(&resolve(&common, &extra)?)
        }
        Command::Analyze { common, kind, checkpoints } => commands::analyze(&resolve(&common, &[])?, kind, &checkpoints),
    }
}
