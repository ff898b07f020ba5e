use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use navtl::nn::NnError;
use navtl::trainer::TrainError;

mod commands;
mod config;
mod output;
mod pipeline;

#[derive(Parser, Debug)]
#[command(name = "navtl", version, about = "Train, fine-tune and evaluate navigation agents in raycast floor plans")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every command that reads a config.
#[derive(clap::Args, Debug, Clone)]
pub struct Common {
    /// TOML run config; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides `train.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write generated floor plans.
    GenEnv {
        /// meta, meta-K, cloud, condo or twisty.
        #[arg(long)]
        preset: String,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train end to end across a directory of floor plans.
    TrainOffline {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        envs: PathBuf,
        /// Overrides `train.max_steps`.
        #[arg(long)]
        steps: Option<u64>,
    },
    /// Fine-tune a checkpoint on one floor plan.
    TrainOnline {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        env: PathBuf,
        #[arg(long)]
        init: PathBuf,
        /// Stop once the moving-average return reaches this value.
        #[arg(long)]
        baseline: Option<f64>,
        /// Overrides `train.train_type`.
        #[arg(long)]
        train_type: Option<String>,
        #[arg(long)]
        steps: Option<u64>,
    },
    /// Mean safe flight of one or more checkpoints.
    EvaluateMsf {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        env: PathBuf,
        /// `PATH` or `TYPE=PATH`; repeat to compare train types.
        #[arg(long = "ckpt", required = true)]
        ckpts: Vec<String>,
        #[arg(long)]
        spawns: Option<usize>,
        #[arg(long)]
        cap: Option<f64>,
    },
    /// Trainable weights and FLOPs per train type.
    CostReport {
        /// reference or desk.
        #[arg(long, default_value = "reference")]
        spec: String,
        #[arg(long)]
        all_train_types: bool,
        #[arg(long)]
        train_type: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Dump observation channels and Q heatmaps along a flight.
    Render {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        env: PathBuf,
        #[arg(long)]
        ckpt: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        steps: usize,
    },
    /// Offline training, online fine-tuning over the experiment grid, evaluation.
    Pipeline {
        #[command(flatten)]
        common: Common,
        /// Reuse this offline checkpoint instead of training one.
        #[arg(long)]
        meta: Option<PathBuf>,
        /// Print the grid and exit.
        #[arg(long)]
        dry_run: bool,
    },
}

/// Bad flags, config values or inputs; exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.into()))
}

fn exit_status(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return 2;
        }
        match cause.downcast_ref::<TrainError>() {
            Some(TrainError::Divergence { .. } | TrainError::Nn(NnError::Divergence { .. })) => return 3,
            Some(TrainError::Config(_)) => return 2,
            _ => {}
        }
        if let Some(NnError::Divergence { .. }) = cause.downcast_ref::<NnError>() {
            return 3;
        }
    }
    1
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::GenEnv { preset, count, seed, out } => commands::gen_env(&preset, count, seed, &out),
        Command::TrainOffline { common, envs, steps } => commands::train_offline(&common, &envs, steps),
        Command::TrainOnline { common, env, init, baseline, train_type, steps } => {
            commands::train_online(&common, &env, &init, baseline, train_type.as_deref(), steps)
        }
        Command::EvaluateMsf { common, env, ckpts, spawns, cap } => {
            commands::evaluate_msf(&common, &env, &ckpts, spawns, cap)
        }
        Command::CostReport { spec, all_train_types, train_type, config, out } => {
            commands::cost_report(&spec, all_train_types, train_type.as_deref(), config.as_deref(), &out)
        }
        Command::Render { common, env, ckpt, steps } => commands::render(&common, &env, ckpt.as_deref(), steps),
        Command::Pipeline { common, meta, dry_run } => pipeline::run(&common, meta.as_deref(), dry_run),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_status(&err))
        }
    }
}
