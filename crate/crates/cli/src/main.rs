//! `spmtl` command-line harness.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use spmtl_core::Mode;

use crate::config::Overrides;

#[derive(Parser)]
#[command(name = "spmtl", version, about = "Self-paced multi-task linear regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a synthetic multi-task dataset and its generating model.
    GenToy {
        /// Toy generator settings (JSON); defaults apply without it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a model and write it with its iteration trace.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a saved model on a CSV dataset.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// CSV schema and optional standardizer (JSON).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory for `eval.json`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the mode × ratio × seed × β sweep.
    Benchmark {
        /// Sweep settings (JSON); the default sweep runs without it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: OverrideArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write per-instance losses and weights of a saved model, sorted by loss.
    WeightsDump {
        #[arg(long)]
        model: PathBuf,
        /// The training data the model's weights belong to.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Clone, Copy)]
struct OverrideArgs {
    #[arg(long, value_parser = parse_mode)]
    mode: Option<Mode>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    ratio: Option<f64>,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse().map_err(|e: spmtl_core::Error| e.to_string())
}

impl From<OverrideArgs> for Overrides {
    fn from(a: OverrideArgs) -> Self {
        Overrides {
            mode: a.mode,
            seed: a.seed,
            ratio: a.ratio,
        }
    }
}

/// 1 for numerical failures inside the library, 2 for everything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    let core = err.chain().find_map(|e| e.downcast_ref::<spmtl_core::Error>());
    match core {
        Some(e) if !e.is_usage() => 1,
        _ => 2,
    }
}

/// The cause chain joined with `: `, skipping causes whose text the
/// previous message already contains.
fn describe(err: &anyhow::Error) -> String {
    let mut out = String::new();
    let mut last = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if !last.contains(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
        last = text;
    }
    out
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenToy { config, seed, out } => commands::gen_toy(config.as_deref(), seed, &out),
        Command::Train { config, overrides, out } => commands::train(&config, overrides.into(), &out),
        Command::Eval {
            model,
            data,
            config,
            out,
        } => commands::eval(&model, &data, config.as_deref(), out.as_deref()),
        Command::Benchmark { config, overrides, out } => {
            commands::benchmark(config.as_deref(), overrides.into(), &out)
        }
        Command::WeightsDump {
            model,
            data,
            config,
            out,
        } => commands::weights_dump(&model, &data, config.as_deref(), &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", describe(&err));
            ExitCode::from(exit_code(&err))
        }
    }
}
