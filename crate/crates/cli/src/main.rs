mod commands;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};


#[derive(Parser)]
#[command(name = "smfp", version, about = "Train and inspect one-step stochastic flow policies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train from a config file, writing a manifest, metrics and checkpoints.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        steps: Option<u64>,
    },
    /// Evaluate a checkpoint and write eval.json.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Environment to roll out in; defaults to the training environment.
        #[arg(long)]
        env: Option<String>,
        #[arg(long, default_value_t = 10)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an oracle suite: autodiff, meanflow, pmd, entropy or all.
    Check {
        #[arg(long, default_value = "all")]
        suite: String,
    },
    /// Train the SMFP, SMFP without entropy floor and Gaussian arms on the
    /// bandit and report mode coverage.
    Modes {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        steps: Option<u64>,
    },
    /// Render eval return curves from metrics CSVs, or episode returns from eval JSONs.
    Plot {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train { config, out, seed, steps } => commands::train(&config, &out, seed, steps),
        Command::Eval { checkpoint, env, episodes, seed, out } => commands::eval(&checkpoint, env.as_deref(), episodes, seed, out.as_deref()),
        Command::Check { suite } => commands::check(&suite),
        Command::Modes { config, out, seed, steps } => commands::modes(&config, &out, seed, steps),
        Command::Plot { inputs, out } => commands::plot(&inputs, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
