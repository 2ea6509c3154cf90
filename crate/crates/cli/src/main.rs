mod config;
mod commands;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Exit codes: 0 success / property holds, 1 property violated, 2 bad
/// input, 3 resource ceiling exceeded.
#[derive(Parser)]
#[command(name = "fldp")]
#[command(about = "Exact-enumeration privacy measurements for federated learning runs")]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Commands,
}

#[derive(Subcommand)]
enum Commands {
    /// Enumerate the reachable model and write the exact terminal
    /// distribution of the current model parameter.
    Enumerate {
        /// Path to the experiment configuration (JSON)
        #[arg(long)]
        config: std::path::PathBuf,
    },
    /// Measure the realized privacy factor ε between the configured
    /// neighboring runs and check it against the budget.
    Epsilon {
        #[arg(long)]
        config: std::path::PathBuf,
    },
    /// Measure distinguishing advantage: TV, bound chain, and the seeded
    /// guess-the-run experiment.
    Advantage {
        #[arg(long)]
        config: std::path::PathBuf,

        /// Trials for the guess-the-run experiment
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
    },
    /// Per-client versus global ε decomposition check.
    Decompose {
        #[arg(long)]
        config: std::path::PathBuf,
    },
    /// Run the satellite-swarm case study end to end.
    Moniteo {
        #[arg(long)]
        config: Option<std::path::PathBuf>,

        /// Output directory for moniteo_report.json
        #[arg(long, default_value = "out")]
        output_dir: std::path::PathBuf,
    },
    /// Run the built-in oracle suite and print a pass/fail table.
    Validate {
        /// Seed for the randomized checks
        #[arg(long, default_value_t = 20_260_810)]
        seed: u64,

        /// Deliberately corrupt a check input to prove the detector fires
        /// (supported: perturb-pmf)
        #[arg(long)]
        inject_fault: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Commands::Enumerate { config } => commands::cmd_enumerate(&config),
        Commands::Epsilon { config } => commands::cmd_epsilon(&config),
        Commands::Advantage { config, trials } => commands::cmd_advantage(&config, trials),
        Commands::Decompose { config } => commands::cmd_decompose(&config),
        Commands::Moniteo { config, output_dir } => commands::cmd_moniteo(config.as_deref(), &output_dir),
        Commands::Validate { seed, inject_fault } => {
            commands::cmd_validate(seed, inject_fault.as_deref())
        }
    };
    ExitCode::from(code)
}
