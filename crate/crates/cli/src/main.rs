use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qmetro_cli::run::{run_file, RunOptions};

#[derive(Parser)]
#[command(name = "qmetro", version, about = "Multiparameter quantum estimation scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file and write its report.
    Run {
        config: PathBuf,
        /// Directory for report.json and any CSV/state artifacts.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Treat inestimable directions as errors.
        #[arg(long)]
        strict: bool,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        quiet: bool,
    },
    /// Print the scenario or report JSON schema.
    Schema {
        #[arg(value_parser = ["scenario", "report"])]
        which: String,
    },
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run {
            config,
            out,
            seed,
            strict,
            threads,
            quiet,
        } => {
            let opts = RunOptions {
                out,
                seed,
                strict,
                threads,
                quiet,
            };
            ExitCode::from(run_file(&config, &opts) as u8)
        }
        Command::Schema { which } => {
            match which.as_str() {
                "scenario" => print!("{}", qmetro_cli::config::SCENARIO_SCHEMA),
                _ => print!("{}", qmetro_cli::run::REPORT_SCHEMA),
            }
            ExitCode::SUCCESS
        }
    }
}
