//! `zoar`: run benchmarks, sweeps and the verification suite.
//!
//! Exit codes: 0 success, 1 internal error, 2 usage or config error,
//! 3 all repeats diverged, 4 verification failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Failure;

#[derive(Parser)]
#[command(name = "zoar", version, about = "Zeroth-order optimization benchmarks and checks")]
struct Cli {
    /// Cap on worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration and write traces, an aggregate and a summary
    Run {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Aggregate CSV to compute the speedup against
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// Run the verification checks: all, exact or statistical
    Verify {
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// JSON report path
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the Cartesian product of list-valued config keys
    Sweep {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Cell name used as the speedup reference (default: first cell)
        #[arg(long)]
        reference: Option<String>,
    },
    /// Render aggregate CSVs as an SVG line chart
    Plot {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        log_y: bool,
    },
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Runtime(e.to_string()))?;
    }
    match cli.command {
        Command::Run { config, out, reference } => commands::cmd_run(&config, &out, reference.as_deref()),
        Command::Verify { suite, seed, out } => commands::cmd_verify(&suite, seed, out.as_deref()),
        Command::Sweep { config, out, reference } => commands::cmd_sweep(&config, &out, reference.as_deref()),
        Command::Plot { inputs, out, log_y } => commands::cmd_plot(&inputs, &out, log_y),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.exit_code())
        }
    }
}
