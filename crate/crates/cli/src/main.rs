use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mcs_cli::{cmd_solve, cmd_sweep, cmd_verify, init_threads, Outcome};

/// Vortex solver for the Maxwell–Chern–Simons system on a flat torus.
///
/// Exit status: 0 success, 1 input error, 2 invariant failure,
/// 3 solver failure. MCS_THREADS sets the worker thread count.
#[derive(Parser)]
#[command(name = "mcsv", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve at a single coupling and write snapshots and summary.json.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides [output] dir).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve along an ascending list of couplings and write the convergence table.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute every invariant report from stored snapshots.
    Verify {
        #[arg(required = true)]
        snapshots: Vec<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { Outcome::InputError.code() } else { 0 });
        }
    };
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(Outcome::InputError.code());
    }
    let outcome = match cli.command {
        Command::Solve { config, out } => cmd_solve(&config, out.as_deref()),
        Command::Sweep { config, out } => cmd_sweep(&config, out.as_deref()),
        Command::Verify { snapshots } => cmd_verify(&snapshots),
    };
    ExitCode::from(outcome.code())
}
