use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pks_experiments::runner::{check, run, sweep, RunError};
use pks_experiments::RunConfig;

#[derive(Parser)]
#[command(name = "pks", version, about = "Structure-preserving Keller-Segel solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one configuration; writes diagnostics.csv and snapshots.
    Run { config: PathBuf },
    /// Run every [sweep] resolution with dt = h/10; writes convergence.csv.
    Sweep { config: PathBuf },
    /// Validate a configuration without stepping.
    Check { config: PathBuf },
}

fn execute(cli: Cli) -> Result<(), RunError> {
    match cli.command {
        Command::Run { config } => {
            let cfg = RunConfig::from_path(&config)?;
            let summary = run(&cfg)?;
            let last = summary.trajectory.records.last().expect("initial row");
            println!(
                "t = {:.6e}  steps = {}  mass = {:.12e}  energy = {:.12e}  rho in [{:.6e}, {:.6e}]",
                last.time, last.step, last.mass, last.energy, last.rho_min, last.rho_max
            );
            if let Some((er, ep)) = summary.errors {
                println!("max error: rho {er:.6e}  phi {ep:.6e}");
            }
        }
        Command::Sweep { config } => {
            let cfg = RunConfig::from_path(&config)?;
            print!("{}", sweep(&cfg)?.to_csv());
        }
        Command::Check { config } => {
            let cfg = RunConfig::from_path(&config)?;
            check(&cfg)?;
            println!("{}: ok", config.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
