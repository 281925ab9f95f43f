use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use jamsnake_sim::compare::compare_dirs;
use jamsnake_sim::report::{precision, write_outputs};
use jamsnake_sim::run::run_scenario;
use jamsnake_sim::scenario::{Scenario, SCHEMA};
use jamsnake_sim::suite::verify;
use jamsnake_sim::SimError;

/// Quasi-static simulator of a fiber-jamming follow-the-leader robot.
#[derive(Parser)]
#[command(name = "jamsnake", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario file and write its reports.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare the outputs of two or more runs.
    Compare {
        #[arg(long)]
        out: PathBuf,
        #[arg(required = true, num_args = 1..)]
        dirs: Vec<PathBuf>,
    },
    /// Run an acceptance suite and report pass/fail per criterion.
    Verify {
        #[arg(long, default_value = "paper")]
        suite: String,
    },
    /// Print the scenario file schema with every default.
    Schema,
}

fn execute(cli: Cli) -> Result<(), SimError> {
    match cli.command {
        Command::Run { scenario, out } => {
            let s = Scenario::load(&scenario)?;
            let result = run_scenario(&s)?;
            let written = write_outputs(&result, &out)?;
            for st in &result.strategies {
                println!("{} {} {}: λ = {:.4}", s.name, s.controller, st.label, st.mean_lambda());
            }
            println!("wrote {} files to {}", written.len(), out.display());
            Ok(())
        }
        Command::Compare { out, dirs } => {
            let c = compare_dirs(&dirs)?;
            c.write(&out, precision()?)?;
            print!("{}", c.to_text());
            Ok(())
        }
        Command::Verify { suite } => {
            let results = verify(&suite)?;
            for r in &results {
                println!("{r}");
            }
            let failed: Vec<String> = results.iter().filter(|r| !r.passed).map(|r| r.id.to_string()).collect();
            if failed.is_empty() {
                Ok(())
            } else {
                Err(SimError::Acceptance(format!("criteria {} failed", failed.join(", "))))
            }
        }
        Command::Schema => {
            print!("{SCHEMA}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
