use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use aft::probe::FailureAssumption;
use aft::sim::{self, ProbeParams, Scenario};

#[derive(Parser)]
#[command(name = "aft", version, about = "Assumption-failure tolerance toolkit and simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its outputs.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-run a scenario and compare with previously written outputs.
    ReplayCheck {
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Select memory access methods for an inventory.
    Probe {
        #[arg(long)]
        inventory: PathBuf,
        #[arg(long)]
        kb: PathBuf,
        #[arg(long)]
        methods: PathBuf,
        #[arg(long, default_value = "f4")]
        default: FailureAssumption,
        /// Also write report.csv and clashes.csv here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

const EXIT_MISMATCH: u8 = 3;

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("aft: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run { scenario, out } => {
            let s = Scenario::load(&scenario)?;
            let outputs = sim::run(&s).with_context(|| format!("running {}", scenario.display()))?;
            outputs.write_to(&out)?;
            for name in outputs.files.keys() {
                println!("{}", out.join(name).display());
            }
            Ok(ExitCode::from(outputs.exit as u8))
        }
        Command::ReplayCheck { scenario, out } => {
            let s = Scenario::load(&scenario)?;
            let report = sim::replay_check(&s, &out)?;
            if report.identical {
                println!("replay-check: identical");
                Ok(ExitCode::SUCCESS)
            } else {
                println!("replay-check: differs in {}", report.differing.join(", "));
                Ok(ExitCode::from(EXIT_MISMATCH))
            }
        }
        Command::Probe {
            inventory,
            kb,
            methods,
            default,
            out,
        } => {
            let outputs = sim::run_probe(&ProbeParams {
                inventory,
                kb,
                methods,
                default,
            })?;
            print!("{}", outputs.text(sim::REPORT).unwrap_or_default());
            if let Some(dir) = out {
                outputs.write_to(&dir)?;
            }
            Ok(ExitCode::from(outputs.exit as u8))
        }
    }
}
