use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hylevy::experiment::{self, load_scenario, run_scenario, validate_scenario, RunOptions};

/// Scenario runner for Lévy-driven hybrid systems.
#[derive(Parser)]
#[command(name = "hylevy", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write trajectory_sample.csv, moments.csv and report.json.
    Run {
        config: PathBuf,
        /// Output directory (default: current directory).
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the replication count.
        #[arg(long)]
        paths: Option<usize>,
        /// Print nothing on success.
        #[arg(long)]
        quiet: bool,
    },
    /// Check a config and its preconditions without simulating.
    Validate { config: PathBuf },
    /// List the supported modes.
    ListModes,
}

/// Worker threads; overrides rayon's default.
const WORKERS_ENV: &str = "HYLEVY_WORKERS";

fn configure_workers() -> Result<(), String> {
    let Ok(raw) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().map_err(|_| format!("{WORKERS_ENV} must be a positive integer, got {raw:?}"))?;
    if n == 0 {
        return Err(format!("{WORKERS_ENV} must be positive"));
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_workers() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let code = match cli.command {
        Command::ListModes => {
            for (name, desc) in experiment::list_modes() {
                println!("{name:<18} {desc}");
            }
            0
        }
        Command::Validate { config } => match load_scenario(&config, &RunOptions::default())
            .and_then(|(s, _)| validate_scenario(&s).map(|_| s))
        {
            Ok(s) => {
                println!("ok: mode {} with {} paths over [0, {}]", s.mode.name(), s.paths, s.horizon);
                0
            }
            Err(e) => {
                eprintln!("error: {e}");
                e.exit_code()
            }
        },
        Command::Run { config, out, seed, paths, quiet } => {
            let opts = RunOptions { seed, paths };
            let result = load_scenario(&config, &opts).and_then(|(s, digest)| {
                let outcome = run_scenario(&s, &digest)?;
                outcome.write(&out)?;
                Ok(outcome)
            });
            match result {
                Ok(outcome) => {
                    let report = &outcome.report;
                    if !quiet || !report.passed {
                        for a in &report.assertions {
                            println!("{} {}: {}", if a.passed { "PASS" } else { "FAIL" }, a.name, a.detail);
                        }
                        for n in &report.notes {
                            println!("note: {n}");
                        }
                    }
                    outcome.exit_code()
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    e.exit_code()
                }
            }
        }
    };
    ExitCode::from(code as u8)
}
