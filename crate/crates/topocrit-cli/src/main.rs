use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use topocrit_cli::{exit, run_experiment, CliError, Config, Experiment};

#[derive(Parser)]
#[command(name = "topocrit", version, about = "Criticality-enhanced metrology experiments on topological lattice models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write `<experiment>.csv` and `<experiment>.json`.
    Run {
        config: PathBuf,
        /// Worker threads; falls back to the config, then TOPOCRIT_WORKERS, then the CPU count.
        #[arg(long)]
        workers: Option<usize>,
        /// Output directory; falls back to the config's "output", then the current directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse and validate a config without running it.
    Validate { config: PathBuf },
    /// List the available experiment kinds.
    ListExperiments,
}

fn load(path: &PathBuf) -> Result<Config, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        context: format!("reading {}", path.display()),
        source,
    })?;
    Config::parse(&text)
}

fn env_workers() -> Result<Option<usize>, CliError> {
    match std::env::var("TOPOCRIT_WORKERS") {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Config(format!("TOPOCRIT_WORKERS = {v:?} is not a positive integer"))),
        },
    }
}

fn run(command: Command) -> Result<i32, CliError> {
    match command {
        Command::ListExperiments => {
            for (name, about) in Experiment::NAMES {
                println!("{name:<15} {about}");
            }
            Ok(exit::OK)
        }
        Command::Validate { config } => {
            let c = load(&config)?;
            println!("{}: valid {} config", config.display(), c.experiment.name());
            Ok(exit::OK)
        }
        Command::Run { config, workers, out } => {
            let c = load(&config)?;
            if workers == Some(0) {
                return Err(CliError::Config("--workers must be at least 1".into()));
            }
            let workers = match workers.or(c.workers) {
                Some(n) => n,
                None => env_workers()?.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())),
            };
            let out = out.or_else(|| c.output.as_ref().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("."));
            let outcome = run_experiment(&c, workers, &out)?;
            for f in &outcome.artifacts.fits {
                println!(
                    "{}: exponent {:.4} (reference {} ± {}) {}",
                    f.name,
                    f.exponent,
                    f.reference,
                    f.tolerance,
                    if f.pass { "PASS" } else { "FAIL" }
                );
            }
            println!("wrote {} and {}", outcome.csv_path.display(), outcome.json_path.display());
            Ok(if outcome.all_pass() { exit::OK } else { exit::FIT_FAILED })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit::ERROR as u8)
        }
    }
}
