use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tracing_subscriber::EnvFilter;

use collabcal::config::{BackendMode, RunConfig};
use collabcal::dataset::{ingest, Split};
use collabcal::pipeline::{run_pipeline, run_selection};

#[derive(Parser)]
#[command(name = "collabcal", version, about = "Multi-agent confidence calibration for generative QA")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run both stages over a dataset and write a run directory.
    Run {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        parallelism: Option<usize>,
        /// Overrides the config's backend (`http` or `simulated`).
        #[arg(long)]
        backend: Option<BackendMode>,
    },
    /// Recompute metrics from the transcripts in a run directory.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        bins: Option<usize>,
    },
    /// Run agent selection only and print the result as JSON.
    SelectAgents {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        config: PathBuf,
    },
}

/// A closed stdout (e.g. piped into `head`) is not an error.
fn print_json<T: serde::Serialize>(value: &T) -> Result<(), Box<dyn std::error::Error>> {
    let text = serde_json::to_string_pretty(value)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

fn run(cli: Cli) -> Result<(), Box<dyn std::error::Error>> {
    match cli.command {
        Command::Run { dataset, config, out, seed, parallelism, backend } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(p) = parallelism {
                cfg.parallelism = p;
            }
            if let Some(b) = backend {
                cfg.backend = b;
            }
            let records = ingest(&dataset)?;
            let output = run_pipeline(&cfg, &records)?;
            output.write(&out)?;
            print_json(&output.report)?;
        }
        Command::Report { input, bins } => {
            let report = collabcal::report::report(&input, bins)?;
            print_json(&report)?;
        }
        Command::SelectAgents { dataset, config } => {
            let mut cfg = RunConfig::load(&config)?;
            cfg.selection = true;
            let records = ingest(&dataset)?;
            if !records.iter().any(|r| r.split == Split::Validation) {
                return Err("dataset has no validation records".into());
            }
            let rt = cfg.build_runtime(&records)?;
            let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.parallelism).build()?;
            let selection = pool.install(|| run_selection(&rt, &cfg, &records))?;
            print_json(&selection)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
