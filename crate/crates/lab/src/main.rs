use std::path::PathBuf;
use std::process::ExitCode;

use cdf_lab::{registry, run, RunOptions};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "cdf-lab", version, about = "Run CDF experiments from JSON configs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the available experiments.
    List {
        #[arg(long)]
        json: bool,
    },
    /// Run one experiment.
    Run {
        config: PathBuf,
        /// Output directory; overrides `output` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the experiment's primary acceptance tolerance.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        jobs: Option<usize>,
    },
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::List { json } => {
            if json {
                println!("{}", registry::render_json());
            } else {
                print!("{}", registry::render_text());
            }
            ExitCode::SUCCESS
        }
        Command::Run { config, out, seed, tol, jobs } => {
            let report = run(&config, &RunOptions { out, seed, tol, jobs });
            for c in &report.checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            if let Some(dir) = &report.out_dir {
                println!("wrote {}", dir.display());
            }
            if let Some(m) = &report.message {
                eprintln!("cdf-lab: {m}");
            }
            ExitCode::from(report.status.code() as u8)
        }
    }
}
