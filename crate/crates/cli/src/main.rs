use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use chrono::Utc;
use clap::{Parser, Subcommand};

use loctime_verify::{self as acceptance, Outcome, Status};
use loctime::config::parse_config;
use loctime::output::{write_results, RunManifest};
use loctime::stats::{triangular_constant, triangular_square_constant};
use loctime::{run_sweep, SimConfig};

#[derive(Parser)]
#[command(name = "loctime", version, about = "Brownian local time Monte Carlo")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a replica sweep and write sweep.csv, replicas.csv and manifest.json.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a sweep and the acceptance checks on it; exit status 1 on any failure.
    Verify {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print the triangular kernel constants from quadrature.
    KernelCheck,
}

fn load(path: &PathBuf) -> Result<SimConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let config = parse_config(&text).with_context(|| format!("in {}", path.display()))?;
    for w in config.warnings() {
        eprintln!("warning: {w}");
    }
    Ok(config)
}

fn sweep(config: PathBuf, out: PathBuf) -> Result<()> {
    let config = load(&config)?;
    let started = Utc::now();
    let result = run_sweep(&config)?;
    let manifest = RunManifest::new(&result, started, Utc::now());
    write_results(&result, &manifest, &out)?;
    eprintln!(
        "{} replicas x {} h values written to {} ({} excluded)",
        config.n_replicas,
        config.h_grid.len(),
        out.display(),
        result.excluded
    );
    Ok(())
}

fn print_table(outcomes: &[Outcome]) {
    for o in outcomes {
        println!("{o}");
    }
}

fn verify(config: PathBuf) -> Result<bool> {
    let config = load(&config)?;
    let mut outcomes = vec![acceptance::kernel_constants()];
    let result = run_sweep(&config)?;
    outcomes.extend(acceptance::evaluate(&result));
    outcomes.push(acceptance::property_suite());
    print_table(&outcomes);
    Ok(outcomes.iter().all(|o| o.status != Status::Fail))
}

fn kernel_check() -> bool {
    println!("{:>8} {:>22} {:>22}", "h", "h^-3 ∫((h-|x|)+)^2", "h^-2 ∫(h-|x|)+");
    for h in [0.1, 1.0, 10.0] {
        println!(
            "{h:>8} {:>22.15} {:>22.15}",
            triangular_square_constant(h),
            triangular_constant(h)
        );
    }
    println!("stated: 4/3 = {:.15}, 3/2 = {:.15}", 4.0 / 3.0, 1.5);
    let o = acceptance::kernel_constants();
    println!("{o}");
    o.passed()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Sweep { config, out } => sweep(config, out).map(|_| true),
        Command::Verify { config } => verify(config),
        Command::KernelCheck => Ok(kernel_check()),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
