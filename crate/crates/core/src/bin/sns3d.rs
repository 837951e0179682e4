use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, ValueEnum};

use sns3d::config::ExperimentConfig;
use sns3d::experiment::{run, Command, RunOptions};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Sub {
    /// Trajectory and basic statistics
    Simulate,
    /// Oracle suite on the linear system and the nonlinearity
    OuValidate,
    /// Moment tables and the Hölder recursion
    Moments,
    /// Stopping times, analyticity radius, budget and interpolation checks
    Gevrey,
    /// Stationarity residuals of the Kolmogorov operator
    Kolmogorov,
    /// Spectrum and dissipation-scale fit
    Dissipation,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Self {
        match s {
            Sub::Simulate => Command::Simulate,
            Sub::OuValidate => Command::OuValidate,
            Sub::Moments => Command::Moments,
            Sub::Gevrey => Command::Gevrey,
            Sub::Kolmogorov => Command::Kolmogorov,
            Sub::Dissipation => Command::Dissipation,
        }
    }
}

/// Stochastic 3D Navier-Stokes experiments on a spectral Galerkin truncation.
#[derive(Debug, Parser)]
#[command(version)]
struct Cli {
    #[arg(value_enum)]
    command: Sub,
    /// Flat `key = value` configuration; defaults apply without one
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `rng.seed`
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `output.dir`
    #[arg(long)]
    output: Option<PathBuf>,
    /// Continue from a checkpoint written by the same configuration
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Worker threads for ensemble members
    #[arg(long)]
    threads: Option<usize>,
    /// Stop after this many steps per member and write the checkpoint
    #[arg(long)]
    max_steps: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn execute(cli: Cli) -> sns3d::Result<bool> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| sns3d::Error::Invalid(e.to_string()))?;
    }
    let mut config = match &cli.config {
        Some(p) => ExperimentConfig::from_file(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    if let Some(o) = cli.output {
        config.output_dir = o;
    }
    let command = Command::from(cli.command);
    let opts = RunOptions {
        resume: cli.resume,
        max_steps: cli.max_steps,
    };
    let start = Instant::now();
    let report = run(command, &config, &opts)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    for c in &report.checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    for b in &report.blow_ups {
        println!(
            "BLOWUP member {} at t = {}; last state in {}",
            b.member,
            b.time,
            b.checkpoint.display()
        );
    }
    for f in &report.files {
        println!("wrote {}", f.display());
    }
    eprintln!("{command} finished in {:.2?}", start.elapsed());
    Ok(report.success())
}
