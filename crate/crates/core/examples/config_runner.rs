//! Runs a workflow from a configuration file, like the command-line tool.
//!
//! `cargo run --example config_runner -- moments path/to/run.cfg`

use std::path::Path;

use sns3d::config::ExperimentConfig;
use sns3d::experiment::{run, Command, RunOptions};

fn main() -> sns3d::Result<()> {
    let mut args = std::env::args().skip(1);
    let command: Command = args.next().as_deref().unwrap_or("simulate").parse()?;
    let mut config = match args.next() {
        Some(p) => ExperimentConfig::from_file(Path::new(&p))?,
        None => ExperimentConfig::parse("t_sample = 20\nt_burn = 5\n", Path::new("<inline>"))?,
    };
    config.output_dir = std::env::temp_dir().join("sns3d-config-runner");

    let report = run(command, &config, &RunOptions::default())?;
    for c in &report.checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    for f in &report.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}
