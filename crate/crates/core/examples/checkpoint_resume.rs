//! Stop a run part way, save it, resume it, and compare with an uninterrupted
//! run.

use sns3d::dynamics::ForcingSpec;
use sns3d::integrator::{resume_checkpoint, save_checkpoint, simulate, simulate_from, SimConfig, TrajectoryState};
use sns3d::spectral::{GevreyParams, Truncation};

fn main() -> sns3d::Result<()> {
    let trunc = Truncation::new(4)?;
    let spec = ForcingSpec::gevrey(&trunc, 1.0, GevreyParams::new(0.3, 1.0)?, 1.0)?;
    let mut cfg = SimConfig::new(0.5, &trunc, 0.01, 5.0, 42);
    cfg.t_burn = 1.0;

    let whole = simulate(&cfg, &spec, &mut [])?;

    let start = TrajectoryState::zero(&trunc, cfg.seed, 0);
    let first = simulate_from(start, &cfg, &spec, &mut [], Some(250))?;
    let dir = std::env::temp_dir().join("sns3d-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("mid.ckpt");
    save_checkpoint(&path, &first.final_state, &cfg, &spec)?;
    println!("stopped at t = {:.2}, saved {}", first.final_state.time, path.display());

    let resumed = resume_checkpoint(&path, &cfg, &spec)?;
    let rest = simulate_from(resumed, &cfg, &spec, &mut [], None)?;
    println!("resumed to t = {:.2}; identical to the uninterrupted run: {}", rest.final_state.time, rest.final_state == whole.final_state);
    Ok(())
}
