//! Mean enstrophy of the stationary nonlinear system against the injected
//! noise trace.

use sns3d::dynamics::{forcing_constants, ForcingSpec};
use sns3d::integrator::{simulate, SimConfig, TrajectoryState};
use sns3d::measure::{energy_balance_residual, MomentAccumulator};
use sns3d::spectral::{sobolev_norm_sq, GevreyParams, Truncation};

fn main() -> sns3d::Result<()> {
    let nu = 0.5;
    let trunc = Truncation::new(4)?;
    let spec = ForcingSpec::gevrey(&trunc, 1.0, GevreyParams::new(0.3, 1.0)?, 1.0)?;
    let mut cfg = SimConfig::new(nu, &trunc, 0.01, 200.0, 5);
    cfg.sample_stride = 10;

    let mut acc = MomentAccumulator::new("enstrophy");
    let mut obs = |_: u64, s: &TrajectoryState| -> sns3d::Result<()> {
        acc.push(sobolev_norm_sq(&s.field, 1.0));
        Ok(())
    };
    let run = simulate(&cfg, &spec, &mut [&mut obs])?;

    let b = energy_balance_residual(&acc, &forcing_constants(&spec, 0, nu)?, nu);
    println!("{} samples in {:.2?}", run.samples, run.wall_time);
    println!("2 nu <|X|_1^2> = {:.4}, noise trace = {:.4}", 2.0 * nu * b.mean, b.noise_trace);
    println!("relative residual {:.2}%, bound nu<|X|_1^2> <= {:.3}: {}", 100.0 * b.relative_residual, b.b_bar_0, b.bound_holds);
    Ok(())
}
