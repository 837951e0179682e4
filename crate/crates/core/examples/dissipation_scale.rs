//! Exponential decay rate of the stationary shell spectrum.

use sns3d::dynamics::ForcingSpec;
use sns3d::integrator::{simulate, SimConfig, TrajectoryState};
use sns3d::measure::{dissipation_scale_fit, SpectrumAccumulator};
use sns3d::spectral::{GevreyParams, Truncation};

fn main() -> sns3d::Result<()> {
    let nu = 0.5;
    let trunc = Truncation::new(6)?;
    let spec = ForcingSpec::gevrey(&trunc, 1.0, GevreyParams::new(0.3, 1.0)?, 1.0)?;
    let mut cfg = SimConfig::new(nu, &trunc, 0.005, 50.0, 8);
    cfg.t_burn = 20.0;
    cfg.sample_stride = 20;

    let mut acc = SpectrumAccumulator::new(&trunc);
    let mut obs = |_: u64, s: &TrajectoryState| acc.push(&s.field);
    simulate(&cfg, &spec, &mut [&mut obs])?;

    let spectrum = acc.spectrum();
    for b in &spectrum.bins {
        println!("|k|^2 = {:>3}: {:.3e} over {} modes", b.shell, b.mean_amplitude, b.mode_count);
    }
    let fit = dissipation_scale_fit(&spectrum, 1.0)?;
    println!(
        "decay rate {:.4}, scale {:.3}, R^2 {:.4} over {} shells",
        fit.decay_rate, fit.scale, fit.r_squared, fit.shells_used
    );
    Ok(())
}
