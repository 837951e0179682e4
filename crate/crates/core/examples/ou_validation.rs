//! Linear system against its Gaussian stationary law.

use sns3d::dynamics::ForcingSpec;
use sns3d::integrator::{simulate, SimConfig, TrajectoryState};
use sns3d::measure::MomentAccumulator;
use sns3d::oracle::{ou_exact_second_moment, OuSpec};
use sns3d::spectral::{sobolev_norm_sq, Truncation};

fn main() -> sns3d::Result<()> {
    let nu = 0.5;
    let trunc = Truncation::new(4)?;
    let spec = ForcingSpec::power_law(&trunc, 2.5, 1.0)?;
    let mut cfg = SimConfig::new(nu, &trunc, 0.01, 500.0, 1);
    cfg.nonlinear = false;
    cfg.t_burn = 20.0;
    cfg.sample_stride = 10;

    let mut accs: Vec<_> = (0..3).map(|m| MomentAccumulator::new(format!("|X|_{m}^2"))).collect();
    let mut obs = |_: u64, s: &TrajectoryState| -> sns3d::Result<()> {
        for (m, a) in accs.iter_mut().enumerate() {
            a.push(sobolev_norm_sq(&s.field, m as f64));
        }
        Ok(())
    };
    simulate(&cfg, &spec, &mut [&mut obs])?;

    let ou = OuSpec::new(nu, spec)?;
    for (m, a) in accs.iter().enumerate() {
        let exact = ou_exact_second_moment(&ou, m as f64);
        println!(
            "{}: {:.5} +- {:.5}, exact {exact:.5} ({:+.2} SE)",
            a.id(),
            a.mean(),
            a.stderr(),
            (a.mean() - exact) / a.stderr()
        );
    }
    Ok(())
}
