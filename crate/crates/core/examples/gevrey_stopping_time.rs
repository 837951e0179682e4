//! Stopping times of the Gevrey-norm growth and the analyticity radius of
//! window-initial states.

use sns3d::dynamics::{forcing_constants, ForcingSpec};
use sns3d::integrator::{simulate, SimConfig};
use sns3d::measure::TauObserver;
use sns3d::spectral::{GevreyParams, Truncation};

fn main() -> sns3d::Result<()> {
    let nu = 0.5;
    let trunc = Truncation::new(6)?;
    let spec = ForcingSpec::gevrey(&trunc, 1.0, GevreyParams::new(0.3, 1.0)?, 1.0)?;
    let b0 = forcing_constants(&spec, 0, nu)?.b_bar_p;
    let mut cfg = SimConfig::new(nu, &trunc, 0.005, 12.0, 4);
    cfg.t_burn = 20.0;

    let mut tau = TauObserver::new(nu, 1.0, 0.3)?.with_alpha_nu(b0, 0.3);
    simulate(&cfg, &spec, &mut [&mut tau])?;
    let rec = tau.finish();

    let hit = rec.tau_samples.iter().filter(|s| s.tau.is_some()).count();
    println!("{} windows of length {}, {hit} stopped early", rec.tau_samples.len(), rec.horizon);
    println!("threshold identity holds: {}", rec.threshold_identity_holds());
    println!("mean sup before tau {:.3}, bound 4(B0+1)/nu = {:.3}", rec.mean_sup(), 4.0 * (b0 + 1.0) / nu);
    let fit = rec.fit_sqrt_cdf();
    if fit.identically_zero {
        println!("P(tau < t) = 0 over the window");
    } else {
        println!("P(tau < t) ~ {:.3} sqrt(t), R^2 {:.3}", fit.a, fit.r_squared);
    }
    let mean_alpha = rec.alpha_nu_samples.iter().sum::<f64>() / rec.alpha_nu_samples.len() as f64;
    println!("mean alpha_nu {mean_alpha:.4}");
    Ok(())
}
