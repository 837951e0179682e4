//! Averages of the moment statistics and the Hölder recursion between them.

use sns3d::dynamics::ForcingSpec;
use sns3d::integrator::{simulate, SimConfig, TrajectoryState};
use sns3d::measure::{holder_recursion_bound, m_p_statistic, r_p_statistic, regularity_statistic, MomentAccumulator};
use sns3d::spectral::{GevreyParams, Truncation};

fn main() -> sns3d::Result<()> {
    let nu = 0.5;
    let trunc = Truncation::new(4)?;
    let spec = ForcingSpec::gevrey(&trunc, 1.0, GevreyParams::new(0.3, 1.0)?, 1.0)?;
    let mut cfg = SimConfig::new(nu, &trunc, 0.01, 200.0, 9);
    cfg.sample_stride = 10;

    let ps = [1u32, 2, 3];
    let mut acc: Vec<[MomentAccumulator; 3]> = ps
        .iter()
        .map(|p| [format!("T{p}"), format!("M{p}"), format!("R{p}")].map(MomentAccumulator::new))
        .collect();
    let mut obs = |_: u64, s: &TrajectoryState| -> sns3d::Result<()> {
        for (&p, [t, m, r]) in ps.iter().zip(acc.iter_mut()) {
            t.push(regularity_statistic(&s.field, p));
            m.push(m_p_statistic(&s.field, p, nu));
            r.push(r_p_statistic(&s.field, p, nu));
        }
        Ok(())
    };
    simulate(&cfg, &spec, &mut [&mut obs])?;

    for (i, &p) in ps.iter().enumerate() {
        let [t, m, r] = &acc[i];
        print!("p={p}: <T> {:.4}, <M> {:.4}, <R> {:.4}", t.mean(), m.mean(), r.mean());
        if let Some([_, next, _]) = acc.get(i + 1) {
            print!(", <M_(p+1)> {:.4} <= {:.4}", next.mean(), holder_recursion_bound(r.mean(), m.mean(), p));
        }
        println!();
    }
    Ok(())
}
