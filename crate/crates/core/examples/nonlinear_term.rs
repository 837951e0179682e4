//! The pseudo-spectral nonlinearity against the direct triad sum.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sns3d::dynamics::BilinearEvaluator;
use sns3d::oracle::bilinear_b_direct;
use sns3d::spectral::{random_field, sobolev_norm, Truncation};

fn main() -> sns3d::Result<()> {
    let trunc = Truncation::new(5)?;
    let mut eval = BilinearEvaluator::new(&trunc);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let u = random_field(&trunc, |k| 1.0 / k.norm_sq() as f64, &mut rng);

    let fast = eval.eval(&u)?;
    let direct = bilinear_b_direct(&u)?;
    let mut diff = fast.clone();
    diff.axpy(-1.0, &direct)?;

    println!("grid {}^3", eval.grid_size());
    println!("<B(u), u>           = {:.2e}", fast.inner(&u)?);
    println!("max |k . B(u)^(k)|  = {:.2e}", fast.max_divergence());
    println!("|fft - direct| / |B| = {:.2e}", sobolev_norm(&diff, 0.0) / sobolev_norm(&direct, 0.0));
    Ok(())
}
