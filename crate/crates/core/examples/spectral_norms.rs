//! Sobolev and Gevrey norms of a random solenoidal field, and the round trip
//! through the dealiased physical grid.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sns3d::spectral::{
    dealiased_grid_size, from_physical, gevrey_norm, random_field, sobolev_norm, to_physical, GevreyParams,
    Truncation,
};

fn main() -> sns3d::Result<()> {
    let trunc = Truncation::new(6)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = random_field(&trunc, |k| (-0.5 * k.norm()).exp(), &mut rng);
    println!("{} stored modes, divergence {:.1e}", trunc.len(), x.max_divergence());
    for m in [0.0, 1.0, 2.0] {
        println!("|x|_{m} = {:.6}", sobolev_norm(&x, m));
    }
    for alpha in [0.05, 0.1, 0.3] {
        let g = GevreyParams::new(alpha, 1.0)?;
        println!("|x|_G({alpha}, 1) = {:.6}", gevrey_norm(&x, &g));
    }

    let n = dealiased_grid_size(trunc.k_max());
    let phys = to_physical(&x, n)?;
    let back = from_physical(&phys, &trunc)?;
    let mut diff = back.clone();
    diff.axpy(-1.0, &x)?;
    println!("grid {n}^3, mean square {:.6}, round-trip error {:.1e}", phys.mean_square(), sobolev_norm(&diff, 0.0));
    Ok(())
}
