//! The Gevrey interpolation inequality on random fields with Gevrey decay.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sns3d::measure::{check_interpolation, interp_exponent, log_gevrey_sq};
use sns3d::spectral::{random_field, Truncation};

fn main() -> sns3d::Result<()> {
    let (alpha, beta, beta_prime) = (0.4, 1.0, 0.5);
    let trunc = Truncation::new(8)?;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for alpha_prime in [0.05, 0.1, 0.2] {
        let e = interp_exponent(alpha, alpha_prime, beta, beta_prime)?;
        let mut tightest = f64::INFINITY;
        let mut held = 0;
        for _ in 0..200 {
            let x = random_field(&trunc, |k| (-alpha * k.norm()).exp(), &mut rng);
            held += check_interpolation(&x, alpha, alpha_prime, beta, beta_prime)? as usize;
            let slack = log_gevrey_sq(&x, alpha, beta)? + 2.0 * e - log_gevrey_sq(&x, alpha_prime, beta_prime)?;
            tightest = tightest.min(slack);
        }
        println!("alpha' {alpha_prime}: exponent {e:.4}, held {held}/200, smallest log slack {tightest:.4}");
    }
    Ok(())
}
