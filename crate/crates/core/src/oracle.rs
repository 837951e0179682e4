//! Independent reference computations.
//!
//! Nothing here touches the FFT path: the nonlinearity is a direct triple
//! sum over the lattice, the linear Stokes process has a closed-form Gaussian
//! law, and roots are found by plain bisection.

use std::collections::HashMap;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::dynamics::ForcingSpec;
use crate::error::{domain, Result};
use crate::spectral::{CVec3, SpectralField, Truncation, Wavevector};

/// Largest number of stored representatives accepted by
/// [`bilinear_b_direct`]; the cost is quadratic.
pub const DIRECT_CONVOLUTION_LIMIT: usize = 1200;

/// The linear stochastic Stokes system `dX + νAX dt = φ dW`.
#[derive(Clone, Debug)]
pub struct OuSpec {
    nu: f64,
    forcing: ForcingSpec,
}

impl OuSpec {
    pub fn new(nu: f64, forcing: ForcingSpec) -> Result<Self> {
        if !(nu > 0.0) {
            return Err(domain("viscosity must be positive"));
        }
        if forcing.deterministic().is_some() {
            return Err(domain("the linear oracle requires g = 0"));
        }
        Ok(Self { nu, forcing })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn forcing(&self) -> &ForcingSpec {
        &self.forcing
    }

    pub fn truncation(&self) -> &Truncation {
        self.forcing.truncation()
    }
}

/// Lattice points of the ball `|k|² ≤ k_max²`, enumerated directly.
fn lattice_ball(k_max: u32) -> Vec<[i32; 3]> {
    let kk = k_max as i32;
    let mut out = Vec::new();
    for a in -kk..=kk {
        for b in -kk..=kk {
            for c in -kk..=kk {
                let r2 = a * a + b * b + c * c;
                if r2 > 0 && r2 <= kk * kk {
                    out.push([a, b, c]);
                }
            }
        }
    }
    out
}

/// `E‖X‖²_m = Σ_{k,pol} |k|^{2m} σ_k² / (2ν|k|²)` under the stationary law.
pub fn ou_exact_second_moment(spec: &OuSpec, m: f64) -> f64 {
    let mut total = 0.0;
    for k in lattice_ball(spec.truncation().k_max()) {
        let wk = Wavevector::new(k).expect("nonzero lattice point");
        let sigma = crate::dynamics::noise_amplitude(&spec.forcing, wk).expect("inside ball");
        let r2 = wk.norm_sq() as f64;
        // two polarizations
        total += 2.0 * r2.powf(m) * sigma * sigma / (2.0 * spec.nu * r2);
    }
    total
}

/// Exact draw from the stationary Gaussian law: each polarization of each
/// mode is complex Gaussian with `E|c|² = σ_k²/(2ν|k|²)`.
pub fn ou_sample_stationary<R: Rng + ?Sized>(spec: &OuSpec, rng: &mut R) -> SpectralField {
    let trunc = spec.truncation();
    let mut out = SpectralField::zeros(trunc);
    let sigma = spec.forcing.sigma();
    let basis = trunc.basis();
    let coeffs = out.coeffs_mut();
    for (i, k) in trunc.modes().iter().enumerate() {
        let var = sigma[i] * sigma[i] / (2.0 * spec.nu * k.norm_sq() as f64);
        let s = (0.5 * var).sqrt();
        let mut c = [Complex64::new(0.0, 0.0); 3];
        for e in &basis[i] {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let z = Complex64::new(re * s, im * s);
            for d in 0..3 {
                c[d] += z * e[d];
            }
        }
        coeffs[i] = c;
    }
    out
}

/// Exact truncated convolution
/// `B̂(k) = π_k Σ_h i (û(h)·(k−h)) û(k−h)` over all `h`, `k−h` in the ball.
pub fn bilinear_b_direct(u: &SpectralField) -> Result<SpectralField> {
    let trunc = u.truncation();
    if trunc.len() > DIRECT_CONVOLUTION_LIMIT {
        return Err(domain(format!(
            "direct convolution refused: {} representatives exceed the limit {}",
            trunc.len(),
            DIRECT_CONVOLUTION_LIMIT
        )));
    }
    let full: HashMap<[i32; 3], CVec3> = u
        .iter_full()
        .map(|(k, c)| (k.components(), c))
        .collect();
    let mut points: Vec<[i32; 3]> = full.keys().copied().collect();
    points.sort_unstable();
    let mut out = Vec::with_capacity(trunc.len());
    for k in trunc.modes() {
        let kc = k.components();
        let mut acc = [Complex64::new(0.0, 0.0); 3];
        for h in &points {
            let q = [kc[0] - h[0], kc[1] - h[1], kc[2] - h[2]];
            let Some(uq) = full.get(&q) else { continue };
            let uh = full[h];
            let adv = uh[0] * q[0] as f64 + uh[1] * q[1] as f64 + uh[2] * q[2] as f64;
            let f = Complex64::new(0.0, 1.0) * adv;
            for d in 0..3 {
                acc[d] += f * uq[d];
            }
        }
        // π_k: remove the component along k
        let kf = k.as_f64();
        let k2 = k.norm_sq() as f64;
        let along = (acc[0] * kf[0] + acc[1] * kf[1] + acc[2] * kf[2]) / k2;
        out.push([
            acc[0] - along * kf[0],
            acc[1] - along * kf[1],
            acc[2] - along * kf[2],
        ]);
    }
    SpectralField::from_coeffs(trunc, out)
}

/// `α_ν` of a field supported on a single sphere `|k| = R`, where
/// `ln ‖x‖²_{G(νs,β)} = ln ‖x‖₁² + 2νsR^β` reduces the crossing to a scalar
/// root. Clamped to `alpha_cap` like the estimator.
pub fn alpha_nu_single_shell(
    x: &SpectralField,
    nu: f64,
    beta: f64,
    b_bar_0: f64,
    alpha_cap: f64,
) -> Result<f64> {
    let mut radius_sq = None;
    let mut h1 = 0.0;
    for (k, c) in x.truncation().modes().iter().zip(x.coeffs()) {
        let a: f64 = c.iter().map(|z| z.norm_sqr()).sum();
        if a == 0.0 {
            continue;
        }
        let r2 = k.norm_sq();
        if *radius_sq.get_or_insert(r2) != r2 {
            return Err(domain("field is not supported on a single shell"));
        }
        h1 += 2.0 * r2 as f64 * a;
    }
    let Some(r2) = radius_sq else {
        return Ok(alpha_cap);
    };
    let rb = (r2 as f64).sqrt().powf(beta);
    let level = (4.0 * (b_bar_0 + 1.0) / nu).ln();
    let f = |s: f64| h1.ln() + 2.0 * nu * s * rb + 0.5 * s.ln() - level;
    if f(alpha_cap) <= 0.0 {
        return Ok(alpha_cap);
    }
    scalar_root(f, 1e-300, alpha_cap)
}

/// Root of `f` on `[lo, hi]` by bisection to `1e−12` absolute.
pub fn scalar_root<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let (fa, fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() || fa.is_nan() || fb.is_nan() {
        return Err(domain(format!("no sign change on [{lo}, {hi}]")));
    }
    let rising = fb > 0.0;
    while b - a > 1e-12 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if (fm > 0.0) == rising {
            b = mid;
        } else {
            a = mid;
        }
    }
    Ok(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{random_field, sobolev_norm_sq};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_shell_alpha_nu() {
        let t = Truncation::new(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_field(&t, |k| if k.norm_sq() == 5 { 3.0 } else { 0.0 }, &mut rng);
        let a = alpha_nu_single_shell(&x, 0.5, 1.0, 1.0, 10.0).unwrap();
        let e = sobolev_norm_sq(&x, 1.0);
        let lhs = e.ln() + 2.0 * 0.5 * a * 5f64.sqrt() + 0.5 * a.ln();
        assert!((lhs - (4.0 * 2.0 / 0.5f64).ln()).abs() < 1e-9);
        assert_eq!(alpha_nu_single_shell(&SpectralField::zeros(&t), 0.5, 1.0, 1.0, 0.3).unwrap(), 0.3);
        let y = random_field(&t, |_| 1.0, &mut rng);
        assert!(alpha_nu_single_shell(&y, 0.5, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn unit_shell_second_moment() {
        let t = Truncation::new(1).unwrap();
        let spec = OuSpec::new(0.5, ForcingSpec::power_law(&t, 2.5, 1.0).unwrap()).unwrap();
        // 12 polarized modes, each σ²/(2ν|k|²) = 1
        assert!((ou_exact_second_moment(&spec, 0.0) - 12.0).abs() < 1e-13);
        assert_eq!(ou_exact_second_moment(&spec, 0.0), ou_exact_second_moment(&spec, 1.0));
        let zero = OuSpec::new(0.5, ForcingSpec::power_law(&t, 2.5, 0.0).unwrap()).unwrap();
        assert_eq!(ou_exact_second_moment(&zero, 1.0), 0.0);
    }

    #[test]
    fn ou_spec_rejects_deterministic_forcing() {
        let t = Truncation::new(2).unwrap();
        let g = SpectralField::zeros(&t);
        let f = ForcingSpec::power_law(&t, 1.0, 1.0).unwrap().with_deterministic(g).unwrap();
        assert!(OuSpec::new(1.0, f).is_err());
    }

    #[test]
    fn stationary_samples_match_exact_moment() {
        let t = Truncation::new(3).unwrap();
        let spec = OuSpec::new(0.5, ForcingSpec::power_law(&t, 1.5, 1.0).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 10_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| sobolev_norm_sq(&ou_sample_stationary(&spec, &mut rng), 0.0))
            .collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        let exact = ou_exact_second_moment(&spec, 0.0);
        assert!((mean - exact).abs() < 3.0 * se, "{mean} vs {exact} ± {se}");
        let s = ou_sample_stationary(&spec, &mut rng);
        assert!(s.max_divergence() < 1e-15);
    }

    #[test]
    fn zero_covariance_gives_zero_field() {
        let t = Truncation::new(2).unwrap();
        let spec = OuSpec::new(1.0, ForcingSpec::power_law(&t, 1.0, 0.0).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(ou_sample_stationary(&spec, &mut rng), SpectralField::zeros(&t));
    }

    #[test]
    fn direct_b_single_mode_and_orthogonality() {
        let t = Truncation::new(4).unwrap();
        let mut u = SpectralField::zeros(&t);
        u.set(
            Wavevector::new([1, 1, 0]).unwrap(),
            [Complex64::new(1.0, 0.5), Complex64::new(-1.0, -0.5), Complex64::new(0.0, 2.0)],
        )
        .unwrap();
        let b = bilinear_b_direct(&u).unwrap();
        assert!(sobolev_norm_sq(&b, 0.0) < 1e-28);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = random_field(&t, |k| 1.0 / k.norm(), &mut rng);
        let b = bilinear_b_direct(&u).unwrap();
        let e = b.inner(&u).unwrap();
        assert!(e.abs() < 1e-12 * sobolev_norm_sq(&u, 0.0).sqrt() * sobolev_norm_sq(&u, 1.0));
    }

    #[test]
    fn direct_b_refuses_large_truncations() {
        let t = Truncation::new(9).unwrap();
        assert!(bilinear_b_direct(&SpectralField::zeros(&t)).is_err());
    }

    #[test]
    fn root_finder() {
        assert!((scalar_root(|s| s - 0.5, 0.0, 1.0).unwrap() - 0.5).abs() < 1e-12);
        assert!((scalar_root(|s| s.exp() - 2.0, 0.0, 1.0).unwrap() - 2f64.ln()).abs() < 1e-12);
        assert!((scalar_root(|s| 2.0 - s.exp(), 0.0, 1.0).unwrap() - 2f64.ln()).abs() < 1e-12);
        assert!(scalar_root(|s| s + 1.0, 0.0, 1.0).is_err());
    }
}
