//! Fourier representation of real, mean-zero, divergence-free vector fields on
//! the periodic box `(0, 2π)³`.
//!
//! A field is `u(ξ) = Σ_k û(k) e^{i k·ξ}` with `û(−k) = conj(û(k))`. Only one
//! representative of every `±k` pair is stored; every norm below sums over the
//! full symmetric set. With this normalization `Σ_k |û(k)|²` is the box average
//! of `|u|²`, so `2cos(ξ₁)e₂` has norm `√2` in every Sobolev space.

mod field;
mod norms;
mod transform;

pub use field::{SpectralField, Truncation, Wavevector};
pub use norms::{
    apply_a_power, gevrey_inner, gevrey_norm, gevrey_norm_capped, sobolev_norm, sobolev_norm_sq,
    GevreyEval, GevreyParams, DEFAULT_EXPONENT_CAP,
};
pub use transform::{dealiased_grid_size, from_physical, to_physical, Fft3, PhysicalField};
pub(crate) use transform::GridMap;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{domain, Result};

/// A complex 3-vector: the Fourier coefficient of a velocity field at one mode.
pub type CVec3 = [Complex64; 3];

pub(crate) const CZERO: CVec3 = [Complex64::new(0.0, 0.0); 3];

#[inline]
pub(crate) fn dot_kc(k: [f64; 3], c: &CVec3) -> Complex64 {
    c[0] * k[0] + c[1] * k[1] + c[2] * k[2]
}

#[inline]
pub(crate) fn cnorm_sq(c: &CVec3) -> f64 {
    c[0].norm_sqr() + c[1].norm_sqr() + c[2].norm_sqr()
}

/// `Re(a · conj(b))`
#[inline]
pub(crate) fn re_dot(a: &CVec3, b: &CVec3) -> f64 {
    (a[0] * b[0].conj() + a[1] * b[1].conj() + a[2] * b[2].conj()).re
}

/// Projects `c` onto the plane orthogonal to `k`: `c − (k·c) k / |k|²`.
pub fn leray_project(c: CVec3, k: [i32; 3]) -> Result<CVec3> {
    if k == [0, 0, 0] {
        return Err(domain("Leray projection undefined at k = 0"));
    }
    let kf = [k[0] as f64, k[1] as f64, k[2] as f64];
    Ok(leray_project_f(c, kf))
}

#[inline]
pub(crate) fn leray_project_f(c: CVec3, k: [f64; 3]) -> CVec3 {
    let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
    let s = dot_kc(k, &c) / k2;
    [c[0] - s * k[0], c[1] - s * k[1], c[2] - s * k[2]]
}

/// Two orthonormal real vectors spanning the plane orthogonal to `k`.
///
/// The first is Gram-Schmidt of the coordinate axis along which `|k|` has its
/// smallest component (lowest axis index on ties); the second is `k̂ × e₁`.
pub fn polarization_basis(k: [i32; 3]) -> [[f64; 3]; 2] {
    let kf = [k[0] as f64, k[1] as f64, k[2] as f64];
    let norm = (kf[0] * kf[0] + kf[1] * kf[1] + kf[2] * kf[2]).sqrt();
    let khat = [kf[0] / norm, kf[1] / norm, kf[2] / norm];
    let mut axis = 0;
    for a in 1..3 {
        if k[a].abs() < k[axis].abs() {
            axis = a;
        }
    }
    let mut e1 = [0.0; 3];
    e1[axis] = 1.0;
    let proj = khat[axis];
    for i in 0..3 {
        e1[i] -= proj * khat[i];
    }
    let n1 = (e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]).sqrt();
    for v in e1.iter_mut() {
        *v /= n1;
    }
    let e2 = [
        khat[1] * e1[2] - khat[2] * e1[1],
        khat[2] * e1[0] - khat[0] * e1[2],
        khat[0] * e1[1] - khat[1] * e1[0],
    ];
    [e1, e2]
}

/// Draws a random divergence-free field. `amplitude(k)` is the RMS magnitude
/// of `û(k)`: each of the two polarizations carries a complex Gaussian with
/// `E|c|² = amplitude²/2`.
pub fn random_field<R, F>(trunc: &Truncation, amplitude: F, rng: &mut R) -> SpectralField
where
    R: Rng + ?Sized,
    F: Fn(Wavevector) -> f64,
{
    let mut out = SpectralField::zeros(trunc);
    let basis = trunc.basis();
    for (i, &k) in trunc.modes().iter().enumerate() {
        let a = amplitude(k);
        // E|c|² = a²/2 per polarization, split evenly over re and im
        let pol_std = a * 0.5;
        let mut c = CZERO;
        for e in &basis[i] {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let z = Complex64::new(re, im) * pol_std;
            for d in 0..3 {
                c[d] += z * e[d];
            }
        }
        out.coeffs_mut()[i] = c;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn leray_annihilates_gradient_modes() {
        let k = [2, -1, 3];
        let v = [c(2.0), c(-1.0), c(3.0)];
        let p = leray_project(v, k).unwrap();
        assert!(cnorm_sq(&p) < 1e-28);
    }

    #[test]
    fn leray_keeps_solenoidal_part() {
        let k = [1, 1, 0];
        let v = [c(1.0), c(-1.0), Complex64::new(0.0, 2.0)];
        assert_eq!(leray_project(v, k).unwrap(), v);
    }

    #[test]
    fn leray_direct_formula() {
        let p = leray_project([c(1.0), c(0.0), c(0.0)], [1, 1, 0]).unwrap();
        assert!((p[0] - c(0.5)).norm() < 1e-15);
        assert!((p[1] - c(-0.5)).norm() < 1e-15);
        assert!(p[2].norm() < 1e-15);
    }

    #[test]
    fn leray_rejects_zero_mode() {
        assert!(leray_project(CZERO, [0, 0, 0]).is_err());
    }

    #[test]
    fn leray_idempotent_and_self_adjoint() {
        let k = [3, -2, 5];
        let a = [c(0.3), Complex64::new(-1.2, 0.4), c(2.0)];
        let b = [Complex64::new(0.1, 0.7), c(-0.5), Complex64::new(1.5, -1.0)];
        let pa = leray_project(a, k).unwrap();
        let ppa = leray_project(pa, k).unwrap();
        for d in 0..3 {
            assert!((pa[d] - ppa[d]).norm() < 1e-14);
        }
        let pb = leray_project(b, k).unwrap();
        let lhs = pa[0] * b[0].conj() + pa[1] * b[1].conj() + pa[2] * b[2].conj();
        let rhs = a[0] * pb[0].conj() + a[1] * pb[1].conj() + a[2] * pb[2].conj();
        assert!((lhs - rhs).norm() < 1e-14);
    }

    #[test]
    fn polarization_basis_is_orthonormal_and_transverse() {
        for k in [[1, 0, 0], [0, 0, 1], [1, 1, 1], [3, -2, 5], [0, 4, -4], [-7, 1, 2]] {
            let [e1, e2] = polarization_basis(k);
            let kf = [k[0] as f64, k[1] as f64, k[2] as f64];
            let dot = |a: [f64; 3], b: [f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
            assert!((dot(e1, e1) - 1.0).abs() < 1e-15);
            assert!((dot(e2, e2) - 1.0).abs() < 1e-15);
            assert!(dot(e1, e2).abs() < 1e-15);
            assert!(dot(e1, kf).abs() < 1e-14);
            assert!(dot(e2, kf).abs() < 1e-14);
        }
    }
}
