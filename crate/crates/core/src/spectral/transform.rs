//! Collocation transforms between [`SpectralField`] and samples on a uniform
//! `n³` grid of the periodic box.
//!
//! Real fields are transformed two at a time by packing them into the real
//! and imaginary parts of one complex array. The 3-D transforms are pruned:
//! only grid lines that can carry retained wavenumbers are transformed.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{leray_project_f, SpectralField, Truncation, CZERO};
use crate::error::{domain, Result};

/// Smallest grid size `n ≥ 3·k_max + 1` with only the prime factors 2, 3, 5.
/// On such a grid quadratic products of truncated fields are alias-free on
/// the retained modes.
pub fn dealiased_grid_size(k_max: u32) -> usize {
    let mut n = 3 * k_max as usize + 1;
    loop {
        let mut m = n;
        for p in [2, 3, 5] {
            while m % p == 0 {
                m /= p;
            }
        }
        if m == 1 {
            return n;
        }
        n += 1;
    }
}

/// Planned forward and inverse transforms on an `n³` grid, stored in
/// row-major `(x, y, z)` order.
#[derive(Clone)]
pub struct Fft3 {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Fft3 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    fn active(&self, k_active: usize) -> Vec<bool> {
        let n = self.n;
        (0..n).map(|i| i <= k_active || i + k_active >= n).collect()
    }

    /// Unnormalized inverse transform `Σ_k ẑ(k) e^{+ik·ξ}` of data whose
    /// nonzero entries all have `|k_c| ≤ k_active` in every axis.
    pub fn inverse(&self, data: &mut [Complex64], k_active: usize) {
        let act = self.active(k_active);
        let mut line = vec![Complex64::new(0.0, 0.0); self.n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.inv.get_inplace_scratch_len()];
        self.pass(data, 2, &*self.inv, |a, b| act[a] && act[b], &mut line, &mut scratch);
        self.pass(data, 1, &*self.inv, |a, _| act[a], &mut line, &mut scratch);
        self.pass(data, 0, &*self.inv, |_, _| true, &mut line, &mut scratch);
    }

    /// Unnormalized forward transform `Σ_ξ z(ξ) e^{−ik·ξ}`; only outputs with
    /// `|k_c| ≤ k_active` in every axis are computed.
    pub fn forward(&self, data: &mut [Complex64], k_active: usize) {
        let act = self.active(k_active);
        let mut line = vec![Complex64::new(0.0, 0.0); self.n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.fwd.get_inplace_scratch_len()];
        self.pass(data, 2, &*self.fwd, |_, _| true, &mut line, &mut scratch);
        self.pass(data, 1, &*self.fwd, |_, b| act[b], &mut line, &mut scratch);
        self.pass(data, 0, &*self.fwd, |a, b| act[a] && act[b], &mut line, &mut scratch);
    }

    /// Transforms every line along `axis` whose remaining indices `(a, b)`
    /// (in increasing axis order) pass `keep`.
    fn pass(
        &self,
        data: &mut [Complex64],
        axis: usize,
        plan: &dyn Fft<f64>,
        keep: impl Fn(usize, usize) -> bool,
        line: &mut [Complex64],
        scratch: &mut [Complex64],
    ) {
        let n = self.n;
        let (stride, base): (usize, fn(usize, usize, usize) -> usize) = match axis {
            0 => (n * n, |a, b, n| a * n + b),
            1 => (n, |a, b, n| a * n * n + b),
            _ => (1, |a, b, n| (a * n + b) * n),
        };
        for a in 0..n {
            for b in 0..n {
                if !keep(a, b) {
                    continue;
                }
                let start = base(a, b, n);
                if stride == 1 {
                    plan.process_with_scratch(&mut data[start..start + n], scratch);
                } else {
                    for (j, v) in line.iter_mut().enumerate() {
                        *v = data[start + j * stride];
                    }
                    plan.process_with_scratch(line, scratch);
                    for (j, v) in line.iter().enumerate() {
                        data[start + j * stride] = *v;
                    }
                }
            }
        }
    }
}

/// Grid positions of every representative `k` and of `−k`.
#[derive(Clone)]
pub(crate) struct GridMap {
    pub pos: Vec<usize>,
    pub neg: Vec<usize>,
}

impl GridMap {
    pub fn new(trunc: &Truncation, n: usize) -> Self {
        let wrap = |c: i32| c.rem_euclid(n as i32) as usize;
        let idx = |k: [i32; 3]| (wrap(k[0]) * n + wrap(k[1])) * n + wrap(k[2]);
        let pos = trunc.modes().iter().map(|k| idx(k.components())).collect();
        let neg = trunc.modes().iter().map(|k| idx((-*k).components())).collect();
        Self { pos, neg }
    }

    /// Writes `A + iB` in spectral layout for two real fields with
    /// representative coefficients `a(i)`, `b(i)`.
    pub fn scatter_pair(
        &self,
        out: &mut [Complex64],
        a: impl Fn(usize) -> Complex64,
        b: impl Fn(usize) -> Complex64,
    ) {
        out.fill(Complex64::new(0.0, 0.0));
        let i_unit = Complex64::new(0.0, 1.0);
        for (i, (&p, &q)) in self.pos.iter().zip(&self.neg).enumerate() {
            let (ca, cb) = (a(i), b(i));
            out[p] = ca + i_unit * cb;
            out[q] = ca.conj() + i_unit * cb.conj();
        }
    }

    /// Splits the spectrum of `a + ib` (both real) back into `(â(k), b̂(k))`
    /// at representative `i`.
    #[inline]
    pub fn unpack(&self, data: &[Complex64], i: usize) -> (Complex64, Complex64) {
        let zp = data[self.pos[i]];
        let zm = data[self.neg[i]].conj();
        let a = (zp + zm) * 0.5;
        let b = (zp - zm) * Complex64::new(0.0, -0.5);
        (a, b)
    }
}

/// Velocity samples on an `n³` grid at points `ξ = 2π(i, j, l)/n`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhysicalField {
    n: usize,
    components: [Vec<f64>; 3],
}

impl PhysicalField {
    pub fn new(n: usize, components: [Vec<f64>; 3]) -> Result<Self> {
        if components.iter().any(|c| c.len() != n * n * n) {
            return Err(domain(format!("each component must hold {} samples", n * n * n)));
        }
        Ok(Self { n, components })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn component(&self, d: usize) -> &[f64] {
        &self.components[d]
    }

    /// Sample at grid point `(i, j, l)`.
    pub fn at(&self, i: usize, j: usize, l: usize) -> [f64; 3] {
        let idx = (i * self.n + j) * self.n + l;
        [
            self.components[0][idx],
            self.components[1][idx],
            self.components[2][idx],
        ]
    }

    /// Grid average of `|u|²`.
    pub fn mean_square(&self) -> f64 {
        let total: f64 = self.components.iter().flatten().map(|v| v * v).sum();
        total / (self.n * self.n * self.n) as f64
    }
}

fn check_grid(trunc: &Truncation, n: usize) -> Result<()> {
    let need = 2 * trunc.k_max() as usize + 1;
    if n < need {
        return Err(domain(format!(
            "grid {n} too small for k_max {} (need at least {need})",
            trunc.k_max()
        )));
    }
    Ok(())
}

/// Samples `x` on an `n³` grid.
pub fn to_physical(x: &SpectralField, n: usize) -> Result<PhysicalField> {
    let trunc = x.truncation();
    check_grid(trunc, n)?;
    let fft = Fft3::new(n);
    let map = GridMap::new(trunc, n);
    let k_active = trunc.k_max() as usize;
    let c = x.coeffs();
    let mut z12 = vec![Complex64::new(0.0, 0.0); fft.len()];
    let mut z3 = vec![Complex64::new(0.0, 0.0); fft.len()];
    map.scatter_pair(&mut z12, |i| c[i][0], |i| c[i][1]);
    map.scatter_pair(&mut z3, |i| c[i][2], |_| Complex64::new(0.0, 0.0));
    fft.inverse(&mut z12, k_active);
    fft.inverse(&mut z3, k_active);
    Ok(PhysicalField {
        n,
        components: [
            z12.iter().map(|z| z.re).collect(),
            z12.iter().map(|z| z.im).collect(),
            z3.iter().map(|z| z.re).collect(),
        ],
    })
}

/// Projects grid samples onto `trunc`: discrete Fourier coefficients on the
/// retained modes followed by the Leray projection.
pub fn from_physical(p: &PhysicalField, trunc: &Truncation) -> Result<SpectralField> {
    let n = p.n;
    check_grid(trunc, n)?;
    let fft = Fft3::new(n);
    let map = GridMap::new(trunc, n);
    let k_active = trunc.k_max() as usize;
    let [u1, u2, u3] = &p.components;
    let mut z12: Vec<Complex64> = u1.iter().zip(u2).map(|(&a, &b)| Complex64::new(a, b)).collect();
    let mut z3: Vec<Complex64> = u3.iter().map(|&a| Complex64::new(a, 0.0)).collect();
    fft.forward(&mut z12, k_active);
    fft.forward(&mut z3, k_active);
    let norm = 1.0 / fft.len() as f64;
    let mut out = SpectralField::zeros(trunc);
    for (i, (k, c)) in trunc.modes().iter().zip(out.coeffs_mut()).enumerate() {
        let (a, b) = map.unpack(&z12, i);
        let (d, _) = map.unpack(&z3, i);
        let mut v = CZERO;
        v[0] = a * norm;
        v[1] = b * norm;
        v[2] = d * norm;
        *c = leray_project_f(v, k.as_f64());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{random_field, sobolev_norm_sq, Wavevector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn grid_sizes() {
        assert_eq!(dealiased_grid_size(1), 4);
        assert_eq!(dealiased_grid_size(4), 15);
        assert_eq!(dealiased_grid_size(6), 20);
        assert_eq!(dealiased_grid_size(8), 25);
        for k in 1..40 {
            assert!(dealiased_grid_size(k) > 3 * k as usize);
        }
    }

    #[test]
    fn single_mode_is_sampled_cosine() {
        let t = Truncation::new(2).unwrap();
        let mut x = SpectralField::zeros(&t);
        let k = Wavevector::new([1, 0, 0]).unwrap();
        x.set(k, crate::spectral::field::cvec([0.0, 1.0, 0.0])).unwrap();
        let n = 8;
        let p = to_physical(&x, n).unwrap();
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    let xi = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                    let u = p.at(i, j, l);
                    assert!(u[0].abs() < 1e-14);
                    assert!((u[1] - 2.0 * xi.cos()).abs() < 1e-13);
                    assert!(u[2].abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn round_trip_and_parseval() {
        let t = Truncation::new(5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let x = random_field(&t, |k| (-0.2 * k.norm()).exp(), &mut rng);
        for n in [11, 16] {
            let p = to_physical(&x, n).unwrap();
            let back = from_physical(&p, &t).unwrap();
            let scale = sobolev_norm_sq(&x, 0.0).sqrt();
            for (a, b) in back.coeffs().iter().zip(x.coeffs()) {
                for d in 0..3 {
                    assert!((a[d] - b[d]).norm() < 1e-12 * scale);
                }
            }
            let p2 = to_physical(&back, n).unwrap();
            for d in 0..3 {
                for (u, v) in p.component(d).iter().zip(p2.component(d)) {
                    assert!((u - v).abs() < 1e-12 * scale);
                }
            }
            // Parseval: grid average of |u|² equals Σ|û|² (quadrature is exact here)
            let ms = p.mean_square();
            assert!((ms - sobolev_norm_sq(&x, 0.0)).abs() < 1e-12 * ms);
        }
    }

    #[test]
    fn rejects_small_grid() {
        let t = Truncation::new(4).unwrap();
        let x = SpectralField::zeros(&t);
        assert!(to_physical(&x, 8).is_err());
        assert!(to_physical(&x, 9).is_ok());
    }

    #[test]
    fn pruned_transforms_match_full() {
        let n = 10;
        let fft = Fft3::new(n);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        use rand::Rng;
        let k_act = 2;
        let act = |i: usize| i <= k_act || i + k_act >= n;
        let mut data = vec![Complex64::new(0.0, 0.0); fft.len()];
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    if act(i) && act(j) && act(l) {
                        data[(i * n + j) * n + l] = Complex64::new(rng.random(), rng.random());
                    }
                }
            }
        }
        let mut pruned = data.clone();
        fft.inverse(&mut pruned, k_act);
        let mut full = data.clone();
        fft.inverse(&mut full, n);
        for (a, b) in pruned.iter().zip(&full) {
            assert!((a - b).norm() < 1e-12);
        }
        let mut back = full.clone();
        fft.forward(&mut back, k_act);
        let scale = fft.len() as f64;
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    if act(i) && act(j) && act(l) {
                        let idx = (i * n + j) * n + l;
                        assert!((back[idx] / scale - data[idx]).norm() < 1e-12);
                    }
                }
            }
        }
    }
}
