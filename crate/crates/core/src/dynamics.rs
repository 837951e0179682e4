//! Drift and noise of the Galerkin system
//! `dX + νAX dt + P_N B(X) dt = P_N φ dW + P_N g dt`.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{domain, Result};
use crate::spectral::{
    dealiased_grid_size, leray_project_f, sobolev_norm_sq, Fft3, GevreyParams, SpectralField,
    Truncation, Wavevector,
};
use crate::spectral::GridMap;

/// Radial profile of the per-mode noise amplitude `σ_k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ForcingFamily {
    /// `σ_k = a |k|^{−r}`
    PowerLaw { r: f64 },
    /// `σ_k = a |k|^{−r} e^{−α|k|^β}`
    Gevrey { r: f64, params: GevreyParams },
}

/// Optional bounded scalar gain `m(|x|)` multiplying the noise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum NoiseGain {
    Unit,
    /// `m(|x|) = 1 / (1 + |x|/scale)`, with values in `(0, 1]`.
    Saturating { scale: f64 },
}

impl NoiseGain {
    pub fn eval(&self, x: &SpectralField) -> f64 {
        match *self {
            NoiseGain::Unit => 1.0,
            NoiseGain::Saturating { scale } => 1.0 / (1.0 + sobolev_norm_sq(x, 0.0).sqrt() / scale),
        }
    }
}

/// Diagonal additive noise on the solenoidal Fourier basis plus an optional
/// deterministic forcing `g`.
#[derive(Clone, Debug)]
pub struct ForcingSpec {
    family: ForcingFamily,
    amplitude: f64,
    deterministic: Option<SpectralField>,
    truncation: Truncation,
    gain: NoiseGain,
    sigma: Vec<f64>,
}

impl ForcingSpec {
    pub fn new(trunc: &Truncation, family: ForcingFamily, amplitude: f64) -> Result<Self> {
        if !(amplitude >= 0.0 && amplitude.is_finite()) {
            return Err(domain(format!("noise amplitude must be >= 0, got {amplitude}")));
        }
        let r = match family {
            ForcingFamily::PowerLaw { r } | ForcingFamily::Gevrey { r, .. } => r,
        };
        if !(r > 0.0 && r.is_finite()) {
            return Err(domain(format!("decay exponent r must be positive, got {r}")));
        }
        let sigma = trunc
            .modes()
            .iter()
            .map(|k| profile(family, amplitude, k.norm()))
            .collect();
        Ok(Self {
            family,
            amplitude,
            deterministic: None,
            truncation: trunc.clone(),
            gain: NoiseGain::Unit,
            sigma,
        })
    }

    pub fn power_law(trunc: &Truncation, r: f64, amplitude: f64) -> Result<Self> {
        Self::new(trunc, ForcingFamily::PowerLaw { r }, amplitude)
    }

    pub fn gevrey(trunc: &Truncation, r: f64, params: GevreyParams, amplitude: f64) -> Result<Self> {
        Self::new(trunc, ForcingFamily::Gevrey { r, params }, amplitude)
    }

    /// Attaches a deterministic forcing. The field type already guarantees it
    /// is divergence-free and mean-zero; only the truncation is checked.
    pub fn with_deterministic(mut self, g: SpectralField) -> Result<Self> {
        if !g.truncation().same_as(&self.truncation) {
            return Err(domain("deterministic forcing lives on a different truncation"));
        }
        if !g.is_finite() {
            return Err(domain("deterministic forcing has non-finite coefficients"));
        }
        self.deterministic = Some(g);
        Ok(self)
    }

    pub fn with_gain(mut self, gain: NoiseGain) -> Result<Self> {
        if let NoiseGain::Saturating { scale } = gain {
            if !(scale > 0.0) {
                return Err(domain("gain scale must be positive"));
            }
        }
        self.gain = gain;
        Ok(self)
    }

    pub fn family(&self) -> ForcingFamily {
        self.family
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn truncation(&self) -> &Truncation {
        &self.truncation
    }

    pub fn deterministic(&self) -> Option<&SpectralField> {
        self.deterministic.as_ref()
    }

    pub fn gain(&self) -> NoiseGain {
        self.gain
    }

    /// `σ_k` per stored representative.
    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    /// Gevrey parameters of the noise, when it belongs to a Gevrey class.
    pub fn gevrey_params(&self) -> Option<GevreyParams> {
        match self.family {
            ForcingFamily::Gevrey { params, .. } => Some(params),
            ForcingFamily::PowerLaw { .. } => None,
        }
    }

    /// `‖φ‖²_{L₂(U;H)} = Σ_{k,pol} σ_k²` over the full lattice ball.
    pub fn noise_trace(&self) -> f64 {
        4.0 * self.sigma.iter().map(|s| s * s).sum::<f64>()
    }
}

fn profile(family: ForcingFamily, amplitude: f64, radius: f64) -> f64 {
    match family {
        ForcingFamily::PowerLaw { r } => amplitude * radius.powf(-r),
        ForcingFamily::Gevrey { r, params } => {
            amplitude * radius.powf(-r) * (-params.alpha() * radius.powf(params.beta())).exp()
        }
    }
}

/// `σ_k` for a mode of the truncation.
pub fn noise_amplitude(spec: &ForcingSpec, k: Wavevector) -> Result<f64> {
    match spec.truncation.locate(k.components()) {
        Some((i, _)) => Ok(spec.sigma[i]),
        None => Err(domain(format!("mode {k} is outside the truncation"))),
    }
}

/// Forcing constants for regularity level `p`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ForcingConstants {
    pub p: u32,
    pub nu: f64,
    /// `B_p = Σ |k|^{2p} σ_k² + ‖g‖²_{p−1}`
    pub b_p: f64,
    /// `B̄_p = Σ |k|^{2p} σ_k² + ν⁻¹ ‖g‖²_{p−1}`
    pub b_bar_p: f64,
    /// `B₀' = Σ |k|² e^{2α|k|^β} σ_k² + ‖g‖²_{G(α,β)}`; only for Gevrey noise.
    pub b0_prime: Option<f64>,
    /// `Σ σ_k²`
    pub noise_trace: f64,
}

pub fn forcing_constants(spec: &ForcingSpec, p: u32, nu: f64) -> Result<ForcingConstants> {
    if !(nu > 0.0) {
        return Err(domain("viscosity must be positive"));
    }
    let trunc = &spec.truncation;
    let r2 = trunc.radius_sq();
    let radius = trunc.radius();
    // each representative stands for ±k and carries two polarizations
    let weighted = |w: &dyn Fn(usize) -> f64| -> f64 {
        4.0 * spec
            .sigma
            .iter()
            .enumerate()
            .map(|(i, s)| w(i) * s * s)
            .sum::<f64>()
    };
    let noise_p = weighted(&|i| r2[i].powi(p as i32));
    let g_sq = spec
        .deterministic
        .as_ref()
        .map_or(0.0, |g| sobolev_norm_sq(g, p as f64 - 1.0));
    let b0_prime = spec.gevrey_params().map(|gp| {
        let noise = weighted(&|i| r2[i] * gp.exponent(radius[i]).exp());
        let g = spec.deterministic.as_ref().map_or(0.0, |g| {
            let n = crate::spectral::gevrey_norm(g, &gp);
            n * n
        });
        noise + g
    });
    Ok(ForcingConstants {
        p,
        nu,
        b_p: noise_p + g_sq,
        b_bar_p: noise_p + g_sq / nu,
        b0_prime,
        noise_trace: spec.noise_trace(),
    })
}

/// Pseudo-spectral evaluation of `B(u) = P_N π((u·∇)u)` with reusable
/// buffers.
///
/// The product is formed in divergence form `∂_j(u_j u_i)` on a
/// `dealiased_grid_size(k_max)³` grid, which makes it exact on the retained
/// modes. Five packed complex transforms per call.
pub struct BilinearEvaluator {
    trunc: Truncation,
    fft: Fft3,
    map: GridMap,
    buf: [Vec<Complex64>; 3],
}

impl BilinearEvaluator {
    pub fn new(trunc: &Truncation) -> Self {
        let n = dealiased_grid_size(trunc.k_max());
        let fft = Fft3::new(n);
        let len = fft.len();
        Self {
            trunc: trunc.clone(),
            map: GridMap::new(trunc, n),
            fft,
            buf: [
                vec![Complex64::new(0.0, 0.0); len],
                vec![Complex64::new(0.0, 0.0); len],
                vec![Complex64::new(0.0, 0.0); len],
            ],
        }
    }

    pub fn grid_size(&self) -> usize {
        self.fft.n()
    }

    pub fn eval(&mut self, u: &SpectralField) -> Result<SpectralField> {
        let mut out = SpectralField::zeros(&self.trunc);
        self.eval_into(u, &mut out)?;
        Ok(out)
    }

    pub fn eval_into(&mut self, u: &SpectralField, out: &mut SpectralField) -> Result<()> {
        if !u.truncation().same_as(&self.trunc) || !out.truncation().same_as(&self.trunc) {
            return Err(domain("field truncation differs from the evaluator's"));
        }
        let k_active = self.trunc.k_max() as usize;
        let c = u.coeffs();
        let zero = Complex64::new(0.0, 0.0);
        let [pa, z12, z3] = &mut self.buf;
        self.map.scatter_pair(z12, |i| c[i][0], |i| c[i][1]);
        self.map.scatter_pair(z3, |i| c[i][2], |_| zero);
        self.fft.inverse(z12, k_active);
        self.fft.inverse(z3, k_active);
        for ((a, b), cc) in pa.iter_mut().zip(z12.iter_mut()).zip(z3.iter_mut()) {
            let (u1, u2, u3) = (b.re, b.im, cc.re);
            *a = Complex64::new(u1 * u1, u1 * u2);
            *b = Complex64::new(u1 * u3, u2 * u2);
            *cc = Complex64::new(u2 * u3, u3 * u3);
        }
        self.fft.forward(pa, k_active);
        self.fft.forward(z12, k_active);
        self.fft.forward(z3, k_active);
        let norm = 1.0 / self.fft.len() as f64;
        let i_unit = Complex64::new(0.0, norm);
        for (i, (k, dst)) in self
            .trunc
            .modes()
            .iter()
            .zip(out.coeffs_mut().iter_mut())
            .enumerate()
        {
            let (t11, t12) = self.map.unpack(pa, i);
            let (t13, t22) = self.map.unpack(z12, i);
            let (t23, t33) = self.map.unpack(z3, i);
            let kf = k.as_f64();
            let b = [
                i_unit * (t11 * kf[0] + t12 * kf[1] + t13 * kf[2]),
                i_unit * (t12 * kf[0] + t22 * kf[1] + t23 * kf[2]),
                i_unit * (t13 * kf[0] + t23 * kf[1] + t33 * kf[2]),
            ];
            *dst = leray_project_f(b, kf);
        }
        Ok(())
    }
}

/// `B(u) = P_N π((u·∇)u)`, allocating a fresh evaluator.
pub fn bilinear_b(u: &SpectralField) -> SpectralField {
    BilinearEvaluator::new(u.truncation())
        .eval(u)
        .expect("evaluator built for this truncation")
}

/// `−νAu − P_N B(u) + P_N g`
pub fn galerkin_drift(u: &SpectralField, spec: &ForcingSpec, nu: f64) -> Result<SpectralField> {
    let mut eval = BilinearEvaluator::new(u.truncation());
    drift_with(&mut eval, u, spec, nu, true)
}

pub(crate) fn drift_with(
    eval: &mut BilinearEvaluator,
    u: &SpectralField,
    spec: &ForcingSpec,
    nu: f64,
    nonlinear: bool,
) -> Result<SpectralField> {
    if !u.truncation().same_as(spec.truncation()) {
        return Err(domain("field and forcing use different truncations"));
    }
    let mut out = if nonlinear {
        let mut b = eval.eval(u)?;
        b.scale(-1.0);
        b
    } else {
        SpectralField::zeros(u.truncation())
    };
    out.axpy(-nu, &crate::spectral::apply_a_power(u, 1.0))?;
    if let Some(g) = spec.deterministic() {
        out.axpy(1.0, g)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{random_field, sobolev_norm};
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rnd(t: &Truncation, seed: u64) -> SpectralField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        random_field(t, |k| (-0.3 * k.norm()).exp(), &mut rng)
    }

    fn single_mode(t: &Truncation, k: [i32; 3]) -> SpectralField {
        SpectralField::solenoidal_from_fn(t, |q| {
            if q.components() == k {
                [Complex64::new(0.3, 1.0), Complex64::new(-0.7, 0.2), Complex64::new(0.5, 0.0)]
            } else {
                [Complex64::new(0.0, 0.0); 3]
            }
        })
    }

    #[test]
    fn noise_amplitude_examples() {
        let t = Truncation::new(3).unwrap();
        let s = ForcingSpec::power_law(&t, 2.0, 1.0).unwrap();
        let k1 = Wavevector::new([0, 1, 0]).unwrap();
        let k2 = Wavevector::new([0, 0, -2]).unwrap();
        assert_eq!(noise_amplitude(&s, k1).unwrap(), 1.0);
        assert!((noise_amplitude(&s, k2).unwrap() - 0.25).abs() < 1e-15);
        assert!(noise_amplitude(&s, Wavevector::new([4, 0, 0]).unwrap()).is_err());

        let g = ForcingSpec::gevrey(&t, 1.0, GevreyParams::new(0.5, 1.0).unwrap(), 1.0).unwrap();
        // independent evaluation: 2^{-1} e^{-0.5·2}
        let expect = 0.5 * (-1.0f64).exp();
        assert!((noise_amplitude(&g, Wavevector::new([2, 0, 0]).unwrap()).unwrap() - expect).abs() < 1e-15);
        assert!((expect - 0.18394).abs() < 1e-5);
        // radial symmetry
        let a = noise_amplitude(&g, Wavevector::new([1, 2, 2]).unwrap()).unwrap();
        let b = noise_amplitude(&g, Wavevector::new([-2, 2, -1]).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn forcing_rejects_bad_parameters() {
        let t = Truncation::new(2).unwrap();
        assert!(ForcingSpec::power_law(&t, 0.0, 1.0).is_err());
        assert!(ForcingSpec::power_law(&t, 1.0, -1.0).is_err());
        let g = SpectralField::zeros(&Truncation::new(3).unwrap());
        assert!(ForcingSpec::power_law(&t, 1.0, 1.0).unwrap().with_deterministic(g).is_err());
    }

    #[test]
    fn constants_vanish_without_forcing() {
        let t = Truncation::new(3).unwrap();
        let s = ForcingSpec::power_law(&t, 1.0, 0.0).unwrap();
        let c = forcing_constants(&s, 2, 0.5).unwrap();
        assert_eq!((c.b_p, c.b_bar_p, c.noise_trace), (0.0, 0.0, 0.0));
        let sg = ForcingSpec::gevrey(&t, 1.0, GevreyParams::new(0.3, 1.0).unwrap(), 0.0).unwrap();
        assert_eq!(forcing_constants(&sg, 0, 0.5).unwrap().b0_prime, Some(0.0));
    }

    #[test]
    fn unit_shell_constant_counts_twelve_directions() {
        let t = Truncation::new(1).unwrap();
        let s = ForcingSpec::power_law(&t, 3.0, 1.0).unwrap();
        let c = forcing_constants(&s, 0, 0.7).unwrap();
        // 6 lattice modes × 2 polarizations, σ = 1
        assert!((c.b_p - 12.0).abs() < 1e-14);
        assert!((c.b_bar_p - 12.0).abs() < 1e-14);
    }

    #[test]
    fn constants_with_deterministic_forcing_only() {
        let t = Truncation::new(3).unwrap();
        let g = rnd(&t, 4);
        let nu = 0.25;
        let s = ForcingSpec::power_law(&t, 1.0, 0.0).unwrap().with_deterministic(g.clone()).unwrap();
        let c = forcing_constants(&s, 1, nu).unwrap();
        let g0 = sobolev_norm(&g, 0.0).powi(2);
        assert!((c.b_p - g0).abs() < 1e-14 * g0);
        assert!((c.b_bar_p - g0 / nu).abs() < 1e-14 * g0 / nu);
    }

    #[test]
    fn b_vanishes_on_single_mode_and_zero() {
        let t = Truncation::new(4).unwrap();
        assert_eq!(bilinear_b(&SpectralField::zeros(&t)), SpectralField::zeros(&t));
        let u = single_mode(&t, [1, 2, 0]);
        let b = bilinear_b(&u);
        assert!(sobolev_norm(&b, 0.0) < 1e-14);
    }

    #[test]
    fn b_is_energy_orthogonal_and_solenoidal() {
        let t = Truncation::new(5).unwrap();
        for seed in 0..5 {
            let u = rnd(&t, seed);
            let b = bilinear_b(&u);
            let e = b.inner(&u).unwrap();
            let bound = 1e-10 * sobolev_norm(&u, 0.0) * sobolev_norm(&u, 1.0).powi(2);
            assert!(e.abs() <= bound, "seed {seed}: {e:e} > {bound:e}");
            assert!(b.max_divergence() < 1e-12);
        }
    }

    #[test]
    fn drift_on_single_mode_is_stokes_decay() {
        let t = Truncation::new(4).unwrap();
        let u = single_mode(&t, [2, 1, -1]);
        let s = ForcingSpec::power_law(&t, 1.0, 1.0).unwrap();
        let nu = 0.3;
        let d = galerkin_drift(&u, &s, nu).unwrap();
        let k = Wavevector::new([2, 1, -1]).unwrap();
        let uk = u.get(k);
        let dk = d.get(k);
        for c in 0..3 {
            assert!((dk[c] + uk[c] * (nu * 6.0)).norm() < 1e-13);
        }
        assert_eq!(galerkin_drift(&SpectralField::zeros(&t), &s, nu).unwrap(), SpectralField::zeros(&t));
    }

    #[test]
    fn drift_is_sum_of_parts() {
        let t = Truncation::new(4).unwrap();
        let u = rnd(&t, 8);
        let g = rnd(&t, 9);
        let nu = 0.4;
        let s = ForcingSpec::power_law(&t, 1.0, 1.0).unwrap().with_deterministic(g.clone()).unwrap();
        let d = galerkin_drift(&u, &s, nu).unwrap();
        let b = bilinear_b(&u);
        for (i, k) in t.modes().iter().enumerate() {
            let lam = nu * k.norm_sq() as f64;
            for c in 0..3 {
                let expect = -u.coeffs()[i][c] * lam - b.coeffs()[i][c] + g.coeffs()[i][c];
                assert!((d.coeffs()[i][c] - expect).norm() <= 1e-14 * (1.0 + expect.norm()));
            }
        }
    }
}
