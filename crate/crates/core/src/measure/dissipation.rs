//! Shell-averaged amplitude spectra and the exponential-decay fit that
//! estimates the dissipation scale.

use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::spectral::{cnorm_sq, SpectralField, Truncation};

/// Relative noise floor below which shells are excluded from the fit.
pub const NOISE_FLOOR: f64 = 1e-13;

/// Shells needed for a fit.
pub const MIN_SHELLS: usize = 4;

/// Amplitudes on integer shells `[n − ½, n + ½)` of `|k|`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShellBin {
    pub shell: u32,
    /// Mean of `|x̂(k)|` over the lattice points of the shell.
    pub mean_amplitude: f64,
    /// Lattice points in the shell, counting `k` and `−k`.
    pub mode_count: usize,
    #[serde(skip)]
    radii: Vec<f64>,
    #[serde(skip)]
    amplitudes: Vec<f64>,
}

impl ShellBin {
    /// `|k|` of every stored representative in the shell.
    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    /// `|x̂(k)|` of every stored representative in the shell.
    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }
}

/// Per-mode amplitudes binned into shells.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShellSpectrum {
    pub bins: Vec<ShellBin>,
}

impl ShellSpectrum {
    /// Bins arbitrary per-representative amplitudes.
    pub fn from_amplitudes(trunc: &Truncation, amplitudes: &[f64]) -> Result<Self> {
        if amplitudes.len() != trunc.len() {
            return Err(domain("one amplitude per representative is required"));
        }
        let shells = trunc.k_max() as usize + 1;
        let mut bins: Vec<ShellBin> = (0..shells)
            .map(|n| ShellBin {
                shell: n as u32,
                mean_amplitude: 0.0,
                mode_count: 0,
                radii: Vec::new(),
                amplitudes: Vec::new(),
            })
            .collect();
        for (k, &a) in trunc.modes().iter().zip(amplitudes) {
            let r = k.norm();
            let b = &mut bins[(r + 0.5).floor() as usize];
            b.radii.push(r);
            b.amplitudes.push(a);
        }
        let bins = bins
            .into_iter()
            .filter(|b| !b.radii.is_empty())
            .map(|mut b| {
                b.mode_count = 2 * b.radii.len();
                b.mean_amplitude = b.amplitudes.iter().sum::<f64>() / b.amplitudes.len() as f64;
                b
            })
            .collect();
        Ok(Self { bins })
    }

    pub fn of_field(x: &SpectralField) -> Self {
        let amps: Vec<f64> = x.coeffs().iter().map(|c| cnorm_sq(c).sqrt()).collect();
        Self::from_amplitudes(x.truncation(), &amps).expect("one amplitude per mode")
    }
}

/// Running time average of `|x̂(k)|` per mode.
#[derive(Clone, Debug)]
pub struct SpectrumAccumulator {
    trunc: Truncation,
    sum: Vec<f64>,
    count: u64,
}

impl SpectrumAccumulator {
    pub fn new(trunc: &Truncation) -> Self {
        Self {
            trunc: trunc.clone(),
            sum: vec![0.0; trunc.len()],
            count: 0,
        }
    }

    pub fn push(&mut self, x: &SpectralField) -> Result<()> {
        if !x.truncation().same_as(&self.trunc) {
            return Err(domain("field truncation differs from the accumulator's"));
        }
        for (s, c) in self.sum.iter_mut().zip(x.coeffs()) {
            *s += cnorm_sq(c).sqrt();
        }
        self.count += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &SpectrumAccumulator) -> Result<()> {
        if !other.trunc.same_as(&self.trunc) {
            return Err(domain("spectrum accumulators use different truncations"));
        }
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        self.count += other.count;
        Ok(())
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn spectrum(&self) -> ShellSpectrum {
        let n = self.count.max(1) as f64;
        let mean: Vec<f64> = self.sum.iter().map(|s| s / n).collect();
        ShellSpectrum::from_amplitudes(&self.trunc, &mean).expect("one amplitude per mode")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DissipationFit {
    /// Fitted `ᾱ` in `|x̂(k)||k| ≈ C e^{−ᾱ|k|^β}`.
    pub decay_rate: f64,
    /// `ᾱ^{−1/β}`; infinite when the spectrum does not decay.
    pub scale: f64,
    pub r_squared: f64,
    pub shells_used: usize,
    pub beta: f64,
    /// `ᾱ` is not positive: no exponential decay was detected.
    pub non_gevrey: bool,
}

/// Least-squares fit of `ln|x̂(k)| + ln|k| = c − ᾱ|k|^β` over shells above
/// the noise floor. Each shell contributes one point: the mean of the
/// left side against the mean of `|k|^β` over its modes.
pub fn dissipation_scale_fit(spectrum: &ShellSpectrum, beta: f64) -> Result<DissipationFit> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(domain(format!("beta must lie in (0, 1], got {beta}")));
    }
    let peak = spectrum
        .bins
        .iter()
        .map(|b| b.mean_amplitude)
        .fold(0.0, f64::max);
    let floor = NOISE_FLOOR * peak;
    let pts: Vec<(f64, f64)> = spectrum
        .bins
        .iter()
        .filter(|b| b.shell > 0 && b.mean_amplitude > floor && b.amplitudes.iter().all(|&a| a > 0.0))
        .map(|b| {
            let n = b.radii.len() as f64;
            let x = b.radii.iter().map(|r| r.powf(beta)).sum::<f64>() / n;
            let y = b
                .radii
                .iter()
                .zip(&b.amplitudes)
                .map(|(r, a)| (a * r).ln())
                .sum::<f64>()
                / n;
            (x, y)
        })
        .collect();
    if pts.len() < MIN_SHELLS {
        return Err(Error::Diagnostic(format!(
            "{} shells above the noise floor, at least {MIN_SHELLS} needed",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let ss_res: f64 = pts
        .iter()
        .map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    let decay_rate = -slope;
    let non_gevrey = !(decay_rate > 1e-8);
    Ok(DissipationFit {
        decay_rate,
        scale: if non_gevrey {
            f64::INFINITY
        } else {
            decay_rate.powf(-1.0 / beta)
        },
        r_squared,
        shells_used: pts.len(),
        beta,
        non_gevrey,
    })
}
