//! Scalar functionals of a single state whose averages over the invariant
//! measure are bounded in the moment estimates.

use serde::Serialize;

use crate::dynamics::ForcingConstants;
use crate::error::Result;
use crate::measure::MomentAccumulator;
use crate::spectral::{gevrey_norm_capped, sobolev_norm, sobolev_norm_sq, GevreyParams};

/// `‖x‖_{p+1}^{2/(2p+1)}`
pub fn regularity_statistic(x: &crate::spectral::SpectralField, p: u32) -> f64 {
    assert!(p >= 1, "p must be at least 1");
    sobolev_norm(x, p as f64 + 1.0).powf(2.0 / (2 * p + 1) as f64)
}

/// `ε_p = 1/(2p−1)`
pub fn epsilon(p: u32) -> f64 {
    assert!(p >= 1, "p must be at least 1");
    1.0 / (2 * p - 1) as f64
}

/// `M_p = ν (1 + ‖x‖_p²)^{1/(2p−1)}`
pub fn m_p_statistic(x: &crate::spectral::SpectralField, p: u32, nu: f64) -> f64 {
    nu * (1.0 + sobolev_norm_sq(x, p as f64)).powf(epsilon(p))
}

/// `R_p = ν (1 + ‖x‖_{p+1}²) / (1 + ‖x‖_p²)^{1+ε_p}`
pub fn r_p_statistic(x: &crate::spectral::SpectralField, p: u32, nu: f64) -> f64 {
    let e = epsilon(p);
    nu * (1.0 + sobolev_norm_sq(x, p as f64 + 1.0))
        / (1.0 + sobolev_norm_sq(x, p as f64)).powf(1.0 + e)
}

/// Right side of the recursion `avg M_{p+1} ≤ (avg R_p)^{1/(2p+1)} (avg M_p)^{2p/(2p+1)}`.
///
/// The pointwise identity `M_{p+1}^{2p+1} = R_p · M_p^{2p}` makes this Hölder's
/// inequality on any empirical measure.
pub fn holder_recursion_bound(avg_r_p: f64, avg_m_p: f64, p: u32) -> f64 {
    let q = (2 * p + 1) as f64;
    avg_r_p.powf(1.0 / q) * avg_m_p.powf(2.0 * p as f64 / q)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnergyBalance {
    /// Time average of `‖X‖₁²`.
    pub mean: f64,
    pub stderr: f64,
    /// `2ν·mean − Σσ²`
    pub residual: f64,
    /// `2ν·stderr`
    pub residual_stderr: f64,
    /// `|residual| / Σσ²`
    pub relative_residual: f64,
    pub noise_trace: f64,
    pub b_bar_0: f64,
    /// `ν·mean ≤ B̄₀`
    pub bound_holds: bool,
}

/// Energy identity `2ν E‖X‖₁² = Σσ²` (for `g = 0`) and the one-sided bound
/// `ν E‖X‖₁² ≤ B̄₀`, evaluated on an accumulator of `‖X‖₁²`.
///
/// `consts` must be computed at level `p = 0`.
pub fn energy_balance_residual(
    acc: &MomentAccumulator,
    consts: &ForcingConstants,
    nu: f64,
) -> EnergyBalance {
    let mean = acc.mean();
    let residual = 2.0 * nu * mean - consts.noise_trace;
    EnergyBalance {
        mean,
        stderr: acc.stderr(),
        residual,
        residual_stderr: 2.0 * nu * acc.stderr(),
        relative_residual: if consts.noise_trace > 0.0 {
            residual.abs() / consts.noise_trace
        } else {
            residual.abs()
        },
        noise_trace: consts.noise_trace,
        b_bar_0: consts.b_bar_p,
        bound_holds: nu * mean <= consts.b_bar_p,
    }
}

/// `(ln⁺ ‖x‖²_{G(α',β')})^γ` with `ln⁺ r = max(0, ln r)`, evaluated in the
/// log domain.
pub fn log_plus_moment(
    x: &crate::spectral::SpectralField,
    alpha_prime: f64,
    beta_prime: f64,
    gamma: f64,
) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(crate::error::domain("gamma must be positive"));
    }
    let g = GevreyParams::new(alpha_prime, beta_prime)?;
    let l = gevrey_norm_capped(x, &g, crate::spectral::DEFAULT_EXPONENT_CAP).log_sq;
    Ok(l.max(0.0).powf(gamma))
}
