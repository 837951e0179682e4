use super::field::ensure_same;
use super::{cnorm_sq, re_dot, SpectralField};
use crate::error::{domain, Result};

/// Default cap on the Gevrey exponent `2α|k|^β` before switching to
/// log-domain accumulation (natural-log scale).
pub const DEFAULT_EXPONENT_CAP: f64 = 700.0;

/// Gevrey class parameters `(α, β)` with `α > 0`, `0 < β ≤ 1`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct GevreyParams {
    alpha: f64,
    beta: f64,
}

impl GevreyParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(domain(format!("Gevrey alpha must be positive, got {alpha}")));
        }
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(domain(format!("Gevrey beta must lie in (0, 1], got {beta}")));
        }
        Ok(Self { alpha, beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `2α|k|^β`
    #[inline]
    pub fn exponent(&self, radius: f64) -> f64 {
        2.0 * self.alpha * radius.powf(self.beta)
    }
}

/// Result of a Gevrey norm evaluation, kept as `ln ‖x‖²` so that it is
/// meaningful even when the norm itself overflows.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GevreyEval {
    /// `ln ‖x‖²_{G(α,β)}`; `−∞` for the zero field.
    pub log_sq: f64,
    /// Set when some exponent exceeded the cap and the sum was carried in
    /// the log domain.
    pub log_domain: bool,
}

impl GevreyEval {
    pub fn squared(&self) -> f64 {
        self.log_sq.exp()
    }

    pub fn value(&self) -> f64 {
        (0.5 * self.log_sq).exp()
    }
}

/// `‖x‖²_m = Σ_k |k|^{2m} |x̂(k)|²`
pub fn sobolev_norm_sq(x: &SpectralField, m: f64) -> f64 {
    let r2 = x.truncation().radius_sq();
    let sum: f64 = if m == 0.0 {
        x.coeffs().iter().map(cnorm_sq).sum()
    } else if m.fract() == 0.0 && m.abs() < 64.0 {
        let p = m as i32;
        x.coeffs()
            .iter()
            .zip(r2)
            .map(|(c, &k2)| k2.powi(p) * cnorm_sq(c))
            .sum()
    } else {
        x.coeffs()
            .iter()
            .zip(r2)
            .map(|(c, &k2)| k2.powf(m) * cnorm_sq(c))
            .sum()
    };
    2.0 * sum
}

/// `‖x‖_m = |A^{m/2} x|`
pub fn sobolev_norm(x: &SpectralField, m: f64) -> f64 {
    sobolev_norm_sq(x, m).sqrt()
}

/// `‖x‖_{G(α,β)} = (Σ_k |k|² e^{2α|k|^β} |x̂(k)|²)^{1/2}`.
///
/// Returns `+∞` when the norm overflows; use [`gevrey_norm_capped`] to get the
/// logarithm in that case.
pub fn gevrey_norm(x: &SpectralField, g: &GevreyParams) -> f64 {
    gevrey_norm_capped(x, g, DEFAULT_EXPONENT_CAP).value()
}

pub fn gevrey_norm_capped(x: &SpectralField, g: &GevreyParams, cap: f64) -> GevreyEval {
    let radius = x.truncation().radius();
    let r2 = x.truncation().radius_sq();
    let max_exp = radius.last().map_or(0.0, |&r| g.exponent(r));
    if max_exp <= cap {
        let sum: f64 = x
            .coeffs()
            .iter()
            .zip(radius.iter().zip(r2))
            .map(|(c, (&r, &k2))| k2 * g.exponent(r).exp() * cnorm_sq(c))
            .sum();
        return GevreyEval {
            log_sq: (2.0 * sum).ln(),
            log_domain: false,
        };
    }
    let logs: Vec<f64> = x
        .coeffs()
        .iter()
        .zip(radius.iter().zip(r2))
        .filter_map(|(c, (&r, &k2))| {
            let a = cnorm_sq(c);
            (a > 0.0).then(|| k2.ln() + g.exponent(r) + a.ln())
        })
        .collect();
    GevreyEval {
        log_sq: std::f64::consts::LN_2 + log_sum_exp(&logs),
        log_domain: true,
    }
}

pub(crate) fn log_sum_exp(logs: &[f64]) -> f64 {
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + logs.iter().map(|l| (l - max).exp()).sum::<f64>().ln()
}

/// `(x, y)_{G(α,β)} = Σ_k |k|² e^{2α|k|^β} Re(x̂(k)·conj(ŷ(k)))`
pub fn gevrey_inner(x: &SpectralField, y: &SpectralField, g: &GevreyParams) -> Result<f64> {
    ensure_same(x.truncation(), y.truncation())?;
    let t = x.truncation();
    let sum: f64 = x
        .coeffs()
        .iter()
        .zip(y.coeffs())
        .zip(t.radius().iter().zip(t.radius_sq()))
        .map(|((a, b), (&r, &k2))| k2 * g.exponent(r).exp() * re_dot(a, b))
        .sum();
    Ok(2.0 * sum)
}

/// `A^s x`: every coefficient scaled by `|k|^{2s}`.
pub fn apply_a_power(x: &SpectralField, s: f64) -> SpectralField {
    let mut out = x.clone();
    let r2 = x.truncation().radius_sq();
    for (c, &k2) in out.coeffs_mut().iter_mut().zip(r2) {
        let w = k2.powf(s);
        for z in c.iter_mut() {
            *z *= w;
        }
    }
    out
}
