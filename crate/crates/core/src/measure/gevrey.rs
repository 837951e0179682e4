//! Time-weighted Gevrey norms: the analyticity-radius functional `α_ν`, the
//! stopping time `τ`, the Itô budget of `‖X(t)‖²_{G(νt,β)}`, and the
//! interpolation between Gevrey classes.

use serde::Serialize;

use crate::dynamics::{BilinearEvaluator, ForcingSpec};
use crate::error::{domain, Result};
use crate::integrator::{Observer, TrajectoryState};
use crate::spectral::{
    cnorm_sq, gevrey_norm_capped, re_dot, sobolev_norm_sq, GevreyParams, SpectralField,
    DEFAULT_EXPONENT_CAP,
};

/// `ln ‖x‖²_{G(α,β)}` for `α ≥ 0`; at `α = 0` this is `ln ‖x‖₁²`.
/// The zero field gives `−∞`.
pub fn log_gevrey_sq(x: &SpectralField, alpha: f64, beta: f64) -> Result<f64> {
    if alpha == 0.0 {
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(domain(format!("beta must lie in (0, 1], got {beta}")));
        }
        return Ok(sobolev_norm_sq(x, 1.0).ln());
    }
    let g = GevreyParams::new(alpha, beta)?;
    Ok(gevrey_norm_capped(x, &g, DEFAULT_EXPONENT_CAP).log_sq)
}

/// `α_ν(x) = inf{s ≥ 0 : ‖x‖²_{G(νs,β)} > 4(B̄₀+1)/(ν s^{1/2})}`, clamped to
/// `(0, alpha_cap]`.
///
/// The left side increases and the right side decreases in `s`, so the
/// crossing is found by bisection on `ln s`. Without a crossing in
/// `(0, alpha_cap]`, including for the zero field, the result is `alpha_cap`.
pub fn estimate_alpha_nu(
    x: &SpectralField,
    nu: f64,
    beta: f64,
    b_bar_0: f64,
    alpha_cap: f64,
) -> Result<f64> {
    if !(nu > 0.0 && nu <= 1.0) {
        return Err(domain(format!("nu must lie in (0, 1], got {nu}")));
    }
    if !(alpha_cap > 0.0 && alpha_cap.is_finite()) {
        return Err(domain("alpha cap must be positive"));
    }
    if !(b_bar_0 >= 0.0) {
        return Err(domain("B̄₀ must be non-negative"));
    }
    let level = (4.0 * (b_bar_0 + 1.0) / nu).ln();
    let h = |ln_s: f64| -> Result<f64> {
        let s = ln_s.exp();
        Ok(log_gevrey_sq(x, nu * s, beta)? + 0.5 * ln_s - level)
    };
    let mut hi = alpha_cap.ln();
    if h(hi)? <= 0.0 {
        return Ok(alpha_cap);
    }
    let mut lo = hi;
    loop {
        lo -= 1.0;
        if h(lo)? <= 0.0 {
            break;
        }
        if lo < -700.0 {
            return Ok(lo.exp());
        }
    }
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if h(mid)? > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi.exp())
}

/// One restart window of the stopping-time observer.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TauSample {
    /// First sampled offset violating the threshold; `None` when censored at
    /// the horizon.
    pub tau: Option<f64>,
    /// `‖X(0)‖₁²` of the window.
    pub initial_sq: f64,
    /// `4(‖X(0)‖₁² + 1)`
    pub threshold: f64,
    /// Largest sampled `‖X(s)‖²_{G(νs,β)}` strictly before `τ` (or over the
    /// whole window when censored).
    pub sup_before: f64,
    /// Number of sampled points before `τ`.
    pub points: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StoppingRecord {
    pub tau_samples: Vec<TauSample>,
    pub alpha_nu_samples: Vec<f64>,
    pub horizon: f64,
    /// The supremum is taken over the sampling grid, not continuous time.
    pub grid_sampled: bool,
}

impl StoppingRecord {
    pub fn new(horizon: f64) -> Self {
        Self {
            tau_samples: Vec::new(),
            alpha_nu_samples: Vec::new(),
            horizon,
            grid_sampled: true,
        }
    }

    pub fn merge(&mut self, other: StoppingRecord) {
        self.tau_samples.extend(other.tau_samples);
        self.alpha_nu_samples.extend(other.alpha_nu_samples);
    }

    /// Every pre-`τ` sampled point satisfies `‖X‖²_G ≤ 4(‖X(0)‖²+1)`.
    pub fn threshold_identity_holds(&self) -> bool {
        self.tau_samples.iter().all(|s| s.sup_before <= s.threshold)
    }

    pub fn mean_sup(&self) -> f64 {
        let n = self.tau_samples.len() as f64;
        self.tau_samples.iter().map(|s| s.sup_before).sum::<f64>() / n
    }

    /// `(t, P̂(τ < t))` at each distinct observed `τ` and at the horizon.
    pub fn empirical_cdf(&self) -> Vec<(f64, f64)> {
        let n = self.tau_samples.len() as f64;
        let mut taus: Vec<f64> = self.tau_samples.iter().filter_map(|s| s.tau).collect();
        taus.sort_by(f64::total_cmp);
        let mut out = Vec::new();
        let mut i = 0;
        while i < taus.len() {
            let t = taus[i];
            while i < taus.len() && taus[i] == t {
                i += 1;
            }
            out.push((t, i as f64 / n));
        }
        out.push((self.horizon, taus.len() as f64 / n));
        out
    }

    /// Least-squares fit of `P̂(τ < t) ≈ a t^{1/2}` on the small-`t` range.
    ///
    /// The range runs up to the first time the empirical CDF reaches ½, or
    /// over the whole horizon if it never does.
    pub fn fit_sqrt_cdf(&self) -> TauFit {
        let cdf = self.empirical_cdf();
        if cdf.iter().all(|&(_, f)| f == 0.0) {
            return TauFit {
                identically_zero: true,
                a: 0.0,
                r_squared: f64::NAN,
                points: 0,
                t_max: self.horizon,
            };
        }
        let cut = cdf
            .iter()
            .position(|&(_, f)| f >= 0.5)
            .map_or(cdf.len(), |i| i + 1);
        let pts: Vec<(f64, f64)> = cdf[..cut].iter().map(|&(t, f)| (t.sqrt(), f)).collect();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let a = sxy / sxx;
        let mean = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
        let ss_res: f64 = pts.iter().map(|p| (p.1 - a * p.0).powi(2)).sum();
        let ss_tot: f64 = pts.iter().map(|p| (p.1 - mean).powi(2)).sum();
        let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { f64::NAN };
        TauFit {
            identically_zero: false,
            a,
            r_squared,
            points: pts.len(),
            t_max: cdf[cut - 1].0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TauFit {
    pub identically_zero: bool,
    pub a: f64,
    pub r_squared: f64,
    pub points: usize,
    pub t_max: f64,
}

/// Observes `τ = inf{s : 1 + ‖X(s)‖²_{G(νs,β)} > 4(‖X(0)‖₁² + 1)}` on
/// consecutive windows of length `horizon`.
///
/// A window starts at the first observed state; `s` is measured from there.
/// The sample at `s ≥ horizon` closes the window and starts the next one.
/// Optionally records `α_ν` of each window's initial state.
#[derive(Clone, Debug)]
pub struct TauObserver {
    nu: f64,
    beta: f64,
    horizon: f64,
    alpha_nu: Option<(f64, f64)>,
    record: StoppingRecord,
    window: Option<Window>,
}

#[derive(Clone, Debug)]
struct Window {
    t0: f64,
    initial_sq: f64,
    threshold: f64,
    sup: f64,
    points: u64,
    tau: Option<f64>,
}

impl TauObserver {
    pub fn new(nu: f64, beta: f64, horizon: f64) -> Result<Self> {
        if !(nu > 0.0 && nu <= 1.0) {
            return Err(domain("nu must lie in (0, 1]"));
        }
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(domain("beta must lie in (0, 1]"));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(domain("horizon must be positive"));
        }
        Ok(Self {
            nu,
            beta,
            horizon,
            alpha_nu: None,
            record: StoppingRecord::new(horizon),
            window: None,
        })
    }

    /// Also evaluate `α_ν` at every window start.
    pub fn with_alpha_nu(mut self, b_bar_0: f64, alpha_cap: f64) -> Self {
        self.alpha_nu = Some((b_bar_0, alpha_cap));
        self
    }

    fn open(&mut self, state: &TrajectoryState) -> Result<()> {
        let initial_sq = sobolev_norm_sq(&state.field, 1.0);
        if let Some((b, cap)) = self.alpha_nu {
            let a = estimate_alpha_nu(&state.field, self.nu, self.beta, b, cap)?;
            self.record.alpha_nu_samples.push(a);
        }
        self.window = Some(Window {
            t0: state.time,
            initial_sq,
            threshold: 4.0 * (initial_sq + 1.0),
            sup: initial_sq,
            points: 1,
            tau: None,
        });
        Ok(())
    }

    fn close(&mut self) {
        if let Some(w) = self.window.take() {
            self.record.tau_samples.push(TauSample {
                tau: w.tau,
                initial_sq: w.initial_sq,
                threshold: w.threshold,
                sup_before: w.sup,
                points: w.points,
            });
        }
    }

    /// Closes an incomplete window as censored and returns the record.
    pub fn finish(mut self) -> StoppingRecord {
        self.close();
        self.record
    }

    /// Number of completed windows.
    pub fn windows(&self) -> usize {
        self.record.tau_samples.len()
    }

    /// Completed windows only; an open window is dropped.
    pub fn completed(self) -> StoppingRecord {
        self.record
    }
}

impl Observer for TauObserver {
    fn observe(&mut self, _index: u64, state: &TrajectoryState) -> Result<()> {
        let Some(w) = self.window.as_mut() else {
            return self.open(state);
        };
        let s = state.time - w.t0;
        let at_end = s >= self.horizon - 1e-9 * self.horizon;
        if w.tau.is_none() {
            let g = log_gevrey_sq(&state.field, self.nu * s, self.beta)?.exp();
            if 1.0 + g > w.threshold {
                w.tau = Some(s);
            } else {
                w.sup = w.sup.max(g);
                w.points += 1;
            }
        }
        if at_end {
            self.close();
            self.open(state)?;
        }
        Ok(())
    }
}

/// Terms of the Itô expansion of `‖X(t)‖²_{G(νt,β)}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GevreyBudget {
    pub t: f64,
    /// `−(x, B(x))_{G(νt,β)}`
    pub i_b: f64,
    /// `(g, x)_{G(νt,β)}`
    pub i_g: f64,
    /// `Σ_{k,pol} |k|² e^{2νt|k|^β} σ_k²`
    pub i_phi: f64,
    /// `‖x‖²_{G(νt,β)}`
    pub gevrey_sq: f64,
    /// `‖A^{1/2}x‖²_{G(νt,β)}`
    pub dissipation: f64,
    /// `2ν ‖A^{β/4}x‖²_{G(νt,β)}`, the rate from differentiating the weight.
    pub weight_growth: f64,
    /// `4 Σ_{k,pol} σ_k² |k|⁴ e^{4νt|k|^β} |x̂_{k,pol}|²`, the quadratic
    /// variation rate of the martingale term.
    pub qv_rate: f64,
}

impl GevreyBudget {
    /// Expected rate of change of `‖X‖²_{G(νt,β)}`:
    /// `weight_growth − 2ν·dissipation + 2 i_b + 2 i_g + i_phi`.
    pub fn drift(&self, nu: f64) -> f64 {
        self.weight_growth - 2.0 * nu * self.dissipation + 2.0 * self.i_b + 2.0 * self.i_g + self.i_phi
    }

    /// `(2 I_B − ν·dissipation)·ν³ / ‖x‖⁶_G`, bounded by a constant for every
    /// field by the trilinear estimate.
    pub fn foias_temam_ratio(&self, nu: f64) -> f64 {
        (2.0 * self.i_b - nu * self.dissipation) * nu.powi(3) / self.gevrey_sq.powi(3)
    }
}

/// Budget with a reusable evaluator for `B`.
pub struct GevreyBudgetEvaluator {
    eval: BilinearEvaluator,
}

impl GevreyBudgetEvaluator {
    pub fn new(spec: &ForcingSpec) -> Self {
        Self {
            eval: BilinearEvaluator::new(spec.truncation()),
        }
    }

    pub fn evaluate(
        &mut self,
        x: &SpectralField,
        t: f64,
        nu: f64,
        beta: f64,
        spec: &ForcingSpec,
    ) -> Result<GevreyBudget> {
        if !(t >= 0.0) {
            return Err(domain("t must be non-negative"));
        }
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(domain("beta must lie in (0, 1]"));
        }
        if !x.truncation().same_as(spec.truncation()) {
            return Err(domain("field and forcing use different truncations"));
        }
        let trunc = x.truncation();
        let b = self.eval.eval(x)?;
        let g = spec.deterministic();
        let sigma = spec.sigma();
        let basis = trunc.basis();
        let mut out = GevreyBudget {
            t,
            i_b: 0.0,
            i_g: 0.0,
            i_phi: 0.0,
            gevrey_sq: 0.0,
            dissipation: 0.0,
            weight_growth: 0.0,
            qv_rate: 0.0,
        };
        for (i, (&r, &k2)) in trunc.radius().iter().zip(trunc.radius_sq()).enumerate() {
            let rb = r.powf(beta);
            let w = k2 * (2.0 * nu * t * rb).exp();
            let c = &x.coeffs()[i];
            let a = cnorm_sq(c);
            out.gevrey_sq += w * a;
            out.dissipation += k2 * w * a;
            out.weight_growth += rb * w * a;
            out.i_b -= w * re_dot(&b.coeffs()[i], c);
            if let Some(g) = g {
                out.i_g += w * re_dot(&g.coeffs()[i], c);
            }
            let s2 = sigma[i] * sigma[i];
            out.i_phi += w * s2;
            for e in &basis[i] {
                let proj = c[0] * e[0] + c[1] * e[1] + c[2] * e[2];
                out.qv_rate += s2 * w * w * proj.norm_sqr();
            }
        }
        // every representative stands for ±k; noise sums also run over two
        // polarizations
        out.gevrey_sq *= 2.0;
        out.dissipation *= 2.0;
        out.weight_growth *= 4.0 * nu;
        out.i_b *= 2.0;
        out.i_g *= 2.0;
        out.i_phi *= 4.0;
        out.qv_rate *= 8.0;
        Ok(out)
    }
}

pub fn gevrey_budget(
    x: &SpectralField,
    t: f64,
    nu: f64,
    beta: f64,
    spec: &ForcingSpec,
) -> Result<GevreyBudget> {
    GevreyBudgetEvaluator::new(spec).evaluate(x, t, nu, beta, spec)
}

fn check_interp_params(beta: f64, beta_prime: f64) -> Result<()> {
    if !(beta_prime > 0.0 && beta_prime < beta && beta <= 1.0) {
        return Err(domain(format!(
            "need 0 < beta' < beta <= 1, got beta = {beta}, beta' = {beta_prime}"
        )));
    }
    Ok(())
}

/// `c(β,β') = ((β−β')/β)(β'/β)^{β'/(β−β')}`, so that
/// `α' r^{β'} ≤ α r^β + c(β,β') α'^{β/(β−β')} α^{−β'/(β−β')}` for all `r ≥ 0`.
pub fn interp_constant(beta: f64, beta_prime: f64) -> Result<f64> {
    check_interp_params(beta, beta_prime)?;
    let d = beta - beta_prime;
    Ok(d / beta * (beta_prime / beta).powf(beta_prime / d))
}

/// The exponent `c(β,β') α'^{β/(β−β')} α^{−β'/(β−β')}` of the interpolation
/// inequality.
pub fn interp_exponent(alpha: f64, alpha_prime: f64, beta: f64, beta_prime: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha_prime > 0.0) {
        return Err(domain("alpha and alpha' must be positive"));
    }
    let c = interp_constant(beta, beta_prime)?;
    let d = beta - beta_prime;
    Ok(c * alpha_prime.powf(beta / d) * alpha.powf(-beta_prime / d))
}

/// `‖x‖_{G(α',β')} ≤ exp(c(β,β') α'^{β/(β−β')} α^{−β'/(β−β')}) ‖x‖_{G(α,β)}`,
/// compared in the log domain.
pub fn check_interpolation(
    x: &SpectralField,
    alpha: f64,
    alpha_prime: f64,
    beta: f64,
    beta_prime: f64,
) -> Result<bool> {
    let e = interp_exponent(alpha, alpha_prime, beta, beta_prime)?;
    let lhs = log_gevrey_sq(x, alpha_prime, beta_prime)?;
    let rhs = log_gevrey_sq(x, alpha, beta)? + 2.0 * e;
    if lhs == f64::NEG_INFINITY {
        return Ok(true);
    }
    Ok(lhs <= rhs + 1e-12 * rhs.abs().max(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::{simulate_from, SimConfig};
    use crate::oracle::scalar_root;
    use crate::spectral::{random_field, Truncation, Wavevector};
    use num_complex::Complex64;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit_mode(t: &Truncation, a: f64) -> SpectralField {
        let mut x = SpectralField::zeros(t);
        let z = Complex64::new(0.0, 0.0);
        x.set(Wavevector::new([0, 1, 0]).unwrap(), [z, z, Complex64::new(a, 0.0)])
            .unwrap();
        x
    }

    #[test]
    fn alpha_nu_zero_field_is_clamped() {
        let t = Truncation::new(3).unwrap();
        let a = estimate_alpha_nu(&SpectralField::zeros(&t), 0.5, 1.0, 2.0, 0.3).unwrap();
        assert_eq!(a, 0.3);
    }

    #[test]
    fn alpha_nu_matches_scalar_root_on_the_unit_shell() {
        let t = Truncation::new(2).unwrap();
        let (nu, b) = (0.4, 1.5);
        for a in [2.0, 3.0, 5.0, 10.0] {
            let x = unit_mode(&t, a);
            let est = estimate_alpha_nu(&x, nu, 1.0, b, 50.0).unwrap();
            let f = |s: f64| {
                (2.0 * a * a).ln() + 2.0 * nu * s - (4.0 * (b + 1.0) / nu).ln() + 0.5 * s.ln()
            };
            let root = scalar_root(f, 1e-12, 50.0).unwrap();
            assert!((est - root).abs() <= 1e-8 * root.max(1e-3), "{est} vs {root}");
        }
    }

    #[test]
    fn alpha_nu_decreases_with_amplitude_and_increases_with_bbar() {
        let t = Truncation::new(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_field(&t, |k| 2.0 / k.norm_sq() as f64, &mut rng);
        let a1 = estimate_alpha_nu(&x, 0.5, 1.0, 1.0, 100.0).unwrap();
        let a2 = estimate_alpha_nu(&x.scaled(2.0), 0.5, 1.0, 1.0, 100.0).unwrap();
        let a3 = estimate_alpha_nu(&x, 0.5, 1.0, 0.2, 100.0).unwrap();
        assert!(a2 < a1);
        assert!(a3 < a1);
    }

    #[test]
    fn tau_never_triggers_for_cancelling_decay() {
        // σ = 0, single mode on |k| = 1, β = 1: the weight e^{2νt} cancels the
        // decay e^{−2νt}
        let t = Truncation::new(2).unwrap();
        let spec = ForcingSpec::power_law(&t, 1.0, 0.0).unwrap();
        let mut cfg = SimConfig::new(0.5, &t, 0.01, 2.0, 0);
        cfg.t_burn = 0.0;
        let mut obs = TauObserver::new(0.5, 1.0, 2.0).unwrap();
        let st = TrajectoryState::new(unit_mode(&t, 3.0), 0, 0);
        simulate_from(st, &cfg, &spec, &mut [&mut obs], None).unwrap();
        let rec = obs.finish();
        assert_eq!(rec.tau_samples[0].tau, None);
        assert!((rec.tau_samples[0].sup_before - 18.0).abs() < 1e-10);
        assert!(rec.threshold_identity_holds());
        assert!(rec.fit_sqrt_cdf().identically_zero);
    }

    #[test]
    fn tau_is_positive_from_zero_data() {
        let t = Truncation::new(3).unwrap();
        let spec = ForcingSpec::power_law(&t, 1.0, 3.0).unwrap();
        let mut cfg = SimConfig::new(0.5, &t, 0.01, 4.0, 2);
        cfg.t_burn = 0.0;
        let mut obs = TauObserver::new(0.5, 1.0, 1.0).unwrap();
        simulate_from(TrajectoryState::zero(&t, 2, 0), &cfg, &spec, &mut [&mut obs], None)
            .unwrap();
        let rec = obs.completed();
        assert_eq!(rec.tau_samples.len(), 4);
        for s in &rec.tau_samples {
            if let Some(tau) = s.tau {
                assert!(tau > 0.0);
            }
        }
        assert!(rec.threshold_identity_holds());
        let cdf = rec.empirical_cdf();
        assert!(cdf.windows(2).all(|w| w[0].1 <= w[1].1 && w[0].0 <= w[1].0));
    }

    #[test]
    fn sqrt_fit_recovers_exact_law() {
        let mut rec = StoppingRecord::new(1.0);
        // P(τ < t) = 0.4 √t on a 1000-point quantile grid
        let n = 1000;
        for i in 0..n {
            let u = (i as f64 + 0.5) / n as f64;
            let tau = (u / 0.4).powi(2);
            rec.tau_samples.push(TauSample {
                tau: (tau < 1.0).then_some(tau),
                initial_sq: 0.0,
                threshold: 4.0,
                sup_before: 0.0,
                points: 1,
            });
        }
        let fit = rec.fit_sqrt_cdf();
        assert!(!fit.identically_zero);
        assert!((fit.a - 0.4).abs() < 0.01, "{fit:?}");
        assert!(fit.r_squared > 0.99);
    }

    #[test]
    fn budget_trivial_cases() {
        let t = Truncation::new(3).unwrap();
        let spec = ForcingSpec::power_law(&t, 1.0, 1.0).unwrap();
        let x = unit_mode(&t, 1.5);
        let b = gevrey_budget(&x, 0.7, 0.5, 1.0, &spec).unwrap();
        assert!(b.i_b.abs() < 1e-14);
        assert!((b.gevrey_sq - 2.0 * 2.25 * (0.7f64).exp()).abs() < 1e-12);
        let z = gevrey_budget(&SpectralField::zeros(&t), 0.7, 0.5, 1.0, &spec).unwrap();
        assert_eq!((z.i_b, z.i_g), (0.0, 0.0));
        let direct: f64 = t
            .modes()
            .iter()
            .zip(spec.sigma())
            .map(|(k, s)| 4.0 * k.norm_sq() as f64 * (0.7 * k.norm()).exp() * s * s)
            .sum();
        assert!((z.i_phi - direct).abs() < 1e-12 * direct);
        // at t = 0, I_φ is B₁-type: Σ|k|²σ²
        let b1 = crate::dynamics::forcing_constants(&spec, 1, 0.5).unwrap().b_p;
        let z0 = gevrey_budget(&SpectralField::zeros(&t), 0.0, 0.5, 1.0, &spec).unwrap();
        assert!((z0.i_phi - b1).abs() < 1e-12 * b1);
    }

    #[test]
    fn budget_deterministic_drift_matches_finite_difference() {
        // σ = 0: d/dt ‖X(t)‖²_{G(νt,β)} = drift exactly for the continuous flow
        let t = Truncation::new(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x0 = random_field(&t, |k| 0.5 / k.norm_sq() as f64, &mut rng);
        let g = random_field(&t, |k| 0.1 / k.norm(), &mut rng);
        let spec = ForcingSpec::power_law(&t, 1.0, 0.0)
            .unwrap()
            .with_deterministic(g)
            .unwrap();
        let (nu, beta, t0) = (0.5, 0.7, 0.3);
        let h = 1e-4;
        // RK4 for the deterministic flow
        let mut eval = crate::dynamics::BilinearEvaluator::new(&t);
        let f = |u: &SpectralField, eval: &mut crate::dynamics::BilinearEvaluator| {
            crate::dynamics::drift_with(eval, u, &spec, nu, true).unwrap()
        };
        let rk4 = |u: &SpectralField, dt: f64, eval: &mut crate::dynamics::BilinearEvaluator| {
            let k1 = f(u, eval);
            let mut u2 = u.clone();
            u2.axpy(0.5 * dt, &k1).unwrap();
            let k2 = f(&u2, eval);
            let mut u3 = u.clone();
            u3.axpy(0.5 * dt, &k2).unwrap();
            let k3 = f(&u3, eval);
            let mut u4 = u.clone();
            u4.axpy(dt, &k3).unwrap();
            let k4 = f(&u4, eval);
            let mut out = u.clone();
            out.axpy(dt / 6.0, &k1).unwrap();
            out.axpy(dt / 3.0, &k2).unwrap();
            out.axpy(dt / 3.0, &k3).unwrap();
            out.axpy(dt / 6.0, &k4).unwrap();
            out
        };
        let xp = rk4(&x0, h, &mut eval);
        let xm = rk4(&x0, -h, &mut eval);
        let n = |x: &SpectralField, s: f64| log_gevrey_sq(x, nu * s, beta).unwrap().exp();
        let fd = (n(&xp, t0 + h) - n(&xm, t0 - h)) / (2.0 * h);
        let b = gevrey_budget(&x0, t0, nu, beta, &spec).unwrap();
        assert!((b.drift(nu) - fd).abs() < 1e-6 * fd.abs().max(1.0), "{} vs {fd}", b.drift(nu));
    }

    #[test]
    fn foias_temam_ratio_is_bounded_on_random_fields() {
        let t = Truncation::new(5).unwrap();
        let spec = ForcingSpec::power_law(&t, 1.0, 1.0).unwrap();
        let mut eval = GevreyBudgetEvaluator::new(&spec);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut worst = f64::NEG_INFINITY;
        for i in 0..200 {
            let amp = 0.1 * (1 + i % 20) as f64;
            let x = random_field(&t, |k| amp / k.norm_sq() as f64, &mut rng);
            let b = eval.evaluate(&x, 0.2, 0.5, 1.0, &spec).unwrap();
            let r = b.foias_temam_ratio(0.5);
            assert!(r.is_finite());
            worst = worst.max(r);
        }
        assert!(worst < 1e6, "{worst}");
    }

    #[test]
    fn interp_constant_closed_form_and_domain() {
        assert!((interp_constant(1.0, 0.5).unwrap() - 0.25).abs() < 1e-15);
        assert!(interp_constant(0.5, 0.5).is_err());
        assert!(interp_constant(0.5, 0.7).is_err());
        assert!(interp_constant(1.2, 0.5).is_err());
        // maximize α'r^{1/2} − αr over a fine grid
        let (a, ap) = (0.4, 0.1);
        let best = (0..100_000)
            .map(|i| i as f64 * 1e-6)
            .map(|r| ap * r.sqrt() - a * r)
            .fold(f64::NEG_INFINITY, f64::max);
        let e = interp_exponent(a, ap, 1.0, 0.5).unwrap();
        assert!((best - e).abs() < 1e-9, "{best} vs {e}");
    }

    proptest! {
        #[test]
        fn young_bound_holds_per_radius(
            r in 0.0f64..1e4, a in 0.01f64..2.0, ap in 0.01f64..2.0,
            b in 0.2f64..1.0, frac in 0.05f64..0.95,
        ) {
            let bp = b * frac;
            let e = interp_exponent(a, ap, b, bp).unwrap();
            prop_assert!(ap * r.powf(bp) <= a * r.powf(b) + e + 1e-9 * (1.0 + e));
        }
    }

    #[test]
    fn interpolation_holds_on_random_fields() {
        let t = Truncation::new(6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let x = random_field(&t, |k| (-0.2 * k.norm()).exp(), &mut rng);
            assert!(check_interpolation(&x, 0.4, 0.1, 1.0, 0.5).unwrap());
        }
        assert!(check_interpolation(&SpectralField::zeros(&t), 0.4, 0.1, 1.0, 0.5).unwrap());
        assert!(check_interpolation(&SpectralField::zeros(&t), 0.4, 0.1, 0.5, 0.5).is_err());
    }
}
