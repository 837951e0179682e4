//! Time stepping of the Galerkin system and trajectory management.
//!
//! The viscous term is integrated exactly per mode; the nonlinear term and the
//! deterministic forcing enter as explicit Euler increments; the noise uses the
//! exact Ornstein–Uhlenbeck convolution variance (or a plain `√dt` increment in
//! the semi-implicit scheme). Every trajectory owns a ChaCha8 stream selected
//! by `(seed, member)`, so runs are reproducible and ensemble members are
//! independent.

mod checkpoint;

pub use checkpoint::{
    load_checkpoint, resume_checkpoint, save_checkpoint, CheckpointHeader, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};

use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{BilinearEvaluator, ForcingFamily, ForcingSpec, NoiseGain};
use crate::error::{domain, Error, Result};
use crate::spectral::{sobolev_norm, SpectralField, Truncation};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    ExpEuler,
    SemiImplicit,
}

impl Scheme {
    pub fn code(self) -> u8 {
        match self {
            Scheme::ExpEuler => 0,
            Scheme::SemiImplicit => 1,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(Scheme::ExpEuler),
            1 => Some(Scheme::SemiImplicit),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::ExpEuler => "exp_euler",
            Scheme::SemiImplicit => "semi_implicit",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exp_euler" => Ok(Scheme::ExpEuler),
            "semi_implicit" => Ok(Scheme::SemiImplicit),
            other => Err(domain(format!("unknown scheme `{other}`"))),
        }
    }
}

/// Run parameters. Construct with [`SimConfig::new`] and adjust the public
/// fields; [`SimConfig::validate`] is called by every entry point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimConfig {
    pub nu: f64,
    #[serde(serialize_with = "ser_k_max")]
    pub truncation: Truncation,
    pub dt: f64,
    pub t_burn: f64,
    pub t_sample: f64,
    pub sample_stride: usize,
    pub scheme: Scheme,
    pub seed: u64,
    pub ensemble_size: usize,
    /// `false` drops `B` and leaves the linear Stokes system.
    pub nonlinear: bool,
}

fn ser_k_max<S: serde::Serializer>(t: &Truncation, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_u32(t.k_max())
}

impl SimConfig {
    /// Defaults: exp_euler, `t_burn = 10/ν`, stride 1, one member, nonlinear.
    pub fn new(nu: f64, truncation: &Truncation, dt: f64, t_sample: f64, seed: u64) -> Self {
        Self {
            nu,
            truncation: truncation.clone(),
            dt,
            t_burn: 10.0 / nu,
            t_sample,
            sample_stride: 1,
            scheme: Scheme::ExpEuler,
            seed,
            ensemble_size: 1,
            nonlinear: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Invalid(m));
        if !(self.nu > 0.0 && self.nu <= 1.0) {
            return bad(format!("nu must lie in (0, 1], got {}", self.nu));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_burn >= 0.0 && self.t_burn.is_finite()) {
            return bad(format!("t_burn must be >= 0, got {}", self.t_burn));
        }
        if !(self.t_sample > 0.0 && self.t_sample.is_finite()) {
            return bad(format!("t_sample must be positive, got {}", self.t_sample));
        }
        if self.sample_stride == 0 {
            return bad("sample_stride must be positive".into());
        }
        if self.ensemble_size == 0 {
            return bad("ensemble_size must be positive".into());
        }
        Ok(())
    }

    /// Non-fatal stability notes.
    pub fn warnings(&self) -> Vec<String> {
        let k = self.truncation.k_max() as f64;
        let budget = self.dt * self.nu * k * k;
        let mut out = Vec::new();
        if self.scheme == Scheme::SemiImplicit && budget > 2.0 {
            out.push(format!(
                "dt*nu*k_max^2 = {budget:.3} exceeds 2; semi_implicit statistics will be biased"
            ));
        }
        out
    }

    pub fn burn_steps(&self) -> u64 {
        (self.t_burn / self.dt).round() as u64
    }

    pub fn sample_steps(&self) -> u64 {
        (self.t_sample / self.dt).round() as u64
    }

    pub fn total_steps(&self) -> u64 {
        self.burn_steps() + self.sample_steps()
    }

    /// FNV-1a digest of everything that determines a trajectory: viscosity,
    /// truncation, step, scheme, nonlinearity, seed and the forcing.
    pub fn config_hash(&self, spec: &ForcingSpec) -> u64 {
        let mut h = Fnv::new();
        h.f64(self.nu);
        h.u64(self.truncation.k_max() as u64);
        h.f64(self.dt);
        h.u64(self.scheme.code() as u64);
        h.u64(self.nonlinear as u64);
        h.u64(self.seed);
        match spec.family() {
            ForcingFamily::PowerLaw { r } => {
                h.u64(0);
                h.f64(r);
            }
            ForcingFamily::Gevrey { r, params } => {
                h.u64(1);
                h.f64(r);
                h.f64(params.alpha());
                h.f64(params.beta());
            }
        }
        h.f64(spec.amplitude());
        match spec.gain() {
            NoiseGain::Unit => h.u64(0),
            NoiseGain::Saturating { scale } => {
                h.u64(1);
                h.f64(scale);
            }
        }
        match spec.deterministic() {
            None => h.u64(0),
            Some(g) => {
                h.u64(1);
                for c in g.coeffs() {
                    for z in c {
                        h.f64(z.re);
                        h.f64(z.im);
                    }
                }
            }
        }
        h.finish()
    }
}

struct Fnv(u64);

impl Fnv {
    fn new() -> Self {
        Fnv(0xcbf2_9ce4_8422_2325)
    }
    fn bytes(&mut self, b: &[u8]) {
        for &x in b {
            self.0 ^= x as u64;
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    fn u64(&mut self, v: u64) {
        self.bytes(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.bytes(&v.to_bits().to_le_bytes());
    }
    fn finish(&self) -> u64 {
        self.0
    }
}

/// The random stream of ensemble member `member`.
pub fn member_rng(seed: u64, member: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(member);
    rng
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryState {
    pub field: SpectralField,
    pub time: f64,
    pub rng: ChaCha8Rng,
}

impl TrajectoryState {
    pub fn new(field: SpectralField, seed: u64, member: u64) -> Self {
        Self {
            field,
            time: 0.0,
            rng: member_rng(seed, member),
        }
    }

    pub fn zero(trunc: &Truncation, seed: u64, member: u64) -> Self {
        Self::new(SpectralField::zeros(trunc), seed, member)
    }
}

/// Reusable per-configuration stepping kernel.
pub struct Stepper {
    scheme: Scheme,
    dt: f64,
    nonlinear: bool,
    spec: ForcingSpec,
    eval: BilinearEvaluator,
    /// Multiplies the pre-noise update.
    damp: Vec<f64>,
    /// `σ_k` times the per-polarization noise scale.
    noise: Vec<f64>,
    b: SpectralField,
    next: SpectralField,
}

impl Stepper {
    pub fn new(cfg: &SimConfig, spec: &ForcingSpec) -> Result<Self> {
        cfg.validate()?;
        let trunc = &cfg.truncation;
        if !spec.truncation().same_as(trunc) {
            return Err(domain("forcing and configuration use different truncations"));
        }
        let dt = cfg.dt;
        let (damp, noise) = trunc
            .radius_sq()
            .iter()
            .zip(spec.sigma())
            .map(|(&k2, &s)| {
                let lam = cfg.nu * k2;
                match cfg.scheme {
                    Scheme::ExpEuler => {
                        let var = -(-2.0 * lam * dt).exp_m1() / (2.0 * lam);
                        ((-lam * dt).exp(), s * var.sqrt())
                    }
                    Scheme::SemiImplicit => {
                        let d = 1.0 / (1.0 + lam * dt);
                        (d, s * dt.sqrt() * d)
                    }
                }
            })
            .unzip();
        Ok(Self {
            scheme: cfg.scheme,
            dt,
            nonlinear: cfg.nonlinear,
            spec: spec.clone(),
            eval: BilinearEvaluator::new(trunc),
            damp,
            noise,
            b: SpectralField::zeros(trunc),
            next: SpectralField::zeros(trunc),
        })
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    /// Advances `state` by one step. On a non-finite result `state` is left
    /// untouched and a blow-up error carrying it is returned.
    pub fn step(&mut self, state: &mut TrajectoryState) -> Result<()> {
        let trunc = state.field.truncation().clone();
        if !trunc.same_as(self.spec.truncation()) {
            return Err(domain("state truncation differs from the stepper's"));
        }
        let rng_before = state.rng.clone();
        if self.nonlinear {
            self.eval.eval_into(&state.field, &mut self.b)?;
        }
        let gain = self.spec.gain().eval(&state.field);
        let g = self.spec.deterministic().map(|g| g.coeffs());
        let basis = trunc.basis();
        let dt = self.dt;
        let u = state.field.coeffs();
        let b = self.b.coeffs();
        // η per polarization is standard complex Gaussian: E|η|² = 1
        let half = std::f64::consts::FRAC_1_SQRT_2;
        for (i, dst) in self.next.coeffs_mut().iter_mut().enumerate() {
            let mut c = u[i];
            for d in 0..3 {
                let mut f = Complex64::new(0.0, 0.0);
                if self.nonlinear {
                    f -= b[i][d];
                }
                if let Some(g) = g {
                    f += g[i][d];
                }
                c[d] += f * dt;
                c[d] *= self.damp[i];
            }
            let s = self.noise[i] * gain * half;
            for e in &basis[i] {
                let re: f64 = state.rng.sample(StandardNormal);
                let im: f64 = state.rng.sample(StandardNormal);
                let z = Complex64::new(re * s, im * s);
                for d in 0..3 {
                    c[d] += z * e[d];
                }
            }
            *dst = c;
        }
        self.next.project_in_place();
        if !self.next.is_finite() {
            state.rng = rng_before;
            let snapshot = state.clone();
            return Err(Error::BlowUp {
                time: state.time + dt,
                last_norm: sobolev_norm(&state.field, 0.0),
                state: Box::new(snapshot),
            });
        }
        std::mem::swap(&mut state.field, &mut self.next);
        state.time += dt;
        Ok(())
    }
}

/// Sample-window callback. `index` counts samples from the start of the
/// sampling window, starting at 0 for the state right after burn-in.
pub trait Observer {
    fn observe(&mut self, index: u64, state: &TrajectoryState) -> Result<()>;
}

impl<F> Observer for F
where
    F: FnMut(u64, &TrajectoryState) -> Result<()>,
{
    fn observe(&mut self, index: u64, state: &TrajectoryState) -> Result<()> {
        self(index, state)
    }
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub burn_steps: u64,
    pub sample_steps: u64,
    pub samples: u64,
    pub wall_time: Duration,
    pub final_state: TrajectoryState,
}

/// Runs burn-in then the sampling window from the zero field on member 0.
pub fn simulate(
    cfg: &SimConfig,
    spec: &ForcingSpec,
    observers: &mut [&mut dyn Observer],
) -> Result<RunSummary> {
    let state = TrajectoryState::zero(&cfg.truncation, cfg.seed, 0);
    simulate_from(state, cfg, spec, observers, None)
}

/// Continues a trajectory on the global step grid `n = round(time/dt)`:
/// steps `0..burn_steps` are burn-in, the rest the sampling window, and
/// observers fire at window offsets that are multiples of `sample_stride`.
/// Stops after the full horizon, or after `max_steps` steps when given, so a
/// run can be checkpointed and resumed without changing its output.
pub fn simulate_from(
    mut state: TrajectoryState,
    cfg: &SimConfig,
    spec: &ForcingSpec,
    observers: &mut [&mut dyn Observer],
    max_steps: Option<u64>,
) -> Result<RunSummary> {
    let start = Instant::now();
    let mut stepper = Stepper::new(cfg, spec)?;
    if !state.field.truncation().same_as(&cfg.truncation) {
        return Err(domain("initial state truncation differs from the configuration"));
    }
    let burn = cfg.burn_steps();
    let total = cfg.total_steps();
    let stride = cfg.sample_stride as u64;
    let first = (state.time / cfg.dt).round() as u64;
    let last = max_steps.map_or(total, |m| (first + m).min(total));
    let mut samples = 0;
    let mut fire = |n: u64, state: &TrajectoryState| -> Result<()> {
        if n >= burn && (n - burn) % stride == 0 {
            for o in observers.iter_mut() {
                o.observe((n - burn) / stride, state)?;
            }
            samples += 1;
        }
        Ok(())
    };
    if first == 0 {
        fire(0, &state)?;
    }
    for n in first..last {
        stepper.step(&mut state)?;
        fire(n + 1, &state)?;
    }
    let burn_done = burn.clamp(first, last.max(first)) - first;
    Ok(RunSummary {
        burn_steps: burn_done,
        sample_steps: last.saturating_sub(first) - burn_done,
        samples,
        wall_time: start.elapsed(),
        final_state: state,
    })
}

/// Outcome of one ensemble member.
pub struct MemberRun<O> {
    pub member: u64,
    pub observer: O,
    pub result: Result<RunSummary>,
}

/// Runs `cfg.ensemble_size` members in parallel from the zero field, member
/// `m` on stream `m` of `cfg.seed`. Results come back in member order.
pub fn ensemble<O, F>(cfg: &SimConfig, spec: &ForcingSpec, make_observer: F) -> Vec<MemberRun<O>>
where
    O: Observer + Send,
    F: Fn(u64) -> O + Sync,
{
    (0..cfg.ensemble_size as u64)
        .into_par_iter()
        .map(|m| {
            let mut observer = make_observer(m);
            let state = TrajectoryState::zero(&cfg.truncation, cfg.seed, m);
            let result = simulate_from(state, cfg, spec, &mut [&mut observer], None);
            MemberRun {
                member: m,
                observer,
                result,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{sobolev_norm_sq, Wavevector};

    fn quiet(trunc: &Truncation) -> ForcingSpec {
        ForcingSpec::power_law(trunc, 1.0, 0.0).unwrap()
    }

    #[test]
    fn exact_stokes_decay_of_a_single_mode() {
        let t = Truncation::new(4).unwrap();
        let mut x = SpectralField::zeros(&t);
        let k = Wavevector::new([1, 2, 0]).unwrap();
        x.set(k, [Complex64::new(2.0, 0.0), Complex64::new(-1.0, 0.0), Complex64::new(0.0, 1.0)])
            .unwrap();
        let cfg = SimConfig::new(0.3, &t, 0.05, 1.0, 1);
        let mut st = TrajectoryState::new(x.clone(), 1, 0);
        let mut stepper = Stepper::new(&cfg, &quiet(&t)).unwrap();
        for _ in 0..40 {
            stepper.step(&mut st).unwrap();
        }
        let expect = (-0.3 * 5.0 * st.time).exp() * sobolev_norm(&x, 0.0);
        assert!((sobolev_norm(&st.field, 0.0) - expect).abs() < 1e-13 * expect);
    }

    #[test]
    fn zero_stays_zero_without_forcing() {
        let t = Truncation::new(3).unwrap();
        let cfg = SimConfig::new(0.5, &t, 0.1, 1.0, 9);
        let mut st = TrajectoryState::zero(&t, 9, 0);
        let mut stepper = Stepper::new(&cfg, &quiet(&t)).unwrap();
        for _ in 0..10 {
            stepper.step(&mut st).unwrap();
        }
        assert_eq!(st.field, SpectralField::zeros(&t));
    }

    #[test]
    fn steps_preserve_incompressibility() {
        let t = Truncation::new(5).unwrap();
        let spec = ForcingSpec::power_law(&t, 1.0, 1.0).unwrap();
        let cfg = SimConfig::new(0.5, &t, 0.01, 1.0, 3);
        let mut st = TrajectoryState::zero(&t, 3, 0);
        let mut stepper = Stepper::new(&cfg, &spec).unwrap();
        for _ in 0..50 {
            stepper.step(&mut st).unwrap();
            let scale = sobolev_norm(&st.field, 1.0);
            assert!(st.field.max_divergence() <= 1e-13 * scale.max(1.0));
        }
    }

    #[test]
    fn observers_fire_on_the_sampling_grid() {
        let t = Truncation::new(2).unwrap();
        let spec = ForcingSpec::power_law(&t, 1.0, 1.0).unwrap();
        let mut cfg = SimConfig::new(0.5, &t, 0.1, 1.0, 4);
        cfg.t_burn = 0.5;
        cfg.sample_stride = 3;
        let mut seen = Vec::new();
        let mut obs = |i: u64, s: &TrajectoryState| {
            seen.push((i, s.time));
            Ok(())
        };
        let run = simulate(&cfg, &spec, &mut [&mut obs]).unwrap();
        assert_eq!(run.burn_steps, 5);
        assert_eq!(run.sample_steps, 10);
        let idx: Vec<u64> = seen.iter().map(|s| s.0).collect();
        assert_eq!(idx, vec![0, 1, 2, 3]);
        assert!((seen[1].1 - 0.8).abs() < 1e-12);
        assert_eq!(run.samples, 4);
    }

    #[test]
    fn zero_observers_match_manual_stepping() {
        let t = Truncation::new(3).unwrap();
        let spec = ForcingSpec::power_law(&t, 1.0, 0.7).unwrap();
        let mut cfg = SimConfig::new(0.5, &t, 0.02, 0.2, 11);
        cfg.t_burn = 0.1;
        let run = simulate(&cfg, &spec, &mut []).unwrap();
        let mut st = TrajectoryState::zero(&t, 11, 0);
        let mut stepper = Stepper::new(&cfg, &spec).unwrap();
        for _ in 0..15 {
            stepper.step(&mut st).unwrap();
        }
        assert_eq!(run.final_state, st);
    }

    #[test]
    fn split_run_equals_uninterrupted_run() {
        let t = Truncation::new(3).unwrap();
        let spec = ForcingSpec::power_law(&t, 1.0, 1.0).unwrap();
        let mut cfg = SimConfig::new(0.5, &t, 0.02, 0.3, 5);
        cfg.t_burn = 0.1;
        let mut full = Vec::new();
        let mut o = |_: u64, s: &TrajectoryState| {
            full.push(sobolev_norm_sq(&s.field, 1.0));
            Ok(())
        };
        let whole = simulate(&cfg, &spec, &mut [&mut o]).unwrap();
        let mut parts = Vec::new();
        let mut o = |_: u64, s: &TrajectoryState| {
            parts.push(sobolev_norm_sq(&s.field, 1.0));
            Ok(())
        };
        let st = TrajectoryState::zero(&t, 5, 0);
        let half = simulate_from(st, &cfg, &spec, &mut [&mut o], Some(9)).unwrap();
        let rest = simulate_from(half.final_state, &cfg, &spec, &mut [&mut o], None).unwrap();
        assert_eq!(rest.final_state, whole.final_state);
        assert_eq!(parts, full);
    }

    #[test]
    fn blow_up_returns_previous_state() {
        let t = Truncation::new(2).unwrap();
        let big = SpectralField::solenoidal_from_fn(&t, |k| {
            let s = 1e200 * k.norm();
            [Complex64::new(s, 0.0), Complex64::new(0.0, s), Complex64::new(s, s)]
        });
        let spec = quiet(&t);
        let cfg = SimConfig::new(0.5, &t, 1.0, 1.0, 0);
        let st = TrajectoryState::new(big.clone(), 0, 0);
        let mut work = st.clone();
        let mut stepper = Stepper::new(&cfg, &spec).unwrap();
        match stepper.step(&mut work) {
            Err(Error::BlowUp { state, .. }) => assert_eq!(*state, st),
            other => panic!("expected blow-up, got {other:?}"),
        }
        assert_eq!(work, st);
    }

    #[test]
    fn ensemble_members_draw_independent_increments() {
        // one step from zero: the field equals the noise increment
        let t = Truncation::new(3).unwrap();
        let spec = ForcingSpec::power_law(&t, 0.0001, 1.0).unwrap();
        let mut cfg = SimConfig::new(0.5, &t, 0.01, 0.01, 21);
        cfg.t_burn = 0.0;
        cfg.ensemble_size = 4;
        cfg.nonlinear = false;
        let runs = ensemble(&cfg, &spec, |_| |_: u64, _: &TrajectoryState| Ok(()));
        let series: Vec<Vec<f64>> = runs
            .into_iter()
            .map(|r| {
                let f = r.result.unwrap().final_state.field;
                f.coeffs().iter().flat_map(|c| c.iter().flat_map(|z| [z.re, z.im])).collect()
            })
            .collect();
        let n = series[0].len() as f64;
        let corr = |a: &[f64], b: &[f64]| {
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
            dot / (na * nb)
        };
        for i in 0..4 {
            for j in i + 1..4 {
                assert_ne!(series[i], series[j]);
                // the coordinates are not independent (transversality), so
                // allow 5 / sqrt(n)
                assert!(corr(&series[i], &series[j]).abs() < 5.0 / n.sqrt());
            }
        }
    }

    #[test]
    fn equal_seeds_reproduce() {
        let t = Truncation::new(3).unwrap();
        let spec = ForcingSpec::power_law(&t, 1.0, 1.0).unwrap();
        let mut cfg = SimConfig::new(0.5, &t, 0.02, 0.2, 77);
        cfg.t_burn = 0.0;
        let a = simulate(&cfg, &spec, &mut []).unwrap().final_state;
        let b = simulate(&cfg, &spec, &mut []).unwrap().final_state;
        assert_eq!(a, b);
        cfg.seed = 78;
        assert_ne!(a, simulate(&cfg, &spec, &mut []).unwrap().final_state);
    }

    #[test]
    fn config_validation_and_hash() {
        let t = Truncation::new(3).unwrap();
        let spec = ForcingSpec::power_law(&t, 1.0, 1.0).unwrap();
        let cfg = SimConfig::new(0.5, &t, 0.02, 1.0, 1);
        cfg.validate().unwrap();
        let mut bad = cfg.clone();
        bad.nu = 1.5;
        assert!(bad.validate().is_err());
        let mut other = cfg.clone();
        other.seed = 2;
        assert_ne!(cfg.config_hash(&spec), other.config_hash(&spec));
        let spec2 = ForcingSpec::power_law(&t, 1.0, 2.0).unwrap();
        assert_ne!(cfg.config_hash(&spec), cfg.config_hash(&spec2));
        let mut si = cfg.clone();
        si.scheme = Scheme::SemiImplicit;
        si.dt = 1.0;
        assert_eq!(si.warnings().len(), 1);
    }
}
