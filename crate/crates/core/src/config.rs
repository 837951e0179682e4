//! Flat `key = value` experiment configuration.
//!
//! ```text
//! # comments run to the end of the line
//! nu = 0.5
//! truncation.k_max = 8
//! forcing.family = gevrey
//! analysis.p = 1, 2
//! ```
//!
//! Unknown keys, duplicates and malformed values are reported with their line.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::dynamics::{ForcingFamily, ForcingSpec, NoiseGain};
use crate::error::{Error, Result};
use crate::integrator::{Scheme, SimConfig};
use crate::spectral::{GevreyParams, Truncation};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub nu: f64,
    pub k_max: u32,
    pub dt: f64,
    /// Defaults to `10/ν`.
    pub t_burn: Option<f64>,
    pub t_sample: f64,
    pub sample_stride: usize,
    pub scheme: Scheme,
    pub nonlinear: bool,
    pub seed: u64,
    pub ensemble_size: usize,
    pub forcing: ForcingConfig,
    pub analysis: AnalysisConfig,
    pub output_dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ForcingConfig {
    /// `power_law` or `gevrey`
    pub family: String,
    pub r: f64,
    pub alpha: f64,
    pub beta: f64,
    pub amplitude: f64,
    /// Saturating noise gain scale; unit gain when absent.
    pub gain_scale: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnalysisConfig {
    pub p: Vec<u32>,
    pub gamma: f64,
    /// `α` of the stronger Gevrey class in interpolation checks.
    pub gevrey_alpha: f64,
    pub alpha_prime: Vec<f64>,
    pub beta_prime: f64,
    pub tau: bool,
    pub alpha_nu: bool,
    /// Stopping-time window; defaults to `forcing.alpha`, the range on
    /// which the forcing's time-weighted Gevrey norm stays finite.
    pub tau_horizon: Option<f64>,
    /// Random fields for the deterministic checks.
    pub random_fields: usize,
    /// Exact Gaussian draws for the linear-system checks.
    pub ou_samples: usize,
    /// Also run at `dt/2` and judge stationarity on the Richardson
    /// combination, which cancels the first-order time-step bias.
    pub extrapolate: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            nu: 0.5,
            k_max: 4,
            dt: 0.01,
            t_burn: None,
            t_sample: 200.0,
            sample_stride: 10,
            scheme: Scheme::ExpEuler,
            nonlinear: true,
            seed: 1,
            ensemble_size: 1,
            forcing: ForcingConfig {
                family: "gevrey".into(),
                r: 1.0,
                alpha: 0.3,
                beta: 1.0,
                amplitude: 1.0,
                gain_scale: None,
            },
            analysis: AnalysisConfig {
                p: vec![1, 2],
                gamma: 0.25,
                gevrey_alpha: 0.4,
                alpha_prime: vec![0.1],
                beta_prime: 0.5,
                tau: true,
                alpha_nu: true,
                tau_horizon: None,
                random_fields: 1000,
                ou_samples: 10_000,
                extrapolate: false,
            },
            output_dir: PathBuf::from("out"),
        }
    }
}

const KEYS: &[&str] = &[
    "nu",
    "truncation.k_max",
    "dt",
    "t_burn",
    "t_sample",
    "sample_stride",
    "scheme",
    "nonlinear",
    "rng.seed",
    "ensemble.size",
    "forcing.family",
    "forcing.r",
    "forcing.alpha",
    "forcing.beta",
    "forcing.amplitude",
    "forcing.gain_scale",
    "analysis.p",
    "analysis.gamma",
    "analysis.gevrey.alpha",
    "analysis.gevrey.alpha_prime",
    "analysis.gevrey.beta_prime",
    "analysis.tau",
    "analysis.alpha_nu",
    "analysis.tau.horizon",
    "analysis.random_fields",
    "analysis.ou_samples",
    "analysis.extrapolate",
    "output.dir",
];

struct Entry {
    line: usize,
    value: String,
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, path)
    }

    /// Parses `text`, filling unspecified keys from [`Default`]. `path` is
    /// used only in error messages.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let err = |line: usize, key: &str, message: String| Error::Config {
            path: path.to_path_buf(),
            line,
            key: key.to_string(),
            message,
        };
        let mut entries: HashMap<String, Entry> = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((k, v)) = content.split_once('=') else {
                return Err(err(line, content, "expected `key = value`".into()));
            };
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(err(line, k, "unknown key".into()));
            }
            if v.is_empty() {
                return Err(err(line, k, "missing value".into()));
            }
            if let Some(prev) = entries.get(k) {
                return Err(err(line, k, format!("duplicate key, first set on line {}", prev.line)));
            }
            entries.insert(
                k.to_string(),
                Entry {
                    line,
                    value: v.to_string(),
                },
            );
        }

        let mut c = ExperimentConfig::default();
        let line_of = |k: &str| entries.get(k).map_or(0, |e| e.line);
        fn parse_as<T: std::str::FromStr>(e: &Entry) -> std::result::Result<T, String>
        where
            T::Err: std::fmt::Display,
        {
            e.value.parse::<T>().map_err(|x| format!("cannot parse `{}`: {x}", e.value))
        }
        macro_rules! set {
            ($key:literal, $field:expr) => {
                if let Some(e) = entries.get($key) {
                    $field = parse_as(e).map_err(|m| err(e.line, $key, m))?;
                }
            };
        }
        macro_rules! set_opt {
            ($key:literal, $field:expr) => {
                if let Some(e) = entries.get($key) {
                    $field = Some(parse_as(e).map_err(|m| err(e.line, $key, m))?);
                }
            };
        }
        macro_rules! set_list {
            ($key:literal, $field:expr) => {
                if let Some(e) = entries.get($key) {
                    $field = e
                        .value
                        .split(',')
                        .map(|s| {
                            s.trim()
                                .parse()
                                .map_err(|x| err(e.line, $key, format!("cannot parse `{}`: {x}", s.trim())))
                        })
                        .collect::<Result<Vec<_>>>()?;
                }
            };
        }
        set!("nu", c.nu);
        set!("truncation.k_max", c.k_max);
        set!("dt", c.dt);
        if let Some(e) = entries.get("t_burn") {
            c.t_burn = Some(parse_as(e).map_err(|m| err(e.line, "t_burn", m))?);
        } else {
            c.t_burn = None;
        }
        set!("t_sample", c.t_sample);
        set!("sample_stride", c.sample_stride);
        if let Some(e) = entries.get("scheme") {
            c.scheme = e
                .value
                .parse()
                .map_err(|_| err(e.line, "scheme", format!("expected exp_euler or semi_implicit, got `{}`", e.value)))?;
        }
        set!("nonlinear", c.nonlinear);
        set!("rng.seed", c.seed);
        set!("ensemble.size", c.ensemble_size);
        set!("forcing.family", c.forcing.family);
        set!("forcing.r", c.forcing.r);
        set!("forcing.alpha", c.forcing.alpha);
        set!("forcing.beta", c.forcing.beta);
        set!("forcing.amplitude", c.forcing.amplitude);
        set_opt!("forcing.gain_scale", c.forcing.gain_scale);
        set_list!("analysis.p", c.analysis.p);
        set!("analysis.gamma", c.analysis.gamma);
        set!("analysis.gevrey.alpha", c.analysis.gevrey_alpha);
        set_list!("analysis.gevrey.alpha_prime", c.analysis.alpha_prime);
        set!("analysis.gevrey.beta_prime", c.analysis.beta_prime);
        set!("analysis.tau", c.analysis.tau);
        set!("analysis.alpha_nu", c.analysis.alpha_nu);
        set_opt!("analysis.tau.horizon", c.analysis.tau_horizon);
        set!("analysis.random_fields", c.analysis.random_fields);
        set!("analysis.ou_samples", c.analysis.ou_samples);
        set!("analysis.extrapolate", c.analysis.extrapolate);
        if let Some(e) = entries.get("output.dir") {
            c.output_dir = PathBuf::from(&e.value);
        }

        c.validate_with(|key, message| err(line_of(key), key, message))?;
        Ok(c)
    }

    /// Checks value ranges and combinations.
    pub fn validate(&self) -> Result<()> {
        self.validate_with(|key, message| Error::Config {
            path: PathBuf::from("<config>"),
            line: 0,
            key: key.to_string(),
            message,
        })
    }

    fn validate_with(&self, err: impl Fn(&str, String) -> Error) -> Result<()> {
        if !(self.nu > 0.0 && self.nu <= 1.0) {
            return Err(err("nu", format!("must lie in (0, 1], got {}", self.nu)));
        }
        if self.k_max == 0 || self.k_max > 64 {
            return Err(err("truncation.k_max", format!("must lie in 1..=64, got {}", self.k_max)));
        }
        if !(self.dt > 0.0) {
            return Err(err("dt", "must be positive".into()));
        }
        if let Some(t) = self.t_burn {
            if !(t >= 0.0) {
                return Err(err("t_burn", "must be non-negative".into()));
            }
        }
        if !(self.t_sample > 0.0) {
            return Err(err("t_sample", "must be positive".into()));
        }
        if self.sample_stride == 0 {
            return Err(err("sample_stride", "must be positive".into()));
        }
        if self.ensemble_size == 0 {
            return Err(err("ensemble.size", "must be positive".into()));
        }
        let f = &self.forcing;
        if f.family != "gevrey" && f.family != "power_law" {
            return Err(err(
                "forcing.family",
                format!("expected gevrey or power_law, got `{}`", f.family),
            ));
        }
        if !(f.r > 0.0) {
            return Err(err("forcing.r", "must be positive".into()));
        }
        if !(f.alpha > 0.0) {
            return Err(err("forcing.alpha", "must be positive".into()));
        }
        if !(f.beta > 0.0 && f.beta <= 1.0) {
            return Err(err("forcing.beta", "must lie in (0, 1]".into()));
        }
        if !(f.amplitude >= 0.0) {
            return Err(err("forcing.amplitude", "must be non-negative".into()));
        }
        if let Some(s) = f.gain_scale {
            if !(s > 0.0) {
                return Err(err("forcing.gain_scale", "must be positive".into()));
            }
        }
        let a = &self.analysis;
        if a.p.is_empty() || a.p.iter().any(|&p| p < 1) {
            return Err(err("analysis.p", "every p must be at least 1".into()));
        }
        if !(a.gamma > 0.0) {
            return Err(err("analysis.gamma", "must be positive".into()));
        }
        if !(a.gevrey_alpha > 0.0) {
            return Err(err("analysis.gevrey.alpha", "must be positive".into()));
        }
        if a.alpha_prime.is_empty() || a.alpha_prime.iter().any(|&x| !(x > 0.0)) {
            return Err(err("analysis.gevrey.alpha_prime", "every value must be positive".into()));
        }
        if !(a.beta_prime > 0.0 && a.beta_prime < f.beta) {
            return Err(err(
                "analysis.gevrey.beta_prime",
                format!(
                    "need 0 < beta' < forcing.beta = {}, got {}",
                    f.beta, a.beta_prime
                ),
            ));
        }
        if let Some(h) = a.tau_horizon {
            if !(h > 0.0 && h.is_finite()) {
                return Err(err("analysis.tau.horizon", "must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn truncation(&self) -> Result<Truncation> {
        Truncation::new(self.k_max)
    }

    pub fn forcing_spec(&self, trunc: &Truncation) -> Result<ForcingSpec> {
        let f = &self.forcing;
        let family = match f.family.as_str() {
            "gevrey" => ForcingFamily::Gevrey {
                r: f.r,
                params: GevreyParams::new(f.alpha, f.beta)?,
            },
            _ => ForcingFamily::PowerLaw { r: f.r },
        };
        let spec = ForcingSpec::new(trunc, family, f.amplitude)?;
        match f.gain_scale {
            Some(scale) => spec.with_gain(NoiseGain::Saturating { scale }),
            None => Ok(spec),
        }
    }

    pub fn sim_config(&self, trunc: &Truncation) -> SimConfig {
        let mut s = SimConfig::new(self.nu, trunc, self.dt, self.t_sample, self.seed);
        if let Some(t) = self.t_burn {
            s.t_burn = t;
        }
        s.sample_stride = self.sample_stride;
        s.scheme = self.scheme;
        s.nonlinear = self.nonlinear;
        s.ensemble_size = self.ensemble_size;
        s
    }

    pub fn tau_horizon(&self) -> f64 {
        self.analysis.tau_horizon.unwrap_or(self.forcing.alpha)
    }

    /// Non-fatal concerns about the analysis settings.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.tau_horizon() > self.forcing.alpha {
            w.push(format!(
                "analysis.tau.horizon = {} exceeds forcing.alpha = {}; the noise drives |X(t)|_G(nu t) up deterministically past that time",
                self.tau_horizon(),
                self.forcing.alpha
            ));
        }
        w
    }

    /// `2γ < β/β' − 1` for every `α'`.
    pub fn log_moment_condition(&self) -> bool {
        2.0 * self.analysis.gamma < self.forcing.beta / self.analysis.beta_prime - 1.0
    }
}
