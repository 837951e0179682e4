//! The Kolmogorov operator
//! `L_N f(x) = ½ tr(φφ* D²f(x)) + (−νAx − B(x) + g, Df(x))`
//! of the Galerkin diffusion, applied to test functionals with structured
//! Hessians.
//!
//! The noise acts on four real unit directions per stored representative:
//! `cos(k·ξ)` and `sin(k·ξ)` along each polarization, each with variance
//! `σ_k²`. Hessians are sums of diagonal terms `c‖h‖²_m` and rank-one terms
//! `c⟨d, h⟩²`, so the trace costs one pass over the modes.

use serde::Serialize;

use crate::dynamics::{drift_with, BilinearEvaluator, ForcingSpec};
use crate::error::{domain, Result};
use crate::integrator::{Observer, TrajectoryState};
use crate::measure::MomentAccumulator;
use crate::spectral::{apply_a_power, sobolev_norm_sq, SpectralField};

/// One summand of a Hessian quadratic form.
#[derive(Clone, Debug)]
pub enum HessianTerm {
    /// `coef · ‖h‖²_order`
    Diagonal { coef: f64, order: f64 },
    /// `coef · ⟨direction, h⟩²`
    RankOne { coef: f64, direction: SpectralField },
}

/// `D²f(x)(h, h)` from its terms.
pub fn hessian_quadform(terms: &[HessianTerm], h: &SpectralField) -> Result<f64> {
    let mut q = 0.0;
    for t in terms {
        q += match t {
            HessianTerm::Diagonal { coef, order } => coef * sobolev_norm_sq(h, *order),
            HessianTerm::RankOne { coef, direction } => coef * direction.inner(h)?.powi(2),
        };
    }
    Ok(q)
}

/// A twice differentiable functional on the truncated phase space.
pub trait TestFunctional: Send + Sync {
    fn id(&self) -> String;
    fn value(&self, x: &SpectralField) -> f64;
    /// The gradient with respect to the `L²` inner product.
    fn gradient(&self, x: &SpectralField) -> SpectralField;
    fn hessian(&self, x: &SpectralField) -> Vec<HessianTerm>;
}

/// `f(x) = (1 + ‖x‖_p²)^{−ε_p}` with `ε_p = 1/(2p−1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LyapunovFunctional {
    p: u32,
    eps: f64,
}

impl LyapunovFunctional {
    pub fn new(p: u32) -> Result<Self> {
        if p < 1 {
            return Err(domain("p must be at least 1"));
        }
        Ok(Self {
            p,
            eps: 1.0 / (2 * p - 1) as f64,
        })
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    fn base(&self, x: &SpectralField) -> f64 {
        1.0 + sobolev_norm_sq(x, self.p as f64)
    }
}

impl TestFunctional for LyapunovFunctional {
    fn id(&self) -> String {
        format!("lyapunov_p{}", self.p)
    }

    fn value(&self, x: &SpectralField) -> f64 {
        self.base(x).powf(-self.eps)
    }

    fn gradient(&self, x: &SpectralField) -> SpectralField {
        let c = -2.0 * self.eps * self.base(x).powf(-self.eps - 1.0);
        let mut g = apply_a_power(x, self.p as f64);
        g.scale(c);
        g
    }

    fn hessian(&self, x: &SpectralField) -> Vec<HessianTerm> {
        let n = self.base(x);
        let e = self.eps;
        vec![
            HessianTerm::Diagonal {
                coef: -2.0 * e * n.powf(-e - 1.0),
                order: self.p as f64,
            },
            HessianTerm::RankOne {
                coef: 4.0 * e * (e + 1.0) * n.powf(-e - 2.0),
                direction: apply_a_power(x, self.p as f64),
            },
        ]
    }
}

/// `f(x) = |x|²`
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct QuadraticFunctional;

impl TestFunctional for QuadraticFunctional {
    fn id(&self) -> String {
        "quadratic_l2".into()
    }

    fn value(&self, x: &SpectralField) -> f64 {
        sobolev_norm_sq(x, 0.0)
    }

    fn gradient(&self, x: &SpectralField) -> SpectralField {
        x.scaled(2.0)
    }

    fn hessian(&self, _x: &SpectralField) -> Vec<HessianTerm> {
        vec![HessianTerm::Diagonal { coef: 2.0, order: 0.0 }]
    }
}

/// `Σ cᵢ fᵢ`
pub struct LinearCombination {
    terms: Vec<(f64, Box<dyn TestFunctional>)>,
}

impl LinearCombination {
    pub fn new() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn with(mut self, c: f64, f: impl TestFunctional + 'static) -> Self {
        self.terms.push((c, Box::new(f)));
        self
    }
}

impl Default for LinearCombination {
    fn default() -> Self {
        Self::new()
    }
}

impl TestFunctional for LinearCombination {
    fn id(&self) -> String {
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(c, f)| format!("{c}*{}", f.id()))
            .collect();
        parts.join("+")
    }

    fn value(&self, x: &SpectralField) -> f64 {
        self.terms.iter().map(|(c, f)| c * f.value(x)).sum()
    }

    fn gradient(&self, x: &SpectralField) -> SpectralField {
        let mut g = SpectralField::zeros(x.truncation());
        for (c, f) in &self.terms {
            g.axpy(*c, &f.gradient(x)).expect("same truncation");
        }
        g
    }

    fn hessian(&self, x: &SpectralField) -> Vec<HessianTerm> {
        let mut out = Vec::new();
        for (c, f) in &self.terms {
            for t in f.hessian(x) {
                out.push(match t {
                    HessianTerm::Diagonal { coef, order } => HessianTerm::Diagonal {
                        coef: c * coef,
                        order,
                    },
                    HessianTerm::RankOne { coef, direction } => HessianTerm::RankOne {
                        coef: c * coef,
                        direction,
                    },
                });
            }
        }
        out
    }
}

/// `½ tr(φφ* D²f(x))` over the noise directions, scaled by the squared gain.
pub fn trace_term(f: &dyn TestFunctional, x: &SpectralField, spec: &ForcingSpec) -> Result<f64> {
    let trunc = x.truncation();
    if !trunc.same_as(spec.truncation()) {
        return Err(domain("field and forcing use different truncations"));
    }
    let sigma = spec.sigma();
    let r2 = trunc.radius_sq();
    let basis = trunc.basis();
    let mut total = 0.0;
    for term in f.hessian(x) {
        total += match term {
            // four unit directions per representative, each with ‖·‖²_m = |k|^{2m}
            HessianTerm::Diagonal { coef, order } => {
                2.0 * coef
                    * sigma
                        .iter()
                        .zip(r2)
                        .map(|(s, k2)| s * s * k2.powf(order))
                        .sum::<f64>()
            }
            // ⟨d, cos⟩² + ⟨d, sin⟩² = 2|d̂(k)·e|² per polarization
            HessianTerm::RankOne { coef, direction } => {
                coef * direction
                    .coeffs()
                    .iter()
                    .zip(basis)
                    .zip(sigma)
                    .map(|((d, pols), s)| {
                        pols.iter()
                            .map(|e| (d[0] * e[0] + d[1] * e[1] + d[2] * e[2]).norm_sqr())
                            .sum::<f64>()
                            * s
                            * s
                    })
                    .sum::<f64>()
            }
        };
    }
    let m = spec.gain().eval(x);
    Ok(total * m * m)
}

/// The two parts of `L_N f(x)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GeneratorTerms {
    pub trace: f64,
    pub drift: f64,
    pub total: f64,
}

/// `L_N` for one forcing and viscosity, with a reusable evaluator for `B`.
pub struct KolmogorovOperator {
    spec: ForcingSpec,
    nu: f64,
    nonlinear: bool,
    eval: BilinearEvaluator,
}

impl KolmogorovOperator {
    pub fn new(spec: &ForcingSpec, nu: f64, nonlinear: bool) -> Result<Self> {
        if !(nu > 0.0) {
            return Err(domain("viscosity must be positive"));
        }
        Ok(Self {
            spec: spec.clone(),
            nu,
            nonlinear,
            eval: BilinearEvaluator::new(spec.truncation()),
        })
    }

    pub fn apply(&mut self, f: &dyn TestFunctional, x: &SpectralField) -> Result<GeneratorTerms> {
        let trace = trace_term(f, x, &self.spec)?;
        let b = drift_with(&mut self.eval, x, &self.spec, self.nu, self.nonlinear)?;
        let drift = b.inner(&f.gradient(x))?;
        Ok(GeneratorTerms {
            trace,
            drift,
            total: trace + drift,
        })
    }
}

/// `L_N f(x)` for the full nonlinear system.
pub fn apply_ln(
    x: &SpectralField,
    f: &dyn TestFunctional,
    spec: &ForcingSpec,
    nu: f64,
) -> Result<f64> {
    Ok(KolmogorovOperator::new(spec, nu, true)?.apply(f, x)?.total)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StationarityResidual {
    pub functional: String,
    pub mean: f64,
    pub stderr: f64,
    pub samples: u64,
}

impl StationarityResidual {
    /// `|mean| ≤ z · stderr`
    pub fn within(&self, z: f64) -> bool {
        self.mean.abs() <= z * self.stderr
    }
}

/// Richardson combination `2·fine − coarse` of independent residual
/// estimates at steps `dt` and `dt/2`. The first-order time-step bias
/// cancels; standard errors add in quadrature.
pub fn richardson_residual(coarse: &StationarityResidual, fine: &StationarityResidual) -> StationarityResidual {
    StationarityResidual {
        functional: fine.functional.clone(),
        mean: 2.0 * fine.mean - coarse.mean,
        stderr: (4.0 * fine.stderr * fine.stderr + coarse.stderr * coarse.stderr).sqrt(),
        samples: fine.samples + coarse.samples,
    }
}

/// Batch-means average of `L_N f` over a sequence of samples.
pub fn stationarity_residual<'a, I>(
    samples: I,
    f: &dyn TestFunctional,
    spec: &ForcingSpec,
    nu: f64,
    nonlinear: bool,
) -> Result<StationarityResidual>
where
    I: IntoIterator<Item = &'a SpectralField>,
{
    let mut op = KolmogorovOperator::new(spec, nu, nonlinear)?;
    let mut acc = MomentAccumulator::new(f.id());
    for x in samples {
        acc.push(op.apply(f, x)?.total);
    }
    Ok(StationarityResidual {
        functional: f.id(),
        mean: acc.mean(),
        stderr: acc.stderr(),
        samples: acc.count(),
    })
}

/// Accumulates `L_N f` along a trajectory.
pub struct ResidualObserver<F: TestFunctional> {
    f: F,
    op: KolmogorovOperator,
    acc: MomentAccumulator,
}

impl<F: TestFunctional> ResidualObserver<F> {
    pub fn new(f: F, spec: &ForcingSpec, nu: f64, nonlinear: bool) -> Result<Self> {
        let acc = MomentAccumulator::new(f.id());
        Ok(Self {
            op: KolmogorovOperator::new(spec, nu, nonlinear)?,
            f,
            acc,
        })
    }

    pub fn accumulator(&self) -> &MomentAccumulator {
        &self.acc
    }

    pub fn residual(&self) -> StationarityResidual {
        StationarityResidual {
            functional: self.f.id(),
            mean: self.acc.mean(),
            stderr: self.acc.stderr(),
            samples: self.acc.count(),
        }
    }
}

impl<F: TestFunctional> Observer for ResidualObserver<F> {
    fn observe(&mut self, _index: u64, state: &TrajectoryState) -> Result<()> {
        let v = self.op.apply(&self.f, &state.field)?.total;
        self.acc.push(v);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{ou_sample_stationary, OuSpec};
    use crate::spectral::{random_field, sobolev_norm_sq, Truncation, Wavevector};
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_field(t: &Truncation, seed: u64) -> SpectralField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        random_field(t, |k| 1.0 / k.norm_sq() as f64, &mut rng)
    }

    #[test]
    fn richardson_cancels_linear_bias() {
        let r = |mean: f64, stderr: f64| StationarityResidual {
            functional: "f".into(),
            mean,
            stderr,
            samples: 10,
        };
        let x = richardson_residual(&r(0.3 + 0.2, 0.04), &r(0.3 + 0.1, 0.015));
        assert!((x.mean - 0.3).abs() < 1e-15);
        assert!((x.stderr - 0.05).abs() < 1e-15);
        assert_eq!(x.samples, 20);
    }

    #[test]
    fn lyapunov_at_zero() {
        let t = Truncation::new(3).unwrap();
        let f = LyapunovFunctional::new(2).unwrap();
        let z = SpectralField::zeros(&t);
        assert_eq!(f.value(&z), 1.0);
        assert_eq!(f.gradient(&z), z);
        assert_eq!(LyapunovFunctional::new(1).unwrap().eps(), 1.0);
        assert!(LyapunovFunctional::new(0).is_err());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let t = Truncation::new(4).unwrap();
        let fs: Vec<Box<dyn TestFunctional>> = vec![
            Box::new(LyapunovFunctional::new(1).unwrap()),
            Box::new(LyapunovFunctional::new(2).unwrap()),
            Box::new(QuadraticFunctional),
            Box::new(
                LinearCombination::new()
                    .with(0.5, QuadraticFunctional)
                    .with(-3.0, LyapunovFunctional::new(1).unwrap()),
            ),
        ];
        for (i, f) in fs.iter().enumerate() {
            let x = rand_field(&t, 10 + i as u64);
            let h = rand_field(&t, 20 + i as u64);
            let eps = 1e-4;
            let at = |s: f64| {
                let mut y = x.clone();
                y.axpy(s, &h).unwrap();
                f.value(&y)
            };
            let d1 = (at(eps) - at(-eps)) / (2.0 * eps);
            let d2 = (at(eps) - 2.0 * at(0.0) + at(-eps)) / (eps * eps);
            let g = f.gradient(&x).inner(&h).unwrap();
            let q = hessian_quadform(&f.hessian(&x), &h).unwrap();
            assert!((g - d1).abs() <= 1e-6 * g.abs().max(1e-3), "{}: {g} vs {d1}", f.id());
            assert!((q - d2).abs() <= 1e-5 * q.abs().max(1e-3), "{}: {q} vs {d2}", f.id());
        }
    }

    #[test]
    fn single_mode_closed_form() {
        let t = Truncation::new(3).unwrap();
        let spec = ForcingSpec::power_law(&t, 1.0, 0.0).unwrap();
        let mut x = SpectralField::zeros(&t);
        let z = Complex64::new(0.0, 0.0);
        x.set(Wavevector::new([1, 1, 1]).unwrap(), [Complex64::new(1.0, 0.3), Complex64::new(-1.0, -0.3), z])
            .unwrap();
        for p in 1..3 {
            let f = LyapunovFunctional::new(p).unwrap();
            let e = f.eps();
            let nu = 0.4;
            let n = sobolev_norm_sq(&x, p as f64);
            let expect = 2.0 * e * nu * sobolev_norm_sq(&x, p as f64 + 1.0) * (1.0 + n).powf(-e - 1.0);
            let got = apply_ln(&x, &f, &spec, nu).unwrap();
            assert!((got - expect).abs() < 1e-12 * expect, "{got} vs {expect}");
            assert!(got > 0.0);
        }
    }

    #[test]
    fn zero_field_has_only_the_trace() {
        let t = Truncation::new(3).unwrap();
        let spec = ForcingSpec::power_law(&t, 1.0, 1.0).unwrap();
        let f = LyapunovFunctional::new(1).unwrap();
        let mut op = KolmogorovOperator::new(&spec, 0.5, true).unwrap();
        let z = SpectralField::zeros(&t);
        let terms = op.apply(&f, &z).unwrap();
        assert_eq!(terms.drift, 0.0);
        // D²f(0) = −2‖h‖₁², so ½tr = −Σ_{k,pol}|k|²σ²
        let b1 = crate::dynamics::forcing_constants(&spec, 1, 0.5).unwrap().b_p;
        assert!((terms.trace + b1).abs() < 1e-12 * b1);
    }

    #[test]
    fn quadratic_functional_on_the_linear_system() {
        let t = Truncation::new(3).unwrap();
        let spec = ForcingSpec::power_law(&t, 1.5, 1.0).unwrap();
        let x = rand_field(&t, 3);
        let mut op = KolmogorovOperator::new(&spec, 0.5, false).unwrap();
        let v = op.apply(&QuadraticFunctional, &x).unwrap().total;
        let expect = spec.noise_trace() - 2.0 * 0.5 * sobolev_norm_sq(&x, 1.0);
        assert!((v - expect).abs() < 1e-12 * expect.abs().max(1.0));
    }

    #[test]
    fn quadratic_residual_vanishes_under_the_exact_gaussian_law() {
        let t = Truncation::new(3).unwrap();
        let spec = ForcingSpec::power_law(&t, 1.5, 1.0).unwrap();
        let ou = OuSpec::new(0.5, spec.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let xs: Vec<SpectralField> = (0..4000).map(|_| ou_sample_stationary(&ou, &mut rng)).collect();
        let r = stationarity_residual(&xs, &QuadraticFunctional, &spec, 0.5, false).unwrap();
        assert!(r.within(3.0), "{r:?}");
    }

    #[test]
    fn operator_is_linear_in_the_functional() {
        let t = Truncation::new(4).unwrap();
        let spec = ForcingSpec::power_law(&t, 1.0, 0.8).unwrap();
        let x = rand_field(&t, 5);
        let mut op = KolmogorovOperator::new(&spec, 0.3, true).unwrap();
        let f1 = LyapunovFunctional::new(1).unwrap();
        let f2 = LyapunovFunctional::new(2).unwrap();
        let combo = LinearCombination::new()
            .with(2.0, f1)
            .with(-0.7, QuadraticFunctional)
            .with(1.3, f2);
        let lhs = op.apply(&combo, &x).unwrap().total;
        let rhs = 2.0 * op.apply(&f1, &x).unwrap().total
            - 0.7 * op.apply(&QuadraticFunctional, &x).unwrap().total
            + 1.3 * op.apply(&f2, &x).unwrap().total;
        assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
    }

    /// `½ Σ σ² D²f(x)(u, u)` over explicitly built unit directions, with the
    /// polarizations rotated by `θ_k` and the cos/sin pair by a phase `ψ_k`.
    fn dense_trace(f: &dyn TestFunctional, x: &SpectralField, spec: &ForcingSpec, seed: u64) -> f64 {
        let t = x.truncation();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let terms = f.hessian(x);
        let mut total = 0.0;
        for (i, k) in t.modes().iter().enumerate() {
            let [e1, e2] = t.basis()[i];
            let th: f64 = rng.random::<f64>() * std::f64::consts::TAU;
            let ps: f64 = rng.random::<f64>() * std::f64::consts::TAU;
            let a = [
                std::array::from_fn::<f64, 3, _>(|d| th.cos() * e1[d] + th.sin() * e2[d]),
                std::array::from_fn::<f64, 3, _>(|d| -th.sin() * e1[d] + th.cos() * e2[d]),
            ];
            for e in a {
                for phase in [ps, ps + std::f64::consts::FRAC_PI_2] {
                    let c = Complex64::from_polar(std::f64::consts::FRAC_1_SQRT_2, phase);
                    let mut u = SpectralField::zeros(t);
                    u.set(*k, [c * e[0], c * e[1], c * e[2]]).unwrap();
                    let s = spec.sigma()[i];
                    total += 0.5 * s * s * hessian_quadform(&terms, &u).unwrap();
                }
            }
        }
        total
    }

    #[test]
    fn trace_is_basis_independent() {
        let t = Truncation::new(3).unwrap();
        let spec = ForcingSpec::power_law(&t, 1.0, 1.0).unwrap();
        let x = rand_field(&t, 8);
        let f = LinearCombination::new()
            .with(1.0, LyapunovFunctional::new(1).unwrap())
            .with(0.2, QuadraticFunctional)
            .with(4.0, LyapunovFunctional::new(2).unwrap());
        let sparse = trace_term(&f, &x, &spec).unwrap();
        for seed in 0..3 {
            let dense = dense_trace(&f, &x, &spec, seed);
            assert!((sparse - dense).abs() < 1e-10 * sparse.abs(), "{sparse} vs {dense}");
        }
    }
}
