//! Batch workflows behind the command line: each runs an ensemble, writes
//! CSV tables and one JSON summary into the output directory, and returns
//! pass/fail checks.

use std::fmt;
use std::fs;
use std::path::PathBuf;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::dynamics::{forcing_constants, BilinearEvaluator, ForcingConstants, ForcingSpec};
use crate::error::{Error, Result};
use crate::integrator::{
    resume_checkpoint, save_checkpoint, simulate_from, Observer, RunSummary, SimConfig,
    TrajectoryState,
};
use crate::kolmogorov::{
    richardson_residual, LyapunovFunctional, QuadraticFunctional, ResidualObserver,
    StationarityResidual,
};
use crate::measure::{
    check_interpolation, dissipation_scale_fit, energy_balance_residual, holder_recursion_bound,
    log_plus_moment, m_p_statistic, r_p_statistic, regularity_statistic, AccumulatorSummary,
    DissipationFit, EnergyBalance, GevreyBudgetEvaluator, MomentAccumulator, ShellSpectrum,
    SpectrumAccumulator, StoppingRecord, TauFit, TauObserver,
};
use crate::oracle::{
    alpha_nu_single_shell, bilinear_b_direct, ou_exact_second_moment, ou_sample_stationary, OuSpec,
};
use crate::report::{write_csv, write_summary_json, Cell, OutputHeader};
use crate::spectral::{random_field, sobolev_norm_sq, SpectralField, Truncation, Wavevector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Simulate,
    OuValidate,
    Moments,
    Gevrey,
    Kolmogorov,
    Dissipation,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::Simulate,
        Command::OuValidate,
        Command::Moments,
        Command::Gevrey,
        Command::Kolmogorov,
        Command::Dissipation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::OuValidate => "ou-validate",
            Command::Moments => "moments",
            Command::Gevrey => "gevrey",
            Command::Kolmogorov => "kolmogorov",
            Command::Dissipation => "dissipation",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown command `{s}`")))
    }
}

/// Scalar functionals recorded along trajectories.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Functional {
    /// `‖x‖_m²`; `m = 0` is the energy, `m = 1` the enstrophy.
    SobolevSq(u32),
    /// `‖x‖_{p+1}^{2/(2p+1)}`
    Regularity(u32),
    /// `ν(1 + ‖x‖_p²)^{1/(2p−1)}`
    MP(u32),
    /// `ν(1 + ‖x‖_{p+1}²)/(1 + ‖x‖_p²)^{1+ε_p}`
    RP(u32),
    /// `(ln⁺ ‖x‖²_{G(α',β')})^γ`
    LogPlus { alpha_prime: f64, beta_prime: f64, gamma: f64 },
}

impl Functional {
    pub fn id(&self) -> String {
        match *self {
            Functional::SobolevSq(0) => "energy".into(),
            Functional::SobolevSq(1) => "enstrophy".into(),
            Functional::SobolevSq(m) => format!("sobolev_sq_m{m}"),
            Functional::Regularity(p) => format!("regularity_p{p}"),
            Functional::MP(p) => format!("m_p{p}"),
            Functional::RP(p) => format!("r_p{p}"),
            Functional::LogPlus { alpha_prime, .. } => format!("log_plus_a{alpha_prime}"),
        }
    }

    pub fn definition(&self) -> String {
        match *self {
            Functional::SobolevSq(m) => format!("|x|_{m}^2"),
            Functional::Regularity(p) => format!("|x|_{}^(2/{})", p + 1, 2 * p + 1),
            Functional::MP(p) => format!("nu (1 + |x|_{p}^2)^(1/{})", 2 * p - 1),
            Functional::RP(p) => format!(
                "nu (1 + |x|_{}^2) / (1 + |x|_{p}^2)^(1 + 1/{})",
                p + 1,
                2 * p - 1
            ),
            Functional::LogPlus {
                alpha_prime,
                beta_prime,
                gamma,
            } => format!("(ln+ |x|^2_G({alpha_prime},{beta_prime}))^{gamma}"),
        }
    }

    pub fn eval(&self, x: &SpectralField, nu: f64) -> Result<f64> {
        Ok(match *self {
            Functional::SobolevSq(m) => sobolev_norm_sq(x, m as f64),
            Functional::Regularity(p) => regularity_statistic(x, p),
            Functional::MP(p) => m_p_statistic(x, p, nu),
            Functional::RP(p) => r_p_statistic(x, p, nu),
            Functional::LogPlus {
                alpha_prime,
                beta_prime,
                gamma,
            } => log_plus_moment(x, alpha_prime, beta_prime, gamma)?,
        })
    }
}

/// One named pass/fail outcome.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlowUpRecord {
    pub member: u64,
    pub time: f64,
    pub last_norm: f64,
    pub checkpoint: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub command: Command,
    pub checks: Vec<Check>,
    pub blow_ups: Vec<BlowUpRecord>,
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

impl RunReport {
    /// No failed check and no blow-up.
    pub fn success(&self) -> bool {
        self.blow_ups.is_empty() && self.checks.iter().all(|c| c.passed)
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Continue member 0 from this checkpoint; requires `ensemble.size = 1`.
    pub resume: Option<PathBuf>,
    /// Stop each member after this many steps; the final checkpoint can be
    /// resumed to finish the run.
    pub max_steps: Option<u64>,
}

/// Everything derived from the configuration before a run.
pub struct Setup {
    pub config: ExperimentConfig,
    pub truncation: Truncation,
    pub forcing: ForcingSpec,
    pub sim: SimConfig,
    pub constants: ForcingConstants,
    pub hash: u64,
}

impl Setup {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let truncation = config.truncation()?;
        let forcing = config.forcing_spec(&truncation)?;
        let sim = config.sim_config(&truncation);
        sim.validate()?;
        let constants = forcing_constants(&forcing, 0, config.nu)?;
        let hash = sim.config_hash(&forcing);
        Ok(Self {
            config: config.clone(),
            truncation,
            forcing,
            sim,
            constants,
            hash,
        })
    }

    fn header(&self, command: Command) -> OutputHeader {
        OutputHeader::new(command.name(), self.hash, self.config.seed)
    }
}

/// Runs `command` and writes its outputs under `config.output_dir`.
pub fn run(command: Command, config: &ExperimentConfig, opts: &RunOptions) -> Result<RunReport> {
    let mut config = config.clone();
    if command == Command::OuValidate {
        config.nonlinear = false;
    }
    let setup = Setup::new(&config)?;
    if opts.resume.is_some() && setup.sim.ensemble_size != 1 {
        return Err(Error::Invalid("--resume requires ensemble.size = 1".into()));
    }
    fs::create_dir_all(&config.output_dir)?;
    let mut report = RunReport {
        command,
        checks: Vec::new(),
        blow_ups: Vec::new(),
        files: Vec::new(),
        warnings: [setup.sim.warnings(), config.warnings()].concat(),
    };
    match command {
        Command::Simulate => run_simulate(&setup, opts, &mut report)?,
        Command::OuValidate => run_ou_validate(&setup, opts, &mut report)?,
        Command::Moments => run_moments(&setup, opts, &mut report)?,
        Command::Gevrey => run_gevrey(&setup, opts, &mut report)?,
        Command::Kolmogorov => run_kolmogorov(&setup, opts, &mut report)?,
        Command::Dissipation => run_dissipation(&setup, opts, &mut report)?,
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// per-member observation

struct InterpProbe {
    alpha: f64,
    beta: f64,
    beta_prime: f64,
    alpha_primes: Vec<f64>,
    checked: u64,
    violations: u64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct BudgetMeans {
    /// Weight time `t` in `‖X‖²_{G(νt,β)}`.
    pub t: f64,
    pub samples: u64,
    pub i_b: f64,
    pub i_g: f64,
    pub i_phi: f64,
    pub gevrey_sq: f64,
    pub dissipation: f64,
    pub weight_growth: f64,
    pub drift: f64,
    pub max_foias_temam_ratio: f64,
}

struct BudgetProbe {
    eval: GevreyBudgetEvaluator,
    forcing: ForcingSpec,
    nu: f64,
    beta: f64,
    sums: BudgetMeans,
}

/// Collects everything a workflow asks for along one member's trajectory.
struct Probe {
    nu: f64,
    functionals: Vec<Functional>,
    times: Vec<f64>,
    indices: Vec<u64>,
    series: Vec<Vec<f64>>,
    spectrum: SpectrumAccumulator,
    tau: Option<TauObserver>,
    residuals: Vec<ResidualObserver<LyapunovFunctional>>,
    interp: Option<InterpProbe>,
    budget: Option<BudgetProbe>,
}

impl Probe {
    fn new(setup: &Setup, functionals: Vec<Functional>) -> Self {
        let n = functionals.len();
        Self {
            nu: setup.config.nu,
            functionals,
            times: Vec::new(),
            indices: Vec::new(),
            series: vec![Vec::new(); n],
            spectrum: SpectrumAccumulator::new(&setup.truncation),
            tau: None,
            residuals: Vec::new(),
            interp: None,
            budget: None,
        }
    }
}

impl Observer for Probe {
    fn observe(&mut self, index: u64, state: &TrajectoryState) -> Result<()> {
        let x = &state.field;
        self.indices.push(index);
        self.times.push(state.time);
        for (f, s) in self.functionals.iter().zip(&mut self.series) {
            s.push(f.eval(x, self.nu)?);
        }
        self.spectrum.push(x)?;
        if let Some(t) = &mut self.tau {
            t.observe(index, state)?;
        }
        for r in &mut self.residuals {
            r.observe(index, state)?;
        }
        if let Some(p) = &mut self.interp {
            for &ap in &p.alpha_primes {
                p.checked += 1;
                if !check_interpolation(x, p.alpha, ap, p.beta, p.beta_prime)? {
                    p.violations += 1;
                }
            }
        }
        if let Some(b) = &mut self.budget {
            let g = b.eval.evaluate(x, b.sums.t, b.nu, b.beta, &b.forcing)?;
            let s = &mut b.sums;
            s.samples += 1;
            s.i_b += g.i_b;
            s.i_g += g.i_g;
            s.i_phi += g.i_phi;
            s.gevrey_sq += g.gevrey_sq;
            s.dissipation += g.dissipation;
            s.weight_growth += g.weight_growth;
            s.drift += g.drift(b.nu);
            let r = g.foias_temam_ratio(b.nu);
            if r.is_finite() {
                s.max_foias_temam_ratio = s.max_foias_temam_ratio.max(r);
            }
        }
        Ok(())
    }
}

struct MemberOutcome {
    member: u64,
    probe: Probe,
    summary: Option<RunSummary>,
}

/// Runs every member, saving final and blow-up checkpoints.
fn run_members<F>(setup: &Setup, opts: &RunOptions, report: &mut RunReport, make: F) -> Result<Vec<MemberOutcome>>
where
    F: Fn(u64) -> Result<Probe> + Sync,
{
    let sim = &setup.sim;
    let resumed = match &opts.resume {
        Some(path) => Some(resume_checkpoint(path, sim, &setup.forcing)?),
        None => None,
    };
    let results: Vec<(u64, Probe, Result<RunSummary>)> = (0..sim.ensemble_size as u64)
        .into_par_iter()
        .map(|m| -> Result<_> {
            let mut probe = make(m)?;
            let state = match &resumed {
                Some(s) => s.clone(),
                None => TrajectoryState::zero(&setup.truncation, sim.seed, m),
            };
            let result = simulate_from(state, sim, &setup.forcing, &mut [&mut probe], opts.max_steps);
            Ok((m, probe, result))
        })
        .collect::<Result<_>>()?;

    let dir = &setup.config.output_dir;
    let mut out = Vec::with_capacity(results.len());
    for (member, probe, result) in results {
        let summary = match result {
            Ok(s) => {
                let path = dir.join(format!("final_m{member}.ckpt"));
                save_checkpoint(&path, &s.final_state, sim, &setup.forcing)?;
                report.files.push(path);
                Some(s)
            }
            Err(Error::BlowUp {
                time,
                last_norm,
                state,
            }) => {
                let path = dir.join(format!("blowup_m{member}.ckpt"));
                save_checkpoint(&path, &state, sim, &setup.forcing)?;
                report.blow_ups.push(BlowUpRecord {
                    member,
                    time,
                    last_norm,
                    checkpoint: path.clone(),
                });
                report.files.push(path);
                None
            }
            Err(e) => return Err(e),
        };
        out.push(MemberOutcome {
            member,
            probe,
            summary,
        });
    }
    Ok(out)
}

fn dedup(fs: Vec<Functional>) -> Vec<Functional> {
    let mut out: Vec<Functional> = Vec::new();
    for f in fs {
        if !out.iter().any(|g| g.id() == f.id()) {
            out.push(f);
        }
    }
    out
}

/// Batch-means accumulator of functional `i` over all members.
fn merged_accumulator(members: &[MemberOutcome], i: usize, id: &str) -> Result<MomentAccumulator> {
    let mut total = MomentAccumulator::new(id);
    for m in members {
        let mut acc = MomentAccumulator::new(id);
        for &v in &m.probe.series[i] {
            acc.push(v);
        }
        total.merge(&acc)?;
    }
    Ok(total)
}

/// `|mean(last half) − mean(all)| / |mean(all)|`, pooling members.
fn last_half_deviation(members: &[MemberOutcome], i: usize) -> f64 {
    let (mut all, mut n_all, mut half, mut n_half) = (0.0, 0usize, 0.0, 0usize);
    for m in members {
        let s = &m.probe.series[i];
        all += s.iter().sum::<f64>();
        n_all += s.len();
        let tail = &s[s.len() / 2..];
        half += tail.iter().sum::<f64>();
        n_half += tail.len();
    }
    let full = all / n_all as f64;
    ((half / n_half as f64) - full).abs() / full.abs()
}

fn header_with(setup: &Setup, command: Command, functionals: &[Functional]) -> OutputHeader {
    functionals
        .iter()
        .fold(setup.header(command), |h, f| h.with_functional(f.id(), f.definition()))
}

fn write_samples(
    setup: &Setup,
    command: Command,
    members: &[MemberOutcome],
    report: &mut RunReport,
) -> Result<()> {
    let Some(first) = members.first() else {
        return Ok(());
    };
    let fs = &first.probe.functionals;
    let header = header_with(setup, command, fs);
    let ids: Vec<String> = fs.iter().map(Functional::id).collect();
    let mut cols = vec!["member", "index", "time"];
    cols.extend(ids.iter().map(String::as_str));
    let mut rows = Vec::new();
    for m in members {
        let p = &m.probe;
        for (j, (&idx, &t)) in p.indices.iter().zip(&p.times).enumerate() {
            let mut r: Vec<Cell> = vec![m.member.into(), idx.into(), t.into()];
            r.extend(p.series.iter().map(|s| Cell::from(s[j])));
            rows.push(r);
        }
    }
    let path = setup.config.output_dir.join("samples.csv");
    write_csv(&path, &header, &cols, &rows)?;
    report.files.push(path);
    Ok(())
}

fn merged_spectrum(setup: &Setup, members: &[MemberOutcome]) -> Result<ShellSpectrum> {
    let mut acc = SpectrumAccumulator::new(&setup.truncation);
    for m in members {
        acc.merge(&m.probe.spectrum)?;
    }
    Ok(acc.spectrum())
}

fn write_spectrum(
    setup: &Setup,
    command: Command,
    spectrum: &ShellSpectrum,
    report: &mut RunReport,
) -> Result<()> {
    let rows: Vec<Vec<Cell>> = spectrum
        .bins
        .iter()
        .map(|b| vec![b.shell.into(), b.mean_amplitude.into(), b.mode_count.into()])
        .collect();
    let header = setup
        .header(command)
        .with_functional("mean_amplitude", "time average of |x(k)| over the shell");
    let path = setup.config.output_dir.join("spectrum.csv");
    write_csv(&path, &header, &["shell", "mean_amplitude", "mode_count"], &rows)?;
    report.files.push(path);
    Ok(())
}

#[derive(Serialize)]
struct RunInfo {
    members: usize,
    completed_members: usize,
    samples: u64,
    burn_steps: u64,
    sample_steps: u64,
    t_burn: f64,
    t_sample: f64,
    dt: f64,
    scheme: &'static str,
    nonlinear: bool,
}

fn run_info(setup: &Setup, members: &[MemberOutcome]) -> RunInfo {
    let done: Vec<&RunSummary> = members.iter().filter_map(|m| m.summary.as_ref()).collect();
    RunInfo {
        members: members.len(),
        completed_members: done.len(),
        samples: members.iter().map(|m| m.probe.times.len() as u64).sum(),
        burn_steps: done.iter().map(|s| s.burn_steps).max().unwrap_or(0),
        sample_steps: done.iter().map(|s| s.sample_steps).max().unwrap_or(0),
        t_burn: setup.sim.t_burn,
        t_sample: setup.sim.t_sample,
        dt: setup.sim.dt,
        scheme: setup.sim.scheme.name(),
        nonlinear: setup.sim.nonlinear,
    }
}

fn summaries(members: &[MemberOutcome]) -> Result<Vec<AccumulatorSummary>> {
    let Some(first) = members.first() else {
        return Ok(Vec::new());
    };
    first
        .probe
        .functionals
        .iter()
        .enumerate()
        .map(|(i, f)| Ok(merged_accumulator(members, i, &f.id())?.summary()))
        .collect()
}

/// `false` when a `--max-steps` stop came before the sampling window; the
/// checkpoints are written and the analysis is skipped.
fn require_samples(members: &[MemberOutcome], opts: &RunOptions, report: &mut RunReport) -> Result<bool> {
    if members.iter().any(|m| !m.probe.times.is_empty()) {
        return Ok(true);
    }
    if opts.max_steps.is_some() {
        report
            .warnings
            .push("stopped by --max-steps before the sampling window; analysis skipped".into());
        return Ok(false);
    }
    Err(Error::Diagnostic("no samples were recorded".into()))
}

// ---------------------------------------------------------------------------
// workflows

#[derive(Serialize)]
struct SimulateSummary<'a> {
    run: RunInfo,
    constants: &'a ForcingConstants,
    accumulators: Vec<AccumulatorSummary>,
    energy_balance: EnergyBalance,
    checks: &'a [Check],
    blow_ups: &'a [BlowUpRecord],
}

fn run_simulate(setup: &Setup, opts: &RunOptions, report: &mut RunReport) -> Result<()> {
    let mut fs = vec![Functional::SobolevSq(0), Functional::SobolevSq(1)];
    fs.extend(setup.config.analysis.p.iter().map(|&p| Functional::Regularity(p)));
    let fs = dedup(fs);
    let members = run_members(setup, opts, report, |_| Ok(Probe::new(setup, fs.clone())))?;
    if !require_samples(&members, opts, report)? {
        return Ok(());
    }
    write_samples(setup, Command::Simulate, &members, report)?;
    let spectrum = merged_spectrum(setup, &members)?;
    write_spectrum(setup, Command::Simulate, &spectrum, report)?;

    let enstrophy = merged_accumulator(&members, 1, "enstrophy")?;
    let balance = energy_balance_residual(&enstrophy, &setup.constants, setup.config.nu);
    report.checks.push(Check::new(
        "energy_bound",
        balance.bound_holds,
        format!(
            "nu*avg|X|_1^2 = {:e}, B0 = {:e}",
            setup.config.nu * balance.mean,
            balance.b_bar_0
        ),
    ));
    let body = SimulateSummary {
        run: run_info(setup, &members),
        constants: &setup.constants,
        accumulators: summaries(&members)?,
        energy_balance: balance,
        checks: &report.checks,
        blow_ups: &report.blow_ups,
    };
    let path = write_json(setup, Command::Simulate, &body)?;
    report.files.push(path);
    Ok(())
}

fn write_json<T: Serialize>(setup: &Setup, command: Command, body: &T) -> Result<PathBuf> {
    let path = setup.config.output_dir.join("summary.json");
    write_summary_json(&path, &setup.header(command), body)?;
    Ok(path)
}

/// Deterministic generator for auxiliary draws, disjoint from every member
/// stream.
fn aux_rng(seed: u64, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX - purpose);
    rng
}

#[derive(Clone, Debug, Serialize)]
pub struct OuMomentRow {
    pub m: u32,
    pub empirical: f64,
    pub stderr: f64,
    pub exact: f64,
    pub relative_error: f64,
    pub within_3se: bool,
}

impl OuMomentRow {
    pub fn new(ou: &OuSpec, m: u32, acc: &MomentAccumulator) -> Self {
        let exact = ou_exact_second_moment(ou, m as f64);
        let (mean, se) = (acc.mean(), acc.stderr());
        Self {
            m,
            empirical: mean,
            stderr: se,
            exact,
            relative_error: (mean - exact).abs() / exact,
            within_3se: (mean - exact).abs() <= 3.0 * se,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BilinearCheck {
    pub k_max: u32,
    pub fields: usize,
    /// `max |⟨B(u),u⟩| / (‖u‖₀‖u‖₁²)`
    pub max_orthogonality: f64,
    pub max_divergence: f64,
    /// `max ‖B_fft − B_direct‖₀ / ‖B_direct‖₀`
    pub max_relative_difference: f64,
}

/// Compares the pseudo-spectral nonlinearity with the direct convolution on
/// random fields.
pub fn bilinear_check(k_max: u32, fields: usize, rng: &mut ChaCha8Rng) -> Result<BilinearCheck> {
    let t = Truncation::new(k_max)?;
    let mut eval = BilinearEvaluator::new(&t);
    let mut out = BilinearCheck {
        k_max,
        fields,
        max_orthogonality: 0.0,
        max_divergence: 0.0,
        max_relative_difference: 0.0,
    };
    for _ in 0..fields {
        let u = random_field(&t, |k| 1.0 / k.norm(), rng);
        let b = eval.eval(&u)?;
        let direct = bilinear_b_direct(&u)?;
        let scale = sobolev_norm_sq(&u, 0.0).sqrt() * sobolev_norm_sq(&u, 1.0);
        out.max_orthogonality = out.max_orthogonality.max(b.inner(&u)?.abs() / scale);
        out.max_divergence = out.max_divergence.max(b.max_divergence());
        let mut diff = b.clone();
        diff.axpy(-1.0, &direct)?;
        let rel = (sobolev_norm_sq(&diff, 0.0) / sobolev_norm_sq(&direct, 0.0)).sqrt();
        out.max_relative_difference = out.max_relative_difference.max(rel);
    }
    Ok(out)
}

/// Largest relative disagreement between the `α_ν` estimator and the scalar
/// root on random single-shell fields.
pub fn alpha_nu_check(
    trunc: &Truncation,
    nu: f64,
    beta: f64,
    b_bar_0: f64,
    fields: usize,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let mut shells: Vec<i64> = trunc.modes().iter().map(|k| k.norm_sq()).collect();
    shells.sort_unstable();
    shells.dedup();
    let cap = 50.0;
    let mut worst: f64 = 0.0;
    for i in 0..fields {
        let shell = shells[i % shells.len()];
        let amp = 10f64.powf(rng.random_range(-1.0..2.0));
        let x = random_field(trunc, |k: Wavevector| if k.norm_sq() == shell { amp } else { 0.0 }, rng);
        let est = crate::measure::estimate_alpha_nu(&x, nu, beta, b_bar_0, cap)?;
        let root = alpha_nu_single_shell(&x, nu, beta, b_bar_0, cap)?;
        worst = worst.max((est - root).abs() / root.max(1e-3));
    }
    Ok(worst)
}

/// `L_N` of the quadratic functional averaged over exact stationary draws of
/// the linear system.
pub fn ou_quadratic_residual(ou: &OuSpec, samples: usize, rng: &mut ChaCha8Rng) -> Result<StationarityResidual> {
    let draws = (0..samples).map(|_| ou_sample_stationary(ou, rng));
    let mut op = crate::kolmogorov::KolmogorovOperator::new(ou.forcing(), ou.nu(), false)?;
    let f = QuadraticFunctional;
    let mut acc = MomentAccumulator::new("quadratic_l2");
    for x in draws {
        acc.push(op.apply(&f, &x)?.total);
    }
    Ok(StationarityResidual {
        functional: "quadratic_l2".into(),
        mean: acc.mean(),
        stderr: acc.stderr(),
        samples: acc.count(),
    })
}

#[derive(Serialize)]
struct OuSummary<'a> {
    run: RunInfo,
    moments: &'a [OuMomentRow],
    quadratic_residual: StationarityResidual,
    bilinear: BilinearCheck,
    alpha_nu_max_relative_error: f64,
    checks: &'a [Check],
    blow_ups: &'a [BlowUpRecord],
}

fn run_ou_validate(setup: &Setup, opts: &RunOptions, report: &mut RunReport) -> Result<()> {
    let c = &setup.config;
    let ou = OuSpec::new(c.nu, setup.forcing.clone())?;
    let fs: Vec<Functional> = (0..3).map(Functional::SobolevSq).collect();
    let members = run_members(setup, opts, report, |_| Ok(Probe::new(setup, fs.clone())))?;
    if !require_samples(&members, opts, report)? {
        return Ok(());
    }
    write_samples(setup, Command::OuValidate, &members, report)?;

    let mut rows = Vec::new();
    for (i, f) in fs.iter().enumerate() {
        let acc = merged_accumulator(&members, i, &f.id())?;
        let row = OuMomentRow::new(&ou, i as u32, &acc);
        report.checks.push(Check::new(
            format!("ou_second_moment_m{i}"),
            row.within_3se,
            format!(
                "empirical {:e} +- {:e}, exact {:e}, relative error {:.3}%",
                row.empirical,
                row.stderr,
                row.exact,
                100.0 * row.relative_error
            ),
        ));
        rows.push(row);
    }

    let quad = ou_quadratic_residual(&ou, c.analysis.ou_samples, &mut aux_rng(c.seed, 0))?;
    report.checks.push(Check::new(
        "ou_quadratic_residual",
        quad.within(3.0),
        format!("mean {:e}, stderr {:e}, {} samples", quad.mean, quad.stderr, quad.samples),
    ));

    let bil = bilinear_check(c.k_max.min(6), c.analysis.random_fields.min(100), &mut aux_rng(c.seed, 1))?;
    report.checks.push(Check::new(
        "bilinear_orthogonality",
        bil.max_orthogonality <= 1e-10,
        format!("max relative |<B(u),u>| = {:e}", bil.max_orthogonality),
    ));
    report.checks.push(Check::new(
        "bilinear_divergence",
        bil.max_divergence <= 1e-12,
        format!("max divergence = {:e}", bil.max_divergence),
    ));
    report.checks.push(Check::new(
        "bilinear_direct",
        bil.max_relative_difference <= 1e-10,
        format!("max relative difference = {:e}", bil.max_relative_difference),
    ));

    let alpha_err = alpha_nu_check(
        &setup.truncation,
        c.nu,
        c.forcing.beta,
        setup.constants.b_bar_p,
        50,
        &mut aux_rng(c.seed, 2),
    )?;
    report.checks.push(Check::new(
        "alpha_nu_root",
        alpha_err <= 1e-8,
        format!("max relative error = {alpha_err:e}"),
    ));

    let body = OuSummary {
        run: run_info(setup, &members),
        moments: &rows,
        quadratic_residual: quad,
        bilinear: bil,
        alpha_nu_max_relative_error: alpha_err,
        checks: &report.checks,
        blow_ups: &report.blow_ups,
    };
    let path = write_json(setup, Command::OuValidate, &body)?;
    report.files.push(path);
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct MomentRow {
    pub p: u32,
    pub regularity_mean: f64,
    pub regularity_stderr: f64,
    pub regularity_last_half_deviation: f64,
    pub m_p_mean: f64,
    pub r_p_mean: f64,
    pub m_p1_mean: f64,
    pub holder_bound: f64,
    pub holder_holds: bool,
}

#[derive(Serialize)]
struct MomentsSummary<'a> {
    run: RunInfo,
    table: &'a [MomentRow],
    accumulators: Vec<AccumulatorSummary>,
    checks: &'a [Check],
    blow_ups: &'a [BlowUpRecord],
}

fn run_moments(setup: &Setup, opts: &RunOptions, report: &mut RunReport) -> Result<()> {
    let ps = &setup.config.analysis.p;
    let fs = dedup(
        ps.iter()
            .flat_map(|&p| {
                [
                    Functional::Regularity(p),
                    Functional::MP(p),
                    Functional::RP(p),
                    Functional::MP(p + 1),
                ]
            })
            .collect(),
    );
    let members = run_members(setup, opts, report, |_| Ok(Probe::new(setup, fs.clone())))?;
    if !require_samples(&members, opts, report)? {
        return Ok(());
    }
    write_samples(setup, Command::Moments, &members, report)?;

    let idx = |f: Functional| fs.iter().position(|g| g.id() == f.id()).expect("recorded");
    let mean = |f: Functional| -> Result<MomentAccumulator> { merged_accumulator(&members, idx(f), &f.id()) };
    let mut table = Vec::new();
    for &p in ps {
        let t1 = mean(Functional::Regularity(p))?;
        let dev = last_half_deviation(&members, idx(Functional::Regularity(p)));
        let (mp, rp, mp1) = (
            mean(Functional::MP(p))?.mean(),
            mean(Functional::RP(p))?.mean(),
            mean(Functional::MP(p + 1))?.mean(),
        );
        let bound = holder_recursion_bound(rp, mp, p);
        let row = MomentRow {
            p,
            regularity_mean: t1.mean(),
            regularity_stderr: t1.stderr(),
            regularity_last_half_deviation: dev,
            m_p_mean: mp,
            r_p_mean: rp,
            m_p1_mean: mp1,
            holder_bound: bound,
            holder_holds: mp1 <= bound * 1.02,
        };
        report.checks.push(Check::new(
            format!("regularity_stability_p{p}"),
            row.regularity_mean.is_finite() && dev <= 0.10,
            format!("mean {:e}, last-half deviation {:.3}%", row.regularity_mean, 100.0 * dev),
        ));
        report.checks.push(Check::new(
            format!("holder_recursion_p{p}"),
            row.holder_holds,
            format!("avg m_(p+1) = {mp1:e} <= {bound:e} * 1.02"),
        ));
        table.push(row);
    }

    let rows: Vec<Vec<Cell>> = table
        .iter()
        .map(|r| {
            vec![
                r.p.into(),
                r.regularity_mean.into(),
                r.regularity_stderr.into(),
                r.regularity_last_half_deviation.into(),
                r.m_p_mean.into(),
                r.r_p_mean.into(),
                r.m_p1_mean.into(),
                r.holder_bound.into(),
                r.holder_holds.into(),
            ]
        })
        .collect();
    let path = setup.config.output_dir.join("moments.csv");
    write_csv(
        &path,
        &header_with(setup, Command::Moments, &fs),
        &[
            "p",
            "regularity_mean",
            "regularity_stderr",
            "regularity_last_half_deviation",
            "m_p_mean",
            "r_p_mean",
            "m_p1_mean",
            "holder_bound",
            "holder_holds",
        ],
        &rows,
    )?;
    report.files.push(path);

    let body = MomentsSummary {
        run: run_info(setup, &members),
        table: &table,
        accumulators: summaries(&members)?,
        checks: &report.checks,
        blow_ups: &report.blow_ups,
    };
    let path = write_json(setup, Command::Moments, &body)?;
    report.files.push(path);
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct TauReport {
    pub windows: usize,
    pub censored: usize,
    pub mean_sup: f64,
    pub sup_stderr: f64,
    /// `(4/ν)(B̄₀ + 1)`
    pub sup_bound: f64,
    pub threshold_identity: bool,
    pub fit: TauFit,
    pub alpha_nu_mean: Option<f64>,
    pub alpha_nu_min: Option<f64>,
    pub alpha_nu_max: Option<f64>,
    pub grid_sampled: bool,
}

impl TauReport {
    pub fn new(record: &StoppingRecord, nu: f64, b_bar_0: f64) -> Self {
        let n = record.tau_samples.len();
        let mean = record.mean_sup();
        let var = record
            .tau_samples
            .iter()
            .map(|s| (s.sup_before - mean).powi(2))
            .sum::<f64>()
            / (n.max(2) - 1) as f64;
        let a = &record.alpha_nu_samples;
        let (amin, amax) = a
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
        Self {
            windows: n,
            censored: record.tau_samples.iter().filter(|s| s.tau.is_none()).count(),
            mean_sup: mean,
            sup_stderr: (var / n as f64).sqrt(),
            sup_bound: 4.0 / nu * (b_bar_0 + 1.0),
            threshold_identity: record.threshold_identity_holds(),
            fit: record.fit_sqrt_cdf(),
            alpha_nu_mean: (!a.is_empty()).then(|| a.iter().sum::<f64>() / a.len() as f64),
            alpha_nu_min: (!a.is_empty()).then_some(amin),
            alpha_nu_max: (!a.is_empty()).then_some(amax),
            grid_sampled: record.grid_sampled,
        }
    }

    /// Ensemble mean of the pre-`τ` supremum within three standard errors of
    /// the bound.
    pub fn mean_sup_within_bound(&self) -> bool {
        self.mean_sup <= self.sup_bound + 3.0 * self.sup_stderr
    }

    /// `P(τ < t) ≈ a t^{1/2}` with `R² ≥ 0.8`, or `τ` never observed.
    pub fn fit_acceptable(&self) -> bool {
        self.fit.identically_zero || self.fit.r_squared >= 0.8
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct InterpolationReport {
    pub alpha: f64,
    pub beta: f64,
    pub beta_prime: f64,
    pub alpha_prime: Vec<f64>,
    pub trajectory_checks: u64,
    pub trajectory_violations: u64,
    pub random_checks: u64,
    pub random_violations: u64,
}

/// Interpolation inequality on random fields with amplitudes spread over six
/// decades.
pub fn interpolation_on_random_fields(
    trunc: &Truncation,
    alpha: f64,
    alpha_primes: &[f64],
    beta: f64,
    beta_prime: f64,
    fields: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(u64, u64)> {
    let (mut checked, mut violations) = (0, 0);
    for _ in 0..fields {
        let scale = 10f64.powf(rng.random_range(-3.0..3.0));
        let decay = rng.random_range(0.0..1.0);
        let x = random_field(trunc, |k| scale * (-decay * k.norm()).exp() / k.norm(), rng);
        for &ap in alpha_primes {
            checked += 1;
            if !check_interpolation(&x, alpha, ap, beta, beta_prime)? {
                violations += 1;
            }
        }
    }
    Ok((checked, violations))
}

#[derive(Serialize)]
struct LogMoment {
    summary: AccumulatorSummary,
    last_half_deviation: f64,
}

#[derive(Serialize)]
struct GevreySummary<'a> {
    run: RunInfo,
    b_bar_0: f64,
    tau: Option<TauReport>,
    alpha_nu_samples: Vec<f64>,
    interpolation: InterpolationReport,
    budget: BudgetMeans,
    log_moment_condition: bool,
    log_moments: Vec<LogMoment>,
    checks: &'a [Check],
    blow_ups: &'a [BlowUpRecord],
}

fn run_gevrey(setup: &Setup, opts: &RunOptions, report: &mut RunReport) -> Result<()> {
    let c = &setup.config;
    let a = &c.analysis;
    let beta = c.forcing.beta;
    let b_bar_0 = setup.constants.b_bar_p;
    let fs: Vec<Functional> = dedup(
        a.alpha_prime
            .iter()
            .map(|&ap| Functional::LogPlus {
                alpha_prime: ap,
                beta_prime: a.beta_prime,
                gamma: a.gamma,
            })
            .collect(),
    );
    let members = run_members(setup, opts, report, |_| {
        let mut p = Probe::new(setup, fs.clone());
        if a.tau {
            let t = TauObserver::new(c.nu, beta, c.tau_horizon())?;
            p.tau = Some(if a.alpha_nu {
                t.with_alpha_nu(b_bar_0, c.forcing.alpha)
            } else {
                t
            });
        }
        p.interp = Some(InterpProbe {
            alpha: a.gevrey_alpha,
            beta,
            beta_prime: a.beta_prime,
            alpha_primes: a.alpha_prime.clone(),
            checked: 0,
            violations: 0,
        });
        p.budget = Some(BudgetProbe {
            eval: GevreyBudgetEvaluator::new(&setup.forcing),
            forcing: setup.forcing.clone(),
            nu: c.nu,
            beta,
            sums: BudgetMeans {
                t: 0.5 * c.tau_horizon(),
                max_foias_temam_ratio: f64::NEG_INFINITY,
                ..BudgetMeans::default()
            },
        });
        Ok(p)
    })?;
    if !require_samples(&members, opts, report)? {
        return Ok(());
    }
    write_samples(setup, Command::Gevrey, &members, report)?;

    let mut interp = InterpolationReport {
        alpha: a.gevrey_alpha,
        beta,
        beta_prime: a.beta_prime,
        alpha_prime: a.alpha_prime.clone(),
        trajectory_checks: 0,
        trajectory_violations: 0,
        random_checks: 0,
        random_violations: 0,
    };
    let mut budget = BudgetMeans {
        t: 0.5 * c.tau_horizon(),
        max_foias_temam_ratio: f64::NEG_INFINITY,
        ..BudgetMeans::default()
    };
    let mut record = StoppingRecord::new(c.tau_horizon());
    let mut tau_rows = Vec::new();
    let mut members = members;
    for m in &mut members {
        if let Some(p) = &m.probe.interp {
            interp.trajectory_checks += p.checked;
            interp.trajectory_violations += p.violations;
        }
        if let Some(b) = &m.probe.budget {
            let s = &b.sums;
            budget.samples += s.samples;
            budget.i_b += s.i_b;
            budget.i_g += s.i_g;
            budget.i_phi += s.i_phi;
            budget.gevrey_sq += s.gevrey_sq;
            budget.dissipation += s.dissipation;
            budget.weight_growth += s.weight_growth;
            budget.drift += s.drift;
            budget.max_foias_temam_ratio = budget.max_foias_temam_ratio.max(s.max_foias_temam_ratio);
        }
        if let Some(t) = m.probe.tau.take() {
            let r = t.completed();
            for (w, s) in r.tau_samples.iter().enumerate() {
                tau_rows.push(vec![
                    m.member.into(),
                    w.into(),
                    s.tau.into(),
                    s.initial_sq.into(),
                    s.threshold.into(),
                    s.sup_before.into(),
                    s.points.into(),
                    r.alpha_nu_samples.get(w).copied().into(),
                ]);
            }
            record.merge(r);
        }
    }
    let n = budget.samples.max(1) as f64;
    for v in [
        &mut budget.i_b,
        &mut budget.i_g,
        &mut budget.i_phi,
        &mut budget.gevrey_sq,
        &mut budget.dissipation,
        &mut budget.weight_growth,
        &mut budget.drift,
    ] {
        *v /= n;
    }

    let (rc, rv) = interpolation_on_random_fields(
        &setup.truncation,
        a.gevrey_alpha,
        &a.alpha_prime,
        beta,
        a.beta_prime,
        a.random_fields,
        &mut aux_rng(c.seed, 3),
    )?;
    interp.random_checks = rc;
    interp.random_violations = rv;
    report.checks.push(Check::new(
        "interpolation_trajectory",
        interp.trajectory_violations == 0,
        format!("{} violations in {} checks", interp.trajectory_violations, interp.trajectory_checks),
    ));
    report.checks.push(Check::new(
        "interpolation_random",
        rv == 0,
        format!("{rv} violations in {rc} checks"),
    ));

    let tau = if a.tau {
        let path = c.output_dir.join("tau.csv");
        let header = setup
            .header(Command::Gevrey)
            .with_functional("tau", "inf{s : 1 + |X(s)|^2_G(nu s,beta) > 4(|X(0)|_1^2 + 1)}")
            .with_functional("alpha_nu", "inf{s : |x|^2_G(nu s,beta) > 4(B0 + 1)/(nu s^(1/2))}");
        write_csv(
            &path,
            &header,
            &[
                "member",
                "window",
                "tau",
                "initial_sq",
                "threshold",
                "sup_before",
                "points",
                "alpha_nu",
            ],
            &tau_rows,
        )?;
        report.files.push(path);
        if record.tau_samples.is_empty() {
            report.checks.push(Check::new(
                "tau_windows",
                false,
                "no complete stopping-time window; increase t_sample",
            ));
            None
        } else {
            let t = TauReport::new(&record, c.nu, b_bar_0);
            report.checks.push(Check::new(
                "tau_threshold_identity",
                t.threshold_identity,
                format!("{} windows", t.windows),
            ));
            report.checks.push(Check::new(
                "tau_mean_sup",
                t.mean_sup_within_bound(),
                format!(
                    "mean sup {:e} +- {:e}, bound {:e}",
                    t.mean_sup, t.sup_stderr, t.sup_bound
                ),
            ));
            report.checks.push(Check::new(
                "tau_cdf_fit",
                t.fit_acceptable(),
                if t.fit.identically_zero {
                    "P(tau < t) is identically 0".to_string()
                } else {
                    format!("a = {:e}, R^2 = {:.4}", t.fit.a, t.fit.r_squared)
                },
            ));
            Some(t)
        }
    } else {
        None
    };

    let mut log_moments = Vec::new();
    for (i, f) in fs.iter().enumerate() {
        let acc = merged_accumulator(&members, i, &f.id())?;
        log_moments.push(LogMoment {
            summary: acc.summary(),
            last_half_deviation: last_half_deviation(&members, i),
        });
    }
    report.checks.push(Check::new(
        "log_moment_finite",
        log_moments.iter().all(|l| l.summary.mean.is_finite()),
        format!(
            "2 gamma < beta/beta' - 1: {}",
            if c.log_moment_condition() { "holds" } else { "fails" }
        ),
    ));

    let body = GevreySummary {
        run: run_info(setup, &members),
        b_bar_0,
        tau,
        alpha_nu_samples: record.alpha_nu_samples.clone(),
        interpolation: interp,
        budget,
        log_moment_condition: c.log_moment_condition(),
        log_moments,
        checks: &report.checks,
        blow_ups: &report.blow_ups,
    };
    let path = write_json(setup, Command::Gevrey, &body)?;
    report.files.push(path);
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct ResidualEntry {
    #[serde(flatten)]
    pub residual: StationarityResidual,
    /// `dt=<step>` for a single run, `richardson` for the extrapolation.
    pub estimate: String,
    /// Sampled time covered, summed over members.
    pub window_length: f64,
}

#[derive(Serialize)]
struct KolmogorovSummary<'a> {
    run: RunInfo,
    kolmogorov: Vec<ResidualEntry>,
    ou_quadratic: ResidualEntry,
    diagnostics: Vec<AccumulatorSummary>,
    checks: &'a [Check],
    blow_ups: &'a [BlowUpRecord],
}

/// Runs the ensemble of `setup` with one residual observer per `p`.
fn residual_run(
    setup: &Setup,
    opts: &RunOptions,
    report: &mut RunReport,
) -> Result<(Vec<MemberOutcome>, Vec<ResidualEntry>)> {
    let c = &setup.config;
    let ps = &c.analysis.p;
    // moments entering the admissibility conditions, logged only
    let fs = dedup(ps.iter().flat_map(|&p| [Functional::SobolevSq(p), Functional::SobolevSq(p + 1)]).collect());
    let members = run_members(setup, opts, report, |_| {
        let mut probe = Probe::new(setup, fs.clone());
        for &p in ps {
            probe.residuals.push(ResidualObserver::new(
                LyapunovFunctional::new(p)?,
                &setup.forcing,
                c.nu,
                c.nonlinear,
            )?);
        }
        Ok(probe)
    })?;
    if !require_samples(&members, opts, report)? {
        return Ok((members, Vec::new()));
    }

    let window: f64 = members
        .iter()
        .map(|m| match (m.probe.times.first(), m.probe.times.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        })
        .sum();
    let mut entries = Vec::new();
    for i in 0..ps.len() {
        let mut acc: Option<MomentAccumulator> = None;
        for m in &members {
            let a = m.probe.residuals[i].accumulator();
            match &mut acc {
                Some(t) => t.merge(a)?,
                None => acc = Some(a.clone()),
            }
        }
        let acc = acc.expect("at least one member");
        entries.push(ResidualEntry {
            residual: StationarityResidual {
                functional: acc.id().to_string(),
                mean: acc.mean(),
                stderr: acc.stderr(),
                samples: acc.count(),
            },
            estimate: format!("dt={}", setup.sim.dt),
            window_length: window,
        });
    }
    Ok((members, entries))
}

fn run_kolmogorov(setup: &Setup, opts: &RunOptions, report: &mut RunReport) -> Result<()> {
    let c = &setup.config;
    let ps = &c.analysis.p;
    if c.analysis.extrapolate && (opts.resume.is_some() || opts.max_steps.is_some()) {
        return Err(Error::Invalid(
            "analysis.extrapolate cannot be combined with --resume or --max-steps".into(),
        ));
    }
    let (members, mut entries) = residual_run(setup, opts, report)?;
    if entries.is_empty() {
        return Ok(());
    }
    let judged: Vec<ResidualEntry> = if c.analysis.extrapolate {
        // independent noise at half the step, sampled at the same times
        let mut fine_cfg = c.clone();
        fine_cfg.dt = c.dt / 2.0;
        fine_cfg.sample_stride = 2 * c.sample_stride;
        fine_cfg.seed = c.seed.wrapping_add(0x9e37_79b9_7f4a_7c15);
        fine_cfg.output_dir = c.output_dir.join("half_dt");
        fs::create_dir_all(&fine_cfg.output_dir)?;
        let fine = Setup::new(&fine_cfg)?;
        let (_, fine_entries) = residual_run(&fine, opts, report)?;
        let combined: Vec<ResidualEntry> = entries
            .iter()
            .zip(&fine_entries)
            .map(|(co, fi)| ResidualEntry {
                residual: richardson_residual(&co.residual, &fi.residual),
                estimate: "richardson".into(),
                window_length: co.window_length + fi.window_length,
            })
            .collect();
        entries.extend(fine_entries);
        entries.extend(combined.iter().cloned());
        combined
    } else {
        entries.clone()
    };
    for (e, &p) in judged.iter().zip(ps) {
        let r = &e.residual;
        report.checks.push(Check::new(
            format!("stationarity_p{p}"),
            r.within(3.0),
            format!("{}: mean {:e}, stderr {:e}", e.estimate, r.mean, r.stderr),
        ));
    }

    let ou = OuSpec::new(c.nu, setup.forcing.clone())?;
    let quad = ou_quadratic_residual(&ou, c.analysis.ou_samples, &mut aux_rng(c.seed, 0))?;
    report.checks.push(Check::new(
        "ou_quadratic_residual",
        quad.within(3.0),
        format!("mean {:e}, stderr {:e}, {} samples", quad.mean, quad.stderr, quad.samples),
    ));

    let rows: Vec<Vec<Cell>> = entries
        .iter()
        .chain(std::iter::once(&ResidualEntry {
            residual: quad.clone(),
            estimate: "exact_samples".into(),
            window_length: 0.0,
        }))
        .map(|e| {
            vec![
                e.residual.functional.as_str().into(),
                e.estimate.as_str().into(),
                e.residual.mean.into(),
                e.residual.stderr.into(),
                e.residual.samples.into(),
                e.window_length.into(),
            ]
        })
        .collect();
    let path = c.output_dir.join("residuals.csv");
    let header = ps.iter().fold(setup.header(Command::Kolmogorov), |h, &p| {
        h.with_functional(
            format!("lyapunov_p{p}"),
            format!("(1 + |x|_{p}^2)^(-1/{})", 2 * p - 1),
        )
    });
    write_csv(
        &path,
        &header.with_functional("quadratic_l2", "|x|_0^2 under exact linear-system draws"),
        &["functional", "estimate", "mean", "stderr", "samples", "window_length"],
        &rows,
    )?;
    report.files.push(path);

    let body = KolmogorovSummary {
        run: run_info(setup, &members),
        kolmogorov: entries,
        ou_quadratic: ResidualEntry {
            residual: quad,
            estimate: "exact_samples".into(),
            window_length: 0.0,
        },
        diagnostics: summaries(&members)?,
        checks: &report.checks,
        blow_ups: &report.blow_ups,
    };
    let path = write_json(setup, Command::Kolmogorov, &body)?;
    report.files.push(path);
    Ok(())
}

#[derive(Serialize)]
struct DissipationSummary<'a> {
    run: RunInfo,
    fit: Option<DissipationFit>,
    fit_error: Option<String>,
    spectrum: &'a ShellSpectrum,
    checks: &'a [Check],
    blow_ups: &'a [BlowUpRecord],
}

fn run_dissipation(setup: &Setup, opts: &RunOptions, report: &mut RunReport) -> Result<()> {
    let fs = vec![Functional::SobolevSq(0)];
    let members = run_members(setup, opts, report, |_| Ok(Probe::new(setup, fs.clone())))?;
    if !require_samples(&members, opts, report)? {
        return Ok(());
    }
    let spectrum = merged_spectrum(setup, &members)?;
    write_spectrum(setup, Command::Dissipation, &spectrum, report)?;
    let (fit, fit_error) = match dissipation_scale_fit(&spectrum, setup.config.forcing.beta) {
        Ok(f) => (Some(f), None),
        Err(Error::Diagnostic(m)) => (None, Some(m)),
        Err(e) => return Err(e),
    };
    report.checks.push(match (&fit, &fit_error) {
        (Some(f), _) => Check::new(
            "dissipation_fit",
            !f.non_gevrey && f.r_squared >= 0.9,
            format!(
                "decay rate {:e}, scale {:e}, R^2 {:.4}, {} shells",
                f.decay_rate, f.scale, f.r_squared, f.shells_used
            ),
        ),
        (None, m) => Check::new("dissipation_fit", false, m.clone().unwrap_or_default()),
    });
    let body = DissipationSummary {
        run: run_info(setup, &members),
        fit,
        fit_error,
        spectrum: &spectrum,
        checks: &report.checks,
        blow_ups: &report.blow_ups,
    };
    let path = write_json(setup, Command::Dissipation, &body)?;
    report.files.push(path);
    Ok(())
}
