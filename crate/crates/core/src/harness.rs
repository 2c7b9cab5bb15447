//! Monte-Carlo trials, error metrics, threshold optimisation, parameter
//! sweeps and timing benchmarks.
//!
//! Every trial `k` of an experiment draws its pilots, scene and noise from
//! the substreams of `trial_seed(root, k)` (see [`crate::rng`]), so the same
//! trial index sees the same activity pattern at every sweep point and the
//! output never depends on how trials are scheduled across threads.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::descent::DetectOptions;
use crate::signal::{
    generate_noise, received_effective, sample_covariance, PilotSet, SampleCovariance, Scene,
    SystemConfig,
};
use crate::{direct, rng, virtual_dev, Error, Result};

/// Bit-exact header of the sweep CSV.
pub const CSV_HEADER: &str =
    "sweep_param,sweep_value,scheme,trials,mean_error_rate,stderr_error_rate,threshold,mean_seconds";

const THRESHOLD_EPS: f64 = 1e-9;
const GEOMETRIC_MULTIPLIERS: [f64; 3] = [0.1, 1.0, 10.0];
/// Default penalty weight as a fraction of the per-dimension received energy.
/// Weights near `tr(Σ̂)/L` pin groups to whichever vertex the first sweep
/// visits; a few thousandths of it keep the penalty a tie-breaker.
pub const DEFAULT_RHO_SCALE: f64 = 0.003;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Coordinate descent over device activities.
    MleDirect,
    /// Penalized coordinate descent over virtual devices.
    MleVirtual,
    /// Virtual devices without penalty.
    BlMle,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::MleDirect, Scheme::MleVirtual, Scheme::BlMle];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::MleDirect => "mle-direct",
            Scheme::MleVirtual => "mle-virtual",
            Scheme::BlMle => "bl-mle",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "mle-direct" => Ok(Scheme::MleDirect),
            "mle-virtual" => Ok(Scheme::MleVirtual),
            "bl-mle" => Ok(Scheme::BlMle),
            other => Err(Error::InvalidConfig(format!("unknown scheme '{other}'"))),
        }
    }
}

/// Parse a comma-separated scheme list; an empty list is an error.
pub fn parse_schemes(s: &str) -> Result<Vec<Scheme>> {
    let out: Vec<Scheme> = s
        .split(',')
        .filter(|t| !t.trim().is_empty())
        .map(str::parse)
        .collect::<Result<_>>()?;
    if out.is_empty() {
        return Err(Error::NoSchemes);
    }
    Ok(out)
}

/// Penalty weight for `mle-virtual`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RhoPolicy {
    /// `DEFAULT_RHO_SCALE · tr(Σ̂)/L`.
    Default,
    /// A multiple of the default.
    Scaled(f64),
    Fixed(f64),
    /// Try `{0.1, 1, 10} × default` and keep the multiplier with the lowest
    /// post-threshold error.
    GeometricSweep,
}

impl RhoPolicy {
    fn multipliers(&self) -> Vec<f64> {
        match self {
            RhoPolicy::GeometricSweep => GEOMETRIC_MULTIPLIERS.to_vec(),
            RhoPolicy::Scaled(k) => vec![*k],
            _ => vec![1.0],
        }
    }

    fn resolve(&self, multiplier: f64, sample: &SampleCovariance) -> f64 {
        match self {
            RhoPolicy::Fixed(r) => *r,
            _ => multiplier * DEFAULT_RHO_SCALE * sample.trace() / sample.dim() as f64,
        }
    }
}

impl FromStr for RhoPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "default" => Ok(RhoPolicy::Default),
            "sweep" => Ok(RhoPolicy::GeometricSweep),
            t => {
                if let Some(k) = t.strip_suffix('x') {
                    let k: f64 = k
                        .parse()
                        .map_err(|_| Error::InvalidConfig(format!("bad rho multiplier '{t}'")))?;
                    if !(k >= 0.0) || !k.is_finite() {
                        return Err(Error::InvalidConfig(format!("bad rho multiplier '{t}'")));
                    }
                    return Ok(RhoPolicy::Scaled(k));
                }
                let r: f64 = t
                    .parse()
                    .map_err(|_| Error::InvalidConfig(format!("bad rho '{t}'")))?;
                if !(r >= 0.0) || !r.is_finite() {
                    return Err(Error::InvalidConfig(format!("rho must be >= 0, got '{t}'")));
                }
                Ok(RhoPolicy::Fixed(r))
            }
        }
    }
}

/// Fraction of positions where `decisions` and `truth` differ.
pub fn error_rate(decisions: &[bool], truth: &[bool]) -> Result<f64> {
    if decisions.len() != truth.len() {
        return Err(Error::LengthMismatch(decisions.len(), truth.len()));
    }
    if truth.is_empty() {
        return Ok(0.0);
    }
    let wrong = decisions.iter().zip(truth).filter(|(a, b)| a != b).count();
    Ok(wrong as f64 / truth.len() as f64)
}

/// Active iff the score exceeds the threshold.
pub fn decide(scores: &[f64], threshold: f64) -> Vec<bool> {
    scores.iter().map(|s| *s > threshold).collect()
}

fn mean_error_at(score_sets: &[Vec<f64>], truths: &[Vec<bool>], theta: f64) -> f64 {
    let total: f64 = score_sets
        .iter()
        .zip(truths)
        .map(|(s, t)| error_rate(&decide(s, theta), t).unwrap_or(1.0))
        .sum();
    total / score_sets.len().max(1) as f64
}

/// Threshold minimising the mean per-trial error rate.
///
/// Candidates are the midpoints between adjacent distinct pooled scores plus
/// one point below and one above all scores; ties go to the smallest threshold.
/// Returns `(threshold, mean error rate)`.
pub fn optimize_threshold(score_sets: &[Vec<f64>], truths: &[Vec<bool>]) -> (f64, f64) {
    let trials = score_sets.len().min(truths.len());
    if trials == 0 {
        return (0.5, 0.0);
    }
    // (score, active, weight)
    let mut pooled: Vec<(f64, bool, f64)> = Vec::new();
    for (scores, truth) in score_sets.iter().zip(truths).take(trials) {
        let w = 1.0 / (scores.len().max(1) as f64 * trials as f64);
        pooled.extend(scores.iter().zip(truth).map(|(s, t)| (*s, *t, w)));
    }
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));

    let lowest = pooled.first().map_or(0.0, |e| e.0).min(0.0) - THRESHOLD_EPS;
    let highest = pooled.last().map_or(1.0, |e| e.0).max(1.0) + THRESHOLD_EPS;
    // everything above the lowest threshold is declared active
    let mut err: f64 = pooled.iter().filter(|e| !e.1).map(|e| e.2).sum();
    let mut best = (lowest, err);
    let mut k = 0;
    while k < pooled.len() {
        let value = pooled[k].0;
        while k < pooled.len() && pooled[k].0 == value {
            let (_, active, w) = pooled[k];
            err += if active { w } else { -w };
            k += 1;
        }
        let theta = if k < pooled.len() {
            0.5 * (value + pooled[k].0)
        } else {
            highest
        };
        if err < best.1 - 1e-12 {
            best = (theta, err);
        }
    }
    let theta = best.0;
    (
        theta,
        mean_error_at(&score_sets[..trials], &truths[..trials], theta),
    )
}

/// Outcome of one scheme on one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeResult {
    pub scheme: Scheme,
    pub scores: Vec<f64>,
    pub decisions: Vec<bool>,
    pub threshold: f64,
    pub errors: usize,
    pub seconds: f64,
    pub sweeps: usize,
    /// Penalty weight used (virtual-device schemes only).
    pub rho: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialReport {
    pub seed: u64,
    pub truth: Vec<bool>,
    pub results: Vec<SchemeResult>,
}

impl TrialReport {
    pub fn result(&self, scheme: Scheme) -> Option<&SchemeResult> {
        self.results.iter().find(|r| r.scheme == scheme)
    }

    /// Same report with the wall-clock fields zeroed, for comparisons.
    pub fn without_timing(&self) -> Self {
        let mut out = self.clone();
        out.results.iter_mut().for_each(|r| r.seconds = 0.0);
        out
    }
}

/// Pilots, scene and sample covariance of one trial.
#[derive(Debug, Clone)]
pub struct TrialData {
    pub pilots: PilotSet,
    pub scene: Scene,
    pub sample: SampleCovariance,
}

impl TrialData {
    pub fn generate(config: &SystemConfig, seed: u64) -> Result<Self> {
        let pilots = PilotSet::generate(config, seed)?;
        let scene = Scene::generate(config, seed)?;
        Self::from_parts(config, pilots, scene, seed)
    }

    /// Reuse given pilots and scene; noise comes from the seed.
    pub fn from_parts(
        config: &SystemConfig,
        pilots: PilotSet,
        scene: Scene,
        seed: u64,
    ) -> Result<Self> {
        let noise = generate_noise(config, seed);
        let received = received_effective(&scene, &pilots, config, &noise)?;
        let sample = sample_covariance(&received);
        Ok(Self {
            pilots,
            scene,
            sample,
        })
    }
}

/// One detector invocation: a scheme and (for virtual devices) a rho multiplier.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Variant {
    scheme: Scheme,
    multiplier: f64,
}

fn variants(schemes: &[Scheme], rho: &RhoPolicy) -> Vec<Variant> {
    let mut out = Vec::new();
    for &scheme in schemes {
        match scheme {
            Scheme::MleVirtual => out.extend(
                rho.multipliers()
                    .into_iter()
                    .map(|multiplier| Variant { scheme, multiplier }),
            ),
            _ => out.push(Variant {
                scheme,
                multiplier: 1.0,
            }),
        }
    }
    out
}

struct RawRun {
    scores: Vec<f64>,
    seconds: f64,
    sweeps: usize,
    rho: Option<f64>,
}

/// Run one scheme on given data; returns scores, wall time, sweep count and rho.
fn run_variant(
    variant: Variant,
    data: &TrialData,
    config: &SystemConfig,
    rho: &RhoPolicy,
    opts: &DetectOptions,
) -> Result<RawRun> {
    let start = Instant::now();
    let (scores, sweeps, used_rho) = match variant.scheme {
        Scheme::MleDirect => {
            let out = direct::detect(&data.sample, &data.pilots, config, opts)?;
            (out.scores, out.diagnostics.sweeps, None)
        }
        Scheme::MleVirtual => {
            let r = rho.resolve(variant.multiplier, &data.sample);
            let out = virtual_dev::detect(&data.sample, &data.pilots, config, r, opts)?;
            (out.scores, out.diagnostics.sweeps, Some(r))
        }
        Scheme::BlMle => {
            let out = virtual_dev::detect(&data.sample, &data.pilots, config, 0.0, opts)?;
            (out.scores, out.diagnostics.sweeps, Some(0.0))
        }
    };
    Ok(RawRun {
        scores,
        seconds: start.elapsed().as_secs_f64(),
        sweeps,
        rho: used_rho,
    })
}

/// Generate one trial from `seed` and run every requested scheme on the same `Σ̂`.
pub fn run_trial(
    config: &SystemConfig,
    schemes: &[Scheme],
    seed: u64,
    rho: &RhoPolicy,
    opts: &DetectOptions,
) -> Result<TrialReport> {
    if schemes.is_empty() {
        return Err(Error::NoSchemes);
    }
    let data = TrialData::generate(config, seed)?;
    run_trial_on(config, schemes, &data, seed, rho, opts)
}

/// As [`run_trial`] on pre-built data.
pub fn run_trial_on(
    config: &SystemConfig,
    schemes: &[Scheme],
    data: &TrialData,
    seed: u64,
    rho: &RhoPolicy,
    opts: &DetectOptions,
) -> Result<TrialReport> {
    let truth = data.scene.activities.clone();
    let mut results = Vec::with_capacity(schemes.len());
    for &scheme in schemes {
        let mut best: Option<SchemeResult> = None;
        for variant in variants(&[scheme], rho) {
            let run = run_variant(variant, data, config, rho, opts)?;
            let (threshold, _) = optimize_threshold(
                std::slice::from_ref(&run.scores),
                std::slice::from_ref(&truth),
            );
            let decisions = decide(&run.scores, threshold);
            let errors = decisions.iter().zip(&truth).filter(|(a, b)| a != b).count();
            let candidate = SchemeResult {
                scheme,
                scores: run.scores,
                decisions,
                threshold,
                errors,
                seconds: run.seconds,
                sweeps: run.sweeps,
                rho: run.rho,
            };
            if best.as_ref().is_none_or(|b| candidate.errors < b.errors) {
                best = Some(candidate);
            }
        }
        results.extend(best);
    }
    Ok(TrialReport {
        seed,
        truth,
        results,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Taps,
    Subcarriers,
    Antennas,
    Devices,
    NoiseVar,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Taps => "P",
            SweepParam::Subcarriers => "L",
            SweepParam::Antennas => "M",
            SweepParam::Devices => "N",
            SweepParam::NoiseVar => "noise_var",
        }
    }

    /// Base configuration with this parameter set to `value`.
    pub fn apply(self, base: &SystemConfig, value: f64) -> Result<SystemConfig> {
        let as_count = |v: f64| -> Result<usize> {
            if v >= 1.0 && v.fract() == 0.0 && v < 1e9 {
                Ok(v as usize)
            } else {
                Err(Error::InvalidConfig(format!(
                    "{} must be a positive integer, got {v}",
                    self.name()
                )))
            }
        };
        let mut cfg = base.clone();
        match self {
            SweepParam::Taps => cfg.taps = as_count(value)?,
            SweepParam::Subcarriers => cfg.subcarriers = as_count(value)?,
            SweepParam::Antennas => cfg.antennas = as_count(value)?,
            SweepParam::Devices => cfg = cfg.with_devices(as_count(value)?),
            SweepParam::NoiseVar => cfg.noise_var = value,
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "P" | "taps" => Ok(SweepParam::Taps),
            "L" | "subcarriers" => Ok(SweepParam::Subcarriers),
            "M" | "antennas" => Ok(SweepParam::Antennas),
            "N" | "devices" => Ok(SweepParam::Devices),
            "noise_var" | "sigma2" => Ok(SweepParam::NoiseVar),
            other => Err(Error::InvalidConfig(format!(
                "unknown sweep parameter '{other}'"
            ))),
        }
    }
}

/// A full Monte-Carlo experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub base: SystemConfig,
    pub param: SweepParam,
    pub values: Vec<f64>,
    pub trials: usize,
    pub schemes: Vec<Scheme>,
    pub seed: u64,
    pub rho: RhoPolicy,
    pub options: DetectOptions,
}

impl ExperimentSpec {
    /// N=100, L=32, M=64, P ∈ {1, 2, 4}, activity 0.07, σ²=0.1, 100 trials.
    pub fn desk() -> Self {
        Self {
            base: SystemConfig::new(100, 64, 32, 4, 0.1, 0.07).expect("valid preset"),
            param: SweepParam::Taps,
            values: vec![1.0, 2.0, 4.0],
            trials: 100,
            schemes: Scheme::ALL.to_vec(),
            seed: 1,
            rho: RhoPolicy::Default,
            options: DetectOptions::default(),
        }
    }

    /// Full-size setting: N=1000, L=72, M=128, P=4, 1000 trials. Slow.
    pub fn full() -> Self {
        Self {
            base: SystemConfig::new(1000, 128, 72, 4, 0.1, 0.07).expect("valid preset"),
            param: SweepParam::Taps,
            values: vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
            trials: 1000,
            schemes: Scheme::ALL.to_vec(),
            seed: 1,
            rho: RhoPolicy::Default,
            options: DetectOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schemes.is_empty() {
            return Err(Error::NoSchemes);
        }
        if self.trials == 0 {
            return Err(Error::InvalidConfig(
                "trial count must be at least 1".into(),
            ));
        }
        if self.values.is_empty() {
            return Err(Error::InvalidConfig("sweep has no values".into()));
        }
        for v in &self.values {
            self.param.apply(&self.base, *v)?;
        }
        Ok(())
    }
}

/// One CSV row: a (sweep value, scheme) aggregate.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub param: SweepParam,
    pub value: f64,
    pub scheme: Scheme,
    pub trials: usize,
    pub mean_error_rate: f64,
    pub stderr_error_rate: f64,
    pub threshold: f64,
    pub mean_seconds: f64,
    /// Penalty multiplier chosen under [`RhoPolicy::GeometricSweep`].
    pub rho_multiplier: Option<f64>,
}

impl SweepRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.param.name(),
            self.value,
            self.scheme,
            self.trials,
            self.mean_error_rate,
            self.stderr_error_rate,
            self.threshold,
            self.mean_seconds
        )
    }
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Run a sweep point: all trials, then per-scheme aggregate rows.
pub fn sweep_point(spec: &ExperimentSpec, value: f64) -> Result<Vec<SweepRow>> {
    let config = spec.param.apply(&spec.base, value)?;
    let vars = variants(&spec.schemes, &spec.rho);

    // per trial: truth and one run per variant, in trial-index order
    let per_trial: Vec<(Vec<bool>, Vec<RawRun>)> = (0..spec.trials)
        .into_par_iter()
        .map(|k| {
            let seed = rng::trial_seed(spec.seed, k as u64);
            let wrap = |e: Error| Error::Trial {
                index: k,
                source: Box::new(e),
            };
            let data = TrialData::generate(&config, seed).map_err(wrap)?;
            let runs = vars
                .iter()
                .map(|v| run_variant(*v, &data, &config, &spec.rho, &spec.options))
                .collect::<Result<Vec<_>>>()
                .map_err(wrap)?;
            Ok((data.scene.activities, runs))
        })
        .collect::<Result<_>>()?;

    let truths: Vec<Vec<bool>> = per_trial.iter().map(|(t, _)| t.clone()).collect();
    let mut rows = Vec::with_capacity(spec.schemes.len());
    for &scheme in &spec.schemes {
        let mut best: Option<SweepRow> = None;
        for (vi, variant) in vars.iter().enumerate().filter(|(_, v)| v.scheme == scheme) {
            let scores: Vec<Vec<f64>> = per_trial
                .iter()
                .map(|(_, r)| r[vi].scores.clone())
                .collect();
            let (threshold, _) = optimize_threshold(&scores, &truths);
            let rates: Vec<f64> = scores
                .iter()
                .zip(&truths)
                .map(|(s, t)| error_rate(&decide(s, threshold), t))
                .collect::<Result<_>>()?;
            let (mean, stderr) = mean_and_stderr(&rates);
            let secs: Vec<f64> = per_trial.iter().map(|(_, r)| r[vi].seconds).collect();
            let row = SweepRow {
                param: spec.param,
                value,
                scheme,
                trials: spec.trials,
                mean_error_rate: mean,
                stderr_error_rate: stderr,
                threshold,
                mean_seconds: secs.iter().sum::<f64>() / secs.len() as f64,
                rho_multiplier: (scheme == Scheme::MleVirtual).then_some(variant.multiplier),
            };
            if best
                .as_ref()
                .is_none_or(|b| row.mean_error_rate < b.mean_error_rate)
            {
                best = Some(row);
            }
        }
        rows.extend(best);
    }
    Ok(rows)
}

/// Run the whole sweep, collecting rows.
pub fn sweep(spec: &ExperimentSpec) -> Result<Vec<SweepRow>> {
    sweep_to_writer(spec, &mut std::io::sink())
}

/// Run the sweep, writing the CSV header and each point's rows as soon as the
/// point completes. On failure the rows already written stay flushed.
pub fn sweep_to_writer<W: Write + ?Sized>(
    spec: &ExperimentSpec,
    out: &mut W,
) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    writeln!(out, "{CSV_HEADER}")?;
    out.flush()?;
    let mut all = Vec::new();
    for &value in &spec.values {
        let rows = sweep_point(spec, value)?;
        for row in &rows {
            writeln!(out, "{}", row.csv_line())?;
        }
        out.flush()?;
        all.extend(rows);
    }
    Ok(all)
}

/// CSV text of `rows` with the timing column blanked, for determinism checks.
pub fn csv_without_timing(rows: &[SweepRow]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in rows {
        let line = r.csv_line();
        let cut = line.rfind(',').map_or(line.len(), |i| i + 1);
        s.push_str(&line[..cut]);
        s.push('\n');
    }
    s
}

/// Median timing of one scheme at one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeTiming {
    pub scheme: Scheme,
    pub median_seconds: f64,
    pub median_seconds_per_sweep: f64,
    pub sweeps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub param: SweepParam,
    pub value: f64,
    pub timings: Vec<SchemeTiming>,
    /// `time(mle-direct) / time(mle-virtual)`, when both ran.
    pub ratio: Option<f64>,
}

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Time full detector calls on one realization per sweep point. One warm-up
/// call per scheme is discarded, then `reps` (at least 5) calls are timed.
pub fn bench(spec: &ExperimentSpec, reps: usize) -> Result<Vec<BenchRow>> {
    spec.validate()?;
    let reps = reps.max(5);
    let mut rows = Vec::with_capacity(spec.values.len());
    for &value in &spec.values {
        let config = spec.param.apply(&spec.base, value)?;
        let data = TrialData::generate(&config, rng::trial_seed(spec.seed, 0))?;
        let mut timings = Vec::with_capacity(spec.schemes.len());
        for &scheme in &spec.schemes {
            let variant = Variant {
                scheme,
                multiplier: 1.0,
            };
            run_variant(variant, &data, &config, &spec.rho, &spec.options)?;
            let mut secs = Vec::with_capacity(reps);
            let mut per_sweep = Vec::with_capacity(reps);
            let mut sweeps = 0;
            for _ in 0..reps {
                let run = run_variant(variant, &data, &config, &spec.rho, &spec.options)?;
                secs.push(run.seconds);
                per_sweep.push(run.seconds / run.sweeps.max(1) as f64);
                sweeps = run.sweeps;
            }
            timings.push(SchemeTiming {
                scheme,
                median_seconds: median(&mut secs),
                median_seconds_per_sweep: median(&mut per_sweep),
                sweeps,
            });
        }
        let find = |s: Scheme| {
            timings
                .iter()
                .find(|t| t.scheme == s)
                .map(|t| t.median_seconds)
        };
        let ratio = match (find(Scheme::MleDirect), find(Scheme::MleVirtual)) {
            (Some(a), Some(b)) if b > 0.0 => Some(a / b),
            _ => None,
        };
        rows.push(BenchRow {
            param: spec.param,
            value,
            timings,
            ratio,
        });
    }
    Ok(rows)
}

/// CSV header for `bench` output with the given schemes.
pub fn bench_header(schemes: &[Scheme]) -> String {
    let mut h = String::from("sweep_param,sweep_value");
    for s in schemes {
        h.push_str(&format!(
            ",{s}_median_seconds,{s}_seconds_per_sweep,{s}_sweeps"
        ));
    }
    if schemes.contains(&Scheme::MleDirect) && schemes.contains(&Scheme::MleVirtual) {
        h.push_str(",ratio");
    }
    h
}

impl BenchRow {
    pub fn csv_line(&self) -> String {
        let mut line = format!("{},{}", self.param.name(), self.value);
        for t in &self.timings {
            line.push_str(&format!(
                ",{},{},{}",
                t.median_seconds, t.median_seconds_per_sweep, t.sweeps
            ));
        }
        if let Some(r) = self.ratio {
            line.push_str(&format!(",{r}"));
        }
        line
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_rate_examples() {
        let truth = vec![
            true, false, false, true, false, false, false, true, false, false,
        ];
        assert_eq!(error_rate(&truth, &truth).unwrap(), 0.0);
        let flipped: Vec<bool> = truth.iter().map(|t| !t).collect();
        assert_eq!(error_rate(&flipped, &truth).unwrap(), 1.0);
        let mut three = truth.clone();
        for k in [0, 4, 9] {
            three[k] = !three[k];
        }
        assert!((error_rate(&three, &truth).unwrap() - 0.3).abs() < 1e-15);
        assert!(matches!(
            error_rate(&truth[..3], &truth),
            Err(Error::LengthMismatch(3, 10))
        ));
    }

    #[test]
    fn separated_scores_threshold() {
        let truth = vec![true, false, true, false];
        let scores = vec![0.9, 0.1, 0.9, 0.1];
        let (theta, err) = optimize_threshold(&[scores], &[truth]);
        assert_eq!(theta, 0.5);
        assert_eq!(err, 0.0);
    }

    #[test]
    fn identical_scores_use_extreme_threshold() {
        let truth = vec![true, false, false, true, false];
        let (theta, err) = optimize_threshold(&[vec![0.4; 5]], &[truth]);
        assert!((err - 0.4).abs() < 1e-15);
        assert!(theta > 1.0);
        let truth = vec![true, true, true, false, false];
        let (theta, err) = optimize_threshold(&[vec![0.4; 5]], &[truth]);
        assert!((err - 0.4).abs() < 1e-15);
        assert!(theta < 0.0);
    }

    #[test]
    fn scheme_and_rho_parsing() {
        assert_eq!(
            parse_schemes("mle-direct, bl-mle").unwrap(),
            vec![Scheme::MleDirect, Scheme::BlMle]
        );
        assert!(matches!(parse_schemes(""), Err(Error::NoSchemes)));
        assert!(parse_schemes("amp").is_err());
        assert_eq!(
            "sweep".parse::<RhoPolicy>().unwrap(),
            RhoPolicy::GeometricSweep
        );
        assert_eq!("2.5".parse::<RhoPolicy>().unwrap(), RhoPolicy::Fixed(2.5));
        assert_eq!("10x".parse::<RhoPolicy>().unwrap(), RhoPolicy::Scaled(10.0));
        assert!("-1".parse::<RhoPolicy>().is_err());
    }

    #[test]
    fn sweep_param_validation() {
        let base = SystemConfig::new(10, 4, 16, 2, 0.1, 0.1).unwrap();
        assert!(SweepParam::Taps.apply(&base, 16.0).is_err());
        assert!(SweepParam::Taps.apply(&base, 2.5).is_err());
        assert_eq!(
            SweepParam::Devices.apply(&base, 20.0).unwrap().gains.len(),
            20
        );
    }

    #[test]
    fn empty_schemes_rejected() {
        let mut spec = ExperimentSpec::desk();
        spec.schemes.clear();
        assert!(matches!(sweep(&spec), Err(Error::NoSchemes)));
        let cfg = spec.base.clone();
        assert!(matches!(
            run_trial(&cfg, &[], 1, &RhoPolicy::Default, &DetectOptions::default()),
            Err(Error::NoSchemes)
        ));
    }

    #[test]
    fn bench_header_ratio_only_with_both_algorithms() {
        assert!(!bench_header(&[Scheme::MleDirect]).contains("ratio"));
        assert!(bench_header(&[Scheme::MleDirect, Scheme::MleVirtual]).ends_with(",ratio"));
    }
}
