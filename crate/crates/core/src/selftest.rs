//! Quick oracle checks, runnable from the command line.

use crate::covariance::{model_covariance, objective, Atom};
use crate::descent::DetectOptions;
use crate::direct::{self, derivative_numerator, SpectralData};
use crate::harness::{csv_without_timing, sweep, ExperimentSpec, Scheme, SweepParam};
use crate::linalg::{hpd_inverse, rel_frobenius};
use crate::polyroot::{real_roots_in_interval, RealPolynomial};
use crate::signal::{
    generate_noise, received_direct, received_effective, sample_covariance, PilotSet,
    ReceivedBatch, SampleCovariance, Scene, SystemConfig,
};
use crate::virtual_dev::{self, column_blocks, delta_penalized_objective, penalized_objective};
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> Check {
    match f() {
        Ok((passed, detail)) => Check {
            name,
            passed,
            detail,
        },
        Err(e) => Check {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

fn scenario(config: &SystemConfig, seed: u64) -> Result<(PilotSet, SampleCovariance)> {
    let pilots = PilotSet::generate(config, seed)?;
    let scene = Scene::generate(config, seed)?;
    let noise = generate_noise(config, seed);
    let r = received_effective(&scene, &pilots, config, &noise)?;
    Ok((pilots, sample_covariance(&r)))
}

fn model_equivalence() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for (k, (l, p)) in [(8, 1), (8, 2), (16, 4), (16, 2)].into_iter().enumerate() {
        let config = SystemConfig::new(6, 3, l, p, 0.1, 0.5)?;
        let seed = 100 + k as u64;
        let pilots = PilotSet::generate(&config, seed)?;
        let scene = Scene::generate(&config, seed)?;
        let noise = generate_noise(&config, seed);
        let ReceivedBatch(a) = received_direct(&scene, &pilots, &config, &noise)?;
        let ReceivedBatch(b) = received_effective(&scene, &pilots, &config, &noise)?;
        worst = worst.max(rel_frobenius(&a, &b));
    }
    Ok((worst <= 1e-9, format!("max relative gap {worst:.2e}")))
}

fn worked_numerator() -> Result<(bool, String)> {
    let sd = SpectralData {
        v: vec![1.0, 2.0],
        u: vec![3.0, 5.0],
    };
    let got = derivative_numerator(&sd);
    let want = [-5.0, -9.0, 1.0, 8.0];
    let ok = got.coeffs().len() == 4
        && got
            .coeffs()
            .iter()
            .zip(want)
            .all(|(a, b)| (a - b).abs() <= 1e-12);
    Ok((ok, format!("{:?}", got.coeffs())))
}

fn cubic_roots() -> Result<(bool, String)> {
    // (d − 0.25)(d − 0.5)(d − 2)
    let p = RealPolynomial::new(vec![-0.25, 1.625, -2.75, 1.0]);
    let roots = real_roots_in_interval(&p, 0.0, 1.0)?;
    let ok = roots.len() == 2 && (roots[0] - 0.25).abs() < 1e-12 && (roots[1] - 0.5).abs() < 1e-12;
    Ok((ok, format!("{roots:?}")))
}

fn flat_fading_step() -> Result<(bool, String)> {
    let config = SystemConfig::new(12, 8, 16, 1, 0.2, 0.3)?;
    let (pilots, sample) = scenario(&config, 7)?;
    let opts = DetectOptions {
        max_sweeps: 1,
        tol: 0.0,
        ..DetectOptions::default()
    };
    let state = direct::detect(&sample, &pilots, &config, &opts)?.state;
    let mut worst: f64 = 0.0;
    for n in 0..config.devices {
        let (v, t) = direct::quadratic_forms(state.cov.inv(), pilots.block(n), &sample, 1.0);
        let (v, u) = (v[(0, 0)].re, t[(0, 0)].re);
        let a = state.alpha[n];
        let closed = ((u - v) / (v * v)).clamp(-a, 1.0 - a);
        let step = direct::coordinate_step(n, &state, &sample, &pilots, &config)?;
        worst = worst.max((step - closed).abs());
    }
    Ok((worst <= 1e-10, format!("max deviation {worst:.2e}")))
}

fn direct_consistency() -> Result<(bool, String)> {
    let config = SystemConfig::new(20, 16, 16, 3, 0.1, 0.3)?;
    let (pilots, sample) = scenario(&config, 11)?;
    let opts = DetectOptions {
        max_sweeps: 3,
        tol: 0.0,
        ..DetectOptions::default()
    };
    let out = direct::detect(&sample, &pilots, &config, &opts)?;
    let atoms: Vec<Atom<'_>> = pilots
        .blocks()
        .iter()
        .map(|block| Atom { block, gain: 1.0 })
        .collect();
    let sigma = model_covariance(
        &out.state.alpha,
        &atoms,
        config.noise_var,
        config.subcarriers,
    )?;
    let inv_gap = rel_frobenius(out.state.cov.inv(), &hpd_inverse(&sigma)?);

    let n = 0;
    let (v, t) = direct::quadratic_forms(out.state.cov.inv(), pilots.block(n), &sample, 1.0);
    let sd = direct::spectral(&v, &t)?;
    let d = 0.5 * (1.0 - out.state.alpha[n]) - 0.25 * out.state.alpha[n];
    let fast = direct::delta_objective(&sd, d)?;
    let mut moved = out.state.alpha.clone();
    moved[n] += d;
    let dense = objective(&moved, &atoms, config.noise_var, &sample)?
        - objective(&out.state.alpha, &atoms, config.noise_var, &sample)?;
    let delta_gap = (fast - dense).abs();
    Ok((
        inv_gap <= 1e-8 && delta_gap <= 1e-8,
        format!("inverse gap {inv_gap:.2e}, increment gap {delta_gap:.2e}"),
    ))
}

fn virtual_consistency() -> Result<(bool, String)> {
    let config = SystemConfig::new(10, 16, 16, 2, 0.1, 0.3)?;
    let (pilots, sample) = scenario(&config, 13)?;
    let opts = DetectOptions {
        max_sweeps: 2,
        tol: 0.0,
        ..DetectOptions::default()
    };
    let out = virtual_dev::detect(&sample, &pilots, &config, 0.7, &opts)?;
    let blocks = column_blocks(&pilots);
    let i = 3;
    let col = pilots.stacked().column(i).into_owned();
    let d = 0.4 * (1.0 - out.state.beta[i]) - 0.2 * out.state.beta[i];
    let fast = delta_penalized_objective(i, &out.state, &sample, &col, 1.0, d)?;
    let mut moved = out.state.clone();
    moved.beta[i] += d;
    let dense = penalized_objective(&moved, &blocks, &config, &sample)?
        - penalized_objective(&out.state, &blocks, &config, &sample)?;
    let gap = (fast - dense).abs();
    let sums_gap = out
        .state
        .recomputed_group_sums()
        .iter()
        .zip(&out.state.group_sums)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok((
        gap <= 1e-8 && sums_gap <= 1e-10,
        format!("increment gap {gap:.2e}, group-sum drift {sums_gap:.2e}"),
    ))
}

fn determinism() -> Result<(bool, String)> {
    let mut spec = ExperimentSpec::desk();
    spec.base = SystemConfig::new(12, 8, 16, 2, 0.1, 0.2)?;
    spec.param = SweepParam::Taps;
    spec.values = vec![1.0, 2.0];
    spec.trials = 3;
    spec.schemes = Scheme::ALL.to_vec();
    let a = csv_without_timing(&sweep(&spec)?);
    let b = csv_without_timing(&sweep(&spec)?);
    Ok((a == b, format!("{} bytes", a.len())))
}

/// Run every check; never panics.
pub fn run_all() -> Vec<Check> {
    vec![
        check("model-equivalence", model_equivalence),
        check("numerator-worked-example", worked_numerator),
        check("cubic-roots", cubic_roots),
        check("flat-fading-step", flat_fading_step),
        check("direct-woodbury-and-increment", direct_consistency),
        check("virtual-increment-and-group-sums", virtual_consistency),
        check("sweep-determinism", determinism),
    ]
}
