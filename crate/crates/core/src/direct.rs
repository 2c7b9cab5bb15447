//! Coordinate descent over the `N` device activities with rank-`P` atoms.
//!
//! Each coordinate subproblem `min_{d ∈ [−α_n, 1−α_n]} f(α + d·e_n)` is solved
//! exactly: in the eigenbasis of `V = g_n·S_nᴴΣ⁻¹S_n` the objective increment
//! is `Σ_p log(1 + d·v_p) − d·Σ_p u_p/(1 + d·v_p)`, whose derivative has the
//! numerator polynomial of degree `2P − 1` built by [`derivative_numerator`].
//! The minimizer is the best of that polynomial's roots in the interval and
//! the two endpoints. `Σ⁻¹` is kept current with the Woodbury identity.

use nalgebra::SymmetricEigen;

use crate::covariance::{objective, Atom, CovarianceState};
use crate::descent::{pick_candidate, DetectOptions, Diagnostics, ObjectiveTrace};
use crate::linalg::{c, hermitize};
use crate::polyroot::{real_roots_in_interval, RealPolynomial};
use crate::signal::{PilotSet, SampleCovariance, SystemConfig};
use crate::{CMatrix, Error, Result};

/// Eigen-data of one coordinate subproblem, with the gain absorbed.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralData {
    /// Eigenvalues of `V`, ascending.
    pub v: Vec<f64>,
    /// Diagonal of `Uᴴ·T·U` in the same eigenbasis.
    pub u: Vec<f64>,
}

/// `V = g·Sᴴ·Σ⁻¹·S` and `T = g·Sᴴ·Σ⁻¹·Σ̂·Σ⁻¹·S`.
pub fn quadratic_forms(
    inv: &CMatrix,
    block: &CMatrix,
    sample: &SampleCovariance,
    gain: f64,
) -> (CMatrix, CMatrix) {
    let proj = Projection::new(inv, block, sample, gain);
    (proj.v, proj.t)
}

struct Projection {
    // Σ⁻¹·S
    w: CMatrix,
    // Sᴴ·Σ⁻¹·S
    gram: CMatrix,
    v: CMatrix,
    t: CMatrix,
}

impl Projection {
    fn new(inv: &CMatrix, block: &CMatrix, sample: &SampleCovariance, gain: f64) -> Self {
        let w = inv * block;
        let mut gram = block.adjoint() * &w;
        hermitize(&mut gram);
        let v = &gram * c(gain);
        let sw = sample.mat() * &w;
        let mut t = w.adjoint() * sw * c(gain);
        hermitize(&mut t);
        Self { w, gram, v, t }
    }
}

/// Eigendecomposition of `V` and the matching diagonal of `T`.
pub fn spectral(v: &CMatrix, t: &CMatrix) -> Result<SpectralData> {
    let p = v.nrows();
    if p == 1 {
        return Ok(SpectralData {
            v: vec![v[(0, 0)].re],
            u: vec![t[(0, 0)].re],
        });
    }
    let eig = SymmetricEigen::try_new(v.clone(), f64::EPSILON, 10_000).ok_or(Error::Eigen)?;
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|a, b| eig.eigenvalues[*a].total_cmp(&eig.eigenvalues[*b]));
    let mut vs = Vec::with_capacity(p);
    let mut us = Vec::with_capacity(p);
    for k in order {
        let vec = eig.eigenvectors.column(k);
        let tv = t * vec;
        vs.push(eig.eigenvalues[k]);
        us.push(vec.dotc(&tv).re);
    }
    if vs.iter().chain(&us).any(|x| !x.is_finite()) {
        return Err(Error::Eigen);
    }
    Ok(SpectralData { v: vs, u: us })
}

/// `f(α + d·e_n) − f(α)` in the eigenbasis.
pub fn delta_objective(sd: &SpectralData, d: f64) -> Result<f64> {
    let mut out = 0.0;
    for (v, u) in sd.v.iter().zip(&sd.u) {
        let den = 1.0 + d * v;
        if !(den > 0.0) {
            return Err(Error::InfeasibleStep);
        }
        out += den.ln() - d * u / den;
    }
    Ok(out)
}

/// Numerator of `d/dd delta_objective`, whose denominator is `Π_p (1 + d·v_p)²`:
/// `Σ_p [v_p·(1 + d·v_p) − u_p] · Π_{q≠p} (1 + d·v_q)²`.
pub fn derivative_numerator(sd: &SpectralData) -> RealPolynomial {
    let p = sd.v.len();
    let squares: Vec<RealPolynomial> =
        sd.v.iter()
            .map(|v| RealPolynomial::new(vec![1.0, 2.0 * v, v * v]))
            .collect();
    let mut total = RealPolynomial::constant(0.0);
    for k in 0..p {
        let (v, u) = (sd.v[k], sd.u[k]);
        let mut term = RealPolynomial::new(vec![v - u, v * v]);
        for (q, sq) in squares.iter().enumerate() {
            if q != k {
                term = term.multiply(sq);
            }
        }
        total = total.add(&term);
    }
    total
}

/// Exact minimizer of [`delta_objective`] over `[lo, hi]`.
pub fn optimal_step(sd: &SpectralData, lo: f64, hi: f64) -> Result<f64> {
    let numerator = derivative_numerator(sd);
    let roots = if numerator.degree() == 0 {
        Vec::new()
    } else {
        real_roots_in_interval(&numerator, lo, hi)?
    };
    let candidates: Vec<(f64, f64)> = roots
        .into_iter()
        .chain([lo, hi])
        .filter_map(|d| delta_objective(sd, d).ok().map(|f| (d, f)))
        .collect();
    pick_candidate(&candidates).ok_or(Error::InfeasibleStep)
}

/// Activities and covariance inverse of one detector run.
#[derive(Debug, Clone)]
pub struct DirectState {
    pub alpha: Vec<f64>,
    pub cov: CovarianceState,
    pub sweep_count: usize,
}

impl DirectState {
    pub fn new(config: &SystemConfig) -> Self {
        Self {
            alpha: vec![0.0; config.devices],
            cov: CovarianceState::init(config.subcarriers, config.noise_var),
            sweep_count: 0,
        }
    }

    /// Solve coordinate `n` and apply the step; returns `d*`.
    fn step_and_update(
        &mut self,
        n: usize,
        sample: &SampleCovariance,
        pilots: &PilotSet,
        gain: f64,
    ) -> Result<f64> {
        if gain == 0.0 {
            return Ok(0.0);
        }
        let proj = Projection::new(self.cov.inv(), pilots.block(n), sample, gain);
        let sd = spectral(&proj.v, &proj.t)?;
        let a = self.alpha[n];
        let d = optimal_step(&sd, -a, 1.0 - a)?;
        if d != 0.0 {
            self.cov
                .apply_projected_update(&proj.w, &proj.gram, d * gain)?;
            self.alpha[n] = (a + d).clamp(0.0, 1.0);
        }
        Ok(d)
    }
}

/// Optimal increment for coordinate `n` at the current state (state unchanged).
pub fn coordinate_step(
    n: usize,
    state: &DirectState,
    sample: &SampleCovariance,
    pilots: &PilotSet,
    config: &SystemConfig,
) -> Result<f64> {
    let gain = config.gains[n];
    if gain == 0.0 {
        return Ok(0.0);
    }
    let (v, t) = quadratic_forms(state.cov.inv(), pilots.block(n), sample, gain);
    let sd = spectral(&v, &t)?;
    let a = state.alpha[n];
    optimal_step(&sd, -a, 1.0 - a)
}

#[derive(Debug, Clone)]
pub struct DirectOutput {
    /// Continuous activity estimates in `[0, 1]`.
    pub scores: Vec<f64>,
    pub diagnostics: Diagnostics,
    pub state: DirectState,
}

fn atoms<'a>(pilots: &'a PilotSet, config: &SystemConfig) -> Vec<Atom<'a>> {
    pilots
        .blocks()
        .iter()
        .zip(&config.gains)
        .map(|(block, &gain)| Atom { block, gain })
        .collect()
}

/// Run coordinate descent in the fixed order `0..N` until the largest step of
/// a sweep drops below `opts.tol` or `opts.max_sweeps` sweeps are done.
pub fn detect(
    sample: &SampleCovariance,
    pilots: &PilotSet,
    config: &SystemConfig,
    opts: &DetectOptions,
) -> Result<DirectOutput> {
    config.validate()?;
    check_dims(sample, pilots, config)?;
    let mut state = DirectState::new(config);
    let mut diag = Diagnostics::default();
    let atoms = match opts.trace {
        ObjectiveTrace::Off => Vec::new(),
        _ => atoms(pilots, config),
    };
    if opts.trace != ObjectiveTrace::Off {
        diag.objective
            .push(objective(&state.alpha, &atoms, config.noise_var, sample)?);
    }

    for _ in 0..opts.max_sweeps {
        let mut max_change: f64 = 0.0;
        for n in 0..config.devices {
            let d = state.step_and_update(n, sample, pilots, config.gains[n])?;
            if d != 0.0 {
                diag.updates += 1;
                max_change = max_change.max(d.abs());
                if opts.trace == ObjectiveTrace::PerUpdate {
                    diag.objective
                        .push(objective(&state.alpha, &atoms, config.noise_var, sample)?);
                }
            }
        }
        state.cov.hermitize();
        state.sweep_count += 1;
        diag.sweeps += 1;
        diag.max_change.push(max_change);
        if opts.trace == ObjectiveTrace::PerSweep {
            diag.objective
                .push(objective(&state.alpha, &atoms, config.noise_var, sample)?);
        }
        if max_change < opts.tol {
            diag.converged = true;
            break;
        }
    }

    Ok(DirectOutput {
        scores: state.alpha.clone(),
        diagnostics: diag,
        state,
    })
}

pub(crate) fn check_dims(
    sample: &SampleCovariance,
    pilots: &PilotSet,
    config: &SystemConfig,
) -> Result<()> {
    let l = config.subcarriers;
    for (axis, got) in [
        ("sample covariance (subcarriers)", sample.dim()),
        ("pilot length (subcarriers)", pilots.subcarriers()),
    ] {
        if got != l {
            return Err(Error::DimensionMismatch {
                axis,
                expected: l,
                got,
            });
        }
    }
    if pilots.devices() != config.devices {
        return Err(Error::DimensionMismatch {
            axis: "pilot count (devices)",
            expected: config.devices,
            got: pilots.devices(),
        });
    }
    if pilots.taps() != config.taps {
        return Err(Error::DimensionMismatch {
            axis: "pilot taps",
            expected: config.taps,
            got: pilots.taps(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::rel_frobenius;
    use crate::rng::{complex_gaussian, substream, Purpose};
    use crate::C64;

    fn sd(v: &[f64], u: &[f64]) -> SpectralData {
        SpectralData {
            v: v.to_vec(),
            u: u.to_vec(),
        }
    }

    fn random_sample(seed: u64, l: usize) -> SampleCovariance {
        let mut rng = substream(seed, Purpose::Noise);
        let r = CMatrix::from_fn(l, 2 * l, |_, _| complex_gaussian(&mut rng, 1.0));
        SampleCovariance(&r * r.adjoint() / c(2.0 * l as f64))
    }

    #[test]
    fn quadratic_forms_with_identity_pilots() {
        let (l, p, nv) = (6, 2, 0.5);
        let inv = CMatrix::identity(l, l) * c(1.0 / nv);
        let block = CMatrix::identity(l, p);
        let sample = random_sample(1, l);
        let (v, t) = quadratic_forms(&inv, &block, &sample, 1.0);
        assert!(rel_frobenius(&v, &(CMatrix::identity(p, p) * c(1.0 / nv))) < 1e-15);
        let want = sample.mat().view((0, 0), (p, p)).into_owned() * c(1.0 / (nv * nv));
        assert!(rel_frobenius(&t, &want) < 1e-14);
        let (v0, t0) = quadratic_forms(&inv, &block, &sample, 0.0);
        assert_eq!(v0, CMatrix::zeros(p, p));
        assert_eq!(t0, CMatrix::zeros(p, p));
    }

    #[test]
    fn spectral_diagonal_and_trace() {
        let v = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(2.0), c(1.0)]));
        let t = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(5.0), c(3.0)]));
        let s = spectral(&v, &t).unwrap();
        assert!((s.v[0] - 1.0).abs() < 1e-14 && (s.v[1] - 2.0).abs() < 1e-14);
        assert!((s.u[0] - 3.0).abs() < 1e-14 && (s.u[1] - 5.0).abs() < 1e-14);

        let mut rng = substream(3, Purpose::Pilots);
        let a = CMatrix::from_fn(4, 4, |_, _| complex_gaussian(&mut rng, 1.0));
        let b = CMatrix::from_fn(4, 4, |_, _| complex_gaussian(&mut rng, 1.0));
        let v = &a * a.adjoint() + CMatrix::identity(4, 4);
        let t = &b * b.adjoint();
        let s = spectral(&v, &t).unwrap();
        let tr_t: f64 = (0..4).map(|i| t[(i, i)].re).sum();
        let tr_v: f64 = (0..4).map(|i| v[(i, i)].re).sum();
        assert!((s.u.iter().sum::<f64>() - tr_t).abs() < 1e-10 * tr_t);
        assert!((s.v.iter().sum::<f64>() - tr_v).abs() < 1e-10 * tr_v);
        assert!(s.v.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn delta_objective_examples() {
        assert_eq!(
            delta_objective(&sd(&[1.0, 3.0], &[2.0, 1.0]), 0.0).unwrap(),
            0.0
        );
        let got = delta_objective(&sd(&[1.0], &[1.0]), 1.0).unwrap();
        assert!((got - (2f64.ln() - 0.5)).abs() < 1e-15);
        assert!(matches!(
            delta_objective(&sd(&[2.0], &[1.0]), -0.5),
            Err(Error::InfeasibleStep)
        ));
    }

    #[test]
    fn numerator_examples() {
        let p = derivative_numerator(&sd(&[1.5], &[4.0]));
        assert_eq!(p.coeffs(), &[1.5 - 4.0, 2.25]);
        let p = derivative_numerator(&sd(&[1.0, 2.0], &[3.0, 5.0]));
        let want = [-5.0, -9.0, 1.0, 8.0];
        for (g, w) in p.coeffs().iter().zip(want) {
            assert!((g - w).abs() <= 1e-12);
        }
        let p = derivative_numerator(&sd(&[1.0, 1.0], &[0.0, 0.0]));
        for (g, w) in p.coeffs().iter().zip([2.0, 6.0, 6.0, 2.0]) {
            assert!((g - w).abs() <= 1e-12);
        }
    }

    #[test]
    fn flat_fading_closed_form_steps() {
        // ũ > ṽ at α = 0: interior root (u − v)/v² clamped to 1
        let s = sd(&[2.0], &[3.0]);
        assert!((optimal_step(&s, 0.0, 1.0).unwrap() - 0.25).abs() < 1e-14);
        let s = sd(&[0.5], &[3.0]);
        assert_eq!(optimal_step(&s, 0.0, 1.0).unwrap(), 1.0);
        let s = sd(&[2.0], &[1.0]);
        assert_eq!(optimal_step(&s, 0.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn zero_gain_device_is_skipped() {
        let mut config = SystemConfig::new(3, 2, 8, 2, 0.1, 0.5).unwrap();
        config.gains = vec![1.0, 0.0, 1.0];
        let pilots = PilotSet::generate(&config, 1).unwrap();
        let sample = random_sample(9, 8);
        let state = DirectState::new(&config);
        assert_eq!(
            coordinate_step(1, &state, &sample, &pilots, &config).unwrap(),
            0.0
        );
        let out = detect(&sample, &pilots, &config, &DetectOptions::default()).unwrap();
        assert_eq!(out.scores[1], 0.0);
    }

    #[test]
    fn pure_noise_statistics_keep_scores_at_zero() {
        let config = SystemConfig::new(15, 4, 16, 3, 0.1, 0.1).unwrap();
        let pilots = PilotSet::generate(&config, 2).unwrap();
        let sample = SampleCovariance(CMatrix::identity(16, 16) * c(0.1));
        let out = detect(&sample, &pilots, &config, &DetectOptions::default()).unwrap();
        assert!(out.scores.iter().all(|s| *s == 0.0));
        assert_eq!(out.diagnostics.sweeps, 1);
        assert!(out.diagnostics.converged);
    }

    #[test]
    fn dimension_checks() {
        let config = SystemConfig::new(4, 2, 8, 2, 0.1, 0.1).unwrap();
        let pilots = PilotSet::generate(&config, 2).unwrap();
        let sample = SampleCovariance(CMatrix::identity(7, 7) * C64::new(0.1, 0.0));
        assert!(matches!(
            detect(&sample, &pilots, &config, &DetectOptions::default()),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
