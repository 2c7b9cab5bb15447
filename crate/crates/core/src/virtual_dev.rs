//! Penalized coordinate descent over the `N·P` virtual devices.
//!
//! Virtual device `i` is tap `i mod P` of device `i / P` (zero-based) and owns
//! column `i` of the stacked pilot matrix. The group-equality constraints are
//! replaced by `ρ·η(β)` with `η(β) = Σ_n a_n·(1 − a_n)` over the group means
//! `a_n`. Each coordinate increment has a cubic derivative numerator, so every
//! step is closed form. With `ρ = 0` this is the BL-MLE baseline.

use crate::covariance::{objective, Atom, CovarianceState};
use crate::descent::{pick_candidate, DetectOptions, Diagnostics, ObjectiveTrace};
use crate::direct::check_dims;
use crate::polyroot::{real_roots_in_interval, RealPolynomial};
use crate::signal::{PilotSet, SampleCovariance, SystemConfig};
use crate::{CMatrix, CVector, Error, Result};

/// `η(β) = Σ_n a_n·(1 − a_n)`, `a_n` the mean of group `n`.
pub fn penalty_value(beta: &[f64], devices: usize, taps: usize) -> f64 {
    beta.chunks(taps)
        .take(devices)
        .map(|g| {
            let a = g.iter().sum::<f64>() / taps as f64;
            a * (1.0 - a)
        })
        .sum()
}

/// Group means `α_n = Σ_p β_{nP+p} / P`.
pub fn map_to_alpha(beta: &[f64], devices: usize, taps: usize) -> Vec<f64> {
    beta.chunks(taps)
        .take(devices)
        .map(|g| (g.iter().sum::<f64>() / taps as f64).clamp(0.0, 1.0))
        .collect()
}

/// Scalars entering one coordinate subproblem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoordinateForms {
    /// `sᴴ·Σ⁻¹·s`
    pub v: f64,
    /// `sᴴ·Σ⁻¹·Σ̂·Σ⁻¹·s`
    pub u: f64,
    pub gain: f64,
    pub rho: f64,
    pub taps: usize,
    /// Sum of the current `β` over the coordinate's group (itself included).
    pub group_sum: f64,
}

impl CoordinateForms {
    fn slack(&self) -> f64 {
        1.0 - 2.0 * self.group_sum / self.taps as f64
    }
}

/// Coefficients of `A·d³ + B·d² + C·d + D`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cubic {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Cubic {
    pub fn from_forms(f: &CoordinateForms) -> Self {
        let p = f.taps as f64;
        let (g, v, u, rho) = (f.gain, f.v, f.u, f.rho);
        let w = f.slack();
        Self {
            a: -2.0 * rho * g * g / (p * p) * v * v,
            b: rho * g * g / p * w * v * v - 4.0 * rho * g / (p * p) * v,
            c: g * g * v * v + 2.0 * rho * g / p * w * v - 2.0 * rho / (p * p),
            d: g * v - g * u + rho / p * w,
        }
    }

    pub fn polynomial(&self) -> RealPolynomial {
        RealPolynomial::new(vec![self.d, self.c, self.b, self.a])
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        ((self.a * x + self.b) * x + self.c) * x + self.d
    }
}

/// `f̃(β + d·e_i) − f̃(β)` including the penalty increment.
pub fn delta_penalized(f: &CoordinateForms, d: f64) -> Result<f64> {
    let gv = f.gain * f.v;
    let den = 1.0 + d * gv;
    if !(den > 0.0) {
        return Err(Error::InfeasibleStep);
    }
    let p = f.taps as f64;
    Ok(den.ln() - d * f.gain * f.u / den + f.rho * d / p * (1.0 - d / p - 2.0 * f.group_sum / p))
}

/// Exact minimizer of [`delta_penalized`] over `[lo, hi]`.
pub fn optimal_step(f: &CoordinateForms, lo: f64, hi: f64) -> Result<f64> {
    let poly = Cubic::from_forms(f).polynomial();
    let roots = if poly.degree() == 0 {
        Vec::new()
    } else {
        real_roots_in_interval(&poly, lo, hi)?
    };
    let candidates: Vec<(f64, f64)> = roots
        .into_iter()
        .chain([lo, hi])
        .filter_map(|d| delta_penalized(f, d).ok().map(|v| (d, v)))
        .collect();
    pick_candidate(&candidates).ok_or(Error::InfeasibleStep)
}

/// Virtual activities, covariance inverse and cached group sums.
#[derive(Debug, Clone)]
pub struct VirtualState {
    pub beta: Vec<f64>,
    pub cov: CovarianceState,
    pub rho: f64,
    pub group_sums: Vec<f64>,
    pub taps: usize,
    pub sweep_count: usize,
}

impl VirtualState {
    pub fn new(config: &SystemConfig, rho: f64) -> Self {
        Self {
            beta: vec![0.0; config.devices * config.taps],
            cov: CovarianceState::init(config.subcarriers, config.noise_var),
            rho,
            group_sums: vec![0.0; config.devices],
            taps: config.taps,
            sweep_count: 0,
        }
    }

    #[inline]
    pub fn device_of(&self, i: usize) -> usize {
        i / self.taps
    }

    /// Forms of coordinate `i` together with `Σ⁻¹·s_i`.
    fn forms(
        &self,
        i: usize,
        column: &CVector,
        sample: &SampleCovariance,
        gain: f64,
    ) -> (CoordinateForms, CVector) {
        let w = self.cov.inv() * column;
        let v = column.dotc(&w).re;
        let sw = sample.mat() * &w;
        let u = w.dotc(&sw).re;
        let forms = CoordinateForms {
            v,
            u,
            gain,
            rho: self.rho,
            taps: self.taps,
            group_sum: self.group_sums[self.device_of(i)],
        };
        (forms, w)
    }

    fn step_and_update(
        &mut self,
        i: usize,
        column: &CVector,
        sample: &SampleCovariance,
        gain: f64,
    ) -> Result<f64> {
        let (forms, w) = self.forms(i, column, sample, gain);
        let b = self.beta[i];
        let d = optimal_step(&forms, -b, 1.0 - b)?;
        if d != 0.0 {
            self.cov.apply_rank_one_projected(&w, forms.v, d * gain)?;
            let new = (b + d).clamp(0.0, 1.0);
            let dev = self.device_of(i);
            self.group_sums[dev] += new - b;
            self.beta[i] = new;
        }
        Ok(d)
    }

    /// Recompute the group sums from `β` (drift check).
    pub fn recomputed_group_sums(&self) -> Vec<f64> {
        self.beta
            .chunks(self.taps)
            .map(|g| g.iter().sum())
            .collect()
    }
}

fn column(pilots: &PilotSet, i: usize) -> CVector {
    pilots.stacked().column(i).into_owned()
}

/// `A, B, C, D` of coordinate `i` at the current state.
pub fn cubic_coefficients(
    i: usize,
    state: &VirtualState,
    sample: &SampleCovariance,
    column: &CVector,
    gain: f64,
) -> Cubic {
    Cubic::from_forms(&state.forms(i, column, sample, gain).0)
}

/// `f̃(β + d·e_i) − f̃(β)` at the current state.
pub fn delta_penalized_objective(
    i: usize,
    state: &VirtualState,
    sample: &SampleCovariance,
    column: &CVector,
    gain: f64,
    d: f64,
) -> Result<f64> {
    delta_penalized(&state.forms(i, column, sample, gain).0, d)
}

/// Optimal increment for virtual coordinate `i` (state unchanged).
pub fn coordinate_step(
    i: usize,
    state: &VirtualState,
    sample: &SampleCovariance,
    pilots: &PilotSet,
    config: &SystemConfig,
) -> Result<f64> {
    let gain = config.gains[state.device_of(i)];
    let (forms, _) = state.forms(i, &column(pilots, i), sample, gain);
    let b = state.beta[i];
    optimal_step(&forms, -b, 1.0 - b)
}

/// Dense `f(β) + ρ·η(β)`.
pub fn penalized_objective(
    state: &VirtualState,
    columns: &[CMatrix],
    config: &SystemConfig,
    sample: &SampleCovariance,
) -> Result<f64> {
    let atoms: Vec<Atom<'_>> = columns
        .iter()
        .enumerate()
        .map(|(i, block)| Atom {
            block,
            gain: config.gains[i / config.taps],
        })
        .collect();
    let base = objective(&state.beta, &atoms, config.noise_var, sample)?;
    Ok(base + state.rho * penalty_value(&state.beta, config.devices, config.taps))
}

/// Column `i` of the stacked pilots as an `L × 1` block.
pub fn column_blocks(pilots: &PilotSet) -> Vec<CMatrix> {
    (0..pilots.stacked().ncols())
        .map(|i| pilots.stacked().columns(i, 1).into_owned())
        .collect()
}

#[derive(Debug, Clone)]
pub struct VirtualOutput {
    /// Virtual activities, length `N·P`.
    pub beta: Vec<f64>,
    /// Group means, length `N`.
    pub scores: Vec<f64>,
    pub diagnostics: Diagnostics,
    pub state: VirtualState,
}

/// Run penalized coordinate descent in the fixed order `0..N·P`.
pub fn detect(
    sample: &SampleCovariance,
    pilots: &PilotSet,
    config: &SystemConfig,
    rho: f64,
    opts: &DetectOptions,
) -> Result<VirtualOutput> {
    config.validate()?;
    check_dims(sample, pilots, config)?;
    if !(rho >= 0.0) || !rho.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "penalty weight must be >= 0, got {rho}"
        )));
    }
    let mut state = VirtualState::new(config, rho);
    let mut diag = Diagnostics::default();
    let columns: Vec<CVector> = (0..config.devices * config.taps)
        .map(|i| column(pilots, i))
        .collect();
    let blocks = match opts.trace {
        ObjectiveTrace::Off => Vec::new(),
        _ => column_blocks(pilots),
    };
    if opts.trace != ObjectiveTrace::Off {
        diag.objective
            .push(penalized_objective(&state, &blocks, config, sample)?);
    }

    for _ in 0..opts.max_sweeps {
        let mut max_change: f64 = 0.0;
        for (i, col) in columns.iter().enumerate() {
            let gain = config.gains[i / config.taps];
            let d = state.step_and_update(i, col, sample, gain)?;
            if d != 0.0 {
                diag.updates += 1;
                max_change = max_change.max(d.abs());
                if opts.trace == ObjectiveTrace::PerUpdate {
                    diag.objective
                        .push(penalized_objective(&state, &blocks, config, sample)?);
                }
            }
        }
        state.cov.hermitize();
        state.sweep_count += 1;
        diag.sweeps += 1;
        diag.max_change.push(max_change);
        if opts.trace == ObjectiveTrace::PerSweep {
            diag.objective
                .push(penalized_objective(&state, &blocks, config, sample)?);
        }
        if max_change < opts.tol {
            diag.converged = true;
            break;
        }
    }

    Ok(VirtualOutput {
        beta: state.beta.clone(),
        scores: map_to_alpha(&state.beta, config.devices, config.taps),
        diagnostics: diag,
        state,
    })
}
