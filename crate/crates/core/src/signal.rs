//! Pilots, channels, received signals and the sample covariance.
//!
//! Two equivalent received-signal models are provided. The direct model
//! applies the circulant channel matrix of every (device, antenna) pair to
//! the time-domain pilot; the effective model multiplies the first `P`
//! channel taps by the effective pilot block
//! `S_n = √L·(Fᴴ·diag(s̃_n)·F)[:, 0..P]`.
//!
//! With the unitary DFT, `F·H·Fᴴ = √L·diag(F·h)`, hence the `√L`: it makes the
//! two models agree exactly, and the columns of `S_n` are the time-domain
//! pilot `s_n = Fᴴ·s̃_n` and its first `P − 1` cyclic shifts.

use std::f64::consts::PI;

use rand::Rng;

use crate::linalg::{c, hermitize};
use crate::rng::{complex_gaussian, substream, Purpose};
use crate::{CMatrix, CVector, Error, Result, C64};

/// System dimensions and statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    /// Number of potential devices `N`.
    pub devices: usize,
    /// Base-station antennas `M`.
    pub antennas: usize,
    /// Subcarriers, equal to the pilot length `L`.
    pub subcarriers: usize,
    /// Channel taps `P`.
    pub taps: usize,
    /// Noise variance `σ²`.
    pub noise_var: f64,
    /// Bernoulli activity probability per device.
    pub activity_prob: f64,
    /// Large-scale fading power `g_n` per device.
    pub gains: Vec<f64>,
}

impl SystemConfig {
    /// Configuration with unit large-scale gains, validated.
    pub fn new(
        devices: usize,
        antennas: usize,
        subcarriers: usize,
        taps: usize,
        noise_var: f64,
        activity_prob: f64,
    ) -> Result<Self> {
        let cfg = Self {
            devices,
            antennas,
            subcarriers,
            taps,
            noise_var,
            activity_prob,
            gains: vec![1.0; devices],
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.devices == 0 {
            return bad("device count must be at least 1".into());
        }
        if self.antennas == 0 {
            return bad("antenna count must be at least 1".into());
        }
        if self.taps == 0 || self.taps >= self.subcarriers {
            return bad(format!(
                "need 1 <= P < L, got P={} L={}",
                self.taps, self.subcarriers
            ));
        }
        if !(self.noise_var > 0.0) || !self.noise_var.is_finite() {
            return bad(format!(
                "noise variance must be > 0, got {}",
                self.noise_var
            ));
        }
        if !(0.0..=1.0).contains(&self.activity_prob) {
            return bad(format!(
                "activity probability must be in [0,1], got {}",
                self.activity_prob
            ));
        }
        if self.gains.len() != self.devices {
            return bad(format!(
                "expected {} gains, got {}",
                self.devices,
                self.gains.len()
            ));
        }
        if self.gains.iter().any(|g| !(*g >= 0.0) || !g.is_finite()) {
            return bad("gains must be finite and >= 0".into());
        }
        Ok(())
    }

    /// Same configuration with a different device count (unit gains).
    pub fn with_devices(&self, devices: usize) -> Self {
        let mut out = self.clone();
        out.devices = devices;
        out.gains = vec![1.0; devices];
        out
    }
}

/// Normalized DFT matrix, `F[k,l] = e^{-j2πkl/L}/√L`.
pub fn dft_matrix(l: usize) -> CMatrix {
    let scale = 1.0 / (l as f64).sqrt();
    CMatrix::from_fn(l, l, |k, m| {
        // reduce the exponent first so large products keep full precision
        let e = ((k * m) % l) as f64;
        C64::from_polar(scale, -2.0 * PI * e / l as f64)
    })
}

/// Circulant matrix with entry `(i, j) = first_col[(i − j) mod L]`.
pub fn circulant_channel(first_col: &CVector) -> CMatrix {
    let l = first_col.len();
    CMatrix::from_fn(l, l, |i, j| first_col[(i + l - j) % l])
}

/// Frequency-domain pilots and the derived effective pilot blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotSet {
    freq: CMatrix,
    blocks: Vec<CMatrix>,
    stacked: CMatrix,
    taps: usize,
}

impl PilotSet {
    /// Build from explicit frequency pilots (columns `s̃_n`).
    pub fn from_freq_pilots(freq: CMatrix, taps: usize) -> Result<Self> {
        let l = freq.nrows();
        let n = freq.ncols();
        if taps == 0 || taps >= l {
            return Err(Error::InvalidConfig(format!(
                "need 1 <= P < L, got P={taps} L={l}"
            )));
        }
        let twiddle: Vec<C64> = (0..l)
            .map(|t| C64::from_polar(1.0, 2.0 * PI * t as f64 / l as f64))
            .collect();
        let mut blocks = Vec::with_capacity(n);
        let mut stacked = CMatrix::zeros(l, n * taps);
        for dev in 0..n {
            // √L·Fᴴ·diag(s̃)·F is circulant with first column Fᴴ·s̃.
            let inv_sqrt = 1.0 / (l as f64).sqrt();
            let first: Vec<C64> = (0..l)
                .map(|t| {
                    let mut acc = C64::new(0.0, 0.0);
                    for k in 0..l {
                        acc += freq[(k, dev)] * twiddle[(k * t) % l];
                    }
                    acc * inv_sqrt
                })
                .collect();
            let block = CMatrix::from_fn(l, taps, |i, p| first[(i + l - p) % l]);
            stacked.columns_mut(dev * taps, taps).copy_from(&block);
            blocks.push(block);
        }
        Ok(Self {
            freq,
            blocks,
            stacked,
            taps,
        })
    }

    /// Gaussian pilots with every column normalized to norm `√L`.
    pub fn generate(config: &SystemConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let l = config.subcarriers;
        let mut rng = substream(seed, Purpose::Pilots);
        let mut freq = CMatrix::zeros(l, config.devices);
        for mut col in freq.column_iter_mut() {
            for z in col.iter_mut() {
                *z = complex_gaussian(&mut rng, 1.0);
            }
            let norm = col.norm();
            col *= c((l as f64).sqrt() / norm);
        }
        Self::from_freq_pilots(freq, config.taps)
    }

    /// Frequency-domain pilots, `L × N`.
    pub fn freq_pilots(&self) -> &CMatrix {
        &self.freq
    }

    /// Effective block `S_n`, `L × P`; column `p` is `s_n` cyclically shifted down by `p`.
    pub fn block(&self, n: usize) -> &CMatrix {
        &self.blocks[n]
    }

    pub fn blocks(&self) -> &[CMatrix] {
        &self.blocks
    }

    /// `S = [S_1, …, S_N]`, `L × NP`.
    pub fn stacked(&self) -> &CMatrix {
        &self.stacked
    }

    pub fn subcarriers(&self) -> usize {
        self.freq.nrows()
    }

    pub fn devices(&self) -> usize {
        self.freq.ncols()
    }

    pub fn taps(&self) -> usize {
        self.taps
    }
}

/// Shorthand for [`PilotSet::generate`].
pub fn generate_pilots(config: &SystemConfig, seed: u64) -> Result<PilotSet> {
    PilotSet::generate(config, seed)
}

/// Channel taps `h[n, m, p]`, each CN(0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    devices: usize,
    antennas: usize,
    taps: usize,
    coeffs: Vec<C64>,
}

impl ChannelRealization {
    pub fn from_coeffs(
        devices: usize,
        antennas: usize,
        taps: usize,
        coeffs: Vec<C64>,
    ) -> Result<Self> {
        let expected = devices * antennas * taps;
        if coeffs.len() != expected {
            return Err(Error::DimensionMismatch {
                axis: "channel taps",
                expected,
                got: coeffs.len(),
            });
        }
        Ok(Self {
            devices,
            antennas,
            taps,
            coeffs,
        })
    }

    pub fn generate<R: Rng + ?Sized>(config: &SystemConfig, rng: &mut R) -> Self {
        let len = config.devices * config.antennas * config.taps;
        let coeffs = (0..len).map(|_| complex_gaussian(rng, 1.0)).collect();
        Self {
            devices: config.devices,
            antennas: config.antennas,
            taps: config.taps,
            coeffs,
        }
    }

    #[inline]
    pub fn tap(&self, n: usize, m: usize, p: usize) -> C64 {
        self.coeffs[(n * self.antennas + m) * self.taps + p]
    }

    /// `h_{n,m}` as a length-`P` vector.
    pub fn taps_of(&self, n: usize, m: usize) -> &[C64] {
        let start = (n * self.antennas + m) * self.taps;
        &self.coeffs[start..start + self.taps]
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.devices, self.antennas, self.taps)
    }

    /// Flat coefficients, index `(n·M + m)·P + p`.
    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }
}

/// Activities and channels for one coherence block.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub activities: Vec<bool>,
    pub channel: ChannelRealization,
    pub seed: u64,
}

impl Scene {
    /// Bernoulli activities and Rayleigh taps from the trial seed.
    pub fn generate(config: &SystemConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut act_rng = substream(seed, Purpose::Activities);
        let activities = (0..config.devices)
            .map(|_| act_rng.gen_bool(config.activity_prob))
            .collect();
        let mut ch_rng = substream(seed, Purpose::Channel);
        let channel = ChannelRealization::generate(config, &mut ch_rng);
        Ok(Self {
            activities,
            channel,
            seed,
        })
    }

    pub fn active_count(&self) -> usize {
        self.activities.iter().filter(|a| **a).count()
    }
}

/// AWGN `L × M` matrix with CN(0, σ²) entries from the noise substream.
pub fn generate_noise(config: &SystemConfig, seed: u64) -> CMatrix {
    let mut rng = substream(seed, Purpose::Noise);
    let mut out = CMatrix::zeros(config.subcarriers, config.antennas);
    // column-major fill so antenna m consumes a contiguous run of draws
    for z in out.iter_mut() {
        *z = complex_gaussian(&mut rng, config.noise_var);
    }
    out
}

/// Received pilots `R`, `L × M`; column `m` is antenna `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedBatch(pub CMatrix);

/// Hermitian PSD sample covariance `R·Rᴴ/M`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleCovariance(pub CMatrix);

impl SampleCovariance {
    pub fn mat(&self) -> &CMatrix {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.0[(i, i)].re).sum()
    }
}

fn check_inputs(
    scene: &Scene,
    pilots: &PilotSet,
    config: &SystemConfig,
    noise: &CMatrix,
) -> Result<()> {
    let (l, m, n, p) = (
        config.subcarriers,
        config.antennas,
        config.devices,
        config.taps,
    );
    let checks: [(&'static str, usize, usize); 8] = [
        ("noise rows (subcarriers)", l, noise.nrows()),
        ("noise columns (antennas)", m, noise.ncols()),
        ("pilot length (subcarriers)", l, pilots.subcarriers()),
        ("pilot count (devices)", n, pilots.devices()),
        ("pilot taps", p, pilots.taps()),
        ("scene activities (devices)", n, scene.activities.len()),
        ("channel devices", n, scene.channel.devices),
        ("channel antennas", m, scene.channel.antennas),
    ];
    for (axis, expected, got) in checks {
        if expected != got {
            return Err(Error::DimensionMismatch {
                axis,
                expected,
                got,
            });
        }
    }
    if scene.channel.taps != p {
        return Err(Error::DimensionMismatch {
            axis: "channel taps",
            expected: p,
            got: scene.channel.taps,
        });
    }
    if config.gains.len() != n {
        return Err(Error::DimensionMismatch {
            axis: "gains (devices)",
            expected: n,
            got: config.gains.len(),
        });
    }
    Ok(())
}

/// `r_m = Σ_n α_n √g_n · H_{n,m} · Fᴴ s̃_n + n_m` with circulant `H_{n,m}`.
pub fn received_direct(
    scene: &Scene,
    pilots: &PilotSet,
    config: &SystemConfig,
    noise: &CMatrix,
) -> Result<ReceivedBatch> {
    check_inputs(scene, pilots, config, noise)?;
    let l = config.subcarriers;
    let f_adj = dft_matrix(l).adjoint();
    let mut r = noise.clone();
    for n in (0..config.devices).filter(|&n| scene.activities[n]) {
        let time_pilot = &f_adj * pilots.freq.column(n);
        let amp = c(config.gains[n].sqrt());
        for m in 0..config.antennas {
            let mut first = CVector::zeros(l);
            for (p, h) in scene.channel.taps_of(n, m).iter().enumerate() {
                first[p] = *h;
            }
            let h = circulant_channel(&first);
            let contrib = h * &time_pilot * amp;
            let mut col = r.column_mut(m);
            col += contrib;
        }
    }
    Ok(ReceivedBatch(r))
}

/// `r_m = Σ_n α_n √g_n · S_n · h_{n,m} + n_m`.
pub fn received_effective(
    scene: &Scene,
    pilots: &PilotSet,
    config: &SystemConfig,
    noise: &CMatrix,
) -> Result<ReceivedBatch> {
    check_inputs(scene, pilots, config, noise)?;
    let mut r = noise.clone();
    for n in (0..config.devices).filter(|&n| scene.activities[n]) {
        let amp = c(config.gains[n].sqrt());
        let block = pilots.block(n);
        for m in 0..config.antennas {
            let h = CVector::from_column_slice(scene.channel.taps_of(n, m));
            let contrib = block * h * amp;
            let mut col = r.column_mut(m);
            col += contrib;
        }
    }
    Ok(ReceivedBatch(r))
}

/// `Σ̂ = R·Rᴴ / M`, re-symmetrized.
pub fn sample_covariance(r: &ReceivedBatch) -> SampleCovariance {
    let m = r.0.ncols().max(1) as f64;
    let mut s = &r.0 * r.0.adjoint() / c(m);
    hermitize(&mut s);
    SampleCovariance(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{frobenius, rel_frobenius};

    fn cfg(n: usize, m: usize, l: usize, p: usize) -> SystemConfig {
        SystemConfig::new(n, m, l, p, 0.1, 0.3).unwrap()
    }

    #[test]
    fn dft_small_cases() {
        let f1 = dft_matrix(1);
        assert_eq!(f1[(0, 0)], c(1.0));
        let f2 = dft_matrix(2);
        let s = 1.0 / 2f64.sqrt();
        for (i, j, v) in [(0, 0, s), (0, 1, s), (1, 0, s), (1, 1, -s)] {
            assert!((f2[(i, j)] - c(v)).norm() < 1e-15);
        }
    }

    #[test]
    fn dft_unitary() {
        for l in 1..=64 {
            let f = dft_matrix(l);
            let err = frobenius(&(&f * f.adjoint() - CMatrix::identity(l, l)));
            assert!(err <= 1e-12 * l as f64, "L={l} err={err}");
        }
    }

    #[test]
    fn circulant_patterns() {
        let e1 = CVector::from_vec(vec![c(1.0), c(0.0), c(0.0)]);
        assert_eq!(circulant_channel(&e1), CMatrix::identity(3, 3));
        let (a, b, cc) = (c(1.0), c(2.0), c(3.0));
        let h = circulant_channel(&CVector::from_vec(vec![a, b, cc]));
        let expected = CMatrix::from_row_slice(3, 3, &[a, cc, b, b, a, cc, cc, b, a]);
        assert_eq!(h, expected);
    }

    #[test]
    fn circulant_is_diagonalized_by_dft() {
        let mut rng = substream(5, Purpose::Channel);
        let l = 8;
        let col = CVector::from_fn(l, |_, _| complex_gaussian(&mut rng, 1.0));
        let h = circulant_channel(&col);
        let f = dft_matrix(l);
        let d = &f * &h * f.adjoint();
        let scale = frobenius(&h);
        for i in 0..l {
            for j in 0..l {
                if i != j {
                    assert!(d[(i, j)].norm() <= 1e-12 * scale);
                }
            }
        }
    }

    #[test]
    fn pilots_are_normalized_and_deterministic() {
        let config = cfg(12, 2, 16, 3);
        let a = generate_pilots(&config, 42).unwrap();
        let b = generate_pilots(&config, 42).unwrap();
        assert_eq!(a.freq_pilots(), b.freq_pilots());
        for col in a.freq_pilots().column_iter() {
            assert!((col.norm() - 4.0).abs() <= 1e-12 * 4.0);
        }
        let other = generate_pilots(&config, 43).unwrap();
        assert_ne!(a.freq_pilots(), other.freq_pilots());
    }

    #[test]
    fn effective_blocks_match_dense_product() {
        let config = cfg(5, 1, 12, 4);
        let pilots = generate_pilots(&config, 3).unwrap();
        let f = dft_matrix(12);
        for n in 0..5 {
            let diag = CMatrix::from_diagonal(&pilots.freq_pilots().column(n).into_owned());
            let full = f.adjoint() * diag * &f * c(12f64.sqrt());
            let dense = full.columns(0, 4).into_owned();
            assert!(rel_frobenius(pilots.block(n), &dense) < 1e-12);
            assert_eq!(
                pilots.stacked().columns(n * 4, 4).into_owned(),
                *pilots.block(n)
            );
        }
    }

    #[test]
    fn all_ones_pilot_gives_scaled_identity_columns() {
        let freq = CMatrix::from_element(8, 1, c(1.0));
        let pilots = PilotSet::from_freq_pilots(freq, 3).unwrap();
        let expected = CMatrix::identity(8, 3) * c(8f64.sqrt());
        assert!(rel_frobenius(pilots.block(0), &expected) < 1e-14);
    }

    #[test]
    fn single_tap_block_is_time_domain_pilot() {
        let config = cfg(3, 1, 10, 1);
        let pilots = generate_pilots(&config, 8).unwrap();
        let f = dft_matrix(10);
        for n in 0..3 {
            let s = f.adjoint() * pilots.freq_pilots().column(n);
            assert!((pilots.block(n).column(0) - s).norm() < 1e-12);
        }
    }

    #[test]
    fn inactive_scene_returns_noise() {
        let config = cfg(6, 3, 8, 2);
        let pilots = generate_pilots(&config, 1).unwrap();
        let mut scene = Scene::generate(&config, 1).unwrap();
        scene.activities.iter_mut().for_each(|a| *a = false);
        let noise = generate_noise(&config, 1);
        assert_eq!(
            received_direct(&scene, &pilots, &config, &noise).unwrap().0,
            noise
        );
        assert_eq!(
            received_effective(&scene, &pilots, &config, &noise)
                .unwrap()
                .0,
            noise
        );
    }

    #[test]
    fn dimension_mismatch_names_axis() {
        let config = cfg(6, 3, 8, 2);
        let pilots = generate_pilots(&config, 1).unwrap();
        let scene = Scene::generate(&config, 1).unwrap();
        let noise = CMatrix::zeros(8, 2);
        let err = received_effective(&scene, &pilots, &config, &noise).unwrap_err();
        assert!(err.to_string().contains("antennas"), "{err}");
        let noise = CMatrix::zeros(7, 3);
        let err = received_direct(&scene, &pilots, &config, &noise).unwrap_err();
        assert!(err.to_string().contains("subcarriers"), "{err}");
    }

    #[test]
    fn single_device_direct_matches_hand_oracle() {
        // P = 1, all-ones pilot: Fᴴ·1 = √L·e_1, so r_m = √g·h·√L·e_1.
        let l = 6;
        let mut config = cfg(1, 2, l, 1);
        config.gains = vec![2.5];
        let pilots = PilotSet::from_freq_pilots(CMatrix::from_element(l, 1, c(1.0)), 1).unwrap();
        let h = vec![C64::new(0.3, -1.2), C64::new(-0.7, 0.4)];
        let scene = Scene {
            activities: vec![true],
            channel: ChannelRealization::from_coeffs(1, 2, 1, h.clone()).unwrap(),
            seed: 0,
        };
        let noise = CMatrix::zeros(l, 2);
        let r = received_direct(&scene, &pilots, &config, &noise).unwrap().0;
        for (m, hm) in h.iter().enumerate() {
            // dense oracle: H = h·I (single-tap circulant), x = Fᴴ·1
            let mut x = CVector::zeros(l);
            for k in 0..l {
                let mut acc = c(0.0);
                for j in 0..l {
                    acc += C64::from_polar(
                        1.0 / (l as f64).sqrt(),
                        2.0 * PI * (k * j) as f64 / l as f64,
                    );
                }
                x[k] = acc;
            }
            let expected = x * (hm * 2.5f64.sqrt());
            let got = r.column(m).into_owned();
            assert!((got - &expected).norm() < 1e-12);
            assert!((expected[0] - hm * (2.5f64 * l as f64).sqrt()).norm() < 1e-12);
        }
    }

    #[test]
    fn models_agree() {
        for (trial, &(l, p)) in [(8, 1), (8, 2), (16, 4), (16, 2)].iter().enumerate() {
            let config = cfg(7, 3, l, p);
            let seed = 100 + trial as u64;
            let pilots = generate_pilots(&config, seed).unwrap();
            let scene = Scene::generate(&config, seed).unwrap();
            let noise = generate_noise(&config, seed);
            let a = received_direct(&scene, &pilots, &config, &noise).unwrap();
            let b = received_effective(&scene, &pilots, &config, &noise).unwrap();
            assert!(rel_frobenius(&a.0, &b.0) <= 1e-9);
        }
    }

    #[test]
    fn sample_covariance_basics() {
        let zero = ReceivedBatch(CMatrix::zeros(4, 3));
        assert_eq!(sample_covariance(&zero).0, CMatrix::zeros(4, 4));
        let r = CVector::from_vec(vec![C64::new(1.0, 2.0), C64::new(-0.5, 0.25), c(3.0)]);
        let single = ReceivedBatch(CMatrix::from_columns(std::slice::from_ref(&r)));
        let s = sample_covariance(&single);
        assert!(rel_frobenius(&s.0, &(&r * r.adjoint())) < 1e-15);
    }
}
