//! Seeded random substreams.
//!
//! Every random draw in an experiment comes from a ChaCha20 stream keyed by
//! a 64-bit seed. The counter scheme is:
//!
//! * trial seed `t_k` = first `u64` of `ChaCha20(seed_from_u64(root), stream = k)`
//!   for trial index `k`;
//! * purpose stream = `ChaCha20(seed_from_u64(t_k), stream = purpose id)` with
//!   ids pilots = 1, channel = 2, activities = 3, noise = 4.
//!
//! Trials therefore never share randomness, the four purposes within a trial
//! are independent, and the whole experiment is reproducible from the root.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Pilots = 1,
    Channel = 2,
    Activities = 3,
    Noise = 4,
}

/// Independent stream for one purpose under a trial seed.
pub fn substream(seed: u64, purpose: Purpose) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(purpose as u64);
    rng
}

/// Seed of trial `index` under `root`.
pub fn trial_seed(root: u64, index: u64) -> u64 {
    let mut rng = ChaCha20Rng::seed_from_u64(root);
    rng.set_stream(index);
    rng.next_u64()
}

/// One circularly-symmetric complex Gaussian draw with variance `var`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, var: f64) -> C64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(s * re, s * im)
}
