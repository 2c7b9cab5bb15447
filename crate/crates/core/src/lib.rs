//! Maximum-likelihood device activity detection for OFDM grant-free massive
//! access under frequency-selective Rayleigh fading.
//!
//! The crate is organised bottom-up:
//!
//! * [`signal`] builds pilots, channels, received signals and the sample
//!   covariance under both the circulant (time-domain) model and the
//!   effective-pilot model.
//! * [`polyroot`] finds real polynomial roots inside an interval.
//! * [`covariance`] keeps the model covariance inverse current under
//!   low-rank coordinate updates and evaluates the log-likelihood objective.
//! * [`direct`] is the coordinate-descent detector over the `N` device
//!   activities (rank-`P` atoms).
//! * [`virtual_dev`] is the penalized coordinate-descent detector over the
//!   `N·P` virtual devices, which with zero penalty is the BL-MLE baseline.
//! * [`harness`] runs Monte-Carlo trials, threshold optimisation, sweeps and
//!   timing benchmarks.
//! * [`codec`] and [`config`] decode the binary scene/pilot files and the
//!   text experiment configuration.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod codec;
pub mod config;
pub mod covariance;
pub mod descent;
pub mod direct;
mod error;
pub mod harness;
pub mod linalg;
pub mod polyroot;
pub mod rng;
pub mod selftest;
pub mod signal;
pub mod virtual_dev;

pub use error::{Error, Result};
pub use nalgebra::Complex;

/// Double-precision complex scalar used throughout.
pub type C64 = Complex<f64>;
/// Dense complex matrix (column-major storage).
pub type CMatrix = nalgebra::DMatrix<C64>;
/// Dense complex column vector.
pub type CVector = nalgebra::DVector<C64>;
