//! Stochastic-resonance pre-treated spectrum sensing.
//!
//! The crate simulates detection of a weak periodic primary-user pilot in
//! additive white Gaussian noise, with and without a bistable
//! stochastic-resonance (SR) filter in front of the energy detector.
//!
//! Layers, bottom-up:
//!
//! - [`signal`]: tone/noise synthesis, SNR bookkeeping, mixer + FIR downconversion.
//! - [`srfilter`]: the quartic double-well SDE, integrated with Euler–Maruyama.
//! - [`spectral`]: periodograms, Welch averaging, narrowband SNR.
//! - [`tuning`]: noise-intensity sweeps and optimization of the SR gain.
//! - [`detect`]: block energy detection, threshold calibration, the CUSUM-like
//!   sequential detector and the dual (plain OR SR) combiner.
//! - [`bench`]: seeded Monte Carlo experiments and the CLI that drives them.
//!
//! Numeric kernels are generic over [`Real`] (`f32` or `f64`); the aliases
//! below name the common `f64` instantiations.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod detect;
mod error;
mod scalar;
pub mod seed;
pub mod signal;
pub mod spectral;
pub mod srfilter;
pub mod tuning;

pub use error::{Error, Result};
pub use scalar::Real;
pub use seed::SeedPath;

pub type SampleStream64 = signal::SampleStream<f64>;
pub type SampleStream32 = signal::SampleStream<f32>;
pub type ToneSpec64 = signal::ToneSpec<f64>;
pub type NoiseSpec64 = signal::NoiseSpec<f64>;
pub type SrParams64 = srfilter::SrParams<f64>;
pub type SrParams32 = srfilter::SrParams<f32>;
pub type IntegratorConfig64 = srfilter::IntegratorConfig<f64>;
pub type Periodogram64 = spectral::Periodogram<f64>;
pub type PsdEstimate64 = spectral::PsdEstimate<f64>;
pub type BlockDetectorConfig64 = detect::BlockDetectorConfig<f64>;
pub type Threshold64 = detect::Threshold<f64>;
pub type SequentialState64 = detect::SequentialState<f64>;
