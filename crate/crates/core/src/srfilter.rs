//! Bistable stochastic-resonance filter.
//!
//! The particle obeys
//!
//! ```text
//! dx = (a x - b x³ + u(t)) dt + √D dW
//! ```
//!
//! in the double well `V(x) = -(a/2) x² + (b/4) x⁴`, where `u` is the received
//! waveform (held constant across the substeps of each input sample) and
//! `D` is the intensity of optionally injected white noise, `<η(t) η(s)> =
//! D δ(t - s)`.
//!
//! Time is the SDE's own dimensionless time, not seconds: one input sample
//! spans `step_h * substeps_per_sample` time units. Slowing the drive
//! relative to the well's relaxation this way is what lets a fixed-rate
//! pilot sit in the adiabatic regime where well hopping can lock to it.

use rand_distr::{Distribution, StandardNormal};

use crate::seed::SeedPath;
use crate::signal::SampleStream;
use crate::{Error, Real, Result};

/// Shape of the quartic double well.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SrParams<T> {
    pub a: T,
    pub b: T,
}

impl<T: Real> SrParams<T> {
    pub fn new(a: T, b: T) -> Result<Self> {
        if !(a > T::zero()) {
            return Err(Error::param("a", "must be positive for bistability"));
        }
        if !(b > T::zero()) {
            return Err(Error::param("b", "must be positive for bistability"));
        }
        Ok(Self { a, b })
    }

    /// Distance of either minimum from the barrier, `√(a/b)`.
    pub fn well_position(&self) -> T {
        (self.a / self.b).sqrt()
    }
}

impl<T: Real> Default for SrParams<T> {
    fn default() -> Self {
        Self {
            a: T::one(),
            b: T::one(),
        }
    }
}

/// `V(x) = -(a/2) x² + (b/4) x⁴`.
pub fn potential<T: Real>(x: T, p: &SrParams<T>) -> T {
    let x2 = x * x;
    -p.a / T::of(2.0) * x2 + p.b / T::of(4.0) * x2 * x2
}

/// `V'(x)`; the drift is its negative.
pub fn potential_slope<T: Real>(x: T, p: &SrParams<T>) -> T {
    -p.a * x + p.b * x * x * x
}

/// `V''(x)`.
pub fn potential_curvature<T: Real>(x: T, p: &SrParams<T>) -> T {
    -p.a + T::of(3.0) * p.b * x * x
}

/// `(x_minus, x_plus, x_barrier)`.
pub fn stable_points<T: Real>(p: &SrParams<T>) -> (T, T, T) {
    let xm = p.well_position();
    (-xm, xm, T::zero())
}

/// `ΔV = a² / (4b)`.
pub fn barrier_height<T: Real>(p: &SrParams<T>) -> T {
    p.a * p.a / (T::of(4.0) * p.b)
}

/// Kramers switching rate `R = a / (√2 π) · exp(-ΔV / D)`.
pub fn kramers_rate<T: Real>(p: &SrParams<T>, noise_d: T) -> Result<T> {
    if !(noise_d > T::zero()) {
        return Err(Error::param("noise_d", "must be positive"));
    }
    let prefactor = p.a / (T::SQRT_2() * T::PI());
    Ok(prefactor * (-barrier_height(p) / noise_d).exp())
}

/// Euler–Maruyama discretization controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig<T> {
    /// Substep length in SR time units.
    pub step_h: T,
    pub substeps_per_sample: usize,
    /// Intensity of internally injected noise; 0 disables the draws.
    pub added_noise_d: T,
    pub initial_x: T,
    /// Output samples dropped from the front of the filtered stream.
    pub discard_transient: usize,
    pub seed: SeedPath,
}

impl<T: Real> IntegratorConfig<T> {
    /// Defaults: 80 substeps of 0.05 (4 time units per input sample), no
    /// injected noise, start in the right-hand well, drop one 256-sample
    /// FFT window of transient.
    pub fn for_params(p: &SrParams<T>) -> Self {
        Self {
            step_h: T::of(0.05),
            substeps_per_sample: 80,
            added_noise_d: T::zero(),
            initial_x: p.well_position(),
            discard_transient: 256,
            seed: SeedPath::root(0),
        }
    }

    pub fn time_per_sample(&self) -> T {
        self.step_h * T::of_usize(self.substeps_per_sample)
    }

    pub fn with_seed(self, seed: SeedPath) -> Self {
        Self { seed, ..self }
    }

    pub fn with_noise(self, added_noise_d: T) -> Self {
        Self {
            added_noise_d,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_h > T::zero()) || !self.step_h.is_finite() {
            return Err(Error::param("step_h", "must be positive and finite"));
        }
        if self.substeps_per_sample == 0 {
            return Err(Error::param("substeps_per_sample", "must be at least 1"));
        }
        if !(self.added_noise_d >= T::zero()) {
            return Err(Error::param("added_noise_d", "must be nonnegative"));
        }
        if !self.initial_x.is_finite() {
            return Err(Error::param("initial_x", "must be finite"));
        }
        Ok(())
    }
}

/// Noise intensity seen by the integrator when white noise of per-sample
/// `variance` is held over each sample.
pub fn channel_noise_intensity<T: Real>(variance: T, time_per_sample: T) -> T {
    variance * time_per_sample
}

/// Injected intensity that brings the total up to `target_d`, or zero when
/// the channel already exceeds it.
pub fn added_noise_for<T: Real>(variance: T, time_per_sample: T, target_d: T) -> T {
    (target_d - channel_noise_intensity(variance, time_per_sample)).max(T::zero())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SrState<T> {
    pub x: T,
    pub t: T,
}

impl<T: Real> SrState<T> {
    pub fn new(x: T) -> Self {
        Self { x, t: T::zero() }
    }
}

const DIVERGENCE_LIMIT: f64 = 1e6;

/// One Euler–Maruyama substep with standard normal draw `xi`.
#[inline]
pub fn step<T: Real>(
    state: SrState<T>,
    input_u: T,
    p: &SrParams<T>,
    cfg: &IntegratorConfig<T>,
    xi: T,
) -> Result<SrState<T>> {
    let h = cfg.step_h;
    let x = state.x;
    let mut next = x + h * (p.a * x - p.b * x * x * x + input_u);
    if cfg.added_noise_d > T::zero() {
        next = next + (cfg.added_noise_d * h).sqrt() * xi;
    }
    let next = SrState {
        x: next,
        t: state.t + h,
    };
    check_finite(next)
}

#[inline]
fn check_finite<T: Real>(s: SrState<T>) -> Result<SrState<T>> {
    if !s.x.is_finite() || s.x.abs().f64() > DIVERGENCE_LIMIT {
        return Err(Error::Divergence {
            t: s.t.f64(),
            x: s.x.f64(),
        });
    }
    Ok(s)
}

/// Runs the filter with noise draws taken from the config's seed path.
pub fn filter_stream<T: Real>(
    input: &SampleStream<T>,
    p: &SrParams<T>,
    cfg: &IntegratorConfig<T>,
) -> Result<SampleStream<T>> {
    let mut rng = cfg.seed.rng();
    filter_stream_with(input, p, cfg, || {
        let z: f64 = StandardNormal.sample(&mut rng);
        T::of(z)
    })
}

/// Runs the filter with standard normal draws supplied by `xi`. `xi` is only
/// called when `added_noise_d > 0`, once per substep in time order.
pub fn filter_stream_with<T: Real>(
    input: &SampleStream<T>,
    p: &SrParams<T>,
    cfg: &IntegratorConfig<T>,
    mut xi: impl FnMut() -> T,
) -> Result<SampleStream<T>> {
    cfg.validate()?;
    if input.len() <= cfg.discard_transient {
        return Err(Error::InsufficientSamples {
            needed: cfg.discard_transient + 1,
            got: input.len(),
        });
    }
    let (a, b, h) = (p.a, p.b, cfg.step_h);
    let noisy = cfg.added_noise_d > T::zero();
    let kick = (cfg.added_noise_d * h).sqrt();
    let mut x = cfg.initial_x;
    let mut out = Vec::with_capacity(input.len() - cfg.discard_transient);
    for (i, &u) in input.samples().iter().enumerate() {
        for _ in 0..cfg.substeps_per_sample {
            x = x + h * (a * x - b * x * x * x + u);
            if noisy {
                x = x + kick * xi();
            }
        }
        // bounds check once per sample; a diverging Euler run blows past
        // the limit within a few substeps either way
        if !x.is_finite() || x.abs().f64() > DIVERGENCE_LIMIT {
            return Err(Error::Divergence {
                t: (i + 1) as f64 * cfg.time_per_sample().f64(),
                x: x.f64(),
            });
        }
        if i >= cfg.discard_transient {
            out.push(x);
        }
    }
    SampleStream::new(out, input.sample_rate_hz())
}

/// Empirical well-switching rate with zero drive and injected intensity
/// `noise_d`, over `duration` time units. A switch is counted when the
/// particle, last seen beyond `+x_m/2`, reaches `-x_m/2`, or vice versa.
pub fn switching_rate<T: Real>(
    p: &SrParams<T>,
    noise_d: T,
    duration: T,
    cfg: &IntegratorConfig<T>,
) -> Result<T> {
    let cfg = cfg.with_noise(noise_d);
    cfg.validate()?;
    let steps = (duration / cfg.step_h).ceil().to_usize().unwrap_or(0);
    let threshold = p.well_position() / T::of(2.0);
    let mut rng = cfg.seed.rng();
    let mut state = SrState::new(cfg.initial_x);
    let mut side = if state.x >= T::zero() { 1i8 } else { -1 };
    let mut switches = 0usize;
    for _ in 0..steps {
        let z: f64 = StandardNormal.sample(&mut rng);
        state = step(state, T::zero(), p, &cfg, T::of(z))?;
        if side > 0 && state.x < -threshold {
            side = -1;
            switches += 1;
        } else if side < 0 && state.x > threshold {
            side = 1;
            switches += 1;
        }
    }
    Ok(T::of_usize(switches) / (T::of_usize(steps) * cfg.step_h))
}
