//! Energy detection on raw or SR-pretreated observations.
//!
//! Each FFT window contributes an energy `E_n = max_t |Y(n, t)|²` over a bin
//! set chosen per detector. The block metric averages `E_n` over the `K`
//! windows of one sensing window; the sequential detector folds them through
//! `m(n) = max(m(n-1) + E_n - E0, 0)`.

use rand::Rng;
use rayon::prelude::*;

use crate::seed::SeedPath;
use crate::signal::{synth_observation, Hypothesis, NoiseSpec, SampleStream, ToneSpec};
use crate::spectral::{peak_power_near, Periodogram, SpectrumEngine};
use crate::srfilter::{filter_stream, IntegratorConfig, SrParams};
use crate::{Error, Real, Result};

/// Bins a detector maximizes over in each FFT window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BinSelection<T> {
    /// Every one-sided bin except DC; frequency-agnostic.
    AllNonDc,
    /// `±tol_bins` around the bin nearest `freq_hz`.
    Near { freq_hz: T, tol_bins: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Pretreat<T> {
    None,
    Sr {
        params: SrParams<T>,
        integrator: IntegratorConfig<T>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockDetectorConfig<T> {
    pub nfft: usize,
    pub sensing_window_samples: usize,
    pub pretreat: Pretreat<T>,
    pub bins: BinSelection<T>,
}

impl<T: Real> BlockDetectorConfig<T> {
    /// Frequency-agnostic energy detector on the raw observation.
    pub fn plain(nfft: usize, sensing_window_samples: usize) -> Self {
        Self {
            nfft,
            sensing_window_samples,
            pretreat: Pretreat::None,
            bins: BinSelection::AllNonDc,
        }
    }

    /// SR-pretreated detector reading the output at the pilot frequency.
    pub fn sr(
        nfft: usize,
        sensing_window_samples: usize,
        params: SrParams<T>,
        integrator: IntegratorConfig<T>,
        pilot_hz: T,
    ) -> Self {
        Self {
            nfft,
            sensing_window_samples,
            pretreat: Pretreat::Sr { params, integrator },
            bins: BinSelection::Near {
                freq_hz: pilot_hz,
                tol_bins: 2,
            },
        }
    }

    pub fn with_bins(self, bins: BinSelection<T>) -> Self {
        Self { bins, ..self }
    }

    pub fn with_window(self, sensing_window_samples: usize) -> Self {
        Self {
            sensing_window_samples,
            ..self
        }
    }

    /// FFT blocks per sensing window.
    pub fn blocks(&self) -> usize {
        self.sensing_window_samples / self.nfft
    }

    /// Samples consumed before the first usable output (SR transient).
    pub fn lead_in(&self) -> usize {
        match &self.pretreat {
            Pretreat::None => 0,
            Pretreat::Sr { integrator, .. } => integrator.discard_transient,
        }
    }

    /// Observation length needed for one block decision.
    pub fn observation_len(&self) -> usize {
        self.lead_in() + self.sensing_window_samples
    }

    pub fn is_sr(&self) -> bool {
        matches!(self.pretreat, Pretreat::Sr { .. })
    }

    /// Same detector with the SR noise drawn from `seed`.
    pub fn with_seed(self, seed: SeedPath) -> Self {
        match self.pretreat {
            Pretreat::None => self,
            Pretreat::Sr { params, integrator } => Self {
                pretreat: Pretreat::Sr {
                    params,
                    integrator: integrator.with_seed(seed),
                },
                ..self
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nfft < 8 || !self.nfft.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(self.nfft));
        }
        if self.sensing_window_samples == 0
            || !self.sensing_window_samples.is_multiple_of(self.nfft)
        {
            return Err(Error::param(
                "sensing_window_samples",
                "must be a positive multiple of nfft",
            ));
        }
        if let Pretreat::Sr { integrator, .. } = &self.pretreat {
            integrator.validate()?;
        }
        Ok(())
    }
}

/// Applies the configured pretreatment (transient already dropped).
pub fn pretreat<T: Real>(
    stream: &SampleStream<T>,
    cfg: &BlockDetectorConfig<T>,
) -> Result<SampleStream<T>> {
    match &cfg.pretreat {
        Pretreat::None => Ok(stream.clone()),
        Pretreat::Sr { params, integrator } => filter_stream(stream, params, integrator),
    }
}

fn window_energy<T: Real>(p: &Periodogram<T>, bins: &BinSelection<T>) -> Result<T> {
    match *bins {
        BinSelection::AllNonDc => Ok(p.power[1..]
            .iter()
            .copied()
            .fold(T::zero(), |m, v| m.max(v))),
        BinSelection::Near { freq_hz, tol_bins } => Ok(peak_power_near(p, freq_hz, tol_bins)?.0),
    }
}

/// `E_n` for every complete FFT window of an already pretreated stream.
pub fn energies_of<T: Real>(
    samples: &SampleStream<T>,
    nfft: usize,
    bins: &BinSelection<T>,
) -> Result<Vec<T>> {
    let mut engine = SpectrumEngine::new(nfft)?;
    let fs = samples.sample_rate_hz();
    let mut p = Periodogram {
        power: Vec::with_capacity(nfft / 2 + 1),
        bin_width_hz: fs / T::of_usize(nfft),
        nfft,
    };
    samples
        .samples()
        .chunks_exact(nfft)
        .map(|block| {
            engine.power_into(block, &mut p.power)?;
            window_energy(&p, bins)
        })
        .collect()
}

/// `E_n` per consecutive FFT window after pretreatment.
pub fn window_energies<T: Real>(
    stream: &SampleStream<T>,
    cfg: &BlockDetectorConfig<T>,
) -> Result<Vec<T>> {
    let treated = pretreat(stream, cfg)?;
    energies_of(&treated, cfg.nfft, &cfg.bins)
}

/// Block metric `M = (1/K) Σ_n E_n` over the last sensing window of the
/// (pretreated) stream.
pub fn block_metric<T: Real>(stream: &SampleStream<T>, cfg: &BlockDetectorConfig<T>) -> Result<T> {
    cfg.validate()?;
    let needed = cfg.observation_len();
    if stream.len() < needed {
        return Err(Error::InsufficientSamples {
            needed,
            got: stream.len(),
        });
    }
    let treated = pretreat(stream, cfg)?;
    let window = treated.tail(treated.len() - cfg.sensing_window_samples);
    let e = energies_of(&window, cfg.nfft, &cfg.bins)?;
    Ok(e.iter().copied().sum::<T>() / T::of_usize(e.len()))
}

/// How trial observations are synthesized for Monte Carlo.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationModel<T> {
    pub fs: T,
    pub tone: ToneSpec<T>,
    pub noise_variance: T,
    /// Draw a uniform tone phase per trial instead of `tone.phase_rad`.
    pub random_phase: bool,
}

impl<T: Real> ObservationModel<T> {
    pub fn new(fs: T, tone: ToneSpec<T>, noise_variance: T) -> Self {
        Self {
            fs,
            tone,
            noise_variance,
            random_phase: true,
        }
    }

    /// One observation of `n` samples. Noise comes from `seed.child(0)`,
    /// the phase from `seed.child(1)`; `seed.child(2)` is left for the SR.
    pub fn observe(&self, hyp: Hypothesis, n: usize, seed: SeedPath) -> Result<SampleStream<T>> {
        let noise = NoiseSpec::new(self.noise_variance, seed.child(0));
        let tone = if self.random_phase {
            let phase: f64 = seed.child(1).rng().random_range(0.0..std::f64::consts::TAU);
            self.tone.with_phase(T::of(phase))
        } else {
            self.tone
        };
        synth_observation(hyp, &tone, &noise, n, self.fs)
    }
}

/// SR noise path for a trial, disjoint from the observation's paths.
pub fn sr_seed(trial: SeedPath) -> SeedPath {
    trial.child(2)
}

/// Block metric of one synthesized trial.
pub fn trial_metric<T: Real>(
    cfg: &BlockDetectorConfig<T>,
    model: &ObservationModel<T>,
    hyp: Hypothesis,
    seed: SeedPath,
) -> Result<T> {
    let y = model.observe(hyp, cfg.observation_len(), seed)?;
    block_metric(&y, &cfg.with_seed(sr_seed(seed)))
}

/// Block metrics of `trials` independent trials, in trial order.
pub fn metric_samples<T: Real>(
    cfg: &BlockDetectorConfig<T>,
    model: &ObservationModel<T>,
    hyp: Hypothesis,
    trials: usize,
    seed: SeedPath,
) -> Result<Vec<T>> {
    (0..trials as u64)
        .into_par_iter()
        .map(|i| trial_metric(cfg, model, hyp, seed.child(i)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Threshold<T> {
    pub gamma: T,
    pub target_pfa: T,
    pub calibration_trials: usize,
    /// Fraction of calibration metrics strictly above `gamma`.
    pub achieved_pfa: T,
}

/// Empirical `(1 - target_pfa)` order statistic of `samples`.
pub fn threshold_from_samples<T: Real>(samples: &[T], target_pfa: T) -> Result<Threshold<T>> {
    if !(target_pfa > T::zero() && target_pfa < T::one()) {
        return Err(Error::param("target_pfa", "must lie in (0, 1)"));
    }
    if samples.is_empty() {
        return Err(Error::param(
            "samples",
            "need at least one calibration sample",
        ));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = sorted.len();
    let allowed_above = ((target_pfa.f64() * n as f64) + 1e-9).floor() as usize;
    let gamma = sorted[n - 1 - allowed_above.min(n - 1)];
    let above = sorted.iter().filter(|&&v| v > gamma).count();
    Ok(Threshold {
        gamma,
        target_pfa,
        calibration_trials: n,
        achieved_pfa: T::of_usize(above) / T::of_usize(n),
    })
}

/// Calibrates `gamma` on `trials` fresh H0 observations.
pub fn calibrate_threshold<T: Real>(
    cfg: &BlockDetectorConfig<T>,
    model: &ObservationModel<T>,
    target_pfa: T,
    trials: usize,
    seed: SeedPath,
) -> Result<Threshold<T>> {
    if trials < 100 {
        return Err(Error::param(
            "trials",
            "calibration needs at least 100 trials",
        ));
    }
    let m = metric_samples(cfg, model, Hypothesis::H0, trials, seed)?;
    threshold_from_samples(&m, target_pfa)
}

/// H1 iff `metric > gamma`.
pub fn block_decide<T: Real>(metric: T, th: &Threshold<T>) -> Hypothesis {
    if metric > th.gamma {
        Hypothesis::H1
    } else {
        Hypothesis::H0
    }
}

/// Fraction of `metrics` deciding H1 against `gamma`.
pub fn exceed_fraction<T: Real>(metrics: &[T], gamma: T) -> T {
    let above = metrics.iter().filter(|&&m| m > gamma).count();
    T::of_usize(above) / T::of_usize(metrics.len().max(1))
}

/// Reference level `E0 = mean + margin_factor · std` of `E_n` under H0.
pub fn estimate_e0<T: Real>(
    cfg: &BlockDetectorConfig<T>,
    model: &ObservationModel<T>,
    trials: usize,
    margin_factor: T,
    seed: SeedPath,
) -> Result<T> {
    if trials < 100 {
        return Err(Error::param(
            "trials",
            "E0 estimation needs at least 100 trials",
        ));
    }
    let per_trial: Vec<Vec<T>> = (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let s = seed.child(i);
            let y = model.observe(Hypothesis::H0, cfg.observation_len(), s)?;
            window_energies(&y, &cfg.with_seed(sr_seed(s)))
        })
        .collect::<Result<_>>()?;
    let e: Vec<f64> = per_trial.into_iter().flatten().map(Real::f64).collect();
    let n = e.len() as f64;
    let mean = e.iter().sum::<f64>() / n;
    let var = if e.len() > 1 {
        e.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok(T::of(mean) + margin_factor * T::of(var.sqrt()))
}

/// Running statistic of the CUSUM-like sequential test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SequentialState<T> {
    pub m: T,
    pub e0: T,
    pub gamma: T,
    pub windows_seen: usize,
}

impl<T: Real> SequentialState<T> {
    pub fn new(e0: T, gamma: T) -> Self {
        Self {
            m: T::zero(),
            e0,
            gamma,
            windows_seen: 0,
        }
    }
}

/// `m ← max(m + e_n − E0, 0)`; alarm iff `m > gamma`.
pub fn seq_update<T: Real>(state: SequentialState<T>, e_n: T) -> (SequentialState<T>, bool) {
    let m = (state.m + e_n - state.e0).max(T::zero());
    let next = SequentialState {
        m,
        windows_seen: state.windows_seen + 1,
        ..state
    };
    (next, m > state.gamma)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeqOutcome<T> {
    /// 1-based FFT window of the first alarm.
    pub alarm_window: Option<usize>,
    pub trajectory: Vec<T>,
}

/// First window (1-based) at which `trajectory` exceeds `gamma`.
pub fn first_alarm<T: Real>(trajectory: &[T], gamma: T) -> Option<usize> {
    trajectory.iter().position(|&m| m > gamma).map(|i| i + 1)
}

/// Folds an `E_n` sequence through [`seq_update`].
pub fn seq_fold<T: Real>(energies: &[T], e0: T, gamma: T) -> SeqOutcome<T> {
    let mut state = SequentialState::new(e0, gamma);
    let mut alarm_window = None;
    let mut trajectory = Vec::with_capacity(energies.len());
    for &e in energies {
        let (next, alarm) = seq_update(state, e);
        state = next;
        trajectory.push(state.m);
        if alarm && alarm_window.is_none() {
            alarm_window = Some(state.windows_seen);
        }
    }
    SeqOutcome {
        alarm_window,
        trajectory,
    }
}

/// Sequential test over every FFT window of the (pretreated) stream.
///
/// The trajectory covers the whole stream even after an alarm, so one run
/// can be scored against many thresholds with [`first_alarm`].
pub fn seq_run<T: Real>(
    stream: &SampleStream<T>,
    cfg: &BlockDetectorConfig<T>,
    e0: T,
    gamma: T,
) -> Result<SeqOutcome<T>> {
    let needed = cfg.lead_in() + cfg.nfft;
    if stream.len() < needed {
        return Err(Error::InsufficientSamples {
            needed,
            got: stream.len(),
        });
    }
    let e = window_energies(stream, cfg)?;
    Ok(seq_fold(&e, e0, gamma))
}

/// Plain and SR branches combined with an OR rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualConfig<T> {
    pub plain_threshold: Threshold<T>,
    pub sr_threshold: Threshold<T>,
}

impl<T: Real> DualConfig<T> {
    /// Calibrates each branch at `target_pfa / 2` so the union bound caps the
    /// combined false-alarm rate at `target_pfa`.
    pub fn calibrate(
        plain_cfg: &BlockDetectorConfig<T>,
        sr_cfg: &BlockDetectorConfig<T>,
        model: &ObservationModel<T>,
        target_pfa: T,
        trials: usize,
        seed: SeedPath,
    ) -> Result<Self> {
        let (plain, sr) =
            dual_metric_samples(plain_cfg, sr_cfg, model, Hypothesis::H0, trials, seed)?;
        let half = target_pfa / T::of(2.0);
        Ok(Self {
            plain_threshold: threshold_from_samples(&plain, half)?,
            sr_threshold: threshold_from_samples(&sr, half)?,
        })
    }

    pub fn decide(&self, plain_metric: T, sr_metric: T) -> Hypothesis {
        match (
            block_decide(plain_metric, &self.plain_threshold),
            block_decide(sr_metric, &self.sr_threshold),
        ) {
            (Hypothesis::H0, Hypothesis::H0) => Hypothesis::H0,
            _ => Hypothesis::H1,
        }
    }
}

/// Both branch metrics on the same observation of one trial.
pub fn dual_trial_metrics<T: Real>(
    plain_cfg: &BlockDetectorConfig<T>,
    sr_cfg: &BlockDetectorConfig<T>,
    model: &ObservationModel<T>,
    hyp: Hypothesis,
    seed: SeedPath,
) -> Result<(T, T)> {
    let n = plain_cfg.observation_len().max(sr_cfg.observation_len());
    let y = model.observe(hyp, n, seed)?;
    Ok((
        block_metric(&y, plain_cfg)?,
        block_metric(&y, &sr_cfg.with_seed(sr_seed(seed)))?,
    ))
}

pub fn dual_metric_samples<T: Real>(
    plain_cfg: &BlockDetectorConfig<T>,
    sr_cfg: &BlockDetectorConfig<T>,
    model: &ObservationModel<T>,
    hyp: Hypothesis,
    trials: usize,
    seed: SeedPath,
) -> Result<(Vec<T>, Vec<T>)> {
    let pairs: Vec<(T, T)> = (0..trials as u64)
        .into_par_iter()
        .map(|i| dual_trial_metrics(plain_cfg, sr_cfg, model, hyp, seed.child(i)))
        .collect::<Result<_>>()?;
    Ok(pairs.into_iter().unzip())
}

/// OR-combined decision of the two branches on one observation.
pub fn dual_decide<T: Real>(
    stream: &SampleStream<T>,
    dual: &DualConfig<T>,
    plain_cfg: &BlockDetectorConfig<T>,
    sr_cfg: &BlockDetectorConfig<T>,
) -> Result<Hypothesis> {
    Ok(dual.decide(
        block_metric(stream, plain_cfg)?,
        block_metric(stream, sr_cfg)?,
    ))
}
