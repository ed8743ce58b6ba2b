//! Experiment configuration files.
//!
//! A config is TOML: top-level keys plus one table per component. Every key
//! is optional; unknown keys are rejected.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::detect::{BinSelection, BlockDetectorConfig};
use crate::signal::{NoiseSpec, ToneSpec};
use crate::srfilter::{added_noise_for, IntegratorConfig, SrParams};
use crate::tuning::GainSetup;
use crate::{Error, Result, SeedPath};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Psd,
    Gainsweep,
    Tune,
    Roc,
    Pdwindow,
    Seqdelay,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::Psd,
        ExperimentKind::Gainsweep,
        ExperimentKind::Tune,
        ExperimentKind::Roc,
        ExperimentKind::Pdwindow,
        ExperimentKind::Seqdelay,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Psd => "psd",
            ExperimentKind::Gainsweep => "gainsweep",
            ExperimentKind::Tune => "tune",
            ExperimentKind::Roc => "roc",
            ExperimentKind::Pdwindow => "pdwindow",
            ExperimentKind::Seqdelay => "seqdelay",
        }
    }

    /// Stable component of every seed path drawn by the experiment.
    pub fn seed_id(self) -> u64 {
        match self {
            ExperimentKind::Psd => 1,
            ExperimentKind::Gainsweep => 2,
            ExperimentKind::Tune => 3,
            ExperimentKind::Roc => 4,
            ExperimentKind::Pdwindow => 5,
            ExperimentKind::Seqdelay => 6,
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectorKind {
    Plain,
    Sr,
    Dual,
}

impl DetectorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DetectorKind::Plain => "plain",
            DetectorKind::Sr => "sr",
            DetectorKind::Dual => "dual",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bins {
    /// All non-DC bins.
    All,
    /// `±tol_bins` around the pilot.
    Pilot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Log,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToneSection {
    pub freq_hz: f64,
    pub amplitude: f64,
    /// Snap the tone to the nearest FFT bin center.
    pub bin_aligned: bool,
    /// Uniform random phase per trial; otherwise `phase_rad`.
    pub random_phase: bool,
    pub phase_rad: f64,
}

impl Default for ToneSection {
    fn default() -> Self {
        Self {
            freq_hz: 10.0,
            amplitude: 0.3,
            bin_aligned: false,
            random_phase: true,
            phase_rad: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SrSection {
    pub a: f64,
    pub b: f64,
    pub step_h: f64,
    pub substeps_per_sample: usize,
    pub discard_transient: usize,
    /// Target total noise intensity; the integrator adds whatever the
    /// channel does not already supply.
    pub noise_d: f64,
    pub bins: Bins,
    pub tol_bins: usize,
}

impl Default for SrSection {
    fn default() -> Self {
        Self {
            a: 1.0,
            b: 1.0,
            step_h: 0.05,
            substeps_per_sample: 80,
            discard_transient: 256,
            noise_d: 0.43,
            bins: Bins::Pilot,
            tol_bins: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlainSection {
    pub bins: Bins,
    pub tol_bins: usize,
}

impl Default for PlainSection {
    fn default() -> Self {
        Self {
            bins: Bins::All,
            tol_bins: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PsdSection {
    pub noise_d: f64,
    pub samples: usize,
    pub nfft: usize,
    pub trials: usize,
}

impl Default for PsdSection {
    fn default() -> Self {
        Self {
            noise_d: 0.43,
            samples: 4096,
            nfft: 256,
            trials: 24,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub d_lo: f64,
    pub d_hi: f64,
    pub points: usize,
    pub spacing: Spacing,
    pub samples: usize,
    pub nfft: usize,
    pub trials: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            d_lo: 0.05,
            d_hi: 1.5,
            points: 16,
            spacing: Spacing::Log,
            samples: 4096,
            nfft: 256,
            trials: 24,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TuneSection {
    pub d_lo: f64,
    pub d_hi: f64,
    pub budget: usize,
    pub samples: usize,
    pub nfft: usize,
    pub trials: usize,
}

impl Default for TuneSection {
    fn default() -> Self {
        Self {
            d_lo: 0.05,
            d_hi: 1.5,
            budget: 16,
            samples: 4096,
            nfft: 256,
            trials: 24,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SeqSection {
    /// FFT windows per run.
    pub horizon: usize,
    pub h0_runs: usize,
    pub e0_trials: usize,
    pub e0_margin: f64,
    /// Targets for the empirical false-alarm rate; thresholds are their
    /// quantiles of the H0 run maxima.
    pub pfa_grid: Vec<f64>,
    /// Explicit thresholds, used in addition to `pfa_grid`.
    pub gammas: Vec<f64>,
}

impl Default for SeqSection {
    fn default() -> Self {
        Self {
            horizon: 200,
            h0_runs: 1000,
            e0_trials: 200,
            e0_margin: 0.5,
            pfa_grid: vec![0.02, 0.05, 0.1, 0.2],
            gammas: vec![],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub master_seed: u64,
    pub fs: f64,
    pub nfft: usize,
    /// Trials per hypothesis (H1 runs for seqdelay).
    pub trials: usize,
    pub calibration_trials: usize,
    pub validation_trials: usize,
    pub target_pfa: f64,
    /// ROC points at Pfa = j / roc_points.
    pub roc_points: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sensing_windows: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detectors: Option<Vec<DetectorKind>>,
    pub tone: ToneSection,
    pub sr: SrSection,
    pub plain: PlainSection,
    pub psd: PsdSection,
    pub sweep: SweepSection,
    pub tune: TuneSection,
    pub seq: SeqSection,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            master_seed: 1,
            fs: 100.0,
            nfft: 256,
            trials: 1000,
            calibration_trials: 4000,
            validation_trials: 10_000,
            target_pfa: 0.1,
            roc_points: 20,
            snr_db: None,
            sensing_windows: None,
            detectors: None,
            tone: ToneSection::default(),
            sr: SrSection::default(),
            plain: PlainSection::default(),
            psd: PsdSection::default(),
            sweep: SweepSection::default(),
            tune: TuneSection::default(),
            seq: SeqSection::default(),
        }
    }
}

/// What the CLI may override on top of a file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Fills per-experiment defaults and applies overrides. The result is
    /// what the CSV header echoes.
    pub fn resolved(mut self, kind: ExperimentKind, ov: Overrides) -> Self {
        let (snr, windows): (Vec<f64>, Vec<usize>) = match kind {
            ExperimentKind::Roc => (vec![-25.0, -20.0, -15.0, -10.0], vec![512]),
            ExperimentKind::Pdwindow => (vec![-20.0], vec![256, 512, 1024, 2048, 4096]),
            _ => (vec![-20.0], vec![512]),
        };
        self.snr_db.get_or_insert(snr);
        self.sensing_windows.get_or_insert(windows);
        self.detectors.get_or_insert_with(|| match kind {
            ExperimentKind::Roc => vec![DetectorKind::Plain, DetectorKind::Sr, DetectorKind::Dual],
            _ => vec![DetectorKind::Plain, DetectorKind::Sr],
        });
        if let Some(seed) = ov.seed {
            self.master_seed = seed;
        }
        if let Some(t) = ov.trials {
            match kind {
                ExperimentKind::Psd => self.psd.trials = t,
                ExperimentKind::Gainsweep => self.sweep.trials = t,
                ExperimentKind::Tune => self.tune.trials = t,
                _ => self.trials = t,
            }
        }
        self
    }

    pub fn validate(&self, kind: ExperimentKind) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.fs > 0.0) {
            return bad("fs must be positive");
        }
        if !(self.tone.freq_hz > 0.0 && self.tone.freq_hz < self.fs / 2.0) {
            return bad("tone.freq_hz must lie in (0, fs/2)");
        }
        if !(self.tone.amplitude >= 0.0) {
            return bad("tone.amplitude must be nonnegative");
        }
        if !(self.sr.a > 0.0 && self.sr.b > 0.0) {
            return bad("sr.a and sr.b must be positive");
        }
        if !(self.sr.noise_d >= 0.0) {
            return bad("sr.noise_d must be nonnegative");
        }
        let trials = match kind {
            ExperimentKind::Psd => self.psd.trials,
            ExperimentKind::Gainsweep => self.sweep.trials,
            ExperimentKind::Tune => self.tune.trials,
            _ => self.trials,
        };
        if trials == 0 {
            return bad("trials must be at least 1");
        }
        if !(self.target_pfa > 0.0 && self.target_pfa < 1.0) {
            return bad("target_pfa must lie in (0, 1)");
        }
        match kind {
            ExperimentKind::Psd if !(self.psd.noise_d >= 0.0) => {
                bad("psd.noise_d must be nonnegative")
            }
            ExperimentKind::Gainsweep
                if !(self.sweep.d_lo > 0.0 && self.sweep.d_lo < self.sweep.d_hi) =>
            {
                bad("sweep needs 0 < d_lo < d_hi")
            }
            ExperimentKind::Gainsweep if self.sweep.points == 0 => {
                bad("sweep.points must be at least 1")
            }
            ExperimentKind::Tune if !(self.tune.d_lo > 0.0 && self.tune.d_lo < self.tune.d_hi) => {
                bad("tune needs 0 < d_lo < d_hi")
            }
            ExperimentKind::Tune if self.tune.budget < 8 => bad("tune.budget must be at least 8"),
            ExperimentKind::Roc | ExperimentKind::Pdwindow | ExperimentKind::Seqdelay => {
                let snr = self.snr_db.as_deref().unwrap_or(&[]);
                if snr.is_empty() {
                    return bad("snr_db must be nonempty");
                }
                if self.detectors.as_deref().unwrap_or(&[]).is_empty() {
                    return bad("detectors must be nonempty");
                }
                let w = self.sensing_windows.as_deref().unwrap_or(&[]);
                if w.is_empty() || w.iter().any(|&w| w == 0 || w % self.nfft != 0) {
                    return bad("sensing_windows must be positive multiples of nfft");
                }
                if kind == ExperimentKind::Pdwindow && w.windows(2).any(|p| p[1] <= p[0]) {
                    return bad("sensing_windows must be increasing");
                }
                if kind == ExperimentKind::Roc && self.roc_points < 2 {
                    return bad("roc_points must be at least 2");
                }
                if kind == ExperimentKind::Seqdelay {
                    if self.seq.horizon == 0 || self.seq.h0_runs == 0 {
                        return bad("seq.horizon and seq.h0_runs must be positive");
                    }
                    if self.seq.pfa_grid.is_empty() && self.seq.gammas.is_empty() {
                        return bad("seq needs pfa_grid or gammas");
                    }
                    if self.seq.pfa_grid.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
                        return bad("seq.pfa_grid entries must lie in (0, 1)");
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn sr_params(&self) -> Result<SrParams<f64>> {
        SrParams::new(self.sr.a, self.sr.b)
    }

    /// Integrator from `[sr]` with no injected noise.
    pub fn integrator(&self) -> Result<IntegratorConfig<f64>> {
        let p = self.sr_params()?;
        let cfg = IntegratorConfig {
            step_h: self.sr.step_h,
            substeps_per_sample: self.sr.substeps_per_sample,
            discard_transient: self.sr.discard_transient,
            ..IntegratorConfig::for_params(&p)
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Pilot tone, snapped to a bin center of `nfft` when requested.
    pub fn tone_for(&self, nfft: usize) -> ToneSpec<f64> {
        let f = if self.tone.bin_aligned {
            let bw = self.fs / nfft as f64;
            (self.tone.freq_hz / bw).round().max(1.0) * bw
        } else {
            self.tone.freq_hz
        };
        ToneSpec::new(f, self.tone.amplitude).with_phase(self.tone.phase_rad)
    }

    /// Per-sample noise variance for an input SNR.
    pub fn noise_variance(&self, snr_db: f64) -> f64 {
        NoiseSpec::for_snr(self.tone.amplitude, snr_db, SeedPath::root(0)).variance
    }

    fn bins(&self, bins: Bins, tol_bins: usize, nfft: usize) -> BinSelection<f64> {
        match bins {
            Bins::All => BinSelection::AllNonDc,
            Bins::Pilot => BinSelection::Near {
                freq_hz: self.tone_for(nfft).freq_hz,
                tol_bins,
            },
        }
    }

    pub fn plain_detector(&self, window: usize) -> BlockDetectorConfig<f64> {
        BlockDetectorConfig::plain(self.nfft, window).with_bins(self.bins(
            self.plain.bins,
            self.plain.tol_bins,
            self.nfft,
        ))
    }

    /// SR detector for a channel of per-sample `noise_variance`.
    pub fn sr_detector(
        &self,
        window: usize,
        noise_variance: f64,
    ) -> Result<BlockDetectorConfig<f64>> {
        let integ = self.integrator()?;
        let added = added_noise_for(noise_variance, integ.time_per_sample(), self.sr.noise_d);
        Ok(BlockDetectorConfig::sr(
            self.nfft,
            window,
            self.sr_params()?,
            integ.with_noise(added),
            self.tone_for(self.nfft).freq_hz,
        )
        .with_bins(self.bins(self.sr.bins, self.sr.tol_bins, self.nfft)))
    }

    pub fn gain_setup(&self, samples: usize, nfft: usize) -> Result<GainSetup> {
        let p = self.sr_params()?;
        Ok(GainSetup {
            fs: self.fs,
            samples,
            nfft,
            random_phase: self.tone.random_phase,
            integrator: self.integrator()?,
            ..GainSetup::for_params(&p)
        })
    }
}

/// Schema summary printed by `--help`.
pub const SCHEMA: &str = "\
CONFIG FILE (TOML, every key optional, unknown keys rejected):
  master_seed = 1            fs = 100.0               nfft = 256
  trials = 1000              calibration_trials = 4000
  validation_trials = 10000  target_pfa = 0.1         roc_points = 20
  snr_db = [..]              roc: [-25, -20, -15, -10], others: [-20]
  sensing_windows = [..]     pdwindow: [256, 512, 1024, 2048, 4096], others: [512]
  detectors = [..]           roc: [\"plain\", \"sr\", \"dual\"], others: [\"plain\", \"sr\"]
  [tone]   freq_hz = 10.0  amplitude = 0.3  bin_aligned = false
           random_phase = true  phase_rad = 0.0
  [sr]     a = 1.0  b = 1.0  step_h = 0.05  substeps_per_sample = 80
           discard_transient = 256  noise_d = 0.43  bins = \"pilot\"  tol_bins = 2
  [plain]  bins = \"all\"  tol_bins = 2
  [psd]    noise_d = 0.43  samples = 4096  nfft = 256  trials = 24
  [sweep]  d_lo = 0.05  d_hi = 1.5  points = 16  spacing = \"log\"
           samples = 4096  nfft = 256  trials = 24
  [tune]   d_lo = 0.05  d_hi = 1.5  budget = 16  samples = 4096  nfft = 256  trials = 24
  [seq]    horizon = 200  h0_runs = 1000  e0_trials = 200  e0_margin = 0.5
           pfa_grid = [0.02, 0.05, 0.1, 0.2]  gammas = []

ENVIRONMENT:
  SRSENSE_THREADS   worker threads (0 or unset: all cores)

EXIT CODES:
  0 success, 1 usage or config error, 2 runtime error";
