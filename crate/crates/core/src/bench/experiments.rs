//! Seeded Monte Carlo experiments.
//!
//! Every trial draws its randomness from
//! `root(master_seed).path([experiment, grid index, role]).child(trial)`,
//! and results are gathered in index order, so output does not depend on
//! the worker count.

use rayon::prelude::*;

use super::config::{Config, DetectorKind, ExperimentKind, Spacing};
use super::table::{num, ResultTable};
use crate::detect::{
    dual_metric_samples, energies_of, estimate_e0, exceed_fraction, first_alarm, pretreat,
    seq_fold, sr_seed, threshold_from_samples, BlockDetectorConfig, ObservationModel,
};
use crate::signal::Hypothesis;
use crate::spectral::{peak_power_near, Periodogram};
use crate::tuning::{
    averaged_spectra, geometric_grid, optimize_noise, sweep_noise, GainCurve, TuneResult,
};
use crate::{Error, Result, SeedPath};

fn binomial_se(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n.max(1) as f64).sqrt()
}

fn root(cfg: &Config, kind: ExperimentKind) -> SeedPath {
    SeedPath::root(cfg.master_seed).child(kind.seed_id())
}

fn base_table(cfg: &Config, kind: ExperimentKind, columns: &[&'static str]) -> ResultTable {
    let mut t = ResultTable::new(columns);
    t.meta("srsense", env!("CARGO_PKG_VERSION"))
        .meta("experiment", kind)
        .meta("master_seed", cfg.master_seed)
        .meta("config", cfg.to_toml());
    t
}

fn model(cfg: &Config, snr_db: f64) -> ObservationModel<f64> {
    ObservationModel {
        random_phase: cfg.tone.random_phase,
        ..ObservationModel::new(cfg.fs, cfg.tone_for(cfg.nfft), cfg.noise_variance(snr_db))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsdReport {
    pub noise_d: f64,
    pub freq_hz: f64,
    pub input: Periodogram<f64>,
    pub output: Periodogram<f64>,
    /// Output over input peak power within one bin of the tone.
    pub peak_ratio: f64,
}

/// Trial-averaged input and output PSDs at `[psd] noise_d`.
pub fn run_psd_demo(cfg: &Config) -> Result<PsdReport> {
    let kind = ExperimentKind::Psd;
    cfg.validate(kind)?;
    let tone = cfg.tone_for(cfg.psd.nfft);
    let setup = cfg.gain_setup(cfg.psd.samples, cfg.psd.nfft)?;
    let s = averaged_spectra(
        &cfg.sr_params()?,
        &tone,
        cfg.psd.noise_d,
        &setup,
        cfg.psd.trials,
        root(cfg, kind),
    )?;
    let peak_in = peak_power_near(&s.input, tone.freq_hz, 1)?.0;
    let peak_out = peak_power_near(&s.output, tone.freq_hz, 1)?.0;
    Ok(PsdReport {
        noise_d: cfg.psd.noise_d,
        freq_hz: tone.freq_hz,
        input: s.input,
        output: s.output,
        peak_ratio: peak_out / peak_in,
    })
}

impl PsdReport {
    pub fn table(&self, cfg: &Config) -> ResultTable {
        let mut t = base_table(cfg, ExperimentKind::Psd, &["series", "freq_hz", "power"]);
        for (name, p) in [("input", &self.input), ("output", &self.output)] {
            for (k, &v) in p.power.iter().enumerate() {
                t.push(vec![name.into(), num(p.freq_of(k)), num(v)]);
            }
        }
        t.push(vec![
            "peak_ratio".into(),
            num(self.freq_hz),
            num(self.peak_ratio),
        ]);
        t
    }
}

pub fn sweep_grid(cfg: &Config) -> Vec<f64> {
    let s = &cfg.sweep;
    match s.spacing {
        Spacing::Log => geometric_grid(s.d_lo, s.d_hi, s.points),
        Spacing::Linear if s.points == 1 => vec![s.d_lo],
        Spacing::Linear => (0..s.points)
            .map(|i| s.d_lo + (s.d_hi - s.d_lo) * i as f64 / (s.points - 1) as f64)
            .collect(),
    }
}

/// SNR gain over the `[sweep]` grid.
pub fn run_gain_sweep(cfg: &Config) -> Result<GainCurve> {
    let kind = ExperimentKind::Gainsweep;
    cfg.validate(kind)?;
    let setup = cfg.gain_setup(cfg.sweep.samples, cfg.sweep.nfft)?;
    sweep_noise(
        &cfg.sr_params()?,
        &cfg.tone_for(cfg.sweep.nfft),
        &sweep_grid(cfg),
        &setup,
        cfg.sweep.trials,
        root(cfg, kind),
    )
}

pub fn gain_table(cfg: &Config, curve: &GainCurve) -> ResultTable {
    let mut t = base_table(
        cfg,
        ExperimentKind::Gainsweep,
        &["noise_d", "input_snr_db", "output_snr_db", "gain_db"],
    );
    t.meta("trials_per_point", curve.trials_per_point);
    for p in &curve.points {
        t.push(vec![
            num(p.noise_d),
            num(p.input_snr_db),
            num(p.output_snr_db),
            num(p.gain_db),
        ]);
    }
    t
}

/// Coarse grid plus golden-section search over `[tune]`.
pub fn run_tune(cfg: &Config) -> Result<TuneResult> {
    let kind = ExperimentKind::Tune;
    cfg.validate(kind)?;
    let setup = cfg.gain_setup(cfg.tune.samples, cfg.tune.nfft)?;
    optimize_noise(
        &cfg.sr_params()?,
        &cfg.tone_for(cfg.tune.nfft),
        (cfg.tune.d_lo, cfg.tune.d_hi),
        cfg.tune.budget,
        &setup,
        cfg.tune.trials,
        root(cfg, kind),
    )
}

/// Refinement trace in evaluation order; diverged points have empty SNRs.
pub fn tune_table(cfg: &Config, r: &TuneResult) -> ResultTable {
    let mut t = base_table(
        cfg,
        ExperimentKind::Tune,
        &[
            "phase",
            "noise_d",
            "input_snr_db",
            "output_snr_db",
            "gain_db",
        ],
    );
    t.meta("d_opt", num(r.d_opt))
        .meta("gain_at_opt_db", num(r.gain_at_opt_db));
    for e in &r.trace {
        let (i, o, g) = match e.point {
            Some(p) => (num(p.input_snr_db), num(p.output_snr_db), num(p.gain_db)),
            None => (String::new(), String::new(), String::new()),
        };
        t.push(vec![e.phase.as_str().into(), num(e.x), i, o, g]);
    }
    t
}

/// Paired plain and SR block metrics on shared observations.
#[derive(Debug, Clone, PartialEq)]
struct PairedMetrics {
    plain: Vec<f64>,
    sr: Vec<f64>,
}

fn paired(
    cfg: &Config,
    window: usize,
    m: &ObservationModel<f64>,
    hyp: Hypothesis,
    trials: usize,
    seed: SeedPath,
) -> Result<PairedMetrics> {
    let plain = cfg.plain_detector(window);
    let sr = cfg.sr_detector(window, m.noise_variance)?;
    let (plain, sr) = dual_metric_samples(&plain, &sr, m, hyp, trials, seed)?;
    Ok(PairedMetrics { plain, sr })
}

/// Decisions of one detector at calibrated level `pfa` on H0 calibration
/// metrics, applied to `eval`. Returns (in-sample Pfa, decision fraction).
fn operate(
    kind: DetectorKind,
    pfa: f64,
    calib: &PairedMetrics,
    eval: &PairedMetrics,
) -> Result<(f64, f64)> {
    Ok(match kind {
        DetectorKind::Plain => {
            let th = threshold_from_samples(&calib.plain, pfa)?;
            (th.achieved_pfa, exceed_fraction(&eval.plain, th.gamma))
        }
        DetectorKind::Sr => {
            let th = threshold_from_samples(&calib.sr, pfa)?;
            (th.achieved_pfa, exceed_fraction(&eval.sr, th.gamma))
        }
        DetectorKind::Dual => {
            let gp = threshold_from_samples(&calib.plain, pfa / 2.0)?.gamma;
            let gs = threshold_from_samples(&calib.sr, pfa / 2.0)?.gamma;
            let or = |m: &PairedMetrics| {
                let hits = m
                    .plain
                    .iter()
                    .zip(&m.sr)
                    .filter(|&(&p, &s)| p > gp || s > gs)
                    .count();
                hits as f64 / m.plain.len().max(1) as f64
            };
            (or(calib), or(eval))
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub detector: DetectorKind,
    pub snr_db: f64,
    pub target_pfa: f64,
    pub pfa: f64,
    pub pd: f64,
    pub trials: usize,
    pub se_pd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocReport {
    pub points: Vec<RocPoint>,
    pub window: usize,
}

impl RocReport {
    pub fn at(&self, detector: DetectorKind, snr_db: f64, target_pfa: f64) -> Option<&RocPoint> {
        self.points.iter().find(|p| {
            p.detector == detector
                && (p.snr_db - snr_db).abs() < 1e-9
                && (p.target_pfa - target_pfa).abs() < 1e-9
        })
    }

    pub fn table(&self, cfg: &Config) -> ResultTable {
        let mut t = base_table(
            cfg,
            ExperimentKind::Roc,
            &["detector", "snr_db", "pfa", "pd", "trials", "se_pd"],
        );
        t.meta("sensing_window_samples", self.window);
        for p in &self.points {
            t.push(vec![
                p.detector.as_str().into(),
                num(p.snr_db),
                num(p.pfa),
                num(p.pd),
                p.trials.to_string(),
                num(p.se_pd),
            ]);
        }
        t
    }
}

/// Empirical ROC per (detector, SNR): thresholds at H0 quantiles
/// `Pfa = j / roc_points`, from `trials` H0 and `trials` H1 observations.
pub fn run_roc(cfg: &Config) -> Result<RocReport> {
    let kind = ExperimentKind::Roc;
    cfg.validate(kind)?;
    let window = cfg.sensing_windows.as_ref().unwrap()[0];
    let snrs = cfg.snr_db.clone().unwrap();
    let detectors = cfg.detectors.clone().unwrap();
    let base = root(cfg, kind);
    let per_snr: Vec<(PairedMetrics, PairedMetrics)> = snrs
        .iter()
        .enumerate()
        .map(|(si, &snr)| {
            let m = model(cfg, snr);
            let s = base.child(si as u64);
            Ok((
                paired(cfg, window, &m, Hypothesis::H0, cfg.trials, s.child(0))?,
                paired(cfg, window, &m, Hypothesis::H1, cfg.trials, s.child(1))?,
            ))
        })
        .collect::<Result<_>>()?;
    let mut points = Vec::new();
    for &det in &detectors {
        for (si, &snr) in snrs.iter().enumerate() {
            let (h0, h1) = &per_snr[si];
            for j in 1..cfg.roc_points {
                let target = j as f64 / cfg.roc_points as f64;
                let (pfa, pd) = operate(det, target, h0, h1)?;
                points.push(RocPoint {
                    detector: det,
                    snr_db: snr,
                    target_pfa: target,
                    pfa,
                    pd,
                    trials: cfg.trials,
                    se_pd: binomial_se(pd, cfg.trials),
                });
            }
        }
    }
    Ok(RocReport { points, window })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdWindowRow {
    pub detector: DetectorKind,
    pub window_samples: usize,
    pub pd: f64,
    pub se_pd: f64,
    /// Fresh-sample false-alarm rate of the calibrated threshold.
    pub pfa_achieved: f64,
    pub validation_trials: usize,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdWindowReport {
    pub snr_db: f64,
    pub rows: Vec<PdWindowRow>,
}

impl PdWindowReport {
    pub fn row(&self, detector: DetectorKind, window: usize) -> Option<&PdWindowRow> {
        self.rows
            .iter()
            .find(|r| r.detector == detector && r.window_samples == window)
    }

    pub fn table(&self, cfg: &Config) -> ResultTable {
        let mut t = base_table(
            cfg,
            ExperimentKind::Pdwindow,
            &["detector", "window_samples", "pd", "pfa_achieved", "trials"],
        );
        t.meta("snr_db", num(self.snr_db))
            .meta("target_pfa", num(cfg.target_pfa));
        for r in &self.rows {
            t.push(vec![
                r.detector.as_str().into(),
                r.window_samples.to_string(),
                num(r.pd),
                num(r.pfa_achieved),
                r.trials.to_string(),
            ]);
        }
        t
    }
}

/// Pd against sensing window at fixed Pfa. Each window calibrates on
/// `calibration_trials` H0 runs, checks Pfa on `validation_trials` fresh H0
/// runs and measures Pd on `trials` H1 runs, all at the first SNR.
pub fn run_pd_vs_window(cfg: &Config) -> Result<PdWindowReport> {
    let kind = ExperimentKind::Pdwindow;
    cfg.validate(kind)?;
    let snr = cfg.snr_db.as_ref().unwrap()[0];
    let m = model(cfg, snr);
    let base = root(cfg, kind);
    let detectors = cfg.detectors.clone().unwrap();
    let mut rows = Vec::new();
    for (wi, &w) in cfg.sensing_windows.as_ref().unwrap().iter().enumerate() {
        let s = base.child(wi as u64);
        let calib = paired(
            cfg,
            w,
            &m,
            Hypothesis::H0,
            cfg.calibration_trials,
            s.child(0),
        )?;
        let valid = paired(
            cfg,
            w,
            &m,
            Hypothesis::H0,
            cfg.validation_trials,
            s.child(1),
        )?;
        let h1 = paired(cfg, w, &m, Hypothesis::H1, cfg.trials, s.child(2))?;
        for &det in &detectors {
            let (_, pfa_achieved) = operate(det, cfg.target_pfa, &calib, &valid)?;
            let (_, pd) = operate(det, cfg.target_pfa, &calib, &h1)?;
            rows.push(PdWindowRow {
                detector: det,
                window_samples: w,
                pd,
                se_pd: binomial_se(pd, cfg.trials),
                pfa_achieved,
                validation_trials: cfg.validation_trials,
                trials: cfg.trials,
            });
        }
    }
    Ok(PdWindowReport { snr_db: snr, rows })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeqRow {
    pub detector: DetectorKind,
    pub gamma: f64,
    /// Fraction of H0 runs alarming within the horizon.
    pub pfa: f64,
    /// Includes misses at `horizon + 1`.
    pub mean_delay_windows: f64,
    pub se_delay: f64,
    pub miss_rate: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeqReport {
    pub snr_db: f64,
    pub horizon: usize,
    pub e0: Vec<(DetectorKind, f64)>,
    pub rows: Vec<SeqRow>,
}

impl SeqReport {
    pub fn table(&self, cfg: &Config) -> ResultTable {
        let mut t = base_table(
            cfg,
            ExperimentKind::Seqdelay,
            &[
                "detector",
                "gamma",
                "pfa",
                "mean_delay_windows",
                "miss_rate",
                "trials",
            ],
        );
        t.meta("snr_db", num(self.snr_db))
            .meta("horizon_windows", self.horizon);
        for (d, e0) in &self.e0 {
            t.meta(format!("e0_{}", d.as_str()), num(*e0));
        }
        for r in &self.rows {
            t.push(vec![
                r.detector.as_str().into(),
                num(r.gamma),
                num(r.pfa),
                num(r.mean_delay_windows),
                num(r.miss_rate),
                r.trials.to_string(),
            ]);
        }
        t
    }
}

/// Sequential trajectories of one detector, one per run, in run order.
#[allow(clippy::too_many_arguments)]
fn trajectories(
    det: &BlockDetectorConfig<f64>,
    m: &ObservationModel<f64>,
    lead_in: usize,
    samples: usize,
    e0: f64,
    hyp: Hypothesis,
    runs: usize,
    seed: SeedPath,
) -> Result<Vec<Vec<f64>>> {
    (0..runs as u64)
        .into_par_iter()
        .map(|i| {
            let s = seed.child(i);
            let y = m.observe(hyp, lead_in + samples, s)?;
            let local = det.with_seed(sr_seed(s));
            let treated = if det.is_sr() {
                pretreat(&y, &local)?
            } else {
                y.tail(lead_in)
            };
            let e = energies_of(&treated, det.nfft, &det.bins)?;
            Ok(seq_fold(&e, e0, f64::INFINITY).trajectory)
        })
        .collect()
}

/// `(1 - pfa)` order statistic of the H0 run maxima.
fn gamma_for(maxima: &[f64], pfa: f64) -> Result<f64> {
    Ok(threshold_from_samples(maxima, pfa)?.gamma)
}

/// Sequential detection: false-alarm rate over a fixed horizon of H0 runs
/// and mean delay over H1 runs with the tone present from the first window.
pub fn run_seq_delay(cfg: &Config) -> Result<SeqReport> {
    let kind = ExperimentKind::Seqdelay;
    cfg.validate(kind)?;
    let snr = cfg.snr_db.as_ref().unwrap()[0];
    let m = model(cfg, snr);
    let base = root(cfg, kind);
    let horizon = cfg.seq.horizon;
    let samples = horizon * cfg.nfft;
    let plain = cfg.plain_detector(cfg.nfft);
    let sr = cfg.sr_detector(cfg.nfft, m.noise_variance)?;
    let lead_in = sr.lead_in();
    let mut rows = Vec::new();
    let mut e0s = Vec::new();
    for &det in cfg.detectors.as_ref().unwrap() {
        let d = match det {
            DetectorKind::Plain => &plain,
            DetectorKind::Sr => &sr,
            DetectorKind::Dual => {
                return Err(Error::Config(
                    "seqdelay supports plain and sr detectors".into(),
                ))
            }
        };
        let e0_trials = cfg.seq.e0_trials.max(100);
        let e0 = estimate_e0(d, &m, e0_trials, cfg.seq.e0_margin, base.child(0))?;
        e0s.push((det, e0));
        let h0 = trajectories(
            d,
            &m,
            lead_in,
            samples,
            e0,
            Hypothesis::H0,
            cfg.seq.h0_runs,
            base.child(1),
        )?;
        let h1 = trajectories(
            d,
            &m,
            lead_in,
            samples,
            e0,
            Hypothesis::H1,
            cfg.trials,
            base.child(2),
        )?;
        let maxima: Vec<f64> = h0
            .iter()
            .map(|t| t.iter().copied().fold(0.0, f64::max))
            .collect();
        let mut gammas = cfg
            .seq
            .pfa_grid
            .iter()
            .map(|&p| gamma_for(&maxima, p))
            .collect::<Result<Vec<_>>>()?;
        gammas.extend(&cfg.seq.gammas);
        for gamma in gammas {
            let pfa = exceed_fraction(&maxima, gamma);
            let delays: Vec<f64> = h1
                .iter()
                .map(|t| first_alarm(t, gamma).unwrap_or(horizon + 1) as f64)
                .collect();
            let n = delays.len() as f64;
            let mean = delays.iter().sum::<f64>() / n;
            let var = delays.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
            let misses = delays.iter().filter(|&&d| d > horizon as f64).count();
            rows.push(SeqRow {
                detector: det,
                gamma,
                pfa,
                mean_delay_windows: mean,
                se_delay: (var / n).sqrt(),
                miss_rate: misses as f64 / n,
                trials: cfg.trials,
            });
        }
    }
    Ok(SeqReport {
        snr_db: snr,
        horizon,
        e0: e0s,
        rows,
    })
}

/// Runs one experiment and renders its CSV table.
pub fn run_experiment(kind: ExperimentKind, cfg: &Config) -> Result<ResultTable> {
    Ok(match kind {
        ExperimentKind::Psd => run_psd_demo(cfg)?.table(cfg),
        ExperimentKind::Gainsweep => gain_table(cfg, &run_gain_sweep(cfg)?),
        ExperimentKind::Tune => tune_table(cfg, &run_tune(cfg)?),
        ExperimentKind::Roc => run_roc(cfg)?.table(cfg),
        ExperimentKind::Pdwindow => run_pd_vs_window(cfg)?.table(cfg),
        ExperimentKind::Seqdelay => run_seq_delay(cfg)?.table(cfg),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::config::Overrides;

    fn small(kind: ExperimentKind) -> Config {
        let mut cfg = Config::default().resolved(kind, Overrides::default());
        cfg.trials = 200;
        cfg.calibration_trials = 200;
        cfg.validation_trials = 200;
        cfg.psd.samples = 1024;
        cfg.psd.trials = 2;
        cfg.sweep.samples = 1024;
        cfg.sweep.trials = 2;
        cfg.sweep.points = 3;
        cfg.tune.samples = 1024;
        cfg.tune.trials = 2;
        cfg.tune.budget = 8;
        cfg.seq.horizon = 10;
        cfg.seq.h0_runs = 100;
        cfg
    }

    #[test]
    fn row_counts_match_grids() {
        let cfg = small(ExperimentKind::Roc);
        let r = run_roc(&cfg).unwrap();
        assert_eq!(r.points.len(), 3 * 4 * (cfg.roc_points - 1));

        let cfg = small(ExperimentKind::Pdwindow);
        assert_eq!(run_pd_vs_window(&cfg).unwrap().rows.len(), 2 * 5);

        let cfg = small(ExperimentKind::Gainsweep);
        assert_eq!(run_gain_sweep(&cfg).unwrap().points.len(), 3);

        let cfg = small(ExperimentKind::Seqdelay);
        assert_eq!(run_seq_delay(&cfg).unwrap().rows.len(), 2 * 4);

        let cfg = small(ExperimentKind::Psd);
        let t = run_psd_demo(&cfg).unwrap().table(&cfg);
        assert_eq!(t.rows.len(), 2 * 129 + 1);
    }

    #[test]
    fn window_equal_to_nfft_runs() {
        let mut cfg = small(ExperimentKind::Pdwindow);
        cfg.sensing_windows = Some(vec![256]);
        let r = run_pd_vs_window(&cfg).unwrap();
        assert!(r.row(DetectorKind::Sr, 256).is_some());
    }

    #[test]
    fn no_signal_roc_is_diagonal() {
        let cfg = small(ExperimentKind::Roc);
        let m = model(&cfg, -20.0);
        let s = SeedPath::root(11);
        let h0 = paired(&cfg, 512, &m, Hypothesis::H0, 4000, s.child(0)).unwrap();
        // H1 identical in law to H0
        let h1 = paired(&cfg, 512, &m, Hypothesis::H0, 4000, s.child(1)).unwrap();
        for det in [DetectorKind::Plain, DetectorKind::Sr, DetectorKind::Dual] {
            for j in 1..20 {
                let (pfa, pd) = operate(det, j as f64 / 20.0, &h0, &h1).unwrap();
                assert!((pd - pfa).abs() < 0.05, "{det:?} {pfa} {pd}");
            }
        }
    }

    #[test]
    fn infinite_gamma_never_alarms() {
        let mut cfg = small(ExperimentKind::Seqdelay);
        cfg.seq.pfa_grid.clear();
        cfg.seq.gammas = vec![f64::INFINITY];
        let r = run_seq_delay(&cfg).unwrap();
        for row in &r.rows {
            assert_eq!(row.pfa, 0.0);
            assert_eq!(row.miss_rate, 1.0);
            assert_eq!(row.mean_delay_windows, (cfg.seq.horizon + 1) as f64);
        }
    }

    #[test]
    fn strong_signal_is_found_quickly() {
        let mut cfg = small(ExperimentKind::Seqdelay);
        cfg.snr_db = Some(vec![0.0]);
        cfg.seq.pfa_grid = vec![0.1];
        let r = run_seq_delay(&cfg).unwrap();
        for row in &r.rows {
            assert!(row.mean_delay_windows <= 3.0, "{row:?}");
        }
    }

    #[test]
    fn zero_amplitude_psd_has_no_line() {
        let mut cfg = small(ExperimentKind::Psd);
        cfg.tone.amplitude = 0.0;
        cfg.psd.trials = 8;
        let r = run_psd_demo(&cfg).unwrap();
        for p in [&r.input, &r.output] {
            let (peak, k) = peak_power_near(p, r.freq_hz, 1).unwrap();
            // local floor: the output spectrum is far from white
            let mut v: Vec<f64> = (k - 12..=k + 12)
                .filter(|&j| j.abs_diff(k) > 3)
                .map(|j| p.power[j])
                .collect();
            v.sort_by(f64::total_cmp);
            let floor = v[v.len() / 2];
            assert!(peak / floor < 3.0, "peak/floor {}", peak / floor);
        }
    }
}
