//! Noise-intensity tuning of the SR filter.
//!
//! A gain evaluation at intensity `D` drives the filter with the clean tone
//! and injects all of `D` inside the integrator. The matching input view is
//! the tone plus the per-sample average of the very same noise increments
//! (variance `D / τ`, `τ` the SR time per sample), so input and output SNR
//! are measured on one noise realization. Trial seeds do not depend on `D`,
//! which gives common random numbers across the whole search.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::seed::SeedPath;
use crate::signal::{gen_sinusoid, SampleStream, ToneSpec};
use crate::spectral::{snr_at_frequency, welch_psd, Periodogram};
use crate::srfilter::{filter_stream_with, IntegratorConfig, SrParams};
use crate::{Error, Result};

/// Measurement setup shared by every gain evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainSetup {
    pub fs: f64,
    /// Samples kept after the transient.
    pub samples: usize,
    pub nfft: usize,
    pub signal_halfwidth_bins: usize,
    pub guard_bins: usize,
    pub random_phase: bool,
    /// Integrator settings; `added_noise_d` and `seed` are overwritten.
    pub integrator: IntegratorConfig<f64>,
}

impl GainSetup {
    pub fn for_params(p: &SrParams<f64>) -> Self {
        Self {
            fs: 100.0,
            samples: 4096,
            nfft: 256,
            signal_halfwidth_bins: 2,
            guard_bins: 3,
            random_phase: true,
            integrator: IntegratorConfig::for_params(p),
        }
    }
}

/// Input and output PSDs of one simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSpectra {
    pub input: Periodogram<f64>,
    pub output: Periodogram<f64>,
}

/// Input view and SR output of one simulation at total intensity `noise_d`.
pub fn simulate_pair(
    p: &SrParams<f64>,
    tone: &ToneSpec<f64>,
    noise_d: f64,
    setup: &GainSetup,
    seed: SeedPath,
) -> Result<(SampleStream<f64>, SampleStream<f64>)> {
    if !(noise_d >= 0.0) {
        return Err(Error::param("noise_d", "must be nonnegative"));
    }
    let cfg = setup.integrator.with_noise(noise_d);
    let total = cfg.discard_transient + setup.samples;
    let tone = if setup.random_phase {
        let phase: f64 = seed.child(1).rng().random_range(0.0..std::f64::consts::TAU);
        tone.with_phase(phase)
    } else {
        *tone
    };
    let drive = gen_sinusoid(&tone, total, setup.fs)?;

    let mut rng = seed.child(0).rng();
    let sub = cfg.substeps_per_sample;
    let kick = (noise_d * cfg.step_h).sqrt();
    let tau = cfg.time_per_sample();
    let mut averaged = Vec::with_capacity(total);
    let (mut acc, mut count) = (0.0, 0usize);
    let output = filter_stream_with(&drive, p, &cfg, || {
        let z: f64 = StandardNormal.sample(&mut rng);
        acc += kick * z;
        count += 1;
        if count == sub {
            averaged.push(acc / tau);
            acc = 0.0;
            count = 0;
        }
        z
    })?;
    if averaged.is_empty() {
        averaged = vec![0.0; total];
    }
    let input: Vec<f64> = drive.samples()[cfg.discard_transient..]
        .iter()
        .zip(&averaged[cfg.discard_transient..])
        .map(|(s, w)| s + w)
        .collect();
    Ok((SampleStream::new(input, setup.fs)?, output))
}

/// Welch PSDs (no overlap) of [`simulate_pair`].
pub fn trial_spectra(
    p: &SrParams<f64>,
    tone: &ToneSpec<f64>,
    noise_d: f64,
    setup: &GainSetup,
    seed: SeedPath,
) -> Result<TrialSpectra> {
    let (input, output) = simulate_pair(p, tone, noise_d, setup, seed)?;
    Ok(TrialSpectra {
        input: welch_psd(&input, setup.nfft, 0.0)?.periodogram,
        output: welch_psd(&output, setup.nfft, 0.0)?.periodogram,
    })
}

fn mean_periodogram(ps: &[Periodogram<f64>]) -> Periodogram<f64> {
    let mut power = vec![0.0; ps[0].power.len()];
    for p in ps {
        power.iter_mut().zip(&p.power).for_each(|(a, v)| *a += v);
    }
    power.iter_mut().for_each(|a| *a /= ps.len() as f64);
    Periodogram {
        power,
        ..ps[0].clone()
    }
}

/// Trial-averaged input and output PSDs at one intensity, in trial order.
pub fn averaged_spectra(
    p: &SrParams<f64>,
    tone: &ToneSpec<f64>,
    noise_d: f64,
    setup: &GainSetup,
    trials: usize,
    seed: SeedPath,
) -> Result<TrialSpectra> {
    if trials == 0 {
        return Err(Error::param("trials", "must be at least 1"));
    }
    let per: Vec<TrialSpectra> = (0..trials as u64)
        .into_par_iter()
        .map(|i| trial_spectra(p, tone, noise_d, setup, seed.child(i)))
        .collect::<Result<_>>()
        .map_err(|e| match e {
            e @ Error::Divergence { .. } => Error::DivergenceAt {
                noise_d,
                source: Box::new(e),
            },
            e => e,
        })?;
    let (ins, outs): (Vec<_>, Vec<_>) = per.into_iter().map(|t| (t.input, t.output)).unzip();
    Ok(TrialSpectra {
        input: mean_periodogram(&ins),
        output: mean_periodogram(&outs),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainPoint {
    pub noise_d: f64,
    pub input_snr_db: f64,
    pub output_snr_db: f64,
    pub gain_db: f64,
}

/// SNR gain at one intensity from trial-averaged spectra.
pub fn gain_at(
    p: &SrParams<f64>,
    tone: &ToneSpec<f64>,
    noise_d: f64,
    setup: &GainSetup,
    trials: usize,
    seed: SeedPath,
) -> Result<GainPoint> {
    let s = averaged_spectra(p, tone, noise_d, setup, trials, seed)?;
    let snr = |pg: &Periodogram<f64>| {
        snr_at_frequency(
            pg,
            tone.freq_hz,
            setup.signal_halfwidth_bins,
            setup.guard_bins,
        )
    };
    let input_snr_db = snr(&s.input)?;
    let output_snr_db = snr(&s.output)?;
    Ok(GainPoint {
        noise_d,
        input_snr_db,
        output_snr_db,
        gain_db: output_snr_db - input_snr_db,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GainCurve {
    /// Sorted by `noise_d`.
    pub points: Vec<GainPoint>,
    pub trials_per_point: usize,
}

impl GainCurve {
    pub fn argmax(&self) -> Option<&GainPoint> {
        self.points
            .iter()
            .filter(|p| p.gain_db.is_finite())
            .max_by(|a, b| a.gain_db.total_cmp(&b.gain_db))
    }
}

/// Gain at every grid intensity. Grid points run concurrently and all use
/// the same trial seeds.
pub fn sweep_noise(
    p: &SrParams<f64>,
    tone: &ToneSpec<f64>,
    d_grid: &[f64],
    setup: &GainSetup,
    trials: usize,
    seed: SeedPath,
) -> Result<GainCurve> {
    if d_grid.is_empty() {
        return Err(Error::param("d_grid", "must be nonempty"));
    }
    if d_grid.iter().any(|&d| !(d > 0.0)) || d_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param(
            "d_grid",
            "must be positive and strictly increasing",
        ));
    }
    if trials == 0 {
        return Err(Error::param("trials", "must be at least 1"));
    }
    let points = d_grid
        .par_iter()
        .map(|&d| gain_at(p, tone, d, setup, trials, seed))
        .collect::<Result<_>>()?;
    Ok(GainCurve {
        points,
        trials_per_point: trials,
    })
}

/// `n` geometrically spaced points from `lo` to `hi` inclusive.
pub fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let r = (hi / lo).ln() / (n - 1) as f64;
            (0..n).map(|i| lo * (r * i as f64).exp()).collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TracePhase {
    Grid,
    Golden,
}

impl TracePhase {
    pub fn as_str(self) -> &'static str {
        match self {
            TracePhase::Grid => "grid",
            TracePhase::Golden => "golden",
        }
    }
}

/// One objective evaluation in search order; `value` is `None` when the
/// evaluation diverged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation<P> {
    pub phase: TracePhase,
    pub x: f64,
    pub value: Option<f64>,
    pub point: Option<P>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Maximum<P> {
    pub x: f64,
    pub value: f64,
    pub trace: Vec<Evaluation<P>>,
}

/// Maximizes `f` over `[lo, hi]` with at most `budget` evaluations: a
/// geometric grid of `grid_points`, then golden-section in `ln x` on the
/// bracket around the best grid point. Returns the best point evaluated.
///
/// `f` yields the objective and a payload kept in the trace. Divergence
/// errors mark a point infeasible; other errors abort.
pub fn maximize<P: Copy>(
    mut f: impl FnMut(f64) -> Result<(f64, P)>,
    lo: f64,
    hi: f64,
    grid_points: usize,
    budget: usize,
) -> Result<Maximum<P>> {
    if !(lo > 0.0 && lo < hi) {
        return Err(Error::param("range", "need 0 < lo < hi"));
    }
    if grid_points < 3 || budget < grid_points {
        return Err(Error::param("budget", "need budget >= grid points >= 3"));
    }
    let mut trace: Vec<Evaluation<P>> = Vec::with_capacity(budget);
    let mut eval = |x: f64, phase: TracePhase, trace: &mut Vec<Evaluation<P>>| -> Result<f64> {
        let (value, point) = match f(x) {
            Ok((v, pt)) if v.is_finite() => (Some(v), Some(pt)),
            Ok((_, pt)) => (None, Some(pt)),
            Err(Error::Divergence { .. } | Error::DivergenceAt { .. }) => (None, None),
            Err(e) => return Err(e),
        };
        trace.push(Evaluation {
            phase,
            x,
            value,
            point,
        });
        Ok(value.unwrap_or(f64::NEG_INFINITY))
    };

    let grid = geometric_grid(lo, hi, grid_points);
    let mut values = Vec::with_capacity(grid.len());
    for &x in &grid {
        values.push(eval(x, TracePhase::Grid, &mut trace)?);
    }
    let best = (0..grid.len())
        .filter(|&i| values[i].is_finite())
        .max_by(|&i, &j| values[i].total_cmp(&values[j]))
        .ok_or(Error::AllDiverged)?;

    let (mut a, mut b) = (
        grid[best.saturating_sub(1)].ln(),
        grid[(best + 1).min(grid.len() - 1)].ln(),
    );
    let invphi = (5f64.sqrt() - 1.0) / 2.0;
    let mut remaining = budget - grid_points;
    let mut c = b - invphi * (b - a);
    let mut d = a + invphi * (b - a);
    let (mut fc, mut fd) = (None, None);
    while remaining > 0 {
        if fc.is_none() {
            fc = Some(eval(c.exp(), TracePhase::Golden, &mut trace)?);
        } else if fd.is_none() {
            fd = Some(eval(d.exp(), TracePhase::Golden, &mut trace)?);
        }
        remaining -= 1;
        if let (Some(vc), Some(vd)) = (fc, fd) {
            if vc >= vd {
                b = d;
                d = c;
                fd = fc;
                c = b - invphi * (b - a);
                fc = None;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + invphi * (b - a);
                fd = None;
            }
        }
    }

    let top = trace
        .iter()
        .filter_map(|e| e.value.map(|v| (e.x, v)))
        .fold(None::<(f64, f64)>, |acc, (x, v)| match acc {
            Some((_, bv)) if bv >= v => acc,
            _ => Some((x, v)),
        })
        .ok_or(Error::AllDiverged)?;
    Ok(Maximum {
        x: top.0,
        value: top.1,
        trace,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneResult {
    pub d_opt: f64,
    pub gain_at_opt_db: f64,
    /// Every evaluated intensity, sorted by `noise_d`.
    pub curve: GainCurve,
    pub trace: Vec<Evaluation<GainPoint>>,
}

/// Default number of coarse grid points.
pub const TUNE_GRID_POINTS: usize = 8;

/// Coarse grid plus golden-section search for the gain-maximizing `D`.
pub fn optimize_noise(
    p: &SrParams<f64>,
    tone: &ToneSpec<f64>,
    range: (f64, f64),
    budget: usize,
    setup: &GainSetup,
    trials: usize,
    seed: SeedPath,
) -> Result<TuneResult> {
    if budget < TUNE_GRID_POINTS {
        return Err(Error::param("budget", "must be at least 8"));
    }
    if trials == 0 {
        return Err(Error::param("trials", "must be at least 1"));
    }
    let m = maximize(
        |d| {
            let g = gain_at(p, tone, d, setup, trials, seed)?;
            Ok((g.gain_db, g))
        },
        range.0,
        range.1,
        TUNE_GRID_POINTS,
        budget,
    )?;
    let mut points: Vec<GainPoint> = m.trace.iter().filter_map(|e| e.point).collect();
    points.sort_by(|a, b| a.noise_d.total_cmp(&b.noise_d));
    Ok(TuneResult {
        d_opt: m.x,
        gain_at_opt_db: m.value,
        curve: GainCurve {
            points,
            trials_per_point: trials,
        },
        trace: m.trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_setup() -> (SrParams<f64>, ToneSpec<f64>, GainSetup) {
        let p = SrParams::default();
        (p, ToneSpec::new(10.0, 0.3), GainSetup::for_params(&p))
    }

    fn surrogate(x: f64) -> Result<(f64, ())> {
        Ok((-(x.ln() - 0.4f64.ln()).powi(2), ()))
    }

    #[test]
    fn surrogate_optimum_recovered() {
        let m = maximize(surrogate, 0.05, 1.5, 8, 24).unwrap();
        assert!((m.x - 0.4).abs() < 0.01, "x = {}", m.x);
        assert_eq!(m.trace.len(), 24);
    }

    #[test]
    fn budget_equal_to_grid_is_best_grid_point() {
        let m = maximize(surrogate, 0.05, 1.5, 8, 8).unwrap();
        let grid = geometric_grid(0.05, 1.5, 8);
        let best = grid
            .iter()
            .copied()
            .max_by(|a, b| {
                surrogate(*a)
                    .unwrap()
                    .0
                    .total_cmp(&surrogate(*b).unwrap().0)
            })
            .unwrap();
        assert_eq!(m.x, best);
    }

    #[test]
    fn more_budget_never_hurts() {
        let noisy = |x: f64| Ok(((x * 37.0).sin() * 0.1 - (x - 0.5).powi(2), ()));
        let mut last = f64::NEG_INFINITY;
        for budget in 8..30 {
            let m = maximize(noisy, 0.05, 1.5, 8, budget).unwrap();
            assert!(m.value >= last);
            last = m.value;
        }
    }

    #[test]
    fn divergence_handling() {
        let all_bad = |_: f64| -> Result<(f64, ())> { Err(Error::Divergence { t: 1.0, x: 1e7 }) };
        assert!(matches!(
            maximize(all_bad, 0.1, 1.0, 8, 8),
            Err(Error::AllDiverged)
        ));
        let some_bad = |x: f64| {
            if x > 0.5 {
                Err(Error::Divergence { t: 1.0, x: 1e7 })
            } else {
                Ok((x, ()))
            }
        };
        let m = maximize(some_bad, 0.1, 1.0, 8, 12).unwrap();
        assert!(m.x <= 0.5);
        assert!(maximize(surrogate, 0.0, 1.0, 8, 8).is_err());
    }

    #[test]
    fn sweep_preconditions_and_trivial_grid() {
        let (p, tone, mut setup) = reference_setup();
        setup.samples = 1024;
        let s = SeedPath::root(3);
        assert!(sweep_noise(&p, &tone, &[], &setup, 1, s).is_err());
        assert!(sweep_noise(&p, &tone, &[0.3, 0.2], &setup, 1, s).is_err());
        let c = sweep_noise(&p, &tone, &[0.4], &setup, 1, s).unwrap();
        assert_eq!(c.points.len(), 1);
        let pt = c.points[0];
        assert!((pt.gain_db - (pt.output_snr_db - pt.input_snr_db)).abs() < 1e-12);
    }

    #[test]
    fn tiny_noise_gives_no_resonance() {
        let (p, tone, mut setup) = reference_setup();
        setup.samples = 2048;
        let s = SeedPath::root(5);
        let low = averaged_spectra(&p, &tone, 0.01, &setup, 4, s).unwrap();
        let res = averaged_spectra(&p, &tone, 0.4, &setup, 4, s).unwrap();
        let peak = |pg: &Periodogram<f64>| crate::spectral::peak_power_near(pg, 10.0, 1).unwrap().0;
        assert!(peak(&low.output) * 10.0 < peak(&res.output));
        let g = gain_at(&p, &tone, 0.01, &setup, 4, s).unwrap();
        assert!(g.gain_db < 1.0, "gain {}", g.gain_db);
    }

    #[test]
    fn input_view_has_expected_noise_level() {
        let (p, _, setup) = reference_setup();
        let silent = ToneSpec::new(10.0, 0.0);
        let (input, _) = simulate_pair(&p, &silent, 0.4, &setup, SeedPath::root(2)).unwrap();
        let var = input.samples().iter().map(|v| v * v).sum::<f64>() / input.len() as f64;
        assert!((var / 0.1 - 1.0).abs() < 0.1, "variance {var}");
    }

    #[test]
    fn tuning_is_reproducible() {
        let (p, tone, mut setup) = reference_setup();
        setup.samples = 1024;
        let run =
            || optimize_noise(&p, &tone, (0.05, 1.5), 8, &setup, 2, SeedPath::root(9)).unwrap();
        assert_eq!(run(), run());
    }
}
