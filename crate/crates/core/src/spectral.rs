//! Periodograms and narrowband measurements.
//!
//! Normalization: `power[k] = |X[k]|² / nfft²`, with non-DC, non-Nyquist bins
//! doubled so the one-sided bins sum to the block's mean square. An on-bin
//! unit-amplitude sinusoid therefore shows up as 0.5 in its bin.

use std::io::Write;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::signal::SampleStream;
use crate::{Error, Real, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Periodogram<T> {
    pub power: Vec<T>,
    pub bin_width_hz: T,
    pub nfft: usize,
}

impl<T: Real> Periodogram<T> {
    pub fn nyquist_hz(&self) -> T {
        self.bin_width_hz * T::of_usize(self.nfft / 2)
    }

    pub fn freq_of(&self, bin: usize) -> T {
        self.bin_width_hz * T::of_usize(bin)
    }

    pub fn total_power(&self) -> T {
        self.power.iter().copied().sum()
    }

    /// `freq_hz,power` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "freq_hz,power")?;
        for (k, p) in self.power.iter().enumerate() {
            writeln!(w, "{},{}", self.freq_of(k), p)?;
        }
        Ok(())
    }
}

/// Segment-averaged periodogram.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdEstimate<T> {
    pub periodogram: Periodogram<T>,
    pub segments: usize,
}

fn check_nfft(n: usize) -> Result<()> {
    if n < 8 || !n.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(n));
    }
    Ok(())
}

/// Reusable FFT plan and buffers for repeated periodograms of one size.
pub struct SpectrumEngine<T: Real> {
    nfft: usize,
    fft: Arc<dyn Fft<T>>,
    buf: Vec<Complex<T>>,
    scratch: Vec<Complex<T>>,
}

impl<T: Real> SpectrumEngine<T> {
    pub fn new(nfft: usize) -> Result<Self> {
        check_nfft(nfft)?;
        let fft = FftPlanner::new().plan_fft_forward(nfft);
        let scratch = vec![Complex::default(); fft.get_inplace_scratch_len()];
        Ok(Self {
            nfft,
            fft,
            buf: vec![Complex::default(); nfft],
            scratch,
        })
    }

    pub fn nfft(&self) -> usize {
        self.nfft
    }

    fn transform(&mut self, block: &[T]) -> Result<&[Complex<T>]> {
        if block.len() != self.nfft {
            return Err(Error::LengthMismatch {
                expected: self.nfft,
                got: block.len(),
            });
        }
        for (c, &x) in self.buf.iter_mut().zip(block) {
            *c = Complex::new(x, T::zero());
        }
        self.fft
            .process_with_scratch(&mut self.buf, &mut self.scratch);
        Ok(&self.buf)
    }

    /// Writes the one-sided power of `block` into `out` (length nfft/2 + 1).
    pub fn power_into(&mut self, block: &[T], out: &mut Vec<T>) -> Result<()> {
        let n = self.nfft;
        let norm = T::of_usize(n) * T::of_usize(n);
        let bins = self.transform(block)?;
        out.clear();
        out.extend(bins[..=n / 2].iter().enumerate().map(|(k, c)| {
            let p = c.norm_sqr() / norm;
            if k == 0 || k == n / 2 {
                p
            } else {
                p + p
            }
        }));
        Ok(())
    }

    pub fn periodogram(&mut self, block: &[T], fs: T) -> Result<Periodogram<T>> {
        let mut power = Vec::with_capacity(self.nfft / 2 + 1);
        self.power_into(block, &mut power)?;
        Ok(Periodogram {
            power,
            bin_width_hz: fs / T::of_usize(self.nfft),
            nfft: self.nfft,
        })
    }
}

/// Unnormalized forward DFT of a power-of-two block.
pub fn dft_block<T: Real>(block: &[T]) -> Result<Vec<Complex<T>>> {
    let mut engine = SpectrumEngine::new(block.len())?;
    Ok(engine.transform(block)?.to_vec())
}

/// One-sided periodogram of a single `nfft`-sample block.
pub fn periodogram<T: Real>(block: &[T], nfft: usize, fs: T) -> Result<Periodogram<T>> {
    SpectrumEngine::new(nfft)?.periodogram(block, fs)
}

/// Averages rectangular-window periodograms of overlapping segments.
pub fn welch_psd<T: Real>(
    stream: &SampleStream<T>,
    nfft: usize,
    overlap_fraction: T,
) -> Result<PsdEstimate<T>> {
    if !(overlap_fraction >= T::zero() && overlap_fraction < T::one()) {
        return Err(Error::param("overlap_fraction", "must lie in [0, 1)"));
    }
    let mut engine = SpectrumEngine::new(nfft)?;
    let x = stream.samples();
    if x.len() < nfft {
        return Err(Error::InsufficientSamples {
            needed: nfft,
            got: x.len(),
        });
    }
    let hop = ((T::of_usize(nfft) * (T::one() - overlap_fraction)).round())
        .to_usize()
        .unwrap_or(nfft)
        .clamp(1, nfft);
    let segments = 1 + (x.len() - nfft) / hop;
    let mut acc = vec![T::zero(); nfft / 2 + 1];
    let mut power = Vec::with_capacity(nfft / 2 + 1);
    for s in 0..segments {
        engine.power_into(&x[s * hop..s * hop + nfft], &mut power)?;
        acc.iter_mut().zip(&power).for_each(|(a, &p)| *a = *a + p);
    }
    let scale = T::of_usize(segments);
    acc.iter_mut().for_each(|a| *a = *a / scale);
    Ok(PsdEstimate {
        periodogram: Periodogram {
            power: acc,
            bin_width_hz: stream.sample_rate_hz() / T::of_usize(nfft),
            nfft,
        },
        segments,
    })
}

fn target_bin<T: Real>(p: &Periodogram<T>, f_target: T) -> Result<usize> {
    if !(f_target >= T::zero() && f_target <= p.nyquist_hz()) {
        return Err(Error::OutOfRange {
            freq_hz: f_target.f64(),
            nyquist_hz: p.nyquist_hz().f64(),
        });
    }
    Ok((f_target / p.bin_width_hz)
        .round()
        .to_usize()
        .unwrap_or(0)
        .min(p.nfft / 2))
}

/// Largest power within `±tol_bins` of the bin nearest `f_target`.
pub fn peak_power_near<T: Real>(
    p: &Periodogram<T>,
    f_target: T,
    tol_bins: usize,
) -> Result<(T, usize)> {
    let center = target_bin(p, f_target)?;
    let lo = center.saturating_sub(tol_bins);
    let hi = (center + tol_bins).min(p.power.len() - 1);
    let mut best = (p.power[lo], lo);
    for k in lo + 1..=hi {
        if p.power[k] > best.0 {
            best = (p.power[k], k);
        }
    }
    Ok(best)
}

fn median<T: Real>(mut v: Vec<T>) -> T {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / T::of(2.0)
    }
}

/// SNR in dB of the spectral line at `f_target`.
///
/// The signal region is `±signal_halfwidth_bins` around the target bin; the
/// floor is the median of all bins outside the signal and guard regions
/// (the DC bin is excluded too). Line power is the signal-region excess over
/// the floor; noise power is the floor spread over all `nfft/2` non-DC
/// bins, so a tone in white noise reads back its input SNR. Returns `+∞`
/// when the floor is zero and `-∞` when the region shows no excess.
pub fn snr_at_frequency<T: Real>(
    p: &Periodogram<T>,
    f_target: T,
    signal_halfwidth_bins: usize,
    guard_bins: usize,
) -> Result<T> {
    let center = target_bin(p, f_target)?;
    let reach = signal_halfwidth_bins + guard_bins;
    let in_signal = |k: usize| k.abs_diff(center) <= signal_halfwidth_bins;
    let outside: Vec<T> = p
        .power
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != 0 && k.abs_diff(center) > reach)
        .map(|(_, &v)| v)
        .collect();
    if outside.len() < 3 {
        return Err(Error::param(
            "signal_halfwidth_bins",
            "signal and guard regions leave too few floor bins",
        ));
    }
    let floor = median(outside);
    if floor <= T::zero() {
        return Ok(T::infinity());
    }
    let (signal, width) = p
        .power
        .iter()
        .enumerate()
        .filter(|&(k, _)| in_signal(k))
        .fold((T::zero(), 0usize), |(s, w), (_, &v)| (s + v, w + 1));
    let excess = signal - floor * T::of_usize(width);
    if excess <= T::zero() {
        return Ok(T::neg_infinity());
    }
    let noise = floor * T::of_usize(p.nfft / 2);
    Ok(T::of(10.0) * (excess / noise).log10())
}
