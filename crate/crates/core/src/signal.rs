//! Observation synthesis under H0/H1 and mixer + low-pass downconversion.

use std::io::Write;

use rand_distr::{Distribution, StandardNormal};

use crate::seed::SeedPath;
use crate::{Error, Real, Result};

/// Uniformly sampled real waveform.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleStream<T> {
    samples: Vec<T>,
    sample_rate_hz: T,
}

impl<T: Real> SampleStream<T> {
    pub fn new(samples: Vec<T>, sample_rate_hz: T) -> Result<Self> {
        if !(sample_rate_hz > T::zero()) || !sample_rate_hz.is_finite() {
            return Err(Error::param(
                "sample_rate_hz",
                "must be positive and finite",
            ));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<T> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> T {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Samples from `start` to the end, at the same rate.
    pub fn tail(&self, start: usize) -> Self {
        Self {
            samples: self.samples[start.min(self.len())..].to_vec(),
            sample_rate_hz: self.sample_rate_hz,
        }
    }

    /// Debug dump as `index,value` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "index,value")?;
        for (i, v) in self.samples.iter().enumerate() {
            writeln!(w, "{i},{v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToneSpec<T> {
    pub freq_hz: T,
    pub amplitude: T,
    pub phase_rad: T,
}

impl<T: Real> ToneSpec<T> {
    pub fn new(freq_hz: T, amplitude: T) -> Self {
        Self {
            freq_hz,
            amplitude,
            phase_rad: T::zero(),
        }
    }

    pub fn with_phase(self, phase_rad: T) -> Self {
        Self { phase_rad, ..self }
    }
}

/// White Gaussian noise with a per-sample variance and a seed path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec<T> {
    pub variance: T,
    pub seed: SeedPath,
}

impl<T: Real> NoiseSpec<T> {
    pub fn new(variance: T, seed: SeedPath) -> Self {
        Self { variance, seed }
    }

    /// Noise variance that puts `amplitude` at `snr_db` under [`input_snr_db`].
    pub fn for_snr(amplitude: T, snr_db: T, seed: SeedPath) -> Self {
        let signal_power = amplitude * amplitude / T::of(2.0);
        Self::new(signal_power / T::of(10.0).powf(snr_db / T::of(10.0)), seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowpassSpec<T> {
    pub cutoff_hz: T,
    pub num_taps: usize,
    pub decimation: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Hypothesis {
    H0,
    H1,
}

fn check_count(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::param("n", "sample count must be at least 1"));
    }
    Ok(())
}

fn check_rate<T: Real>(fs: T) -> Result<()> {
    if !(fs > T::zero()) || !fs.is_finite() {
        return Err(Error::param(
            "sample_rate_hz",
            "must be positive and finite",
        ));
    }
    Ok(())
}

/// Phase argument of `cos`/`sin` at sample `k`, reduced in f64 so that long
/// streams at high rates keep full precision even for `f32` outputs.
fn cycle_phase(freq_hz: f64, k: usize, fs: f64) -> f64 {
    let cycles = freq_hz * k as f64 / fs;
    std::f64::consts::TAU * (cycles - cycles.floor())
}

/// `samples[k] = A sin(2π f k / fs + φ)`.
pub fn gen_sinusoid<T: Real>(tone: &ToneSpec<T>, n: usize, fs: T) -> Result<SampleStream<T>> {
    check_count(n)?;
    check_rate(fs)?;
    if !(tone.freq_hz > T::zero()) || tone.freq_hz >= fs / T::of(2.0) {
        return Err(Error::Aliasing {
            freq_hz: tone.freq_hz.f64(),
            sample_rate_hz: fs.f64(),
        });
    }
    if tone.amplitude < T::zero() {
        return Err(Error::param("amplitude", "must be nonnegative"));
    }
    let (f, fs64, a, phi) = (
        tone.freq_hz.f64(),
        fs.f64(),
        tone.amplitude.f64(),
        tone.phase_rad.f64(),
    );
    let samples = (0..n)
        .map(|k| T::of(a * (cycle_phase(f, k, fs64) + phi).sin()))
        .collect();
    SampleStream::new(samples, fs)
}

/// I.i.d. zero-mean Gaussian samples with the requested variance.
pub fn gen_awgn<T: Real>(noise: &NoiseSpec<T>, n: usize, fs: T) -> Result<SampleStream<T>> {
    check_count(n)?;
    check_rate(fs)?;
    if noise.variance < T::zero() {
        return Err(Error::param("variance", "must be nonnegative"));
    }
    let sd = noise.variance.f64().sqrt();
    let mut rng = noise.seed.rng();
    let samples = (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            T::of(sd * z)
        })
        .collect();
    SampleStream::new(samples, fs)
}

/// H0: noise only. H1: tone plus the same noise.
pub fn synth_observation<T: Real>(
    hyp: Hypothesis,
    tone: &ToneSpec<T>,
    noise: &NoiseSpec<T>,
    n: usize,
    fs: T,
) -> Result<SampleStream<T>> {
    let w = gen_awgn(noise, n, fs)?;
    match hyp {
        Hypothesis::H0 => Ok(w),
        Hypothesis::H1 => {
            let s = gen_sinusoid(tone, n, fs)?;
            let samples = s
                .samples()
                .iter()
                .zip(w.samples())
                .map(|(&a, &b)| a + b)
                .collect();
            SampleStream::new(samples, fs)
        }
    }
}

/// Tone-in-AWGN SNR in dB: `10 log10((A²/2) / σ²)`.
pub fn input_snr_db<T: Real>(tone: &ToneSpec<T>, noise: &NoiseSpec<T>) -> Result<T> {
    if !(noise.variance > T::zero()) {
        return Err(Error::param(
            "variance",
            "SNR undefined for zero noise variance",
        ));
    }
    let signal_power = tone.amplitude * tone.amplitude / T::of(2.0);
    Ok(T::of(10.0) * (signal_power / noise.variance).log10())
}

/// Linear-phase Hamming-windowed sinc, normalized to unit DC gain.
pub fn design_lowpass<T: Real>(spec: &LowpassSpec<T>, fs: T) -> Result<Vec<T>> {
    check_rate(fs)?;
    if spec.num_taps == 0 || spec.num_taps.is_multiple_of(2) {
        return Err(Error::param("num_taps", "must be an odd positive integer"));
    }
    if spec.decimation == 0 {
        return Err(Error::param("decimation", "must be positive"));
    }
    if !(spec.cutoff_hz > T::zero()) || spec.cutoff_hz >= fs / T::of(2.0) {
        return Err(Error::param("cutoff_hz", "must lie in (0, fs/2)"));
    }
    let n = spec.num_taps;
    let mid = (n / 2) as f64;
    // normalized cutoff in cycles/sample
    let fc = spec.cutoff_hz.f64() / fs.f64();
    let mut h: Vec<f64> = (0..n)
        .map(|i| {
            let m = i as f64 - mid;
            let sinc = if m == 0.0 {
                2.0 * fc
            } else {
                (std::f64::consts::TAU * fc * m).sin() / (std::f64::consts::PI * m)
            };
            let w = if n == 1 {
                1.0
            } else {
                0.54 - 0.46 * (std::f64::consts::TAU * i as f64 / (n - 1) as f64).cos()
            };
            sinc * w
        })
        .collect();
    let dc: f64 = h.iter().sum();
    h.iter_mut().for_each(|c| *c /= dc);
    Ok(h.into_iter().map(T::of).collect())
}

/// Magnitude of the FIR frequency response at `freq_hz`.
pub fn fir_response<T: Real>(coeffs: &[T], freq_hz: T, fs: T) -> T {
    let w = std::f64::consts::TAU * freq_hz.f64() / fs.f64();
    let (re, im) = coeffs
        .iter()
        .enumerate()
        .fold((0.0, 0.0), |(re, im), (n, &c)| {
            let c = c.f64();
            (re + c * (w * n as f64).cos(), im - c * (w * n as f64).sin())
        });
    T::of((re * re + im * im).sqrt())
}

/// Full-rate FIR filtering, keeping only outputs with complete filter support.
pub fn fir_filter<T: Real>(coeffs: &[T], samples: &[T]) -> Vec<T> {
    if samples.len() < coeffs.len() {
        return Vec::new();
    }
    (coeffs.len() - 1..samples.len())
        .map(|p| fir_at(coeffs, samples, p))
        .collect()
}

#[inline]
fn fir_at<T: Real>(coeffs: &[T], samples: &[T], p: usize) -> T {
    coeffs
        .iter()
        .enumerate()
        .fold(T::zero(), |acc, (t, &c)| acc + c * samples[p - t])
}

/// Real mixer (`2 cos(2π f_mix t)`, so the difference tone keeps its input
/// amplitude) followed by a windowed-sinc low-pass and decimation.
///
/// Output samples exist only where the filter has full support, so the first
/// `num_taps - 1` input samples are consumed as warm-up.
pub fn mix_and_decimate<T: Real>(
    stream: &SampleStream<T>,
    mixer_freq_hz: T,
    lpf: &LowpassSpec<T>,
) -> Result<SampleStream<T>> {
    let fs = stream.sample_rate_hz();
    let coeffs = design_lowpass(lpf, fs)?;
    let fs_out = fs / T::of_usize(lpf.decimation);
    if lpf.cutoff_hz >= fs_out / T::of(2.0) {
        return Err(Error::Aliasing {
            freq_hz: lpf.cutoff_hz.f64(),
            sample_rate_hz: fs_out.f64(),
        });
    }
    if mixer_freq_hz < T::zero() || mixer_freq_hz >= fs / T::of(2.0) {
        return Err(Error::OutOfRange {
            freq_hz: mixer_freq_hz.f64(),
            nyquist_hz: fs.f64() / 2.0,
        });
    }
    let needed = 2 * lpf.num_taps;
    if stream.len() < needed {
        return Err(Error::InsufficientSamples {
            needed,
            got: stream.len(),
        });
    }
    let (fm, fs64) = (mixer_freq_hz.f64(), fs.f64());
    let mixed: Vec<T> = stream
        .samples()
        .iter()
        .enumerate()
        .map(|(k, &x)| x * T::of(2.0 * cycle_phase(fm, k, fs64).cos()))
        .collect();
    let first = lpf.num_taps - 1;
    let out = (first..mixed.len())
        .step_by(lpf.decimation)
        .map(|p| fir_at(&coeffs, &mixed, p))
        .collect();
    SampleStream::new(out, fs_out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn peak_amplitude(x: &[f64]) -> f64 {
        x.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    #[test]
    fn sinusoid_closed_form() {
        let tone = ToneSpec::new(10.0, 0.3);
        let s = gen_sinusoid(&tone, 5, 100.0).unwrap();
        assert_eq!(s.samples()[0], 0.0);
        assert!((s.samples()[2] - 0.3 * (0.4 * std::f64::consts::PI).sin()).abs() < 1e-12);
        assert!((s.samples()[2] - 0.2853).abs() < 1e-4);
        let z = gen_sinusoid(&ToneSpec::new(10.0, 0.0), 64, 100.0).unwrap();
        assert!(z.samples().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sinusoid_rejects_aliasing() {
        let err = gen_sinusoid(&ToneSpec::new(50.0, 1.0), 8, 100.0).unwrap_err();
        assert!(matches!(err, Error::Aliasing { .. }));
        assert!(gen_sinusoid(&ToneSpec::new(10.0, 1.0), 0, 100.0).is_err());
    }

    #[test]
    fn awgn_variance_and_determinism() {
        let spec = NoiseSpec::new(1.0, SeedPath::new(11, 2));
        let w = gen_awgn(&spec, 100_000, 100.0).unwrap();
        let var = w.samples().iter().map(|v| v * v).sum::<f64>() / w.len() as f64;
        assert!((var - 1.0).abs() < 0.03, "var = {var}");
        assert_eq!(w, gen_awgn(&spec, 100_000, 100.0).unwrap());
        let zero = gen_awgn(&NoiseSpec::new(0.0, SeedPath::root(1)), 32, 100.0).unwrap();
        assert!(zero.samples().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn observation_hypotheses() {
        let tone = ToneSpec::new(10.0f64, 0.3);
        let quiet = NoiseSpec::new(0.0, SeedPath::root(3));
        let h0 = synth_observation(Hypothesis::H0, &tone, &quiet, 64, 100.0).unwrap();
        assert!(h0.samples().iter().all(|&v| v == 0.0));
        let h1 = synth_observation(Hypothesis::H1, &tone, &quiet, 64, 100.0).unwrap();
        assert_eq!(h1, gen_sinusoid(&tone, 64, 100.0).unwrap());

        let noisy = NoiseSpec::for_snr(0.3, -20.0, SeedPath::root(3));
        assert!((input_snr_db(&tone, &noisy).unwrap() + 20.0).abs() < 1e-9);
        let y = synth_observation(Hypothesis::H1, &tone, &noisy, 256, 100.0).unwrap();
        let s = gen_sinusoid(&tone, 256, 100.0).unwrap();
        let w = gen_awgn(&noisy, 256, 100.0).unwrap();
        for ((y, s), w) in y.samples().iter().zip(s.samples()).zip(w.samples()) {
            assert!((y - s - w).abs() < 1e-12);
        }
    }

    #[test]
    fn snr_definition_values() {
        let seed = SeedPath::root(0);
        let snr = |a: f64, v: f64| input_snr_db(&ToneSpec::new(10.0, a), &NoiseSpec::new(v, seed));
        assert!(snr(2f64.sqrt(), 1.0).unwrap().abs() < 1e-12);
        assert!(snr(0.3, 0.045).unwrap().abs() < 1e-12);
        assert!((snr(0.3, 4.5).unwrap() + 20.0).abs() < 1e-12);
        assert!(snr(0.3, 0.0).is_err());
    }

    #[test]
    fn lowpass_dc_gain_and_parity() {
        for (cut, taps) in [(10.0, 31), (25.0, 63), (1.0, 201)] {
            let spec = LowpassSpec {
                cutoff_hz: cut,
                num_taps: taps,
                decimation: 1,
            };
            let h = design_lowpass(&spec, 100.0).unwrap();
            assert!((h.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            for i in 0..taps / 2 {
                assert!((h[i] - h[taps - 1 - i]).abs() < 1e-15);
            }
        }
        let even = LowpassSpec {
            cutoff_hz: 10.0,
            num_taps: 32,
            decimation: 1,
        };
        assert!(design_lowpass(&even, 100.0).is_err());
    }

    #[test]
    fn lowpass_stopband_and_passband() {
        let fs: f64 = 1000.0;
        let spec = LowpassSpec {
            cutoff_hz: fs / 4.0,
            num_taps: 63,
            decimation: 1,
        };
        let h = design_lowpass(&spec, fs).unwrap();
        let stop = gen_sinusoid(&ToneSpec::new(fs / 2.0 - 1.0, 1.0), 4000, fs).unwrap();
        let y = fir_filter(&h, stop.samples());
        assert!(
            peak_amplitude(&y) < 0.01,
            "stopband residual {}",
            peak_amplitude(&y)
        );

        let pass = gen_sinusoid(&ToneSpec::new(fs / 40.0, 1.0), 4000, fs).unwrap();
        let y = fir_filter(&h, pass.samples());
        assert!((peak_amplitude(&y) - 1.0).abs() < 0.02);
    }

    #[test]
    fn mixer_lands_tone_at_difference_frequency() {
        let fs = 10_000.0;
        let lpf = LowpassSpec {
            cutoff_hz: 40.0,
            num_taps: 2001,
            decimation: 100,
        };
        let tone = ToneSpec::new(1234.0, 1.0);
        let x = gen_sinusoid(&tone, 100_000, fs).unwrap();
        let y = mix_and_decimate(&x, 1224.0, &lpf).unwrap();
        assert_eq!(y.sample_rate_hz(), 100.0);
        // 10 Hz at 100 Hz, unit amplitude
        let tail = &y.samples()[10..];
        let amp = (2.0 * tail.iter().map(|v| v * v).sum::<f64>() / tail.len() as f64).sqrt();
        assert!((amp - 1.0).abs() < 0.02, "amp {amp}");

        // equal frequencies: cosine input mixes to DC
        let c = gen_sinusoid(&tone.with_phase(std::f64::consts::FRAC_PI_2), 100_000, fs).unwrap();
        let dc = mix_and_decimate(&c, 1234.0, &lpf).unwrap();
        let mean = dc.samples().iter().sum::<f64>() / dc.len() as f64;
        assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn mixer_rejects_bad_configs() {
        let x = gen_sinusoid(&ToneSpec::new(100.0, 1.0), 1000, 1000.0).unwrap();
        let too_wide = LowpassSpec {
            cutoff_hz: 60.0,
            num_taps: 31,
            decimation: 10,
        };
        assert!(matches!(
            mix_and_decimate(&x, 90.0, &too_wide),
            Err(Error::Aliasing { .. })
        ));
        let long = LowpassSpec {
            cutoff_hz: 10.0,
            num_taps: 801,
            decimation: 10,
        };
        assert!(matches!(
            mix_and_decimate(&x, 90.0, &long),
            Err(Error::InsufficientSamples { .. })
        ));
    }
}
