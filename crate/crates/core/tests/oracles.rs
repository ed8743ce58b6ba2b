use proptest::prelude::*;
use srsense::detect::{seq_update, SequentialState};
use srsense::signal::{gen_awgn, input_snr_db, NoiseSpec, ToneSpec};
use srsense::spectral::{dft_block, periodogram};
use srsense::srfilter::{filter_stream, IntegratorConfig, SrParams};
use srsense::{SampleStream64, SeedPath};

/// O(n²) DFT straight from the definition.
fn naive_dft(x: &[f64]) -> Vec<(f64, f64)> {
    let n = x.len();
    (0..n)
        .map(|k| {
            x.iter().enumerate().fold((0.0, 0.0), |(re, im), (t, &v)| {
                let w = -2.0 * std::f64::consts::PI * (k * t % n) as f64 / n as f64;
                (re + v * w.cos(), im + v * w.sin())
            })
        })
        .collect()
}

fn pow2_len() -> impl Strategy<Value = usize> {
    (3u32..=8).prop_map(|e| 1usize << e)
}

proptest! {
    #[test]
    fn fft_matches_naive_dft(x in pow2_len().prop_flat_map(|n| prop::collection::vec(-10.0f64..10.0, n))) {
        let fast = dft_block(&x).unwrap();
        let slow = naive_dft(&x);
        let scale = slow.iter().map(|(r, i)| r.hypot(*i)).fold(1.0, f64::max);
        for (f, (r, i)) in fast.iter().zip(&slow) {
            prop_assert!((f.re - r).abs() <= 1e-9 * scale);
            prop_assert!((f.im - i).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn parseval_per_block(x in pow2_len().prop_flat_map(|n| prop::collection::vec(-5.0f64..5.0, n))) {
        let n = x.len();
        let p = periodogram(&x, n, n as f64).unwrap();
        let mean_square = x.iter().map(|v| v * v).sum::<f64>() / n as f64;
        prop_assert!((p.total_power() - mean_square).abs() <= 1e-9 * mean_square.max(1e-12));
    }

    #[test]
    fn snr_scales_with_amplitude_and_variance(
        a in 0.01f64..10.0,
        var in 0.001f64..100.0,
        k in 0.1f64..10.0,
    ) {
        let s = SeedPath::root(0);
        let base = input_snr_db(&ToneSpec::new(10.0, a), &NoiseSpec::new(var, s)).unwrap();
        let louder = input_snr_db(&ToneSpec::new(10.0, a * k), &NoiseSpec::new(var, s)).unwrap();
        let noisier = input_snr_db(&ToneSpec::new(10.0, a), &NoiseSpec::new(var * k, s)).unwrap();
        prop_assert!((louder - base - 20.0 * k.log10()).abs() < 1e-9);
        prop_assert!((base - noisier - 10.0 * k.log10()).abs() < 1e-9);
    }

    #[test]
    fn for_snr_inverts_input_snr(a in 0.01f64..10.0, snr in -40.0f64..20.0) {
        let noise = NoiseSpec::for_snr(a, snr, SeedPath::root(0));
        let back = input_snr_db(&ToneSpec::new(10.0, a), &noise).unwrap();
        prop_assert!((back - snr).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn sequential_statistic_never_negative(
        e0 in -1e3f64..1e3,
        energies in prop::collection::vec(
            prop_oneof![-1e6f64..1e6, Just(0.0), Just(-1e300), Just(1e300)],
            1..64,
        ),
    ) {
        let mut s = SequentialState::new(e0, 1.0);
        for e in energies {
            let (next, _) = seq_update(s, e);
            prop_assert!(next.m >= 0.0);
            s = next;
        }
    }
}

#[test]
fn awgn_sample_variance_matches_request() {
    let w = gen_awgn(&NoiseSpec::new(2.0, SeedPath::root(4)), 200_000, 100.0).unwrap();
    let v = w.samples().iter().map(|x| x * x).sum::<f64>() / w.len() as f64;
    assert!((v / 2.0 - 1.0).abs() < 0.02);
}

#[test]
fn euler_converges_to_fine_reference() {
    let p = SrParams::new(1.0, 1.0).unwrap();
    let fs = 100.0;
    let input: Vec<f64> = (0..1000)
        .map(|i| 0.3 * (2.0 * std::f64::consts::PI * 0.5 * i as f64 / fs).sin())
        .collect();
    let stream = SampleStream64::new(input, fs).unwrap();
    let run = |h: f64, sub: usize| {
        let cfg = IntegratorConfig {
            step_h: h,
            substeps_per_sample: sub,
            initial_x: 0.2,
            discard_transient: 0,
            ..IntegratorConfig::for_params(&p)
        };
        *filter_stream(&stream, &p, &cfg)
            .unwrap()
            .samples()
            .last()
            .unwrap()
    };
    // 10 time units either way
    let coarse = run(1e-3, 10);
    let fine = run(1e-5, 1000);
    assert!((coarse - fine).abs() <= 1e-4, "{coarse} vs {fine}");
}
