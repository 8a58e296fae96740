use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rydberg_core::mimo::{
    exhaustive_detect, gs_detect, gs_detect_symbols, magnitude_observe, nmse, simo_measured_snr,
    DetectOptions, MimoChannel,
};
use rydberg_core::stats::linear_fit;
use rydberg_core::transduction::{psk_decide, psk_point};
use std::f64::consts::FRAC_PI_4;

fn qpsk(m: usize, rng: &mut ChaCha8Rng) -> DVector<Complex64> {
    DVector::from_fn(m, |_, _| psk_point(rng.random_range(0..4), 4, FRAC_PI_4))
}

#[test]
fn gs_exact_recovery_on_random_channels() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for trial in 0..100 {
        let ch = MimoChannel::random(16, 4, 3.0, 1000 + trial).unwrap();
        let x = qpsk(4, &mut rng);
        let y = magnitude_observe(&ch, &x, 0.0, 0).unwrap();
        // 200 iterations leave a few slow channels short of 1e-6
        let opts = DetectOptions {
            max_iter: 1000,
            ..DetectOptions::default()
        };
        let out = gs_detect(&y, &ch, &opts).unwrap();
        assert!(out.converged);
        assert!(out
            .residuals
            .windows(2)
            .all(|w| w[1] <= w[0] * (1.0 + 1e-9) + 1e-12));
        worst = worst.max(nmse(&out.x, &x));
    }
    assert!(worst <= 1e-6, "worst NMSE {worst}");
}

#[test]
fn gs_matches_exhaustive_search_single_user() {
    let constellation: Vec<Complex64> = (0..4).map(|m| psk_point(m, 4, FRAC_PI_4)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let (mut mismatches, mut plain_mismatches) = (0, 0);
    for case in 0..1000 {
        let ch = MimoChannel::random(2, 1, 3.0, 50_000 + case).unwrap();
        let x = qpsk(1, &mut rng);
        let y = magnitude_observe(&ch, &x, 0.0, 0).unwrap();
        let best = exhaustive_detect(&y, &ch, &constellation).unwrap();
        let gs = gs_detect(&y, &ch, &DetectOptions::default()).unwrap();
        if psk_decide(gs.x[0], 4, FRAC_PI_4) != best {
            plain_mismatches += 1;
        }
        let multi =
            gs_detect_symbols(&y, &ch, &DetectOptions::default(), &constellation, 8, case).unwrap();
        if multi.symbols[0] != best {
            mismatches += 1;
        }
    }
    println!("single-start GS disagreed with exhaustive search in {plain_mismatches}/1000 cases");
    assert_eq!(mismatches, 0);
}

#[test]
fn simo_snr_scales_linearly() {
    let ks = [1usize, 2, 4, 8];
    let base = simo_measured_snr(1, 10.0, 10_000, 5).unwrap();
    let y: Vec<f64> = ks
        .iter()
        .map(|&k| simo_measured_snr(k, 10.0, 10_000, 5 + k as u64).unwrap() / base)
        .collect();
    let x: Vec<f64> = ks.iter().map(|&k| k as f64).collect();
    let fit = linear_fit(&x, &y).unwrap();
    assert!((fit.slope - 1.0).abs() <= 0.05, "slope {}", fit.slope);
}
