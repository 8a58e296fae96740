use std::f64::consts::PI;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rydberg_core::eit::{EitParams, NoiseSpec};
use rydberg_core::error::Error;
use rydberg_core::experiments::config::Modulation;
use rydberg_core::experiments::link::{psk_envelope, random_symbols};
use rydberg_core::experiments::{run_link, ExperimentConfig};
use rydberg_core::registry::PhysicalConstants;
use rydberg_core::transduction::*;

const MHZ: f64 = 2.0 * PI * 1e6;
const MU: f64 = 2.04e-26;

fn coupling() -> FieldCoupling {
    FieldCoupling::new(MU, &PhysicalConstants::default())
}

fn receiver() -> Receiver {
    Receiver::default_operating(&EitParams::default()).unwrap()
}

fn exact() -> ReceiveOptions {
    ReceiveOptions::default()
}

#[test]
fn rabi_formula_spot_value() {
    // 2.04e-26 C·m × 1 V/m / ħ, with ħ = 1.054571817e-34 J·s
    let expected = 2.04e-26 / 1.054_571_817e-34 / (2.0 * PI);
    let omega = rabi_from_field(MU, Complex64::new(1.0, 0.0), 0.0);
    assert!((omega / (2.0 * PI) / expected - 1.0).abs() < 1e-12);
    assert!(
        (omega / (2.0 * PI) / 30.79e6 - 1.0).abs() < 1e-4,
        "{}",
        omega / (2.0 * PI)
    );
    assert_eq!(rabi_from_field(MU, Complex64::new(0.0, 0.0), -3.0), 3.0);
    let twice = rabi_from_field(MU, Complex64::new(2.0, 0.0), 0.0);
    assert!((twice / omega - 2.0).abs() < 1e-12);
}

#[test]
fn linearization_error_is_second_order() {
    let c = coupling();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let e_max = 1e-3;
    let samples: Vec<Complex64> = (0..4000)
        .map(|_| {
            Complex64::from_polar(
                rng.random_range(0.0..e_max),
                rng.random_range(0.0..2.0 * PI),
            )
        })
        .collect();
    let env = FieldEnvelope::new(3.2e9, 16e3, samples.clone()).unwrap();
    let reference = ReferenceField::new(20.0 * e_max, 2e3, 0.3).unwrap();
    let full = heterodyne_superpose(&env, &reference, &c);
    let lin = heterodyne_linearized(&env, &reference, &c);
    for ((a, b), e) in full.iter().zip(&lin).zip(&samples) {
        let bound = c.rabi_per_field() * e.norm_sqr() / (2.0 * reference.amplitude);
        assert!((a - b).abs() <= bound * (1.0 + 1e-9) + 1e-9);
        assert!((a - b).abs() / a < 0.01);
    }
}

#[test]
fn quasi_static_matches_time_integration_for_slow_signals() {
    let rx = receiver();
    let fs = 400e3;
    let n = 400;
    let w0 = DEFAULT_OPERATING_RABI;
    let rabi: Vec<f64> = (0..n)
        .map(|k| w0 * (1.0 + 0.05 * (2.0 * PI * 1e3 * k as f64 / fs).sin()))
        .collect();
    let fast = quasi_static_receive(&rx, &rabi, &NoiseSpec::none(), 0, &exact()).unwrap();
    let slow = evolve_receive(&rx, &rabi, fs).unwrap();
    let mean = fast.iter().sum::<f64>() / n as f64;
    let swing = (fast.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    let rms = (fast
        .iter()
        .zip(&slow)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / n as f64)
        .sqrt();
    assert!(rms <= 0.01 * swing, "rms {rms:e} vs signal {swing:e}");
}

#[test]
fn monotone_ramp_gives_monotone_output() {
    let rx = receiver();
    let w0 = DEFAULT_OPERATING_RABI;
    let ramp: Vec<f64> = (0..200)
        .map(|k| w0 * (0.9 + 0.2 * k as f64 / 199.0))
        .collect();
    let out = quasi_static_receive(&rx, &ramp, &NoiseSpec::none(), 0, &exact()).unwrap();
    let rising = out[1] > out[0];
    assert!(out.windows(2).all(|w| (w[1] > w[0]) == rising));
}

#[test]
fn noiseless_am_and_fm() {
    let rx = receiver();
    let c = coupling();
    let sps = 4;
    let base = c.field_for_rabi(DEFAULT_OPERATING_RABI);
    let symbols = random_symbols(500, 2, 3);
    let field = [0.8 * base, 1.2 * base];
    let rabi: Vec<f64> = symbols
        .iter()
        .flat_map(|&s| std::iter::repeat_n(c.rabi(Complex64::new(field[s], 0.0), 0.0), sps))
        .collect();
    let power = quasi_static_receive(&rx, &rabi, &NoiseSpec::none(), 0, &exact()).unwrap();
    let levels = calibrate_am_levels(&power, sps, &symbols[..20], 2).unwrap();
    assert_eq!(demod_am(&power, sps, &levels).unwrap(), symbols);
    assert!(matches!(
        demod_am(&power, sps, &[0.3, 0.3]),
        Err(Error::Calibration(_))
    ));

    let detunings = [0.0, 5.0 * MHZ];
    let map = FmMap::build(&rx, &c, base, &detunings).unwrap();
    let rabi: Vec<f64> = symbols
        .iter()
        .flat_map(|&s| std::iter::repeat_n(c.rabi(Complex64::new(base, 0.0), detunings[s]), sps))
        .collect();
    let power = quasi_static_receive(&rx, &rabi, &NoiseSpec::none(), 0, &exact()).unwrap();
    let out = demod_fm(&power, sps, &map, 1e-9).unwrap();
    assert_eq!(out.symbols, symbols);
    assert!(out.ambiguous.is_empty());
    let mirrored = FmMap::build(&rx, &c, base, &[-2.0 * MHZ, 2.0 * MHZ]).unwrap();
    let flagged = demod_fm(&power, sps, &mirrored, 1e-9).unwrap();
    assert_eq!(flagged.ambiguous, vec![(0, 1)]);
}

fn pm_setup() -> (PmConfig, f64) {
    let c = coupling();
    let a_r = c.field_for_rabi(DEFAULT_OPERATING_RABI);
    let reference = ReferenceField::new(a_r, 2e3, 0.0).unwrap();
    let cfg = PmConfig {
        reference,
        sample_rate_hz: 16e3,
        samples_per_symbol: 8,
        order: 4,
        constellation_offset: PI / 4.0,
    };
    (cfg, a_r / 20.0)
}

#[test]
fn noiseless_qpsk_through_the_full_chain() {
    let start = Instant::now();
    let (cfg, a) = pm_setup();
    let symbols = random_symbols(1000, 4, 9);
    let env = psk_envelope(
        &symbols,
        Modulation::Qpsk,
        a,
        cfg.samples_per_symbol,
        3.213e9,
        cfg.sample_rate_hz,
    )
    .unwrap();
    let rabi = heterodyne_superpose(&env, &cfg.reference, &coupling());
    let power = quasi_static_receive(&receiver(), &rabi, &NoiseSpec::none(), 0, &exact()).unwrap();
    let out = demod_pm(&power, &cfg, &symbols[..16]).unwrap();
    assert_eq!(out.symbols, symbols);
    assert!(start.elapsed().as_secs_f64() < 120.0);
}

#[test]
fn global_phase_shifts_recovered_phases() {
    let (cfg, a) = pm_setup();
    let symbols = random_symbols(64, 4, 10);
    let phi = 0.4;
    let rx = receiver();
    let c = coupling();
    let phases = |rot: f64| {
        let env = psk_envelope(
            &symbols,
            Modulation::Qpsk,
            a,
            cfg.samples_per_symbol,
            3.213e9,
            cfg.sample_rate_hz,
        )
        .unwrap();
        let rotated: Vec<Complex64> = env
            .samples()
            .iter()
            .map(|e| e * Complex64::from_polar(1.0, rot))
            .collect();
        let env = FieldEnvelope::new(env.carrier_hz(), env.sample_rate_hz(), rotated).unwrap();
        let power = quasi_static_receive(
            &rx,
            &heterodyne_superpose(&env, &cfg.reference, &c),
            &NoiseSpec::none(),
            0,
            &exact(),
        )
        .unwrap();
        demod_pm(&power, &cfg, &[]).unwrap().phases
    };
    let (p0, p1) = (phases(0.0), phases(phi));
    for (x, y) in p0.iter().zip(&p1) {
        let d = Complex64::from_polar(1.0, y - x).arg();
        assert!((d - phi).abs() < 0.02, "shift {d}");
    }
}

#[test]
fn qpsk_ser_follows_theory_at_10db() {
    let mut cfg = ExperimentConfig::default();
    cfg.bands.truncate(1);
    cfg.link.es_n0_db = vec![10.0];
    cfg.link.symbols = 50_000;
    let reg = cfg.registry().unwrap();
    let ser = run_link(&cfg, &reg, 21).unwrap()[0].ser;
    let lo = qpsk_ser(10f64.powf(1.05));
    let hi = qpsk_ser(10f64.powf(0.95));
    assert!(
        ser >= lo && ser <= hi,
        "SER {ser:e} outside [{lo:e}, {hi:e}]"
    );
}

#[test]
fn pm_rejects_zero_offset() {
    let (mut cfg, _) = pm_setup();
    cfg.reference.offset_hz = 0.0;
    assert!(demod_pm(&[0.0; 64], &cfg, &[]).is_err());
}

fn fdm_bits(symbols: usize, k: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..symbols)
        .map(|s| {
            (0..k)
                .map(|_| {
                    if s < 4 || rng.random_bool(0.5) {
                        1.0
                    } else {
                        -1.0
                    }
                })
                .collect()
        })
        .collect()
}

#[test]
fn fdm_with_reference_is_accurate_and_without_reference_leaks() {
    let c = coupling();
    let rx = receiver();
    let grid = FdmGrid::uniform(4, 2e3, 0.5e-3);
    let fs = 64e3;
    let bits = fdm_bits(400, 4, 12);
    let a_r = c.field_for_rabi(DEFAULT_OPERATING_RABI);
    let amplitude = a_r / (20.0 * 4.0);
    let env = fdm_modulate(&bits, amplitude, &grid, 3.213e9, fs).unwrap();
    let chain = FdmChain {
        receiver: &rx,
        coupling: c,
        noise: NoiseSpec::new(1e-3 * amplitude / fs.sqrt(), fs / 2.0),
        seed: 4,
        mode: ReceiveMode::Exact,
        pilot_symbols: 4,
    };
    let reference = ReferenceField::new(a_r, 0.0, 0.0).unwrap();
    let out = fdm_demod(&env, Some(&reference), &grid, &chain).unwrap();
    let total = bits.len() * 4;
    let correct = out
        .symbols
        .iter()
        .flatten()
        .zip(bits.iter().flatten())
        .filter(|(a, b)| a == b)
        .count();
    assert!(correct as f64 / total as f64 >= 0.99, "{correct}/{total}");

    // magnitude-only reception of a signal strong enough to bias the receiver
    let strong = fdm_modulate(&bits, a_r / 2.0, &grid, 3.213e9, fs).unwrap();
    let bare = fdm_demod(&strong, None, &grid, &chain).unwrap();
    let off: f64 = (0..4)
        .flat_map(|i| (0..4).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| bare.crosstalk[(i, j)])
        .sum();
    assert!(off > 0.0);

    let single = FdmGrid::uniform(1, 2e3, 0.5e-3);
    let one = fdm_modulate(&fdm_bits(40, 1, 1), amplitude, &single, 3.213e9, fs).unwrap();
    let out = fdm_demod(&one, Some(&reference), &single, &chain).unwrap();
    assert_eq!(out.crosstalk.shape(), (1, 1));
    assert!((out.crosstalk[(0, 0)] - 1.0).abs() < 1e-12);
}
