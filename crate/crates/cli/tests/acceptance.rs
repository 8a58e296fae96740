//! One line per acceptance criterion. Exits nonzero if any check fails.

use std::f64::consts::{FRAC_PI_4, PI};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::Instant;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rydberg_core::eit::{
    peak_splitting, rabi_readout, response_bandwidth, transmission_spectrum, EitParams,
    ModulationSweep, NoiseSpec, ProbeSweep,
};
use rydberg_core::experiments::config::Modulation;
use rydberg_core::experiments::link::{psk_envelope, random_symbols};
use rydberg_core::experiments::{msac_gaps, run_link, run_msac, Experiment, ExperimentConfig};
use rydberg_core::mimo::{
    exhaustive_detect, gs_detect, gs_detect_symbols, magnitude_observe, nmse, simo_measured_snr,
    DetectOptions, MimoChannel,
};
use rydberg_core::quantum::{
    evolve, liouvillian, steady_state, Coupling, Decay, DensityMatrix, LevelSystem,
};
use rydberg_core::sensitivity::{
    advantage_db, sql_sensitivity, thermal_sensitivity, AtomSensorParams, ClassicAntennaParams,
};
use rydberg_core::stats::linear_fit;
use rydberg_core::transduction::*;
use rydberg_core::{PhysicalConstants, StateRegistry};

const MHZ: f64 = 2.0 * PI * 1e6;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(start: Instant, limit_s: f64, detail: String) -> Check {
    let t = start.elapsed().as_secs_f64();
    ensure(
        t < limit_s,
        format!("{detail}, {t:.2} s (limit {limit_s} s)"),
    )
}

fn random_system(rng: &mut ChaCha8Rng) -> LevelSystem {
    let n = rng.random_range(2..=5);
    let mut couplings = Vec::new();
    let mut decays = Vec::new();
    for k in 1..n {
        let parent = rng.random_range(0..k);
        couplings.push(Coupling {
            lower: parent,
            upper: k,
            rabi: Complex64::from_polar(
                rng.random_range(0.05..10.0) * MHZ,
                rng.random_range(0.0..2.0 * PI),
            ),
            detuning: rng.random_range(-5.0..5.0) * MHZ,
        });
        decays.push(Decay {
            from: k,
            to: parent,
            rate: rng.random_range(0.01..6.0) * MHZ,
        });
    }
    LevelSystem::new(n, couplings, decays).unwrap()
}

fn steady_vs_evolve() -> Check {
    let start = Instant::now();
    let sys = EitParams::default()
        .system(0.0, &[(1.0 * MHZ, 0.0)])
        .map_err(|e| e.to_string())?;
    let ss = steady_state(&sys).map_err(|e| e.to_string())?;
    let t = 50.0 / sys.min_decay_rate().unwrap();
    let rho =
        evolve(&sys, &DensityMatrix::ground(4), t, sys.stable_step()).map_err(|e| e.to_string())?;
    let diff = ss.max_abs_diff(&rho);
    if diff > 1e-8 {
        return Err(format!("max deviation {diff:e}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..1000 {
        let sys = random_system(&mut rng);
        let rho = steady_state(&sys).map_err(|e| format!("case {case}: {e}"))?;
        rho.check().map_err(|e| format!("case {case}: {e}"))?;
        let residual = liouvillian(&sys).unwrap() * rho.to_vec();
        if residual.iter().any(|z| z.norm() > 1e-9 * sys.max_rate()) {
            return Err(format!("case {case}: steady state residual too large"));
        }
    }
    within(
        start,
        30.0,
        format!("max deviation {diff:.1e}, 1000 random systems valid"),
    )
}

fn two_level_closed_form() -> Check {
    let start = Instant::now();
    let gamma = 6.07 * MHZ;
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        for j in 0..10 {
            let omega = (0.1 + 2.0 * i as f64) * MHZ;
            let delta = (-20.0 + 4.4 * j as f64) * MHZ;
            let sys =
                LevelSystem::ladder(&[omega], &[delta], &[gamma]).map_err(|e| e.to_string())?;
            let rho = steady_state(&sys).map_err(|e| e.to_string())?;
            let exact =
                (omega * omega / 4.0) / (delta * delta + gamma * gamma / 4.0 + omega * omega / 2.0);
            worst = worst.max((rho.population(1) - exact).abs());
        }
    }
    if worst > 1e-10 {
        return Err(format!("worst deviation {worst:e}"));
    }
    within(
        start,
        1.0,
        format!("worst deviation {worst:.1e} on 100 points"),
    )
}

fn splitting_linearity() -> Check {
    let start = Instant::now();
    let p = EitParams::default();
    let truth: Vec<f64> = (0..6).map(|k| (5.0 + 5.0 * k as f64) * MHZ).collect();
    let mut readout = Vec::new();
    for &rf in &truth {
        let sys = p.system(0.0, &[(rf, 0.0)]).map_err(|e| e.to_string())?;
        let sweep = ProbeSweep::linspace(sys, -25.0 * MHZ, 25.0 * MHZ, 2001, p.od)
            .map_err(|e| e.to_string())?;
        let trace = transmission_spectrum(&sweep).map_err(|e| e.to_string())?;
        readout.push(rabi_readout(
            peak_splitting(&trace).map_err(|e| e.to_string())?,
            1.0,
        ));
    }
    let fit = linear_fit(&truth, &readout).map_err(|e| e.to_string())?;
    let detail = format!(
        "slope {:.4}, intercept {:.3} MHz",
        fit.slope,
        fit.intercept / MHZ
    );
    if (fit.slope - 1.0).abs() > 0.05 || fit.intercept.abs() > 0.5 * MHZ {
        return Err(detail);
    }
    within(start, 60.0, detail)
}

fn rabi_spot_value() -> Check {
    let expected = 2.04e-26 / 1.054_571_817e-34 / (2.0 * PI);
    let got = rabi_from_field(2.04e-26, Complex64::new(1.0, 0.0), 0.0) / (2.0 * PI);
    ensure(
        (got / 30.79e6 - 1.0).abs() <= 1e-4 && (got / expected - 1.0).abs() < 1e-12,
        format!("Omega/2pi = {:.4} MHz", got / 1e6),
    )
}

fn sensitivity_values() -> Check {
    let c = PhysicalConstants::default();
    let reg = StateRegistry::with_defaults();
    let t = reg.lookup("60D5/2", "61P3/2").map_err(|e| e.to_string())?;
    let sensor = AtomSensorParams::new(5e5, 225e-6, t).map_err(|e| e.to_string())?;
    let sql = sql_sensitivity(&sensor, &c);
    let hw = thermal_sensitivity(&ClassicAntennaParams::half_wave(3.213e9), &c)
        .map_err(|e| e.to_string())?;
    let cfg = ExperimentConfig::default();
    let rows =
        rydberg_core::experiments::run_sensitivity_figure(&cfg, &reg).map_err(|e| e.to_string())?;
    let margin = rows
        .iter()
        .map(|r| advantage_db(r.sql_vpm_rthz, r.halfwave_vpm_rthz).unwrap_or(f64::NEG_INFINITY))
        .fold(f64::INFINITY, f64::min);
    ensure(
        (sql / 4.874e-10 - 1.0).abs() <= 1e-3
            && (hw / 3.63e-8 - 1.0).abs() <= 5e-3
            && margin >= 30.0,
        format!("SQL {sql:.4e}, half-wave {hw:.4e} V/m/rtHz, smallest margin {margin:.1} dB"),
    )
}

fn pm_chain() -> Check {
    let start = Instant::now();
    let c = FieldCoupling::new(2.04e-26, &PhysicalConstants::default());
    let rx = Receiver::default_operating(&EitParams::default()).map_err(|e| e.to_string())?;
    let a_r = c.field_for_rabi(DEFAULT_OPERATING_RABI);
    let cfg = PmConfig {
        reference: ReferenceField::new(a_r, 2e3, 0.0).map_err(|e| e.to_string())?,
        sample_rate_hz: 16e3,
        samples_per_symbol: 8,
        order: 4,
        constellation_offset: FRAC_PI_4,
    };
    let symbols = random_symbols(1000, 4, 9);
    let env = psk_envelope(&symbols, Modulation::Qpsk, a_r / 20.0, 8, 3.213e9, 16e3)
        .map_err(|e| e.to_string())?;
    let rabi = heterodyne_superpose(&env, &cfg.reference, &c);
    let power = quasi_static_receive(
        &rx,
        &rabi,
        &NoiseSpec::none(),
        0,
        &ReceiveOptions::default(),
    )
    .map_err(|e| e.to_string())?;
    let out = demod_pm(&power, &cfg, &symbols[..16]).map_err(|e| e.to_string())?;
    let errors = out
        .symbols
        .iter()
        .zip(&symbols)
        .filter(|(a, b)| a != b)
        .count();

    let mut link = ExperimentConfig::default();
    link.bands.truncate(1);
    link.link.es_n0_db = vec![10.0];
    link.link.symbols = 50_000;
    let reg = link.registry().map_err(|e| e.to_string())?;
    let ser = run_link(&link, &reg, 21).map_err(|e| e.to_string())?[0].ser;
    let (lo, hi) = (qpsk_ser(10f64.powf(1.05)), qpsk_ser(10f64.powf(0.95)));
    let detail = format!(
        "{errors} noiseless errors in 1000, SER {ser:.3e} at 10 dB (band {lo:.3e}..{hi:.3e})"
    );
    if errors != 0 || ser < lo || ser > hi {
        return Err(detail);
    }
    within(start, 120.0, detail)
}

fn fdm() -> Check {
    let c = FieldCoupling::new(2.04e-26, &PhysicalConstants::default());
    let rx = Receiver::default_operating(&EitParams::default()).map_err(|e| e.to_string())?;
    let grid = FdmGrid::uniform(4, 2e3, 0.5e-3);
    let fs = 64e3;
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let bits: Vec<Vec<f64>> = (0..400)
        .map(|s| {
            (0..4)
                .map(|_| {
                    if s < 4 || rng.random_bool(0.5) {
                        1.0
                    } else {
                        -1.0
                    }
                })
                .collect()
        })
        .collect();
    let a_r = c.field_for_rabi(DEFAULT_OPERATING_RABI);
    let amplitude = a_r / 80.0;
    let env = fdm_modulate(&bits, amplitude, &grid, 3.213e9, fs).map_err(|e| e.to_string())?;
    let chain = FdmChain {
        receiver: &rx,
        coupling: c,
        noise: NoiseSpec::new(1e-3 * amplitude / fs.sqrt(), fs / 2.0),
        seed: 4,
        mode: ReceiveMode::Exact,
        pilot_symbols: 4,
    };
    let reference = ReferenceField::new(a_r, 0.0, 0.0).map_err(|e| e.to_string())?;
    let out = fdm_demod(&env, Some(&reference), &grid, &chain).map_err(|e| e.to_string())?;
    let correct = out
        .symbols
        .iter()
        .flatten()
        .zip(bits.iter().flatten())
        .filter(|(a, b)| a == b)
        .count();
    let accuracy = correct as f64 / 1600.0;
    let strong = fdm_modulate(&bits, a_r / 2.0, &grid, 3.213e9, fs).map_err(|e| e.to_string())?;
    let bare = fdm_demod(&strong, None, &grid, &chain).map_err(|e| e.to_string())?;
    let off: f64 = (0..4)
        .flat_map(|i| (0..4).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| bare.crosstalk[(i, j)])
        .sum();
    ensure(
        accuracy >= 0.99 && off > 0.0,
        format!(
            "accuracy {:.2}% with reference, crosstalk {off:.3e} without",
            100.0 * accuracy
        ),
    )
}

fn simo_scaling() -> Check {
    let ks = [1usize, 2, 4, 8];
    let base = simo_measured_snr(1, 10.0, 10_000, 5).map_err(|e| e.to_string())?;
    let mut y = Vec::new();
    for &k in &ks {
        y.push(simo_measured_snr(k, 10.0, 10_000, 5 + k as u64).map_err(|e| e.to_string())? / base);
    }
    let x: Vec<f64> = ks.iter().map(|&k| k as f64).collect();
    let fit = linear_fit(&x, &y).map_err(|e| e.to_string())?;
    ensure(
        (fit.slope - 1.0).abs() <= 0.05,
        format!("slope {:.4}", fit.slope),
    )
}

fn qpsk(m: usize, rng: &mut ChaCha8Rng) -> DVector<Complex64> {
    DVector::from_fn(m, |_, _| psk_point(rng.random_range(0..4), 4, FRAC_PI_4))
}

fn gs_detector() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    let opts = DetectOptions {
        max_iter: 1000,
        ..DetectOptions::default()
    };
    for trial in 0..100 {
        let ch = MimoChannel::random(16, 4, 3.0, 1000 + trial).map_err(|e| e.to_string())?;
        let x = qpsk(4, &mut rng);
        let y = magnitude_observe(&ch, &x, 0.0, 0).map_err(|e| e.to_string())?;
        let out = gs_detect(&y, &ch, &opts).map_err(|e| e.to_string())?;
        if !out
            .residuals
            .windows(2)
            .all(|w| w[1] <= w[0] * (1.0 + 1e-9) + 1e-12)
        {
            return Err(format!("residual increased on channel {trial}"));
        }
        worst = worst.max(nmse(&out.x, &x));
    }
    let constellation: Vec<Complex64> = (0..4).map(|m| psk_point(m, 4, FRAC_PI_4)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut mismatches = 0;
    for case in 0..1000 {
        let ch = MimoChannel::random(2, 1, 3.0, 50_000 + case).map_err(|e| e.to_string())?;
        let x = qpsk(1, &mut rng);
        let y = magnitude_observe(&ch, &x, 0.0, 0).map_err(|e| e.to_string())?;
        let best = exhaustive_detect(&y, &ch, &constellation).map_err(|e| e.to_string())?;
        let gs = gs_detect_symbols(&y, &ch, &DetectOptions::default(), &constellation, 8, case)
            .map_err(|e| e.to_string())?;
        if gs.symbols[0] != best {
            mismatches += 1;
        }
    }
    ensure(
        worst <= 1e-6 && mismatches == 0,
        format!("worst NMSE {worst:.1e} over 100 channels, {mismatches}/1000 disagreements with exhaustive search"),
    )
}

fn msac() -> Check {
    let start = Instant::now();
    let cfg = ExperimentConfig::default();
    let reg = cfg.registry().map_err(|e| e.to_string())?;
    let rows = run_msac(&cfg, &reg, 2024).map_err(|e| e.to_string())?;
    let g = msac_gaps(&rows).map_err(|e| e.to_string())?;
    let detail = format!(
        "SE gap {:.3} bps/Hz, NMSE gap {:.2} dB, implied SE gap {:.3}, {} trials",
        g.se_gap, g.nmse_gap_db, g.implied_se_gap, cfg.channel.trials
    );
    if (g.se_gap - 2.39).abs() > 0.15
        || (g.nmse_gap_db - 7.2).abs() > 0.5
        || (g.se_gap - g.implied_se_gap).abs() > 0.1 * g.implied_se_gap
        || cfg.channel.trials < 10_000
    {
        return Err(detail);
    }
    within(start, 600.0, detail)
}

fn bandwidth() -> Check {
    let sys = EitParams::default()
        .system(0.0, &[(2.0 * MHZ, 0.0)])
        .map_err(|e| e.to_string())?;
    let rf = sys.coupling_index(2, 3).ok_or("no RF coupling")?;
    let sweep = ModulationSweep::log_spaced(rf, 1e4, 3e7, 15);
    let base = response_bandwidth(&sys, &sweep).map_err(|e| e.to_string())?;
    let doubled =
        response_bandwidth(&sys.with_scaled_decays(2.0), &sweep).map_err(|e| e.to_string())?;
    ensure(
        (0.1e6..=10e6).contains(&base.bandwidth_hz) && doubled.bandwidth_hz > base.bandwidth_hz,
        format!(
            "{:.3} MHz, {:.3} MHz with doubled decays",
            base.bandwidth_hz / 1e6,
            doubled.bandwidth_hz / 1e6
        ),
    )
}

const SMALL: &str = "
seed = 3
[eit]
points = 201
[channel]
trials = 300
[target]
observation_s = 0.05
[link]
symbols = 300
es_n0_db = [6.0, 12.0]
[multiband]
symbols = 300
[mimo]
trials = 5
snr_db = [10.0, 20.0]
simo_trials = 300
[sensitivity]
points = 9
";

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = dir.path().join("small.toml");
    std::fs::write(&cfg, SMALL).map_err(|e| e.to_string())?;
    let mut files = 0;
    for exp in Experiment::ALL {
        let mut outputs = Vec::new();
        for rerun in 0..2 {
            let out = dir.path().join(format!("{}-{rerun}", exp.name()));
            let status = Command::new(env!("CARGO_BIN_EXE_rare-sim"))
                .args([
                    "--config",
                    cfg.to_str().unwrap(),
                    "--seed",
                    "42",
                    "--out",
                    out.to_str().unwrap(),
                    exp.name(),
                ])
                .output()
                .map_err(|e| e.to_string())?;
            if !status.status.success() {
                return Err(format!("{} exited with {}", exp.name(), status.status));
            }
            let mut csvs: Vec<_> = std::fs::read_dir(&out)
                .map_err(|e| e.to_string())?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "csv"))
                .collect();
            csvs.sort();
            let bytes: Vec<(String, Vec<u8>)> = csvs
                .iter()
                .map(|p| {
                    (
                        p.file_name().unwrap().to_string_lossy().into_owned(),
                        std::fs::read(p).unwrap(),
                    )
                })
                .collect();
            outputs.push(bytes);
        }
        if outputs[0].is_empty() || outputs[0] != outputs[1] {
            return Err(format!("{} output differs between reruns", exp.name()));
        }
        files += outputs[0].len();
    }
    Ok(format!(
        "{} experiments, {files} CSV files byte-identical",
        Experiment::ALL.len()
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        ("steady state agrees with time evolution", steady_vs_evolve),
        (
            "two-level steady state matches closed form",
            two_level_closed_form,
        ),
        (
            "EIT splitting is linear in RF Rabi frequency",
            splitting_linearity,
        ),
        ("Rabi frequency spot value", rabi_spot_value),
        ("sensitivity formulas", sensitivity_values),
        ("PM chain symbol recovery and SER", pm_chain),
        ("FDM with and without reference", fdm),
        ("SIMO SNR scales linearly", simo_scaling),
        ("GS detector", gs_detector),
        ("MSAC calibrated gaps", msac),
        ("instantaneous bandwidth", bandwidth),
        ("CLI determinism", determinism),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let result =
            catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        match result {
            Ok(detail) => println!("criterion {}: PASS: {name} ({detail})", k + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL: {name} ({detail})", k + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
