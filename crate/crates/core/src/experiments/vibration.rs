//! Vibration sensing: a target displacement `x(t)` phase-modulates the echo,
//! the heterodyne chain tracks the IF phase.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use super::config::{BandRole, ExperimentConfig};
use super::derive_seed;
use super::link::{band_receiver, interpolated};
use crate::eit::NoiseSpec;
use crate::error::{Error, Result};
use crate::registry::{dbm_to_watts, PhysicalConstants, StateRegistry};
use crate::sensitivity::{thermal_sensitivity, ClassicAntennaParams};
use crate::stats::db10;
use crate::transduction::{
    heterodyne_linearized, heterodyne_superpose, quasi_static_receive, FieldCoupling,
    FieldEnvelope, Receiver, ReferenceField,
};

/// Geometry and sampling of one sensing run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VibrationSetup {
    pub wavelength_m: f64,
    pub amplitude_m: f64,
    pub frequency_hz: f64,
    pub observation_s: f64,
    pub sample_rate_hz: f64,
    pub if_hz: f64,
    /// Samples between phase estimates.
    pub block_samples: usize,
    /// Peak echo field at the receiver, V/m.
    pub echo_field: f64,
    /// Equivalent-input field noise, V/m/√Hz.
    pub noise_density: f64,
    /// Static round-trip phase of the echo, rad.
    pub echo_phase: f64,
}

/// How the receiver turns the field into a sampled output.
#[derive(Debug, Clone, Copy)]
pub enum FrontEnd<'a> {
    /// Atomic receiver through the quasi-static EIT response.
    Rare { receiver: &'a Receiver },
    /// Ideal linear mixer: output proportional to the IF beat.
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VibrationTrace {
    /// Estimate instants, s.
    pub time_s: Vec<f64>,
    /// True displacement at those instants, m.
    pub truth_m: Vec<f64>,
    pub estimate_m: Vec<f64>,
}

/// `Σ|x̂ − x|² / Σ|x|²` in dB.
pub fn nmse_db(truth: &[f64], estimate: &[f64]) -> Result<f64> {
    let energy: f64 = truth.iter().map(|x| x * x).sum();
    if energy == 0.0 {
        return Err(Error::DegenerateTarget);
    }
    let err: f64 = truth
        .iter()
        .zip(estimate)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(db10(err / energy))
}

/// Peak echo field from the radar equation,
/// `|E| = √(2·Z₀·P·G·σ / ((4π)²·R⁴))`.
pub fn radar_echo_field(
    ptx_w: f64,
    tx_gain: f64,
    rcs_m2: f64,
    range_m: f64,
    constants: &PhysicalConstants,
) -> f64 {
    let density = ptx_w * tx_gain * rcs_m2 / ((4.0 * PI).powi(2) * range_m.powi(4));
    (2.0 * constants.free_space_impedance * density).sqrt()
}

/// IF phasor of `power` every `step` samples, as `(sample index, phasor)`.
///
/// The beat is mixed down and smoothed with a triangular kernel spanning two
/// IF periods. Its transfer function has double zeros at DC and at every IF
/// harmonic, so the image and the detector harmonics leak only to second
/// order in the phase drift across the kernel.
fn iq_track(power: &[f64], if_hz: f64, fs: f64, step: usize) -> Result<Vec<(usize, Complex64)>> {
    let period = fs / if_hz;
    let p = period.round() as usize;
    if p < 8 || (period - p as f64).abs() > 1e-9 * period {
        return Err(Error::Orthogonality(format!(
            "sample rate {fs} Hz is not a multiple (at least 8) of the IF {if_hz} Hz"
        )));
    }
    if step == 0 {
        return Err(Error::Validation("phase step must be positive".into()));
    }
    if power.len() < 2 * p - 1 {
        return Err(Error::Validation(
            "observation shorter than the IF kernel".into(),
        ));
    }
    let dc = power.iter().sum::<f64>() / power.len() as f64;
    let w = 2.0 * PI / p as f64;
    let norm = 2.0 / (p * p) as f64;
    Ok((p - 1..power.len() - p + 1)
        .step_by(step)
        .map(|c| {
            let acc: Complex64 = (c + 1 - p..c + p)
                .map(|k| {
                    let weight = (p - c.abs_diff(k)) as f64;
                    Complex64::from_polar(weight * (power[k] - dc), w * (k % p) as f64)
                })
                .sum();
            (c, acc * norm)
        })
        .collect())
}

/// Displacement estimate for one noise realisation.
pub fn sense_vibration(
    setup: &VibrationSetup,
    front: FrontEnd,
    coupling: &FieldCoupling,
    reference_amplitude: f64,
    seed: u64,
) -> Result<VibrationTrace> {
    if setup.amplitude_m == 0.0 {
        return Err(Error::DegenerateTarget);
    }
    let fs = setup.sample_rate_hz;
    let block = setup.block_samples;
    let n = (setup.observation_s * fs).floor() as usize;
    let k_phase = 4.0 * PI / setup.wavelength_m;
    let x = |t: f64| setup.amplitude_m * (2.0 * PI * setup.frequency_hz * t).sin();
    let samples: Vec<Complex64> = (0..n)
        .map(|i| {
            Complex64::from_polar(
                setup.echo_field,
                setup.echo_phase + k_phase * x(i as f64 / fs),
            )
        })
        .collect();
    let env = FieldEnvelope::new(1.0, fs, samples)?;
    let reference = ReferenceField::new(reference_amplitude, setup.if_hz, 0.0)?;
    let noise = NoiseSpec::new(setup.noise_density, fs / 2.0).with_gain(coupling.rabi_per_field());
    let power = match front {
        FrontEnd::Rare { receiver } => {
            let rabi = heterodyne_superpose(&env, &reference, coupling);
            quasi_static_receive(receiver, &rabi, &noise, seed, &interpolated())?
        }
        FrontEnd::Linear => {
            noise.apply(&heterodyne_linearized(&env, &reference, coupling), seed)?
        }
    };
    let z = iq_track(&power, setup.if_hz, fs, block)?;
    // the static phase and the receiver gain drop out against the mean phasor
    let mean = z.iter().map(|v| v.1).sum::<Complex64>() / z.len() as f64;
    let estimate_m = z
        .iter()
        .map(|v| (v.1 * mean.conj()).arg() / k_phase)
        .collect();
    let truth_m = z.iter().map(|v| x(v.0 as f64 / fs)).collect();
    let time_s = z.iter().map(|v| v.0 as f64 / fs).collect();
    Ok(VibrationTrace {
        time_s,
        truth_m,
        estimate_m,
    })
}

/// NMSE pooled over `trials` noise realisations.
pub fn pooled_nmse_db(
    setup: &VibrationSetup,
    front: FrontEnd,
    coupling: &FieldCoupling,
    reference_amplitude: f64,
    trials: usize,
    seed: u64,
) -> Result<(f64, VibrationTrace)> {
    let mut truth = Vec::new();
    let mut estimate = Vec::new();
    let mut first = None;
    for k in 0..trials.max(1) {
        let tr = sense_vibration(
            setup,
            front,
            coupling,
            reference_amplitude,
            derive_seed(seed, k as u64),
        )?;
        truth.extend_from_slice(&tr.truth_m);
        estimate.extend_from_slice(&tr.estimate_m);
        first.get_or_insert(tr);
    }
    Ok((
        nmse_db(&truth, &estimate)?,
        first.expect("at least one trial"),
    ))
}

/// Sensing receivers shared by the vibration and dual-band experiments.
pub struct SensingLink {
    pub coupling: FieldCoupling,
    pub reference_amplitude: f64,
    pub receiver: Receiver,
    /// Classic half-wave thermal floor at the carrier, V/m/√Hz.
    pub classic_floor: f64,
    /// RARE equivalent field-noise floor, V/m/√Hz.
    pub rare_floor: f64,
    pub base: VibrationSetup,
}

impl SensingLink {
    /// `receiver` overrides the default four-level receiver of the sensing
    /// band (the dual-band experiment passes its five-level one).
    pub fn new(
        cfg: &ExperimentConfig,
        registry: &StateRegistry,
        receiver: Option<Receiver>,
    ) -> Result<Self> {
        let band = cfg.band(BandRole::Sensing)?;
        let t = band.transition(registry)?;
        let constants = registry.constants();
        let carrier = band.carrier(t);
        let coupling = FieldCoupling::for_transition(t, constants);
        let omega_op = cfg.eit.operating_rabi();
        let receiver = match receiver {
            Some(r) => r,
            None => band_receiver(&cfg.eit.params(), t, band, omega_op)?,
        };
        let classic_floor =
            thermal_sensitivity(&ClassicAntennaParams::half_wave(carrier), constants)?;
        let rare_floor = classic_floor * 10f64.powf(-cfg.sensor.practical_offset_db / 20.0);
        let tg = &cfg.target;
        let wavelength = constants.wavelength(carrier);
        let base = VibrationSetup {
            wavelength_m: wavelength,
            amplitude_m: tg.amplitude_m,
            frequency_hz: tg.frequency_hz,
            observation_s: tg.observation_s,
            sample_rate_hz: tg.sample_rate_hz,
            if_hz: tg.if_hz,
            block_samples: tg.block_samples,
            echo_field: 0.0,
            noise_density: 0.0,
            echo_phase: (4.0 * PI * tg.range_m / wavelength).rem_euclid(2.0 * PI),
        };
        Ok(Self {
            coupling,
            reference_amplitude: coupling.field_for_rabi(omega_op),
            receiver,
            classic_floor,
            rare_floor,
            base,
        })
    }

    pub fn setup(
        &self,
        cfg: &ExperimentConfig,
        ptx_dbm: f64,
        noise_density: f64,
    ) -> VibrationSetup {
        let constants = PhysicalConstants::default();
        let tg = &cfg.target;
        VibrationSetup {
            echo_field: radar_echo_field(
                dbm_to_watts(ptx_dbm),
                cfg.channel.tx_gain,
                tg.rcs_m2,
                tg.range_m,
                &constants,
            ),
            noise_density,
            ..self.base
        }
    }

    /// RARE and classic (linear IF) NMSE at `ptx_dbm` with common noise
    /// realisations.
    pub fn nmse_pair(
        &self,
        cfg: &ExperimentConfig,
        ptx_dbm: f64,
        seed: u64,
    ) -> Result<(VibrationPair, f64, f64)> {
        let rare_setup = self.setup(cfg, ptx_dbm, self.rare_floor);
        let classic_setup = self.setup(cfg, ptx_dbm, self.classic_floor);
        let (rare, rare_trace) = pooled_nmse_db(
            &rare_setup,
            FrontEnd::Rare {
                receiver: &self.receiver,
            },
            &self.coupling,
            self.reference_amplitude,
            cfg.target.trials,
            seed,
        )?;
        let (classic, classic_trace) = pooled_nmse_db(
            &classic_setup,
            FrontEnd::Linear,
            &self.coupling,
            self.reference_amplitude,
            cfg.target.trials,
            seed,
        )?;
        Ok((
            VibrationPair {
                rare: rare_trace,
                classic: classic_trace,
            },
            rare,
            classic,
        ))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VibrationPair {
    pub rare: VibrationTrace,
    pub classic: VibrationTrace,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VibrationOutcome {
    pub nmse_rare_db: f64,
    pub nmse_classic_db: f64,
    pub traces: VibrationPair,
}

/// Vibration sensing at `target.ptx_dbm` with the RARE and the classic
/// linear receiver.
pub fn run_vibration_sensing(
    cfg: &ExperimentConfig,
    registry: &StateRegistry,
    seed: u64,
) -> Result<VibrationOutcome> {
    if cfg.target.amplitude_m == 0.0 {
        return Err(Error::DegenerateTarget);
    }
    let link = SensingLink::new(cfg, registry, None)?;
    let (traces, nmse_rare_db, nmse_classic_db) = link.nmse_pair(cfg, cfg.target.ptx_dbm, seed)?;
    Ok(VibrationOutcome {
        nmse_rare_db,
        nmse_classic_db,
        traces,
    })
}
