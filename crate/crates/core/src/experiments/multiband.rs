//! Simultaneous reception of several bands, each an RF transition out of the
//! same Rydberg state, on one probe beam.

use rayon::prelude::*;
use serde::Serialize;

use super::config::{BandConfig, ExperimentConfig, MultibandSection};
use super::derive_seed;
use super::link::{
    density_for_es_n0, psk_envelope, random_symbols, ErrorCount, SLOPE_POINTS, SLOPE_SPAN,
};
use crate::eit::NoiseSpec;
use crate::error::{Error, Result};
use crate::quantum::MAX_LEVELS;
use crate::registry::{StateRegistry, Transition};
use crate::stats::from_db10;
use crate::transduction::{
    demod_pm, heterodyne_superpose, FieldCoupling, PmConfig, Receiver, ReferenceField,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BandBer {
    pub band_hz: f64,
    pub ber: f64,
}

/// Band-resolved result with the raw counts.
#[derive(Debug, Clone, PartialEq)]
pub struct MultibandResult {
    pub rows: Vec<BandBer>,
    pub counts: Vec<ErrorCount>,
}

/// Transitions of `bands`, checked to form a star out of one shared state.
pub fn star_transitions<'a>(
    bands: &[BandConfig],
    registry: &'a StateRegistry,
) -> Result<Vec<&'a Transition>> {
    if bands.is_empty() {
        return Err(Error::Config("multiband needs at least one band".into()));
    }
    if 3 + bands.len() > MAX_LEVELS {
        return Err(Error::Topology(format!(
            "{} bands need {} levels, at most {MAX_LEVELS} are supported",
            bands.len(),
            3 + bands.len()
        )));
    }
    let ts = bands
        .iter()
        .map(|b| b.transition(registry))
        .collect::<Result<Vec<_>>>()?;
    let hub = ts[0].lower;
    for t in &ts[1..] {
        if t.lower != hub {
            return Err(Error::Topology(format!(
                "band transition {} -> {} does not start from {hub}",
                t.lower, t.upper
            )));
        }
    }
    for (i, a) in ts.iter().enumerate() {
        if ts[..i].iter().any(|b| b.upper == a.upper) {
            return Err(Error::Topology(format!(
                "two bands share the upper state {}",
                a.upper
            )));
        }
    }
    Ok(ts)
}

/// `(3 + B)`-level receiver with every RF coupling at the reference bias,
/// parked at the steepest probe slope.
pub fn star_receiver(
    cfg: &ExperimentConfig,
    ts: &[&Transition],
    bands: &[BandConfig],
) -> Result<Receiver> {
    let omega = cfg.eit.operating_rabi();
    let rf: Vec<(f64, f64)> = ts
        .iter()
        .zip(bands)
        .map(|(t, b)| (omega, t.detuning(b.carrier(t))))
        .collect();
    let sys = cfg.eit.params().system(0.0, &rf)?;
    Receiver::with_rf_coupling(sys, 2, cfg.eit.od)?.park_at_steepest_slope(SLOPE_SPAN, SLOPE_POINTS)
}

/// `∂T/∂Ω_b` at the bias point for every RF coupling.
fn partial_slopes(rx: &Receiver, couplings: &[usize], omega: f64) -> Result<Vec<f64>> {
    let h = 1e-4 * omega;
    couplings
        .iter()
        .map(|&c| {
            let at = |w: f64| rx.transmission_of(&rx.system().with_rabi(c, w.into()));
            Ok((at(omega + h)? - at(omega - h)?) / (2.0 * h))
        })
        .collect()
}

/// Per-band BER of `bands` received together.
///
/// Band `b` beats with its reference at `(b + 1)·if_base`. The detector noise
/// is one white output noise; it is set so that band 0 sees the configured
/// `Es/N0` with the signal at `signal_to_reference` of its reference, and the
/// other bands' amplitudes are scaled to see the same `Es/N0` through their
/// own small-signal gains.
pub fn multiband_ber(
    cfg: &ExperimentConfig,
    registry: &StateRegistry,
    bands: &[BandConfig],
    section: &MultibandSection,
    seed: u64,
) -> Result<MultibandResult> {
    let ts = star_transitions(bands, registry)?;
    let rx = star_receiver(cfg, &ts, bands)?;
    let omega = cfg.eit.operating_rabi();
    let fs = section.sample_rate_hz;
    let sps = section.samples_per_symbol;
    let t_sym = sps as f64 / fs;
    let couplings: Vec<usize> = (0..bands.len())
        .map(|b| rx.system().coupling_index(2, 3 + b).expect("star coupling"))
        .collect();
    let fields: Vec<FieldCoupling> = ts
        .iter()
        .map(|t| FieldCoupling::for_transition(t, registry.constants()))
        .collect();
    let slopes = partial_slopes(&rx, &couplings, omega)?;
    if slopes.contains(&0.0) {
        return Err(Error::Calibration(
            "a band has no small-signal response at the bias point".into(),
        ));
    }

    let es_n0 = from_db10(section.es_n0_db);
    let a0 = section.signal_to_reference * fields[0].field_for_rabi(omega);
    let g0 = slopes[0].abs() * fields[0].rabi_per_field();
    let sigma_out = g0 * density_for_es_n0(a0, t_sym, es_n0) * (fs / 2.0).sqrt();

    let mut configs = Vec::with_capacity(bands.len());
    let mut sent = Vec::with_capacity(bands.len());
    let mut rabi_series = Vec::with_capacity(bands.len());
    for (b, band) in bands.iter().enumerate() {
        let if_hz = (b + 1) as f64 * section.if_base_hz;
        let cycles = if_hz * t_sym;
        if (cycles - cycles.round()).abs() > 1e-9 {
            return Err(Error::Orthogonality(format!(
                "band {b} IF {if_hz} Hz runs {cycles:.4} cycles per symbol"
            )));
        }
        let reference = ReferenceField::new(fields[b].field_for_rabi(omega), if_hz, 0.0)?;
        let pm = PmConfig {
            reference,
            sample_rate_hz: fs,
            samples_per_symbol: sps,
            order: band.modulation.order(),
            constellation_offset: band.modulation.offset(),
        };
        pm.validate()?;
        let gain = slopes[b].abs() * fields[b].rabi_per_field();
        let amplitude = a0 * g0 / gain;
        let symbols = random_symbols(
            section.symbols,
            band.modulation.order(),
            derive_seed(seed, 10 + b as u64),
        );
        let env = psk_envelope(
            &symbols,
            band.modulation,
            amplitude,
            sps,
            band.carrier(ts[b]),
            fs,
        )?;
        rabi_series.push(heterodyne_superpose(&env, &reference, &fields[b]));
        configs.push(pm);
        sent.push(symbols);
    }

    let n = section.symbols * sps;
    let clean = (0..n)
        .into_par_iter()
        .map(|k| {
            let mut sys = rx.system().clone();
            for (c, series) in couplings.iter().zip(&rabi_series) {
                sys.set_rabi(*c, series[k].into());
            }
            rx.transmission_of(&sys)
        })
        .collect::<Result<Vec<f64>>>()?;
    let power = NoiseSpec::new(sigma_out, 1.0).apply(&clean, derive_seed(seed, 2))?;

    let mut rows = Vec::with_capacity(bands.len());
    let mut counts = Vec::with_capacity(bands.len());
    for (b, band) in bands.iter().enumerate() {
        let pilots = section.pilots;
        let out = demod_pm(&power, &configs[b], &sent[b][..pilots])?;
        let count = ErrorCount::tally(
            &sent[b][pilots..],
            &out.symbols[pilots..],
            band.modulation.bits_per_symbol(),
        );
        rows.push(BandBer {
            band_hz: band.carrier(ts[b]),
            ber: count.ber(),
        });
        counts.push(count);
    }
    Ok(MultibandResult { rows, counts })
}

pub fn run_multiband(
    cfg: &ExperimentConfig,
    registry: &StateRegistry,
    seed: u64,
) -> Result<MultibandResult> {
    multiband_ber(cfg, registry, &cfg.bands, &cfg.multiband, seed)
}
