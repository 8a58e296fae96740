//! Single-band heterodyne PSK link through the quasi-static receiver.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::{BandConfig, ExperimentConfig, LinkSection, Modulation};
use super::derive_seed;
use crate::eit::{EitParams, NoiseSpec};
use crate::error::{Error, Result};
use crate::registry::{StateRegistry, Transition};
use crate::stats::from_db10;
use crate::transduction::{
    demod_pm, heterodyne_superpose, psk_point, qpsk_ser, quasi_static_receive, FieldCoupling,
    FieldEnvelope, PmConfig, ReceiveMode, ReceiveOptions, Receiver, ReferenceField,
};

/// Chebyshev nodes used for interpolated reception in the experiments.
pub const RECEIVE_NODES: usize = 48;

pub(crate) fn interpolated() -> ReceiveOptions {
    ReceiveOptions {
        mode: ReceiveMode::Interpolated {
            nodes: RECEIVE_NODES,
        },
        bandwidth: None,
    }
}

/// Probe slope scan used to park every receiver in the experiments.
pub(crate) const SLOPE_SPAN: f64 = 2.0 * std::f64::consts::PI * 4.0e6;
pub(crate) const SLOPE_POINTS: usize = 801;

/// Four-level receiver for `band`, biased at `omega_op` and parked at the
/// steepest probe slope. The RF detuning follows the band's carrier.
pub fn band_receiver(
    params: &EitParams,
    t: &Transition,
    band: &BandConfig,
    omega_op: f64,
) -> Result<Receiver> {
    let delta = t.detuning(band.carrier(t));
    Receiver::new(params.system(0.0, &[(omega_op, delta)])?, params.od)?
        .park_at_steepest_slope(SLOPE_SPAN, SLOPE_POINTS)
}

/// Gray label of PSK index `m`.
pub fn gray(m: usize) -> usize {
    m ^ (m >> 1)
}

pub fn bit_errors(sent: usize, got: usize) -> u32 {
    (gray(sent) ^ gray(got)).count_ones()
}

/// Uniform random PSK indices.
pub fn random_symbols(count: usize, order: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| rng.random_range(0..order)).collect()
}

/// Piecewise-constant PSK envelope, `samples_per_symbol` samples per symbol.
pub fn psk_envelope(
    symbols: &[usize],
    modulation: Modulation,
    amplitude: f64,
    samples_per_symbol: usize,
    carrier_hz: f64,
    sample_rate_hz: f64,
) -> Result<FieldEnvelope> {
    let samples = symbols
        .iter()
        .flat_map(|&m| {
            let e = psk_point(m, modulation.order(), modulation.offset()) * amplitude;
            std::iter::repeat_n(e, samples_per_symbol)
        })
        .collect();
    FieldEnvelope::new(carrier_hz, sample_rate_hz, samples)
}

/// Field-noise density giving `Es/N0 = |E|²·T_sym/(2·d²)`.
pub fn density_for_es_n0(amplitude: f64, symbol_duration_s: f64, es_n0: f64) -> f64 {
    amplitude * (symbol_duration_s / (2.0 * es_n0)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinkRow {
    pub es_n0_db: f64,
    pub ser: f64,
    pub ber: f64,
    /// Analytic Gray-QPSK (or BPSK) curve at the same `Es/N0`.
    pub ser_theory: f64,
}

/// Symbol and bit error counts over the data symbols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ErrorCount {
    pub symbols: usize,
    pub symbol_errors: usize,
    pub bits: usize,
    pub bit_errors: usize,
}

impl ErrorCount {
    pub fn tally(sent: &[usize], got: &[usize], bits_per_symbol: u32) -> Self {
        let symbol_errors = sent.iter().zip(got).filter(|(a, b)| a != b).count();
        let bit_errors = sent
            .iter()
            .zip(got)
            .map(|(a, b)| bit_errors(*a, *b) as usize)
            .sum();
        Self {
            symbols: sent.len(),
            symbol_errors,
            bits: sent.len() * bits_per_symbol as usize,
            bit_errors,
        }
    }

    pub fn ser(&self) -> f64 {
        self.symbol_errors as f64 / self.symbols as f64
    }

    pub fn ber(&self) -> f64 {
        self.bit_errors as f64 / self.bits as f64
    }
}

/// One heterodyne PSK transmission at `es_n0` (linear): the first
/// `section.pilots` symbols are known pilots, errors are counted over the rest.
pub fn pm_link(
    rx: &Receiver,
    coupling: &FieldCoupling,
    modulation: Modulation,
    section: &LinkSection,
    omega_op: f64,
    es_n0: f64,
    seed: u64,
) -> Result<ErrorCount> {
    let fs = section.sample_rate_hz;
    let sps = section.samples_per_symbol;
    let t_sym = sps as f64 / fs;
    let reference_amplitude = coupling.field_for_rabi(omega_op);
    let amplitude = section.signal_to_reference * reference_amplitude;
    let reference = ReferenceField::new(reference_amplitude, section.if_hz, 0.0)?;
    let cfg = PmConfig {
        reference,
        sample_rate_hz: fs,
        samples_per_symbol: sps,
        order: modulation.order(),
        constellation_offset: modulation.offset(),
    };
    cfg.validate()?;
    let symbols = random_symbols(section.symbols, modulation.order(), derive_seed(seed, 1));
    let env = psk_envelope(&symbols, modulation, amplitude, sps, 1.0, fs)?;
    let rabi = heterodyne_superpose(&env, &reference, coupling);
    let noise = NoiseSpec::new(density_for_es_n0(amplitude, t_sym, es_n0), fs / 2.0)
        .with_gain(coupling.rabi_per_field());
    let power = quasi_static_receive(rx, &rabi, &noise, derive_seed(seed, 2), &interpolated())?;
    let out = demod_pm(&power, &cfg, &symbols[..section.pilots])?;
    Ok(ErrorCount::tally(
        &symbols[section.pilots..],
        &out.symbols[section.pilots..],
        modulation.bits_per_symbol(),
    ))
}

pub fn theory_ser(modulation: Modulation, es_n0: f64) -> f64 {
    match modulation {
        Modulation::Qpsk => qpsk_ser(es_n0),
        Modulation::Bpsk => crate::transduction::bpsk_ber(es_n0),
    }
}

/// Error rates of the first configured band across `link.es_n0_db`.
pub fn run_link(
    cfg: &ExperimentConfig,
    registry: &StateRegistry,
    seed: u64,
) -> Result<Vec<LinkRow>> {
    let band = cfg
        .bands
        .first()
        .ok_or_else(|| Error::Config("link needs at least one band".into()))?;
    let t = band.transition(registry)?;
    let params = cfg.eit.params();
    let rx = band_receiver(&params, t, band, cfg.eit.operating_rabi())?;
    let coupling = FieldCoupling::for_transition(t, registry.constants());
    cfg.link
        .es_n0_db
        .iter()
        .enumerate()
        .map(|(i, &db)| {
            let es_n0 = from_db10(db);
            let count = pm_link(
                &rx,
                &coupling,
                band.modulation,
                &cfg.link,
                cfg.eit.operating_rabi(),
                es_n0,
                derive_seed(seed, 100 + i as u64),
            )?;
            Ok(LinkRow {
                es_n0_db: db,
                ser: count.ser(),
                ber: count.ber(),
                ser_theory: theory_ser(band.modulation, es_n0),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gray_neighbours_differ_by_one_bit() {
        for m in 0..4 {
            assert_eq!(bit_errors(m, (m + 1) % 4), 1);
        }
        assert_eq!(bit_errors(0, 2), 2);
        assert_eq!(bit_errors(3, 3), 0);
    }

    #[test]
    fn density_matches_convention() {
        let d = density_for_es_n0(2.0, 1e-3, 10.0);
        assert!((4.0 * 1e-3 / (2.0 * d * d) - 10.0).abs() < 1e-12);
    }
}
