//! Dual-band sensing and communication on one five-level receiver: a
//! low-band communication link and a high-band vibration-sensing link share
//! the 60D5/2 state.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::Serialize;

use super::config::{BandRole, ExperimentConfig};
use super::derive_seed;
use super::link::{SLOPE_POINTS, SLOPE_SPAN};
use super::vibration::SensingLink;
use crate::error::{Error, Result};
use crate::quantum::steady_state;
use crate::registry::{dbm_to_watts, StateRegistry};
use crate::sensitivity::{thermal_sensitivity, ClassicAntennaParams};
use crate::stats::db10;
use crate::transduction::Receiver;

/// One transmit-power point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MsacRow {
    pub ptx_dbm: f64,
    /// Ergodic spectral efficiency, bit/s/Hz.
    pub se_rare: f64,
    pub se_cr1: f64,
    pub nmse_rare_db: f64,
    pub nmse_cr2_db: f64,
    /// Mean received SNR of the communication link, dB.
    pub snr_rare_db: f64,
    pub snr_cr1_db: f64,
}

/// Unit-mean Rayleigh power gains `|g|² ~ Exp(1)`, shared by every receiver
/// and power point so that curve differences carry no fading noise.
pub fn rayleigh_power_gains(trials: usize, seed: u64) -> Vec<f64> {
    const CHUNK: usize = 4096;
    (0..trials.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let n = CHUNK.min(trials - c * CHUNK);
            (0..n).map(|_| Exp1.sample(&mut rng)).collect::<Vec<f64>>()
        })
        .collect::<Vec<_>>()
        .concat()
}

/// `mean log2(1 + |g|²·snr)`, summed in a fixed order.
pub fn ergodic_se(gains: &[f64], snr: f64) -> f64 {
    gains.iter().map(|g| (1.0 + g * snr).log2()).sum::<f64>() / gains.len() as f64
}

/// Mean SNR of a free-space link: `E_rms² / (d²·B)` with
/// `E_rms² = Z₀·P·G/(4πR²)`.
pub fn free_space_snr(
    ptx_w: f64,
    tx_gain: f64,
    distance_m: f64,
    z0: f64,
    density: f64,
    bandwidth_hz: f64,
) -> f64 {
    let e_rms2 = z0 * ptx_w * tx_gain / (4.0 * PI * distance_m * distance_m);
    e_rms2 / (density * density * bandwidth_hz)
}

/// Five-level receiver of the dual-band pair, with both RF transitions held at
/// the reference bias and the sensing transition as the receive input.
pub fn msac_receiver(cfg: &ExperimentConfig, registry: &StateRegistry) -> Result<Receiver> {
    let comm = cfg.band(BandRole::Communication)?;
    let sense = cfg.band(BandRole::Sensing)?;
    let tc = comm.transition(registry)?;
    let ts = sense.transition(registry)?;
    if tc.lower != ts.lower {
        return Err(Error::Topology(format!(
            "communication ({}) and sensing ({}) transitions must share their lower state",
            tc.lower, ts.lower
        )));
    }
    let omega = cfg.eit.operating_rabi();
    let sys = cfg.eit.params().system(
        0.0,
        &[
            (omega, tc.detuning(comm.carrier(tc))),
            (omega, ts.detuning(sense.carrier(ts))),
        ],
    )?;
    steady_state(&sys)?;
    let rf = sys
        .coupling_index(2, 4)
        .expect("second RF coupling built above");
    Receiver::with_rf_coupling(sys, rf, cfg.eit.od)?
        .park_at_steepest_slope(SLOPE_SPAN, SLOPE_POINTS)
}

pub fn run_msac(
    cfg: &ExperimentConfig,
    registry: &StateRegistry,
    seed: u64,
) -> Result<Vec<MsacRow>> {
    let comm = cfg.band(BandRole::Communication)?;
    let tc = comm.transition(registry)?;
    let constants = registry.constants();
    let receiver = msac_receiver(cfg, registry)?;
    let sensing = SensingLink::new(cfg, registry, Some(receiver))?;

    let classic = thermal_sensitivity(
        &ClassicAntennaParams::half_wave(comm.carrier(tc)),
        constants,
    )?;
    let rare = classic * 10f64.powf(-cfg.sensor.practical_offset_db / 20.0);
    let gains = rayleigh_power_gains(cfg.channel.trials, derive_seed(seed, 1));
    let ch = &cfg.channel;
    let z0 = constants.free_space_impedance;

    cfg.power
        .ptx_dbm
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let ptx = dbm_to_watts(p);
            let snr_rare =
                free_space_snr(ptx, ch.tx_gain, ch.distance_m, z0, rare, comm.bandwidth_hz);
            let snr_cr1 = free_space_snr(
                ptx,
                ch.tx_gain,
                ch.distance_m,
                z0,
                classic,
                comm.bandwidth_hz,
            );
            let (_, nmse_rare_db, nmse_cr2_db) =
                sensing.nmse_pair(cfg, p, derive_seed(seed, 1000 + i as u64))?;
            Ok(MsacRow {
                ptx_dbm: p,
                se_rare: ergodic_se(&gains, snr_rare),
                se_cr1: ergodic_se(&gains, snr_cr1),
                nmse_rare_db,
                nmse_cr2_db,
                snr_rare_db: db10(snr_rare),
                snr_cr1_db: db10(snr_cr1),
            })
        })
        .collect()
}

/// Headline gaps at the highest transmit power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MsacGaps {
    pub se_gap: f64,
    pub nmse_gap_db: f64,
    /// `nmse_gap_db / (10·log10 2)`: the SE gap the NMSE gap implies at high SNR.
    pub implied_se_gap: f64,
}

pub fn msac_gaps(rows: &[MsacRow]) -> Result<MsacGaps> {
    let top = rows
        .iter()
        .max_by(|a, b| a.ptx_dbm.total_cmp(&b.ptx_dbm))
        .ok_or_else(|| Error::Validation("no MSAC rows".into()))?;
    let nmse_gap_db = top.nmse_cr2_db - top.nmse_rare_db;
    Ok(MsacGaps {
        se_gap: top.se_rare - top.se_cr1,
        nmse_gap_db,
        implied_se_gap: nmse_gap_db / (10.0 * 2f64.log10()),
    })
}
