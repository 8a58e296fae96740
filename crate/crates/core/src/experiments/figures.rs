//! Sweeps that need no link simulation: the EIT spectrum, the sensitivity
//! comparison and the multi-receiver detectors.

use std::f64::consts::{FRAC_PI_4, PI};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::ExperimentConfig;
use super::derive_seed;
use crate::eit::{peak_splitting, transmission_spectrum, EitTrace, ProbeSweep};
use crate::error::Result;
use crate::mimo::{
    gs_detect, magnitude_observe, simo_measured_snr, DetectInit, DetectOptions, MimoChannel,
};
use crate::registry::{QuantumDefectModel, StateRegistry};
use crate::sensitivity::{
    d_to_p_family, sensitivity_curve, AtomSensorParams, FixedDipole, SensitivityRow,
};
use crate::stats::{db10, from_db10};
use crate::transduction::psk_point;

#[derive(Debug, Clone, PartialEq)]
pub struct EitSpectrum {
    pub trace: EitTrace,
    /// `None` when the spectrum shows a single peak.
    pub splitting_hz: Option<f64>,
}

/// Probe scan of the four-level ladder at `eit.rf_rabi_hz`.
pub fn run_eit_spectrum(cfg: &ExperimentConfig) -> Result<EitSpectrum> {
    let e = &cfg.eit;
    let params = e.params();
    let sys = params.system(0.0, &[(2.0 * PI * e.rf_rabi_hz, 0.0)])?;
    let span = 2.0 * PI * e.span_hz / 2.0;
    let trace = transmission_spectrum(&ProbeSweep::linspace(
        sys, -span, span, e.points, params.od,
    )?)?;
    let splitting_hz = peak_splitting(&trace).ok();
    Ok(EitSpectrum {
        trace,
        splitting_hz,
    })
}

/// SQL, half-wave and fixed-dipole limits over the configured grid. The
/// atomic transition at each frequency comes from the `nD5/2 → (n+1)P3/2`
/// family anchored at the registry's 60D5/2 → 61P3/2 entry.
pub fn run_sensitivity_figure(
    cfg: &ExperimentConfig,
    registry: &StateRegistry,
) -> Result<Vec<SensitivityRow>> {
    let s = &cfg.sensitivity;
    let anchor = registry.lookup("60D5/2", "61P3/2")?;
    let table = d_to_p_family(
        s.min_n..=s.max_n,
        &QuantumDefectModel::caesium_p32_d52(),
        anchor,
    )?;
    let sensor = AtomSensorParams::new(cfg.sensor.atom_count, cfg.sensor.coherence_time_s, anchor)?;
    let fixed = FixedDipole {
        length_m: s.fixed_length_m,
        efficiency: s.fixed_efficiency,
    };
    sensitivity_curve(&s.grid(), &table, &sensor, &fixed, registry.constants())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MimoRow {
    pub snr_db: f64,
    pub nmse_db: f64,
    pub converged_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimoRow {
    pub branches: usize,
    pub snr_db: f64,
    /// Measured post-combining SNR over the single-branch SNR.
    pub snr_gain: f64,
}

/// GS detection NMSE of QPSK users over random channels, per noise level.
/// `snr_db` is the per-user symbol power over the magnitude noise variance.
pub fn run_mimo(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<MimoRow>> {
    let m = &cfg.mimo;
    let opts = DetectOptions {
        max_iter: m.max_iter,
        tol: m.tol,
        init: DetectInit::ReferencePhase,
    };
    m.snr_db
        .iter()
        .enumerate()
        .map(|(i, &db)| {
            let sigma = (1.0 / from_db10(db)).sqrt();
            let point_seed = derive_seed(seed, 100 + i as u64);
            let trials = (0..m.trials)
                .into_par_iter()
                .map(|k| {
                    let s = derive_seed(point_seed, k as u64);
                    let ch = MimoChannel::random(
                        m.receivers,
                        m.users,
                        m.reference_ratio,
                        derive_seed(s, 0),
                    )?;
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(s, 1));
                    let x = DVector::from_fn(m.users, |_, _| {
                        psk_point(rng.random_range(0..4), 4, FRAC_PI_4)
                    });
                    let y = magnitude_observe(&ch, &x, sigma, derive_seed(s, 2))?;
                    let out = gs_detect(&y, &ch, &opts)?;
                    Ok((
                        (&out.x - &x).norm_squared(),
                        x.norm_squared(),
                        out.converged,
                    ))
                })
                .collect::<Result<Vec<(f64, f64, bool)>>>()?;
            let err: f64 = trials.iter().map(|t| t.0).sum();
            let energy: f64 = trials.iter().map(|t| t.1).sum();
            let conv = trials.iter().filter(|t| t.2).count();
            Ok(MimoRow {
                snr_db: db,
                nmse_db: db10(err / energy),
                converged_fraction: conv as f64 / m.trials as f64,
            })
        })
        .collect()
}

/// Measured MRC gain for each configured branch count.
pub fn run_simo(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<SimoRow>> {
    let m = &cfg.mimo;
    let single = from_db10(m.simo_snr_db);
    m.simo_branches
        .iter()
        .map(|&k| {
            let snr =
                simo_measured_snr(k, single, m.simo_trials, derive_seed(seed, 200 + k as u64))?;
            Ok(SimoRow {
                branches: k,
                snr_db: db10(snr),
                snr_gain: snr / single,
            })
        })
        .collect()
}
