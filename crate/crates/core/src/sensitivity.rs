//! Field-sensitivity limits: the atomic standard quantum limit against the
//! thermal limit of classical dipole antennas.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::registry::{Orbital, PhysicalConstants, QuantumDefectModel, RydbergState, Transition};

/// Atoms participating in the measurement and their coherence time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomSensorParams {
    pub atom_count: f64,
    /// s.
    pub coherence_time: f64,
    /// |μ| of the RF transition, C·m.
    pub dipole_moment: f64,
}

impl AtomSensorParams {
    pub fn new(atom_count: f64, coherence_time: f64, transition: &Transition) -> Result<Self> {
        let p = Self {
            atom_count,
            coherence_time,
            dipole_moment: transition.dipole_moment,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.atom_count >= 1.0 && self.atom_count.is_finite()) {
            return Err(Error::Validation(format!(
                "atom count must be ≥ 1, got {}",
                self.atom_count
            )));
        }
        if !(self.coherence_time > 0.0 && self.coherence_time.is_finite()) {
            return Err(Error::Validation("coherence time must be positive".into()));
        }
        if !(self.dipole_moment > 0.0 && self.dipole_moment.is_finite()) {
            return Err(Error::Validation("dipole moment must be positive".into()));
        }
        Ok(())
    }

    pub fn with_dipole(self, dipole_moment: f64) -> Self {
        Self {
            dipole_moment,
            ..self
        }
    }
}

/// `ħ / (|μ|·√(N_a·T_r))`, V/m/√Hz.
pub fn sql_sensitivity(p: &AtomSensorParams, constants: &PhysicalConstants) -> f64 {
    constants.hbar / (p.dipole_moment * (p.atom_count * p.coherence_time).sqrt())
}

/// Classical receive antenna.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AntennaKind {
    /// Resonant λ/2 dipole, gain 1.64.
    HalfWave,
    /// Electrically short dipole of fixed length with a radiation efficiency.
    FixedLength { length_m: f64, efficiency: f64 },
}

/// Default length and efficiency of the fixed dipole baseline.
pub const FIXED_DIPOLE_LENGTH_M: f64 = 0.01;
pub const FIXED_DIPOLE_EFFICIENCY: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicAntennaParams {
    pub frequency_hz: f64,
    pub kind: AntennaKind,
}

impl ClassicAntennaParams {
    pub fn half_wave(frequency_hz: f64) -> Self {
        Self {
            frequency_hz,
            kind: AntennaKind::HalfWave,
        }
    }

    pub fn fixed_length(frequency_hz: f64, length_m: f64, efficiency: f64) -> Self {
        Self {
            frequency_hz,
            kind: AntennaKind::FixedLength {
                length_m,
                efficiency,
            },
        }
    }
}

/// Effective aperture `A_e = G·λ²/(4π)`: G = 1.64 for the half-wave dipole,
/// `1.5·η` for a short dipole.
pub fn effective_area(p: &ClassicAntennaParams, constants: &PhysicalConstants) -> Result<f64> {
    if !(p.frequency_hz > 0.0 && p.frequency_hz.is_finite()) {
        return Err(Error::Validation(format!(
            "frequency must be positive, got {}",
            p.frequency_hz
        )));
    }
    let lambda = constants.wavelength(p.frequency_hz);
    let gain = match p.kind {
        AntennaKind::HalfWave => 1.64,
        AntennaKind::FixedLength {
            length_m,
            efficiency,
        } => {
            if !(length_m > 0.0 && length_m.is_finite()) {
                return Err(Error::Validation(format!(
                    "antenna length must be positive, got {length_m}"
                )));
            }
            if !(efficiency > 0.0 && efficiency <= 1.0) {
                return Err(Error::Validation(format!(
                    "efficiency must lie in (0, 1], got {efficiency}"
                )));
            }
            if length_m >= lambda / 2.0 {
                return Err(Error::ModelDomain(format!(
                    "a {length_m} m dipole is not short at {} Hz (λ/2 = {} m)",
                    p.frequency_hz,
                    lambda / 2.0
                )));
            }
            1.5 * efficiency
        }
    };
    Ok(gain * lambda * lambda / (4.0 * PI))
}

/// `√(P_N·Z₀/A_e)`, V/m/√Hz.
pub fn thermal_sensitivity(p: &ClassicAntennaParams, constants: &PhysicalConstants) -> Result<f64> {
    let area = effective_area(p, constants)?;
    Ok((constants.thermal_noise_psd * constants.free_space_impedance / area).sqrt())
}

/// `20·log10(classic / rare)`.
pub fn advantage_db(rare: f64, classic: f64) -> Result<f64> {
    if !(rare > 0.0 && classic > 0.0 && rare.is_finite() && classic.is_finite()) {
        return Err(Error::Validation("sensitivities must be positive".into()));
    }
    Ok(20.0 * (classic / rare).log10())
}

/// Estimated `nD5/2 → (n+1)P3/2` transitions for `n` in `n_range`.
///
/// Frequencies come from the quantum-defect model; dipole moments scale as
/// `n*²` from `anchor` (which must itself be a member of the family). The
/// anchor entry is used verbatim.
pub fn d_to_p_family(
    n_range: std::ops::RangeInclusive<u32>,
    model: &QuantumDefectModel,
    anchor: &Transition,
) -> Result<Vec<Transition>> {
    let d = |n| RydbergState::new(n, Orbital::D, 5);
    let p = |n| RydbergState::new(n, Orbital::P, 3);
    let anchor_n = anchor.lower.n();
    if anchor.lower != d(anchor_n)? || anchor.upper != p(anchor_n + 1)? {
        return Err(Error::Validation(format!(
            "anchor {} → {} is not an nD5/2 → (n+1)P3/2 transition",
            anchor.lower, anchor.upper
        )));
    }
    let n_anchor = model.effective_n(&anchor.lower)?;
    n_range
        .map(|n| {
            if n == anchor_n {
                return Ok(*anchor);
            }
            let (lo, up) = (d(n)?, p(n + 1)?);
            let scale = model.effective_n(&lo)? / n_anchor;
            let f = model.transition_frequency(&lo, &up)?;
            Transition::new(lo, up, anchor.dipole_moment * scale * scale, f)
        })
        .collect()
}

/// Relative frequency mismatch allowed when assigning a grid frequency to a
/// transition.
pub const FREQUENCY_MATCH_TOLERANCE: f64 = 0.10;

/// Transition whose frequency is nearest to `frequency_hz` on a log scale,
/// provided it lies within [`FREQUENCY_MATCH_TOLERANCE`].
pub fn nearest_transition(table: &[Transition], frequency_hz: f64) -> Result<&Transition> {
    table
        .iter()
        .min_by(|a, b| {
            let da = (a.frequency / frequency_hz).ln().abs();
            let db = (b.frequency / frequency_hz).ln().abs();
            da.total_cmp(&db)
        })
        .filter(|t| {
            ((t.frequency - frequency_hz) / frequency_hz).abs() <= FREQUENCY_MATCH_TOLERANCE
        })
        .ok_or_else(|| Error::NotFound(format!("no transition within 10 % of {frequency_hz} Hz")))
}

/// One row of the sensitivity comparison, V/m/√Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub freq_hz: f64,
    pub sql_vpm_rthz: f64,
    pub halfwave_vpm_rthz: f64,
    pub fixed_vpm_rthz: f64,
}

/// Fixed-length baseline used by the curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedDipole {
    pub length_m: f64,
    pub efficiency: f64,
}

impl Default for FixedDipole {
    fn default() -> Self {
        Self {
            length_m: FIXED_DIPOLE_LENGTH_M,
            efficiency: FIXED_DIPOLE_EFFICIENCY,
        }
    }
}

/// SQL, half-wave and fixed-length limits on a strictly increasing grid.
///
/// Each frequency takes |μ| from the nearest transition in `table`. Where the
/// fixed dipole is no longer short (length ≥ λ/2) it is assumed to be
/// operated as a half-wave dipole, so that column equals the half-wave one.
pub fn sensitivity_curve(
    grid_hz: &[f64],
    table: &[Transition],
    sensor: &AtomSensorParams,
    fixed: &FixedDipole,
    constants: &PhysicalConstants,
) -> Result<Vec<SensitivityRow>> {
    if grid_hz.is_empty() || grid_hz.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
        return Err(Error::Validation(
            "frequency grid must be non-empty and positive".into(),
        ));
    }
    if grid_hz.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Validation(
            "frequency grid must be strictly increasing".into(),
        ));
    }
    grid_hz
        .iter()
        .map(|&f| {
            let t = nearest_transition(table, f)?;
            let sql = sql_sensitivity(&sensor.with_dipole(t.dipole_moment), constants);
            let halfwave = thermal_sensitivity(&ClassicAntennaParams::half_wave(f), constants)?;
            let fixed = match thermal_sensitivity(
                &ClassicAntennaParams::fixed_length(f, fixed.length_m, fixed.efficiency),
                constants,
            ) {
                Err(Error::ModelDomain(_)) => halfwave,
                other => other?,
            };
            Ok(SensitivityRow {
                freq_hz: f,
                sql_vpm_rthz: sql,
                halfwave_vpm_rthz: halfwave,
                fixed_vpm_rthz: fixed,
            })
        })
        .collect()
}

pub fn write_curve_csv<W: Write>(rows: &[SensitivityRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_curve_csv_path(rows: &[SensitivityRow], path: &Path) -> Result<()> {
    write_curve_csv(rows, std::fs::File::create(path)?)
}

/// `count` log-spaced points from `start` to `stop` inclusive.
pub fn log_grid(start: f64, stop: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![start];
    }
    let (a, b) = (start.ln(), stop.ln());
    (0..count)
        .map(|k| (a + (b - a) * k as f64 / (count - 1) as f64).exp())
        .collect()
}
