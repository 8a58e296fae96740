//! Incident fields, the reference field and their conversion to Rabi frequency.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::registry::{PhysicalConstants, Transition};

/// Complex baseband samples of `E(t)` (V/m) around `carrier_hz`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldEnvelope {
    carrier_hz: f64,
    sample_rate_hz: f64,
    samples: Vec<Complex64>,
}

impl FieldEnvelope {
    pub fn new(carrier_hz: f64, sample_rate_hz: f64, samples: Vec<Complex64>) -> Result<Self> {
        if !(carrier_hz.is_finite() && carrier_hz >= 0.0) {
            return Err(Error::Validation(format!(
                "carrier must be non-negative, got {carrier_hz}"
            )));
        }
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::Validation(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        if samples
            .iter()
            .any(|z| !(z.re.is_finite() && z.im.is_finite()))
        {
            return Err(Error::Validation("field samples must be finite".into()));
        }
        Ok(Self {
            carrier_hz,
            sample_rate_hz,
            samples,
        })
    }

    pub fn carrier_hz(&self) -> f64 {
        self.carrier_hz
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Sample instant `k / fs`.
    pub fn time(&self, k: usize) -> f64 {
        k as f64 / self.sample_rate_hz
    }

    pub fn peak_amplitude(&self) -> f64 {
        self.samples.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Checks the Nyquist condition for a signal occupying `bandwidth_hz`.
    pub fn check_bandwidth(&self, bandwidth_hz: f64) -> Result<()> {
        if self.sample_rate_hz <= 2.0 * bandwidth_hz {
            return Err(Error::Aliasing {
                offset_hz: bandwidth_hz,
                nyquist_hz: self.sample_rate_hz / 2.0,
            });
        }
        Ok(())
    }

    /// Writes interleaved little-endian `f32` (re, im) pairs to `path` and a
    /// JSON sidecar `path.json` with `carrier_hz` and `sample_rate_hz`.
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut bytes = Vec::with_capacity(self.samples.len() * 8);
        for z in &self.samples {
            bytes.extend_from_slice(&(z.re as f32).to_le_bytes());
            bytes.extend_from_slice(&(z.im as f32).to_le_bytes());
        }
        fs::write(path, bytes)?;
        let meta = WaveformMeta {
            carrier_hz: self.carrier_hz,
            sample_rate_hz: self.sample_rate_hz,
        };
        let json = serde_json::to_string_pretty(&meta).map_err(|e| Error::Io(e.to_string()))?;
        fs::write(sidecar_path(path), json)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        if bytes.len() % 8 != 0 {
            return Err(Error::Config(format!(
                "{}: length {} is not a whole number of complex64 samples",
                path.display(),
                bytes.len()
            )));
        }
        let sidecar = sidecar_path(path);
        let text = fs::read_to_string(&sidecar)?;
        let meta: WaveformMeta = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", sidecar.display())))?;
        let f = |c: &[u8]| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64;
        let samples = bytes
            .chunks_exact(8)
            .map(|c| Complex64::new(f(&c[..4]), f(&c[4..])))
            .collect();
        Self::new(meta.carrier_hz, meta.sample_rate_hz, samples)
    }
}

#[derive(Serialize, Deserialize)]
struct WaveformMeta {
    carrier_hz: f64,
    sample_rate_hz: f64,
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Known local field `A_r·e^{j(2π·offset·t + phase)}` added to the signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceField {
    /// V/m.
    pub amplitude: f64,
    /// Offset from the signal carrier, Hz.
    pub offset_hz: f64,
    /// rad.
    pub phase: f64,
}

impl ReferenceField {
    pub fn new(amplitude: f64, offset_hz: f64, phase: f64) -> Result<Self> {
        let r = Self {
            amplitude,
            offset_hz,
            phase,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude.is_finite() && self.amplitude >= 0.0) {
            return Err(Error::Validation(format!(
                "reference amplitude must be non-negative, got {}",
                self.amplitude
            )));
        }
        if !(self.offset_hz.is_finite() && self.phase.is_finite()) {
            return Err(Error::Validation(
                "reference offset and phase must be finite".into(),
            ));
        }
        Ok(())
    }

    /// Reference phasor at time `t`.
    pub fn at(&self, t: f64) -> Complex64 {
        Complex64::from_polar(self.amplitude, 2.0 * PI * self.offset_hz * t + self.phase)
    }
}

/// Dipole coupling of one RF transition to the incident field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldCoupling {
    /// |μ|, C·m.
    pub dipole_moment: f64,
    /// Projection of the field polarisation onto μ, in [0, 1].
    pub polarization: f64,
    pub hbar: f64,
}

impl FieldCoupling {
    pub fn new(dipole_moment: f64, constants: &PhysicalConstants) -> Self {
        Self {
            dipole_moment,
            polarization: 1.0,
            hbar: constants.hbar,
        }
    }

    pub fn for_transition(t: &Transition, constants: &PhysicalConstants) -> Self {
        Self::new(t.dipole_moment, constants)
    }

    /// `μ·p/ħ`, rad/s per V/m.
    pub fn rabi_per_field(&self) -> f64 {
        self.dipole_moment * self.polarization / self.hbar
    }

    /// Generalised Rabi frequency for field `e` and detuning `δ`.
    pub fn rabi(&self, e: Complex64, detuning: f64) -> f64 {
        (self.rabi_per_field() * e.norm()).hypot(detuning)
    }

    /// Field magnitude that produces a resonant Rabi frequency `omega`.
    pub fn field_for_rabi(&self, omega: f64) -> f64 {
        omega / self.rabi_per_field()
    }
}

/// `Ω = √(|μE|²/ħ² + δ²)` for co-polarised μ and E, with ħ from the default
/// constants.
pub fn rabi_from_field(dipole_moment: f64, e_field: Complex64, detuning: f64) -> f64 {
    FieldCoupling::new(dipole_moment, &PhysicalConstants::default()).rabi(e_field, detuning)
}

/// Per-sample `Ω(t) = (μ/ħ)|E(t) + E_r(t)|`.
pub fn heterodyne_superpose(
    signal: &FieldEnvelope,
    reference: &ReferenceField,
    coupling: &FieldCoupling,
) -> Vec<f64> {
    let scale = coupling.rabi_per_field();
    signal
        .samples
        .iter()
        .enumerate()
        .map(|(k, e)| scale * (e + reference.at(signal.time(k))).norm())
        .collect()
}

/// First-order expansion `(μ/ħ)(A_r + ℜ{E(t)e^{−j(2π·offset·t + phase)}})`,
/// accurate when `A_r ≫ |E|`.
pub fn heterodyne_linearized(
    signal: &FieldEnvelope,
    reference: &ReferenceField,
    coupling: &FieldCoupling,
) -> Vec<f64> {
    let scale = coupling.rabi_per_field();
    signal
        .samples
        .iter()
        .enumerate()
        .map(|(k, e)| {
            let t = signal.time(k);
            let rot =
                Complex64::from_polar(1.0, -(2.0 * PI * reference.offset_hz * t + reference.phase));
            scale * (reference.amplitude + (e * rot).re)
        })
        .collect()
}
