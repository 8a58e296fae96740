//! Symbol decisions on the photodetector series.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::field::{FieldCoupling, ReferenceField};
use super::receive::Receiver;
use crate::error::{Error, Result};

/// Per-symbol averages of consecutive blocks of `samples_per_symbol`
/// samples. A trailing partial block is dropped.
pub fn symbol_means(power: &[f64], samples_per_symbol: usize) -> Result<Vec<f64>> {
    if samples_per_symbol == 0 {
        return Err(Error::Validation(
            "samples per symbol must be at least 1".into(),
        ));
    }
    Ok(power
        .chunks_exact(samples_per_symbol)
        .map(|c| c.iter().sum::<f64>() / samples_per_symbol as f64)
        .collect())
}

fn nearest(x: f64, levels: &[f64]) -> usize {
    let mut best = 0;
    for (k, l) in levels.iter().enumerate() {
        if (x - l).abs() < (x - levels[best]).abs() {
            best = k;
        }
    }
    best
}

fn check_levels(levels: &[f64]) -> Result<()> {
    if levels.len() < 2 {
        return Err(Error::Calibration(
            "need at least two calibrated levels".into(),
        ));
    }
    if levels.iter().any(|l| !l.is_finite()) {
        return Err(Error::Calibration(
            "calibrated levels must be finite".into(),
        ));
    }
    let scale = levels
        .iter()
        .map(|l| l.abs())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    for i in 0..levels.len() {
        for j in 0..i {
            if (levels[i] - levels[j]).abs() <= 1e-12 * scale {
                return Err(Error::Calibration(format!("levels {j} and {i} coincide")));
            }
        }
    }
    Ok(())
}

/// Mean received level of each of `order` symbols from a known preamble.
pub fn calibrate_am_levels(
    power: &[f64],
    samples_per_symbol: usize,
    preamble: &[usize],
    order: usize,
) -> Result<Vec<f64>> {
    let means = symbol_means(power, samples_per_symbol)?;
    if means.len() < preamble.len() {
        return Err(Error::Calibration(
            "series is shorter than the preamble".into(),
        ));
    }
    let mut sum = vec![0.0; order];
    let mut count = vec![0usize; order];
    for (m, &s) in means.iter().zip(preamble) {
        if s >= order {
            return Err(Error::Calibration(format!(
                "preamble symbol {s} outside an order-{order} alphabet"
            )));
        }
        sum[s] += m;
        count[s] += 1;
    }
    if let Some(missing) = count.iter().position(|&c| c == 0) {
        return Err(Error::Calibration(format!(
            "preamble never sends symbol {missing}"
        )));
    }
    let levels: Vec<f64> = sum.iter().zip(&count).map(|(s, c)| s / *c as f64).collect();
    check_levels(&levels)?;
    Ok(levels)
}

/// Symbol-rate averaging then nearest-level decision.
pub fn demod_am(power: &[f64], samples_per_symbol: usize, levels: &[f64]) -> Result<Vec<usize>> {
    check_levels(levels)?;
    Ok(symbol_means(power, samples_per_symbol)?
        .into_iter()
        .map(|m| nearest(m, levels))
        .collect())
}

/// Expected transmission for each FM detuning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FmMap {
    /// rad/s.
    pub detunings: Vec<f64>,
    pub expected: Vec<f64>,
}

impl FmMap {
    /// Evaluates the receiver at `Ω = √((μ|E|/ħ)² + δ²)` for each detuning.
    pub fn build(
        rx: &Receiver,
        coupling: &FieldCoupling,
        field: f64,
        detunings: &[f64],
    ) -> Result<Self> {
        let expected = detunings
            .iter()
            .map(|&d| rx.transmission(coupling.rabi(Complex64::new(field, 0.0), d)))
            .collect::<Result<Vec<f64>>>()?;
        Ok(Self {
            detunings: detunings.to_vec(),
            expected,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FmOutput {
    pub symbols: Vec<usize>,
    /// Index pairs whose expected levels differ by no more than the noise
    /// floor; decisions between them are arbitrary (lower index wins).
    pub ambiguous: Vec<(usize, usize)>,
}

/// Maximum-likelihood decision over the expected per-detuning levels.
pub fn demod_fm(
    power: &[f64],
    samples_per_symbol: usize,
    map: &FmMap,
    noise_floor: f64,
) -> Result<FmOutput> {
    if map.expected.len() < 2 || map.expected.len() != map.detunings.len() {
        return Err(Error::Calibration(
            "FM map needs at least two detunings with expected levels".into(),
        ));
    }
    let mut ambiguous = Vec::new();
    for i in 0..map.expected.len() {
        for j in i + 1..map.expected.len() {
            if (map.expected[i] - map.expected[j]).abs() <= noise_floor.max(0.0) {
                ambiguous.push((i, j));
            }
        }
    }
    let symbols = symbol_means(power, samples_per_symbol)?
        .into_iter()
        .map(|m| nearest(m, &map.expected))
        .collect();
    Ok(FmOutput { symbols, ambiguous })
}

/// `e^{j(2πm/M + offset)}`.
pub fn psk_point(m: usize, order: usize, offset: f64) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * m as f64 / order as f64 + offset)
}

/// Nearest M-PSK index for a complex decision variable.
pub fn psk_decide(z: Complex64, order: usize, offset: f64) -> usize {
    let sector = 2.0 * PI / order as f64;
    let k = ((z.arg() - offset) / sector)
        .round()
        .rem_euclid(order as f64);
    k as usize % order
}

/// Heterodyne phase demodulation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PmConfig {
    pub reference: ReferenceField,
    pub sample_rate_hz: f64,
    pub samples_per_symbol: usize,
    /// PSK order M.
    pub order: usize,
    /// Rotation of the constellation (π/4 for Gray QPSK).
    pub constellation_offset: f64,
}

impl PmConfig {
    pub fn validate(&self) -> Result<()> {
        self.reference.validate()?;
        let nyquist = self.sample_rate_hz / 2.0;
        let offset = self.reference.offset_hz.abs();
        if offset == 0.0 {
            return Err(Error::Validation(
                "phase demodulation needs a non-zero reference offset".into(),
            ));
        }
        if offset >= nyquist {
            return Err(Error::Aliasing {
                offset_hz: offset,
                nyquist_hz: nyquist,
            });
        }
        if self.sample_rate_hz < 8.0 * offset {
            return Err(Error::Validation(format!(
                "need at least 8 samples per IF cycle, have {:.2}",
                self.sample_rate_hz / offset
            )));
        }
        if self.samples_per_symbol == 0 || self.order < 2 {
            return Err(Error::Validation(
                "need ≥ 1 sample per symbol and PSK order ≥ 2".into(),
            ));
        }
        Ok(())
    }
}

/// Per-symbol IF phasor `z = 2·mean((p − p̄)·e^{j(2π·offset·t + φ_r)})`.
///
/// For a linearised receiver `p ≈ p₀ + g·ℜ{E·e^{−j(2π·offset·t + φ_r)}}` this is
/// `g·E` averaged over the symbol.
pub fn pm_correlate(power: &[f64], cfg: &PmConfig) -> Result<Vec<Complex64>> {
    cfg.validate()?;
    let sps = cfg.samples_per_symbol;
    let w = 2.0 * PI * cfg.reference.offset_hz / cfg.sample_rate_hz;
    Ok(power
        .chunks_exact(sps)
        .enumerate()
        .map(|(s, block)| {
            let mean = block.iter().sum::<f64>() / sps as f64;
            let acc: Complex64 = block
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let k = s * sps + i;
                    Complex64::from_polar(p - mean, w * k as f64 + cfg.reference.phase)
                })
                .sum();
            acc * (2.0 / sps as f64)
        })
        .collect())
}

/// Least-squares complex gain from known pilot symbols.
pub fn pilot_gain(z: &[Complex64], pilots: &[Complex64]) -> Result<Complex64> {
    if pilots.is_empty() || z.len() < pilots.len() {
        return Err(Error::Calibration(
            "not enough received symbols for the pilots".into(),
        ));
    }
    let num: Complex64 = z.iter().zip(pilots).map(|(a, b)| a * b.conj()).sum();
    let den: f64 = pilots.iter().map(|p| p.norm_sqr()).sum();
    let g = num / den;
    if !(g.norm() > 0.0 && g.norm().is_finite()) {
        return Err(Error::Calibration("pilot correlation vanished".into()));
    }
    Ok(g)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PmOutput {
    pub symbols: Vec<usize>,
    /// Phase of each gain-corrected symbol, rad.
    pub phases: Vec<f64>,
    pub gain: Complex64,
}

/// Quadrature demodulation at the IF, pilot gain correction (the first
/// `pilots.len()` symbols are known), then nearest-phase decisions. With no
/// pilots the phase is referred to the reference field directly.
pub fn demod_pm(power: &[f64], cfg: &PmConfig, pilots: &[usize]) -> Result<PmOutput> {
    let z = pm_correlate(power, cfg)?;
    let gain = if pilots.is_empty() {
        Complex64::new(1.0, 0.0)
    } else {
        let known: Vec<Complex64> = pilots
            .iter()
            .map(|&m| psk_point(m, cfg.order, cfg.constellation_offset))
            .collect();
        pilot_gain(&z, &known)?
    };
    let corrected: Vec<Complex64> = z.iter().map(|v| v / gain).collect();
    Ok(PmOutput {
        symbols: corrected
            .iter()
            .map(|v| psk_decide(*v, cfg.order, cfg.constellation_offset))
            .collect(),
        phases: corrected.iter().map(|v| v.arg()).collect(),
        gain,
    })
}

/// Symbol error rate of Gray QPSK in AWGN at `Es/N0` (linear).
pub fn qpsk_ser(es_n0: f64) -> f64 {
    let q = crate::stats::q_function(es_n0.sqrt());
    2.0 * q - q * q
}

/// Bit error rate of BPSK at `Eb/N0` (linear).
pub fn bpsk_ber(eb_n0: f64) -> f64 {
    crate::stats::q_function((2.0 * eb_n0).sqrt())
}
