//! Frequency-division multiplexing over the magnitude-only atomic receiver.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::field::{heterodyne_superpose, FieldCoupling, FieldEnvelope, ReferenceField};
use super::receive::{quasi_static_receive, ReceiveMode, ReceiveOptions, Receiver};
use crate::eit::NoiseSpec;
use crate::error::{Error, Result};

/// Baseband subcarrier frequencies and the symbol duration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdmGrid {
    pub subcarriers_hz: Vec<f64>,
    pub symbol_duration_s: f64,
}

impl FdmGrid {
    /// `count` subcarriers at `spacing, 2·spacing, …`.
    pub fn uniform(count: usize, spacing_hz: f64, symbol_duration_s: f64) -> Self {
        Self {
            subcarriers_hz: (1..=count).map(|k| k as f64 * spacing_hz).collect(),
            symbol_duration_s,
        }
    }

    fn is_integer(x: f64) -> bool {
        (x - x.round()).abs() <= 1e-9 * x.abs().max(1.0)
    }

    /// Samples per symbol, after checking that every subcarrier completes a
    /// whole number of cycles per symbol.
    pub fn samples_per_symbol(&self, sample_rate_hz: f64) -> Result<usize> {
        if self.subcarriers_hz.is_empty() || !(self.symbol_duration_s > 0.0) {
            return Err(Error::Validation(
                "FDM grid needs subcarriers and a positive symbol duration".into(),
            ));
        }
        for &f in &self.subcarriers_hz {
            if !Self::is_integer(f * self.symbol_duration_s) {
                return Err(Error::Orthogonality(format!(
                    "subcarrier {f} Hz runs {:.4} cycles per symbol",
                    f * self.symbol_duration_s
                )));
            }
        }
        let sps = sample_rate_hz * self.symbol_duration_s;
        if !Self::is_integer(sps) || sps.round() < 1.0 {
            return Err(Error::Orthogonality(format!(
                "symbol spans {sps:.4} samples"
            )));
        }
        Ok(sps.round() as usize)
    }
}

/// `E(t) = amplitude · Σ_k b_k(s) e^{j2πf_k t}` with `bits[s][k] ∈ {±1}`.
pub fn fdm_modulate(
    bits: &[Vec<f64>],
    amplitude: f64,
    grid: &FdmGrid,
    carrier_hz: f64,
    sample_rate_hz: f64,
) -> Result<FieldEnvelope> {
    let sps = grid.samples_per_symbol(sample_rate_hz)?;
    let mut samples = Vec::with_capacity(bits.len() * sps);
    for (s, row) in bits.iter().enumerate() {
        if row.len() != grid.subcarriers_hz.len() {
            return Err(Error::Validation(
                "one symbol per subcarrier expected".into(),
            ));
        }
        for i in 0..sps {
            let t = (s * sps + i) as f64 / sample_rate_hz;
            let e: Complex64 = row
                .iter()
                .zip(&grid.subcarriers_hz)
                .map(|(b, f)| Complex64::from_polar(amplitude * b, 2.0 * PI * f * t))
                .sum();
            samples.push(e);
        }
    }
    FieldEnvelope::new(carrier_hz, sample_rate_hz, samples)
}

/// Receiver chain used by [`fdm_demod`].
#[derive(Debug, Clone)]
pub struct FdmChain<'a> {
    pub receiver: &'a Receiver,
    pub coupling: FieldCoupling,
    /// Equivalent-input field noise; its gain is set from `coupling`.
    pub noise: NoiseSpec,
    pub seed: u64,
    pub mode: ReceiveMode,
    /// Leading symbol periods that carry `+1` on every subcarrier.
    pub pilot_symbols: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdmOutput {
    /// Decisions `[symbol][subcarrier]`, pilots included.
    pub symbols: Vec<Vec<f64>>,
    /// `C[i][j]`: fraction of the output change caused by flipping subcarrier
    /// `j` that lands on subcarrier `i`. Columns sum to one.
    pub crosstalk: DMatrix<f64>,
}

struct Projector {
    freqs: Vec<f64>,
    sps: usize,
    fs: f64,
}

impl Projector {
    /// `z[s][k] = (2/N) Σ (p − p̄_s) e^{−j2πf_k t}` over symbol `s`.
    fn project(&self, power: &[f64]) -> Vec<Vec<Complex64>> {
        power
            .chunks_exact(self.sps)
            .enumerate()
            .map(|(s, block)| {
                let mean = block.iter().sum::<f64>() / self.sps as f64;
                self.freqs
                    .iter()
                    .map(|f| {
                        let acc: Complex64 = block
                            .iter()
                            .enumerate()
                            .map(|(i, p)| {
                                let t = (s * self.sps + i) as f64 / self.fs;
                                Complex64::from_polar(p - mean, -2.0 * PI * f * t)
                            })
                            .sum();
                        acc * (2.0 / self.sps as f64)
                    })
                    .collect()
            })
            .collect()
    }
}

fn receive(
    env: &FieldEnvelope,
    reference: &ReferenceField,
    chain: &FdmChain,
    noise: &NoiseSpec,
) -> Result<Vec<f64>> {
    let rabi = heterodyne_superpose(env, reference, &chain.coupling);
    let opts = ReceiveOptions {
        mode: chain.mode,
        bandwidth: None,
    };
    quasi_static_receive(chain.receiver, &rabi, noise, chain.seed, &opts)
}

/// Per-subcarrier BPSK decisions and the crosstalk matrix of the chain.
///
/// Without a reference the receiver sees only `|E(t)|`, so subcarriers mix.
/// With a strong reference the response is linear in `E` and each
/// subcarrier is recovered by projection onto its own frequency (shifted by
/// the reference offset). Gains and signs come from the pilot symbols.
pub fn fdm_demod(
    env: &FieldEnvelope,
    reference: Option<&ReferenceField>,
    grid: &FdmGrid,
    chain: &FdmChain,
) -> Result<FdmOutput> {
    let fs = env.sample_rate_hz();
    let sps = grid.samples_per_symbol(fs)?;
    let none = ReferenceField::new(0.0, 0.0, 0.0)?;
    let reference = reference.unwrap_or(&none);
    reference.validate()?;
    let k = grid.subcarriers_hz.len();
    let proj = Projector {
        freqs: grid
            .subcarriers_hz
            .iter()
            .map(|f| f - reference.offset_hz)
            .collect(),
        sps,
        fs,
    };
    let symbols_count = env.len() / sps;
    if chain.pilot_symbols == 0 || chain.pilot_symbols > symbols_count {
        return Err(Error::Calibration(
            "FDM demodulation needs at least one pilot symbol".into(),
        ));
    }

    let noise = chain.noise.with_gain(chain.coupling.rabi_per_field());
    let z = proj.project(&receive(env, reference, chain, &noise)?);
    let gains: Vec<Complex64> = (0..k)
        .map(|i| {
            z[..chain.pilot_symbols]
                .iter()
                .map(|row| row[i])
                .sum::<Complex64>()
                / chain.pilot_symbols as f64
        })
        .collect();
    if gains.iter().any(|g| g.norm() == 0.0) {
        return Err(Error::Calibration(
            "a subcarrier has no pilot response".into(),
        ));
    }
    let symbols = z
        .iter()
        .map(|row| {
            row.iter()
                .zip(&gains)
                .map(|(v, g)| if (v / g).re >= 0.0 { 1.0 } else { -1.0 })
                .collect()
        })
        .collect();

    let quiet = NoiseSpec::none();
    let clean = proj.project(&receive(env, reference, chain, &quiet)?);
    let mut crosstalk = DMatrix::zeros(k, k);
    for j in 0..k {
        // negate subcarrier j's field component in every symbol
        let f = grid.subcarriers_hz[j];
        let mut flipped = env.samples().to_vec();
        for (s, block) in env.samples().chunks_exact(sps).enumerate() {
            let c: Complex64 = block
                .iter()
                .enumerate()
                .map(|(i, e)| {
                    e * Complex64::from_polar(1.0, -2.0 * PI * f * ((s * sps + i) as f64 / fs))
                })
                .sum::<Complex64>()
                / sps as f64;
            for i in 0..sps {
                let t = (s * sps + i) as f64 / fs;
                flipped[s * sps + i] -= 2.0 * c * Complex64::from_polar(1.0, 2.0 * PI * f * t);
            }
        }
        let flipped = FieldEnvelope::new(env.carrier_hz(), fs, flipped)?;
        let alt = proj.project(&receive(&flipped, reference, chain, &quiet)?);
        let energy: Vec<f64> = (0..k)
            .map(|i| {
                clean
                    .iter()
                    .zip(&alt)
                    .map(|(a, b)| (a[i] - b[i]).norm_sqr())
                    .sum()
            })
            .collect();
        let total: f64 = energy.iter().sum();
        for i in 0..k {
            crosstalk[(i, j)] = if total > 0.0 {
                energy[i] / total
            } else if i == j {
                1.0
            } else {
                0.0
            };
        }
    }
    Ok(FdmOutput { symbols, crosstalk })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthogonality_checks() {
        let g = FdmGrid::uniform(4, 2e3, 0.5e-3);
        assert_eq!(g.samples_per_symbol(32e3).unwrap(), 16);
        let bad = FdmGrid::uniform(4, 2e3, 0.7e-3);
        assert!(matches!(
            bad.samples_per_symbol(32e3),
            Err(Error::Orthogonality(_))
        ));
        assert!(matches!(
            g.samples_per_symbol(33e3),
            Err(Error::Orthogonality(_))
        ));
    }

    #[test]
    fn modulator_places_tones() {
        let g = FdmGrid::uniform(2, 2e3, 0.5e-3);
        let env = fdm_modulate(&[vec![1.0, -1.0]], 0.5, &g, 1e9, 32e3).unwrap();
        assert_eq!(env.len(), 16);
        assert!((env.samples()[0] - Complex64::new(0.0, 0.0)).norm() < 1e-15);
    }
}
