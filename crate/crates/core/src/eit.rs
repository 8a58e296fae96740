//! Probe-transmission readout of the atomic state.
//!
//! Level 0 is the ground state, level 1 the intermediate state reached by the
//! probe laser. The observable is the probe coherence `ρ₂₁ = ρ[1, 0]`, whose
//! imaginary part sets the absorption of the probe beam.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::{
    evolve_driven, steady_state, DecayRates, DensityMatrix, DrivenGenerator, LevelSystem,
};

/// Default laser settings of the simulated receiver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EitParams {
    /// Probe Rabi frequency, rad/s.
    pub probe_rabi: f64,
    /// Coupling-laser Rabi frequency, rad/s.
    pub coupling_rabi: f64,
    pub rates: DecayRates,
    /// On-resonance optical depth of the cell.
    pub od: f64,
}

impl Default for EitParams {
    fn default() -> Self {
        Self {
            probe_rabi: 2.0 * PI * 0.5e6,
            coupling_rabi: 2.0 * PI * 4.0e6,
            rates: DecayRates::default(),
            od: 1.0,
        }
    }
}

impl EitParams {
    /// Resonant lasers plus one RF transition per `(Ω, Δ)` entry.
    pub fn system(&self, probe_detuning: f64, rf: &[(f64, f64)]) -> Result<LevelSystem> {
        LevelSystem::eit_with_rf(
            self.probe_rabi,
            probe_detuning,
            self.coupling_rabi,
            0.0,
            rf,
            self.rates,
        )
    }
}

/// A probe-detuning scan over a fixed level system.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSweep {
    system: LevelSystem,
    detunings: Vec<f64>,
    od: f64,
    probe: usize,
}

impl ProbeSweep {
    /// `detunings` in rad/s, strictly increasing. The probe coupling (0↔1)
    /// detuning of `system` is overwritten at each grid point.
    pub fn new(system: LevelSystem, detunings: Vec<f64>, od: f64) -> Result<Self> {
        let probe = system.coupling_index(0, 1).ok_or_else(|| {
            Error::Validation("system has no probe coupling between levels 0 and 1".into())
        })?;
        if detunings.is_empty() || detunings.iter().any(|d| !d.is_finite()) {
            return Err(Error::Validation(
                "detuning grid must be non-empty and finite".into(),
            ));
        }
        if detunings.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Validation(
                "detuning grid must be strictly increasing".into(),
            ));
        }
        if !(od.is_finite() && od > 0.0) {
            return Err(Error::Validation(format!(
                "optical depth must be positive, got {od}"
            )));
        }
        Ok(Self {
            system,
            detunings,
            od,
            probe,
        })
    }

    /// `points` evenly spaced detunings over `[start, stop]` (rad/s).
    pub fn linspace(
        system: LevelSystem,
        start: f64,
        stop: f64,
        points: usize,
        od: f64,
    ) -> Result<Self> {
        if points < 2 {
            return Err(Error::Validation(
                "a sweep needs at least two points".into(),
            ));
        }
        let step = (stop - start) / (points - 1) as f64;
        let grid = (0..points).map(|k| start + step * k as f64).collect();
        Self::new(system, grid, od)
    }

    pub fn system(&self) -> &LevelSystem {
        &self.system
    }

    pub fn detunings(&self) -> &[f64] {
        &self.detunings
    }

    pub fn od(&self) -> f64 {
        self.od
    }
}

/// Probe transmission sampled on a detuning grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EitTrace {
    detunings: Vec<f64>,
    transmission: Vec<f64>,
}

impl EitTrace {
    pub fn new(detunings: Vec<f64>, transmission: Vec<f64>) -> Result<Self> {
        if detunings.len() != transmission.len() || detunings.is_empty() {
            return Err(Error::Validation(
                "trace needs one transmission value per detuning".into(),
            ));
        }
        if detunings.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Validation(
                "trace detunings must be strictly increasing".into(),
            ));
        }
        if transmission.iter().any(|t| !(*t > 0.0 && *t <= 1.0)) {
            return Err(Error::Validation("transmission must lie in (0, 1]".into()));
        }
        Ok(Self {
            detunings,
            transmission,
        })
    }

    /// rad/s.
    pub fn detunings(&self) -> &[f64] {
        &self.detunings
    }

    pub fn transmission(&self) -> &[f64] {
        &self.transmission
    }

    /// Two columns `detuning_Hz,transmission`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["detuning_Hz", "transmission"])?;
        for (d, t) in self.detunings.iter().zip(&self.transmission) {
            w.write_record([(d / (2.0 * PI)).to_string(), t.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_path(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// `ρ₂₁` with the probe phase removed, so absorption shows up in the
/// imaginary part regardless of the phase convention of `Ω_p`.
fn probe_coherence(sys: &LevelSystem, rho: &DensityMatrix) -> Complex64 {
    let phase = sys
        .coupling_index(0, 1)
        .map(|k| sys.couplings()[k].rabi)
        .filter(|r| r.norm() > 0.0)
        .map(|r| r.conj() / r.norm())
        .unwrap_or(Complex64::new(1.0, 0.0));
    rho.element(1, 0) * phase
}

/// Resonant two-level absorption `Im ρ₂₁` with the probe Rabi frequency and
/// intermediate decay of `sys`.
pub fn two_level_absorption(sys: &LevelSystem) -> Result<f64> {
    let probe = sys.coupling_index(0, 1).ok_or_else(|| {
        Error::Validation("system has no probe coupling between levels 0 and 1".into())
    })?;
    let omega = sys.couplings()[probe].rabi.norm();
    let gamma: f64 = sys
        .decays()
        .iter()
        .filter(|d| d.from == 1 && d.to == 0)
        .map(|d| d.rate)
        .sum();
    if omega == 0.0 || gamma == 0.0 {
        return Err(Error::Validation(
            "reference absorption needs a non-zero probe Rabi frequency and intermediate decay"
                .into(),
        ));
    }
    let bare = LevelSystem::ladder(&[omega], &[0.0], &[gamma])?;
    let rho = steady_state(&bare)?;
    Ok(probe_coherence(&bare, &rho).im)
}

/// Normalised absorption `a = Im ρ₂₁ / Im ρ₂₁^{2lv}`, clamped at zero.
pub fn absorption(sys: &LevelSystem, reference: f64) -> Result<f64> {
    let rho = steady_state(sys)?;
    Ok((probe_coherence(sys, &rho).im / reference).max(0.0))
}

/// Beer-Lambert transmission `exp(−OD·a)` at each grid point.
pub fn transmission_spectrum(sweep: &ProbeSweep) -> Result<EitTrace> {
    let reference = two_level_absorption(&sweep.system)?;
    let transmission = sweep
        .detunings
        .par_iter()
        .map(|&d| {
            let sys = sweep.system.with_detuning(sweep.probe, d);
            absorption(&sys, reference).map(|a| (-sweep.od * a).exp())
        })
        .collect::<Result<Vec<f64>>>()?;
    EitTrace::new(sweep.detunings.clone(), transmission)
}

/// Vertex abscissa of the parabola through three points.
fn parabola_vertex(x: [f64; 3], y: [f64; 3]) -> f64 {
    let d1 = (y[1] - y[0]) / (x[1] - x[0]);
    let d2 = (y[2] - y[1]) / (x[2] - x[1]);
    let curvature = (d2 - d1) / (x[2] - x[0]);
    if curvature >= 0.0 || !curvature.is_finite() {
        return x[1];
    }
    // y = y0 + d1 (x − x0) + c (x − x0)(x − x1); dy/dx = 0
    let v = 0.5 * (x[0] + x[1]) - d1 / (2.0 * curvature);
    v.clamp(x[0], x[2])
}

/// Separation (Hz) of the two highest transmission maxima.
///
/// Plateaus count once, at their left edge. Equal-height candidates are
/// resolved in favour of the outermost pair.
pub fn peak_splitting(trace: &EitTrace) -> Result<f64> {
    let t = &trace.transmission;
    let x = &trace.detunings;
    let maxima: Vec<usize> = (1..t.len().saturating_sub(1))
        .filter(|&i| t[i] > t[i - 1] && t[i] >= t[i + 1])
        .collect();
    if maxima.len() < 2 {
        return Err(Error::NoSplitting {
            found: maxima.len(),
        });
    }
    let same = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs());
    let top = maxima
        .iter()
        .map(|&i| t[i])
        .fold(f64::NEG_INFINITY, f64::max);
    let tied: Vec<usize> = maxima
        .iter()
        .copied()
        .filter(|&i| same(t[i], top))
        .collect();
    let (a, b) = if tied.len() >= 2 {
        (tied[0], *tied.last().unwrap())
    } else {
        let first = tied[0];
        let rest: Vec<usize> = maxima.iter().copied().filter(|&i| i != first).collect();
        let second_height = rest.iter().map(|&i| t[i]).fold(f64::NEG_INFINITY, f64::max);
        let second = rest
            .iter()
            .copied()
            .filter(|&i| same(t[i], second_height))
            .max_by_key(|&i| i.abs_diff(first))
            .unwrap();
        (first.min(second), first.max(second))
    };
    let refine = |i: usize| parabola_vertex([x[i - 1], x[i], x[i + 1]], [t[i - 1], t[i], t[i + 1]]);
    Ok((refine(b) - refine(a)).abs() / (2.0 * PI))
}

/// `Ω = calibration · 2π · splitting`.
pub fn rabi_readout(splitting_hz: f64, calibration: f64) -> f64 {
    calibration * 2.0 * PI * splitting_hz
}

/// Additive Gaussian noise of standard deviation `gain · density · √bandwidth`.
///
/// `density` is the equivalent input field noise (V/m/√Hz); `gain` maps the
/// field domain onto the units of `samples`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub density: f64,
    pub bandwidth_hz: f64,
    pub gain: f64,
}

impl NoiseSpec {
    pub fn new(density: f64, bandwidth_hz: f64) -> Self {
        Self {
            density,
            bandwidth_hz,
            gain: 1.0,
        }
    }

    pub fn none() -> Self {
        Self::new(0.0, 1.0)
    }

    pub fn with_gain(self, gain: f64) -> Self {
        Self { gain, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.density.is_finite() && self.density >= 0.0) {
            return Err(Error::Validation(format!(
                "noise density must be non-negative, got {}",
                self.density
            )));
        }
        if !(self.bandwidth_hz.is_finite() && self.bandwidth_hz > 0.0) {
            return Err(Error::Validation(format!(
                "bandwidth must be positive, got {}",
                self.bandwidth_hz
            )));
        }
        if !self.gain.is_finite() {
            return Err(Error::Validation("noise gain must be finite".into()));
        }
        Ok(())
    }

    /// Field-domain standard deviation `density · √bandwidth`.
    pub fn field_sigma(&self) -> f64 {
        self.density * self.bandwidth_hz.sqrt()
    }

    pub fn output_sigma(&self) -> f64 {
        (self.gain * self.field_sigma()).abs()
    }

    pub fn apply(&self, samples: &[f64], seed: u64) -> Result<Vec<f64>> {
        self.validate()?;
        let sigma = self.output_sigma();
        if sigma == 0.0 {
            return Ok(samples.to_vec());
        }
        let normal = Normal::new(0.0, sigma).map_err(|e| Error::Validation(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(samples
            .iter()
            .map(|s| s + normal.sample(&mut rng))
            .collect())
    }
}

/// Adds field-equivalent Gaussian noise with σ = `density · √bandwidth`.
pub fn detector_noise(
    samples: &[f64],
    density: f64,
    bandwidth_hz: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    NoiseSpec::new(density, bandwidth_hz).apply(samples, seed)
}

/// Amplitude-modulation frequencies and depth for [`response_bandwidth`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModulationSweep {
    /// Index of the RF coupling being modulated.
    pub rf_coupling: usize,
    /// Strictly increasing modulation frequencies, Hz.
    pub frequencies_hz: Vec<f64>,
    /// Fractional modulation depth `m` in `Ω(t) = Ω₀(1 + m sin 2πft)`.
    pub depth: f64,
    /// Time allowed for the switch-on transient, in units of `1/Γ_min`.
    pub settle: f64,
}

impl ModulationSweep {
    /// Log-spaced grid from `start_hz` to `stop_hz`.
    pub fn log_spaced(rf_coupling: usize, start_hz: f64, stop_hz: f64, points: usize) -> Self {
        let (a, b) = (start_hz.ln(), stop_hz.ln());
        let frequencies_hz = (0..points)
            .map(|k| (a + (b - a) * k as f64 / (points.max(2) - 1) as f64).exp())
            .collect();
        Self {
            rf_coupling,
            frequencies_hz,
            depth: 0.01,
            settle: 10.0,
        }
    }
}

/// Measured modulation transfer `|response(f)| / |response(0)|`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthResult {
    pub bandwidth_hz: f64,
    pub frequencies_hz: Vec<f64>,
    pub response: Vec<f64>,
}

/// Quasi-static sensitivity `d Im ρ₂₁ / dΩ` by central difference.
fn static_slope(sys: &LevelSystem, index: usize) -> Result<f64> {
    let omega0 = sys.couplings()[index].rabi;
    let h = 1e-4 * omega0.norm();
    let plus = sys.with_rabi(index, omega0 * (1.0 + 1e-4));
    let minus = sys.with_rabi(index, omega0 * (1.0 - 1e-4));
    let yp = probe_coherence(&plus, &steady_state(&plus)?).im;
    let ym = probe_coherence(&minus, &steady_state(&minus)?).im;
    Ok((yp - ym) / (2.0 * h))
}

/// Lock-in amplitude of `Im ρ₂₁` under sinusoidal modulation of one coupling.
fn modulated_amplitude(
    sys: &LevelSystem,
    gen: &DrivenGenerator,
    freq: f64,
    depth: f64,
    settle: f64,
) -> Result<f64> {
    let period = 1.0 / freq;
    let per_cycle = (period / sys.stable_step()).ceil().max(32.0) as usize;
    let h = period / per_cycle as f64;
    let settle_cycles = (settle * freq).ceil() as usize;
    let window_cycles = 1usize;
    let total = settle_cycles + window_cycles;
    let rho0 = steady_state(sys)?;
    let phase = sys
        .coupling_index(0, 1)
        .map(|k| sys.couplings()[k].rabi)
        .unwrap_or(Complex64::new(1.0, 0.0));
    let unrot = if phase.norm() > 0.0 {
        phase.conj() / phase.norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    let n = sys.num_levels();
    let start = settle_cycles * per_cycle;
    let mut k = 0usize;
    let mut acc = Complex64::new(0.0, 0.0);
    let w = 2.0 * PI * freq;
    evolve_driven(
        gen,
        |t| 1.0 + depth * (w * t).sin(),
        &rho0,
        total as f64 * period,
        h,
        |_, v| {
            if k > start {
                let y = (v[n] * unrot).im;
                let arg = 2.0 * PI * ((k - start) % per_cycle) as f64 / per_cycle as f64;
                acc += Complex64::from_polar(y, -arg);
            }
            k += 1;
        },
    )?;
    let samples = (window_cycles * per_cycle) as f64;
    Ok(2.0 * acc.norm() / samples)
}

/// Normalised modulation transfer of `Im ρ₂₁` at each grid frequency, from
/// RK4 integration of the modulated master equation.
///
/// The lock-in amplitude is divided by the quasi-static response
/// `|d Im ρ₂₁/dΩ| · m · Ω₀` obtained from steady states.
pub fn modulation_response(sys: &LevelSystem, sweep: &ModulationSweep) -> Result<Vec<f64>> {
    let idx = sweep.rf_coupling;
    if idx >= sys.couplings().len() || sys.couplings()[idx].rabi.norm() == 0.0 {
        return Err(Error::Validation(format!(
            "coupling {idx} is missing or undriven"
        )));
    }
    let f = &sweep.frequencies_hz;
    if f.len() < 2
        || f.iter().any(|v| !(v.is_finite() && *v > 0.0))
        || f.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(Error::Validation(
            "modulation grid must be positive and strictly increasing".into(),
        ));
    }
    if !(sweep.depth > 0.0 && sweep.depth < 1.0) || !(sweep.settle >= 0.0) {
        return Err(Error::Validation(
            "modulation depth must lie in (0, 1)".into(),
        ));
    }
    let gamma_min = sys
        .min_decay_rate()
        .ok_or_else(|| Error::NoUniqueSteadyState("system has no decay".into()))?;
    let slope = static_slope(sys, idx)?;
    let omega0 = sys.couplings()[idx].rabi.norm();
    let quasi_static = (slope * sweep.depth * omega0).abs();
    if quasi_static == 0.0 {
        return Err(Error::Validation(
            "probe coherence does not respond to this coupling".into(),
        ));
    }
    let gen = DrivenGenerator::for_coupling(sys, idx)?;
    let settle = sweep.settle / gamma_min;
    f.par_iter()
        .map(|&freq| {
            modulated_amplitude(sys, &gen, freq, sweep.depth, settle).map(|a| a / quasi_static)
        })
        .collect()
}

/// −3 dB frequency of [`modulation_response`], interpolated linearly in `log f`
/// between the last grid point above and the first below `1/√2`.
pub fn response_bandwidth(sys: &LevelSystem, sweep: &ModulationSweep) -> Result<BandwidthResult> {
    let response = modulation_response(sys, sweep)?;
    let f = &sweep.frequencies_hz;
    let half = std::f64::consts::FRAC_1_SQRT_2;
    if response[0] < half {
        return Err(Error::Bracket);
    }
    let k = (1..response.len())
        .find(|&k| response[k] < half)
        .ok_or(Error::Bracket)?;
    let (r0, r1) = (response[k - 1], response[k]);
    let (l0, l1) = (f[k - 1].ln(), f[k].ln());
    let bandwidth_hz = (l0 + (r0 - half) / (r0 - r1) * (l1 - l0)).exp();
    Ok(BandwidthResult {
        bandwidth_hz,
        frequencies_hz: f.clone(),
        response,
    })
}
