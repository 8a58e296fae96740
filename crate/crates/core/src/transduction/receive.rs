//! Quasi-static receive chain: Rabi-frequency series to probe transmission.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eit::{absorption, two_level_absorption, EitParams, NoiseSpec};
use crate::error::{Error, Result};
use crate::quantum::{evolve_driven, steady_state, DrivenGenerator, LevelSystem};

/// Fraction of the response bandwidth a signal may occupy before the
/// quasi-static approximation is refused.
pub const QUASI_STATIC_FRACTION: f64 = 0.2;

/// Default RF Rabi frequency at which the receiver is biased by its
/// reference field, rad/s. Weak enough that the transmission is close to
/// linear over a ±5 % swing.
pub const DEFAULT_OPERATING_RABI: f64 = 2.0 * PI * 1.0e6;

/// EIT receiver parked at a fixed probe detuning; maps an RF Rabi frequency
/// to probe transmission.
#[derive(Debug, Clone, PartialEq)]
pub struct Receiver {
    system: LevelSystem,
    rf: usize,
    od: f64,
    reference: f64,
}

impl Receiver {
    /// Uses the coupling between levels 2 and 3 as the RF input.
    pub fn new(system: LevelSystem, od: f64) -> Result<Self> {
        let rf = system.coupling_index(2, 3).ok_or_else(|| {
            Error::Validation("system has no RF coupling between levels 2 and 3".into())
        })?;
        Self::with_rf_coupling(system, rf, od)
    }

    pub fn with_rf_coupling(system: LevelSystem, rf: usize, od: f64) -> Result<Self> {
        if rf >= system.couplings().len() {
            return Err(Error::Validation(format!("no coupling with index {rf}")));
        }
        if !(od.is_finite() && od > 0.0) {
            return Err(Error::Validation(format!(
                "optical depth must be positive, got {od}"
            )));
        }
        let reference = two_level_absorption(&system)?;
        Ok(Self {
            system,
            rf,
            od,
            reference,
        })
    }

    /// Four-level receiver with the probe parked where `|dT/dΔ_p|` is largest
    /// for an RF Rabi frequency `omega_op`. The scan covers `±span` rad/s.
    pub fn at_steepest_slope(
        params: &EitParams,
        omega_op: f64,
        span: f64,
        points: usize,
    ) -> Result<Self> {
        let base = Self::new(params.system(0.0, &[(omega_op, 0.0)])?, params.od)?;
        base.park_at_steepest_slope(span, points)
    }

    /// Same receiver with the probe moved to the detuning in `±span` where
    /// `|dT/dΔ_p|` is largest, every coupling held at its current value.
    pub fn park_at_steepest_slope(&self, span: f64, points: usize) -> Result<Self> {
        if points < 3 {
            return Err(Error::Validation(
                "slope scan needs at least three points".into(),
            ));
        }
        let omega_op = self.system.couplings()[self.rf].rabi.norm();
        let step = 2.0 * span / (points - 1) as f64;
        let grid: Vec<f64> = (0..points).map(|k| -span + step * k as f64).collect();
        let t = grid
            .par_iter()
            .map(|&d| self.with_probe_detuning(d).transmission(omega_op))
            .collect::<Result<Vec<f64>>>()?;
        let slopes: Vec<f64> = (1..points - 1)
            .map(|k| ((t[k + 1] - t[k - 1]) / (2.0 * step)).abs())
            .collect();
        let top = slopes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // the spectrum is symmetric for resonant fields; near-ties resolve
        // towards positive detuning
        let k = slopes
            .iter()
            .rposition(|&s| s >= top * (1.0 - 1e-9))
            .unwrap();
        Ok(self.with_probe_detuning(grid[k + 1]))
    }

    /// [`Receiver::at_steepest_slope`] at [`DEFAULT_OPERATING_RABI`], scanning ±4 MHz.
    pub fn default_operating(params: &EitParams) -> Result<Self> {
        Self::at_steepest_slope(params, DEFAULT_OPERATING_RABI, 2.0 * PI * 4.0e6, 801)
    }

    pub fn with_probe_detuning(&self, detuning: f64) -> Self {
        let probe = self
            .system
            .coupling_index(0, 1)
            .expect("validated at construction");
        Self {
            system: self.system.with_detuning(probe, detuning),
            ..self.clone()
        }
    }

    pub fn system(&self) -> &LevelSystem {
        &self.system
    }

    pub fn rf_coupling(&self) -> usize {
        self.rf
    }

    pub fn od(&self) -> f64 {
        self.od
    }

    /// rad/s.
    pub fn probe_detuning(&self) -> f64 {
        let probe = self
            .system
            .coupling_index(0, 1)
            .expect("validated at construction");
        self.system.couplings()[probe].detuning
    }

    /// System with the RF Rabi frequency set to `omega`.
    pub fn system_at(&self, omega: f64) -> LevelSystem {
        self.system.with_rabi(self.rf, Complex64::new(omega, 0.0))
    }

    /// Steady-state transmission for RF Rabi frequency `omega`.
    pub fn transmission(&self, omega: f64) -> Result<f64> {
        let a = absorption(&self.system_at(omega), self.reference)?;
        Ok((-self.od * a).exp())
    }

    /// Transmission of an arbitrary variant of [`Receiver::system`] (for
    /// example with several RF couplings changed), with this receiver's
    /// normalisation and optical depth.
    pub fn transmission_of(&self, sys: &LevelSystem) -> Result<f64> {
        Ok((-self.od * absorption(sys, self.reference)?).exp())
    }

    /// `dT/dΩ` by central difference.
    pub fn slope(&self, omega: f64) -> Result<f64> {
        let h = 1e-4 * omega.abs().max(1.0);
        Ok((self.transmission(omega + h)? - self.transmission(omega - h)?) / (2.0 * h))
    }

    /// Transmission from a density-matrix vector (row-major).
    fn transmission_from_vec(&self, v: &nalgebra::DVector<Complex64>) -> f64 {
        let n = self.system.num_levels();
        let probe = self
            .system
            .coupling_index(0, 1)
            .expect("validated at construction");
        let rabi = self.system.couplings()[probe].rabi;
        let unrot = if rabi.norm() > 0.0 {
            rabi.conj() / rabi.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        let a = ((v[n] * unrot).im / self.reference).max(0.0);
        (-self.od * a).exp()
    }

    /// Chebyshev interpolant of `T(Ω)` on `[lo, hi]`.
    pub fn curve(&self, lo: f64, hi: f64, nodes: usize) -> Result<TransductionCurve> {
        TransductionCurve::new(lo, hi, nodes, |w| self.transmission(w))
    }
}

/// Barycentric interpolant on Chebyshev points of the second kind.
#[derive(Debug, Clone, PartialEq)]
pub struct TransductionCurve {
    lo: f64,
    hi: f64,
    nodes: Vec<f64>,
    values: Vec<f64>,
}

impl TransductionCurve {
    pub fn new<F>(lo: f64, hi: f64, count: usize, f: F) -> Result<Self>
    where
        F: Fn(f64) -> Result<f64> + Sync,
    {
        if !(lo.is_finite() && hi.is_finite() && hi > lo) || count < 2 {
            return Err(Error::Validation(
                "interpolation range must be finite with hi > lo and ≥ 2 nodes".into(),
            ));
        }
        let nodes: Vec<f64> = (0..count)
            .map(|k| {
                let c = (PI * k as f64 / (count - 1) as f64).cos();
                0.5 * (lo + hi) + 0.5 * (hi - lo) * c
            })
            .collect();
        let values = nodes
            .par_iter()
            .map(|&x| f(x))
            .collect::<Result<Vec<f64>>>()?;
        Ok(Self {
            lo,
            hi,
            nodes,
            values,
        })
    }

    pub fn range(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let last = self.nodes.len() - 1;
        let mut num = 0.0;
        let mut den = 0.0;
        for (k, (&xk, &yk)) in self.nodes.iter().zip(&self.values).enumerate() {
            let d = x - xk;
            if d == 0.0 {
                return yk;
            }
            let mut w = if k % 2 == 0 { 1.0 } else { -1.0 };
            if k == 0 || k == last {
                w *= 0.5;
            }
            num += w / d * yk;
            den += w / d;
        }
        num / den
    }
}

/// How [`quasi_static_receive`] evaluates the steady state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ReceiveMode {
    /// One steady-state solve per sample.
    Exact,
    /// Steady states on `nodes` Chebyshev points spanning the series, then
    /// interpolation.
    Interpolated { nodes: usize },
}

/// Signal bandwidth and the receiver's measured response bandwidth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandwidthCheck {
    pub signal_hz: f64,
    pub response_hz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceiveOptions {
    pub mode: ReceiveMode,
    pub bandwidth: Option<BandwidthCheck>,
}

impl Default for ReceiveOptions {
    fn default() -> Self {
        Self {
            mode: ReceiveMode::Exact,
            bandwidth: None,
        }
    }
}

/// Photodetector output for a Rabi-frequency series, assuming the atoms
/// follow the steady state at every sample.
///
/// `noise` is an equivalent-input field noise; its `gain` must convert field
/// to Rabi frequency (see [`crate::transduction::FieldCoupling::rabi_per_field`]).
/// The receiver slope `|dT/dΩ|` at the mean Rabi frequency completes the map
/// to transmission units.
pub fn quasi_static_receive(
    rx: &Receiver,
    rabi: &[f64],
    noise: &NoiseSpec,
    seed: u64,
    opts: &ReceiveOptions,
) -> Result<Vec<f64>> {
    noise.validate()?;
    if let Some(b) = opts.bandwidth {
        let limit = QUASI_STATIC_FRACTION * b.response_hz;
        if b.signal_hz > limit {
            return Err(Error::BandwidthViolation {
                signal_hz: b.signal_hz,
                limit_hz: limit,
            });
        }
    }
    if rabi.is_empty() {
        return Ok(Vec::new());
    }
    if rabi.iter().any(|w| !w.is_finite()) {
        return Err(Error::Validation("Rabi series must be finite".into()));
    }
    let lo = rabi.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = rabi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let clean = match opts.mode {
        ReceiveMode::Interpolated { nodes } if hi > lo => {
            let curve = rx.curve(lo, hi, nodes)?;
            rabi.par_iter().map(|&w| curve.eval(w)).collect()
        }
        ReceiveMode::Interpolated { .. } => vec![rx.transmission(lo)?; rabi.len()],
        ReceiveMode::Exact => rabi
            .par_iter()
            .map(|&w| rx.transmission(w))
            .collect::<Result<Vec<f64>>>()?,
    };
    if noise.output_sigma() == 0.0 {
        return Ok(clean);
    }
    let mean = rabi.iter().sum::<f64>() / rabi.len() as f64;
    let gain = rx.slope(mean)?.abs() * noise.gain;
    noise.with_gain(gain).apply(&clean, seed)
}

/// Reference path for signals too fast for [`quasi_static_receive`]: RK4
/// integration with `Ω(t)` linearly interpolated between samples, starting
/// from the steady state of the first sample. Returns noiseless transmission
/// at each sample instant.
pub fn evolve_receive(rx: &Receiver, rabi: &[f64], sample_rate_hz: f64) -> Result<Vec<f64>> {
    if rabi.is_empty() {
        return Ok(Vec::new());
    }
    if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
        return Err(Error::Validation("sample rate must be positive".into()));
    }
    let scale = rabi.iter().map(|w| w.abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Ok(vec![rx.transmission(0.0)?; rabi.len()]);
    }
    let sys = rx.system_at(scale);
    let gen = DrivenGenerator::for_coupling(&sys, rx.rf)?;
    let dt = 1.0 / sample_rate_hz;
    let per_sample = (dt / sys.stable_step()).ceil().max(1.0) as usize;
    let h = dt / per_sample as f64;
    let rho0 = steady_state(&rx.system_at(rabi[0]))?;
    let last = rabi.len() - 1;
    let envelope = |t: f64| {
        let x = (t * sample_rate_hz).clamp(0.0, last as f64);
        let k = (x.floor() as usize).min(last.saturating_sub(1));
        let frac = x - k as f64;
        let next = rabi[(k + 1).min(last)];
        (rabi[k] + frac * (next - rabi[k])) / scale
    };
    let mut out = Vec::with_capacity(rabi.len());
    let mut step = 0usize;
    evolve_driven(&gen, envelope, &rho0, last as f64 * dt, h, |_, v| {
        if step.is_multiple_of(per_sample) {
            out.push(rx.transmission_from_vec(v));
        }
        step += 1;
    })?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mhz(x: f64) -> f64 {
        2.0 * PI * x * 1e6
    }

    fn receiver() -> Receiver {
        Receiver::at_steepest_slope(&EitParams::default(), mhz(5.0), mhz(10.0), 401).unwrap()
    }

    #[test]
    fn operating_point_is_on_a_flank() {
        let rx = receiver();
        let d = rx.probe_detuning();
        assert!(d > 0.0 && d < mhz(5.0), "{}", d / mhz(1.0));
        assert!(rx.slope(mhz(5.0)).unwrap().abs() > 0.0);
    }

    #[test]
    fn constant_series_is_constant_output() {
        let rx = receiver();
        let out = quasi_static_receive(
            &rx,
            &[mhz(5.0); 8],
            &NoiseSpec::none(),
            0,
            &ReceiveOptions::default(),
        )
        .unwrap();
        let single = rx.transmission(mhz(5.0)).unwrap();
        assert!(out.iter().all(|&t| t == single));
    }

    #[test]
    fn interpolation_matches_exact() {
        let rx = receiver();
        let series: Vec<f64> = (0..50)
            .map(|k| mhz(4.5) + mhz(1.0) * (k as f64 * 0.37).sin().abs())
            .collect();
        let exact = quasi_static_receive(
            &rx,
            &series,
            &NoiseSpec::none(),
            0,
            &ReceiveOptions::default(),
        )
        .unwrap();
        let opts = ReceiveOptions {
            mode: ReceiveMode::Interpolated { nodes: 32 },
            bandwidth: None,
        };
        let interp = quasi_static_receive(&rx, &series, &NoiseSpec::none(), 0, &opts).unwrap();
        for (a, b) in exact.iter().zip(&interp) {
            assert!((a - b).abs() < 1e-9, "{a} {b}");
        }
    }

    #[test]
    fn bandwidth_violation() {
        let rx = receiver();
        let opts = ReceiveOptions {
            mode: ReceiveMode::Exact,
            bandwidth: Some(BandwidthCheck {
                signal_hz: 100e3,
                response_hz: 400e3,
            }),
        };
        let r = quasi_static_receive(&rx, &[mhz(5.0)], &NoiseSpec::none(), 0, &opts);
        assert!(matches!(r, Err(Error::BandwidthViolation { .. })));
    }

    #[test]
    fn chebyshev_interpolates_smooth_function() {
        let c =
            TransductionCurve::new(0.0, 2.0, 24, |x| Ok((x * 1.3).exp() / (1.0 + x * x))).unwrap();
        for k in 0..100 {
            let x = 0.02 * k as f64;
            assert!((c.eval(x) - (x * 1.3).exp() / (1.0 + x * x)).abs() < 1e-9);
        }
    }
}
