//! Classical fourth-order Runge-Kutta integration of the master equation.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::density::DensityMatrix;
use super::level::LevelSystem;
use super::solver::liouvillian;
use crate::error::{Error, Result};

const ONE: Complex64 = Complex64::new(1.0, 0.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Trace drift beyond which an integration is declared unstable.
pub const TRACE_DRIFT_LIMIT: f64 = 1e-6;
const CHECK_EVERY: usize = 256;

fn check_inputs(sys_levels: usize, rho0: &DensityMatrix, duration: f64, step: f64) -> Result<()> {
    if rho0.dim() != sys_levels {
        return Err(Error::Validation(format!(
            "initial state has dimension {}, system has {sys_levels} levels",
            rho0.dim()
        )));
    }
    if !(duration.is_finite() && duration >= 0.0) {
        return Err(Error::Validation(format!(
            "duration must be non-negative, got {duration}"
        )));
    }
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::Validation(format!(
            "step must be positive, got {step}"
        )));
    }
    Ok(())
}

/// Splits `duration` into an integer number of equal steps no longer than `step`.
fn step_count(duration: f64, step: f64) -> (usize, f64) {
    let n = ((duration / step) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    (n, duration / n as f64)
}

fn guard(v: &DVector<Complex64>, n: usize, step: f64) -> Result<()> {
    let trace: Complex64 = (0..n).map(|k| v[k * n + k]).sum();
    let drift = (trace - ONE).norm();
    let largest = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if !drift.is_finite()
        || !largest.is_finite()
        || drift > TRACE_DRIFT_LIMIT
        || largest > 1.0 + TRACE_DRIFT_LIMIT
    {
        return Err(Error::StepSize {
            step,
            reason: format!("trace drift {drift:e}, largest element {largest:e}"),
        });
    }
    Ok(())
}

fn finish(n: usize, v: &DVector<Complex64>) -> DensityMatrix {
    let mut rho = DensityMatrix::from_vec_unchecked(n, v);
    rho.hermitize();
    rho
}

/// Integrates `dρ/dt = Lρ` for `duration` seconds with steps of at most `step`.
///
/// Stable for `step ≤ 0.1 / sys.max_rate()`. Because `L` is constant the RK4
/// update is the fixed polynomial `1 + hL + (hL)²/2 + (hL)³/6 + (hL)⁴/24`,
/// which is assembled once and applied as a matrix-vector product per step.
pub fn evolve(
    sys: &LevelSystem,
    rho0: &DensityMatrix,
    duration: f64,
    step: f64,
) -> Result<DensityMatrix> {
    let n = sys.num_levels();
    check_inputs(n, rho0, duration, step)?;
    if duration == 0.0 {
        return Ok(rho0.clone());
    }
    let (steps, h) = step_count(duration, step);
    let l = liouvillian(sys)?;
    let prop = rk4_propagator(&l, h);

    let mut v = rho0.to_vec();
    let mut next = DVector::from_element(v.len(), ZERO);
    for s in 0..steps {
        next.gemv(ONE, &prop, &v, ZERO);
        std::mem::swap(&mut v, &mut next);
        if s % CHECK_EVERY == CHECK_EVERY - 1 {
            guard(&v, n, h)?;
        }
    }
    guard(&v, n, h)?;
    Ok(finish(n, &v))
}

/// One RK4 step of a linear autonomous system as a matrix.
pub fn rk4_propagator(l: &DMatrix<Complex64>, h: f64) -> DMatrix<Complex64> {
    let dim = l.nrows();
    let hl = l * Complex64::new(h, 0.0);
    let id = DMatrix::<Complex64>::identity(dim, dim);
    // Horner form of the degree-4 Taylor polynomial.
    let mut p = &id + &hl * Complex64::new(0.25, 0.0);
    p = &id + (&hl * p) * Complex64::new(1.0 / 3.0, 0.0);
    p = &id + (&hl * p) * Complex64::new(0.5, 0.0);
    &id + &hl * p
}

/// A generator of the form `L(t) = L_base + s(t)·L_drive`.
///
/// Because the Hamiltonian is linear in each Rabi frequency, modulating one
/// coupling as `Ω(t) = s(t)·Ω₀` is represented exactly with
/// `L_drive = L(Ω₀) − L(0)`.
#[derive(Debug, Clone)]
pub struct DrivenGenerator {
    pub levels: usize,
    pub base: DMatrix<Complex64>,
    pub drive: DMatrix<Complex64>,
}

impl DrivenGenerator {
    /// Splits `sys` into the part independent of coupling `index` and the
    /// part proportional to its Rabi frequency.
    pub fn for_coupling(sys: &LevelSystem, index: usize) -> Result<Self> {
        if index >= sys.couplings().len() {
            return Err(Error::Validation(format!("no coupling with index {index}")));
        }
        let full = liouvillian(sys)?;
        let base = liouvillian(&sys.with_rabi(index, ZERO))?;
        let drive = &full - &base;
        Ok(Self {
            levels: sys.num_levels(),
            base,
            drive,
        })
    }

    fn apply(&self, scale: f64, v: &DVector<Complex64>, out: &mut DVector<Complex64>) {
        out.gemv(ONE, &self.base, v, ZERO);
        out.gemv(Complex64::new(scale, 0.0), &self.drive, v, ONE);
    }
}

/// RK4 integration of `L(t) = base + envelope(t)·drive`.
///
/// `observe(t, ρ_vec)` is called at t = 0 and after every step.
pub fn evolve_driven<F, O>(
    generator: &DrivenGenerator,
    envelope: F,
    rho0: &DensityMatrix,
    duration: f64,
    step: f64,
    mut observe: O,
) -> Result<DensityMatrix>
where
    F: Fn(f64) -> f64,
    O: FnMut(f64, &DVector<Complex64>),
{
    let n = generator.levels;
    check_inputs(n, rho0, duration, step)?;
    let mut v = rho0.to_vec();
    observe(0.0, &v);
    if duration == 0.0 {
        return Ok(rho0.clone());
    }
    let (steps, h) = step_count(duration, step);
    let dim = v.len();
    let mut k1 = DVector::from_element(dim, ZERO);
    let mut k2 = k1.clone();
    let mut k3 = k1.clone();
    let mut k4 = k1.clone();
    let mut tmp = k1.clone();
    let hc = Complex64::new(h, 0.0);
    for s in 0..steps {
        let t = s as f64 * h;
        let s_mid = envelope(t + 0.5 * h);
        generator.apply(envelope(t), &v, &mut k1);
        tmp.copy_from(&v);
        tmp.axpy(hc * 0.5, &k1, ONE);
        generator.apply(s_mid, &tmp, &mut k2);
        tmp.copy_from(&v);
        tmp.axpy(hc * 0.5, &k2, ONE);
        generator.apply(s_mid, &tmp, &mut k3);
        tmp.copy_from(&v);
        tmp.axpy(hc, &k3, ONE);
        generator.apply(envelope(t + h), &tmp, &mut k4);
        v.axpy(hc / 6.0, &k1, ONE);
        v.axpy(hc / 3.0, &k2, ONE);
        v.axpy(hc / 3.0, &k3, ONE);
        v.axpy(hc / 6.0, &k4, ONE);
        observe(t + h, &v);
        if s % CHECK_EVERY == CHECK_EVERY - 1 {
            guard(&v, n, h)?;
        }
    }
    guard(&v, n, h)?;
    Ok(finish(n, &v))
}
