//! Rotating-wave Hamiltonian, Lindblad superoperator and the dense
//! steady-state solve.
//!
//! Everything is in angular-frequency units (rad/s), so the master equation
//! reads `dρ/dt = −i[H, ρ] + Σ Γ (σρσ† − ½{σ†σ, ρ})` with `σ = |to⟩⟨from|`.
//! Density matrices are vectorised row-major (`i·N + j`), which makes
//! `vec(AρB) = (A ⊗ Bᵀ) vec(ρ)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::density::DensityMatrix;
use super::level::LevelSystem;
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Relative pivot size below which the steady-state system is treated as singular.
const SINGULAR_PIVOT_RATIO: f64 = 1e-12;

/// `H[a,b] = −Ω/2`, `H[b,a] = −Ω*/2` for each coupling `a < b` in the
/// coupling's own orientation; diagonal from [`LevelSystem::level_energies`].
pub fn build_hamiltonian(sys: &LevelSystem) -> Result<DMatrix<Complex64>> {
    let n = sys.num_levels();
    let energies = sys.level_energies()?;
    let mut h = DMatrix::from_element(n, n, ZERO);
    for (k, e) in energies.iter().enumerate() {
        h[(k, k)] = Complex64::new(*e, 0.0);
    }
    for c in sys.couplings() {
        h[(c.lower, c.upper)] = -c.rabi * 0.5;
        h[(c.upper, c.lower)] = -c.rabi.conj() * 0.5;
    }
    Ok(h)
}

/// The N²×N² generator `L` with `d vec(ρ)/dt = L vec(ρ)`.
pub fn liouvillian(sys: &LevelSystem) -> Result<DMatrix<Complex64>> {
    let n = sys.num_levels();
    let h = build_hamiltonian(sys)?;
    let dim = n * n;
    let mut l = DMatrix::from_element(dim, dim, ZERO);
    let idx = |i: usize, j: usize| i * n + j;

    // −i(H ⊗ 1 − 1 ⊗ Hᵀ)
    for i in 0..n {
        for j in 0..n {
            let row = idx(i, j);
            for k in 0..n {
                let hik = h[(i, k)];
                if hik != ZERO {
                    l[(row, idx(k, j))] += -I * hik;
                }
                let hkj = h[(k, j)];
                if hkj != ZERO {
                    l[(row, idx(i, k))] += I * hkj;
                }
            }
        }
    }

    for d in sys.decays() {
        if d.rate == 0.0 {
            continue;
        }
        let g = Complex64::new(d.rate, 0.0);
        let (f, t) = (d.from, d.to);
        // σρσ† = ρ_ff |t⟩⟨t|
        l[(idx(t, t), idx(f, f))] += g;
        // −½(σ†σ ρ + ρ σ†σ) with σ†σ = |f⟩⟨f|
        for j in 0..n {
            l[(idx(f, j), idx(f, j))] -= g * 0.5;
            l[(idx(j, f), idx(j, f))] -= g * 0.5;
        }
    }
    Ok(l)
}

/// Solves `L vec(ρ) = 0` with `tr ρ = 1`.
///
/// The equation for `ρ₀₀` is replaced by the trace constraint (the population
/// equations are linearly dependent because `L` preserves trace) and the
/// resulting dense system is LU-factorised.
pub fn steady_state(sys: &LevelSystem) -> Result<DensityMatrix> {
    if !sys.decays().iter().any(|d| d.rate > 0.0) {
        return Err(Error::NoUniqueSteadyState(
            "no dissipation: every state in the kernel of the commutator is stationary".into(),
        ));
    }
    let l = liouvillian(sys)?;
    steady_state_from_liouvillian(sys.num_levels(), l)
}

pub(crate) fn steady_state_from_liouvillian(
    n: usize,
    mut l: DMatrix<Complex64>,
) -> Result<DensityMatrix> {
    let dim = n * n;
    let scale = l.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Err(Error::NoUniqueSteadyState(
            "generator is identically zero".into(),
        ));
    }
    l /= Complex64::new(scale, 0.0);
    for c in 0..dim {
        l[(0, c)] = ZERO;
    }
    for k in 0..n {
        l[(0, k * n + k)] = Complex64::new(1.0, 0.0);
    }
    let mut rhs = DVector::from_element(dim, ZERO);
    rhs[0] = Complex64::new(1.0, 0.0);

    let lu = l.lu();
    let u = lu.u();
    let pivots: Vec<f64> = u.diagonal().iter().map(|z| z.norm()).collect();
    let max_pivot = pivots.iter().copied().fold(0.0, f64::max);
    let min_pivot = pivots.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min_pivot > SINGULAR_PIVOT_RATIO * max_pivot) {
        return Err(Error::NoUniqueSteadyState(format!(
            "steady-state system is singular (pivot ratio {:e})",
            min_pivot / max_pivot
        )));
    }
    let x = lu
        .solve(&rhs)
        .ok_or_else(|| Error::NoUniqueSteadyState("LU solve failed".into()))?;
    let mut rho = DensityMatrix::from_vec_unchecked(n, &x);
    rho.hermitize();
    Ok(rho)
}
