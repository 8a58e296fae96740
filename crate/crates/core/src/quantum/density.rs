use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Tolerances a density matrix must meet.
pub const HERMITIAN_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-9;
pub const PSD_TOL: f64 = 1e-9;

/// Hermitian, unit-trace, positive semidefinite N×N state.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    rho: DMatrix<Complex64>,
}

impl DensityMatrix {
    /// Wraps `rho` after checking all invariants.
    pub fn new(rho: DMatrix<Complex64>) -> Result<Self> {
        let dm = Self { rho };
        dm.check()?;
        Ok(dm)
    }

    /// `|k⟩⟨k|`.
    pub fn pure(dim: usize, k: usize) -> Self {
        let mut rho = DMatrix::zeros(dim, dim);
        rho[(k, k)] = Complex64::new(1.0, 0.0);
        Self { rho }
    }

    /// All population in level 0.
    pub fn ground(dim: usize) -> Self {
        Self::pure(dim, 0)
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.rho
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.rho
    }

    /// `ρ[i, j]` with 0-based indices.
    pub fn element(&self, i: usize, j: usize) -> Complex64 {
        self.rho[(i, j)]
    }

    pub fn population(&self, k: usize) -> f64 {
        self.rho[(k, k)].re
    }

    pub fn trace(&self) -> Complex64 {
        self.rho.trace()
    }

    /// Row-major vectorisation, index `i·N + j`.
    pub fn to_vec(&self) -> DVector<Complex64> {
        let n = self.dim();
        DVector::from_fn(n * n, |idx, _| self.rho[(idx / n, idx % n)])
    }

    pub(crate) fn from_vec_unchecked(dim: usize, v: &DVector<Complex64>) -> Self {
        Self {
            rho: DMatrix::from_fn(dim, dim, |i, j| v[i * dim + j]),
        }
    }

    /// `max |ρ − ρ†|`.
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((self.rho[(i, j)] - self.rho[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let herm = (&self.rho + self.rho.adjoint()) * Complex64::new(0.5, 0.0);
        herm.symmetric_eigenvalues().iter().copied().collect()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().into_iter().fold(f64::INFINITY, f64::min)
    }

    /// Replaces ρ with (ρ + ρ†)/2.
    pub(crate) fn hermitize(&mut self) {
        let adj = self.rho.adjoint();
        self.rho = (&self.rho + adj) * Complex64::new(0.5, 0.0);
    }

    /// Checks Hermiticity, unit trace and positivity at the crate tolerances.
    pub fn check(&self) -> Result<()> {
        if self.rho.nrows() != self.rho.ncols() || self.rho.nrows() == 0 {
            return Err(Error::Validation(
                "density matrix must be square and non-empty".into(),
            ));
        }
        if self
            .rho
            .iter()
            .any(|z| !(z.re.is_finite() && z.im.is_finite()))
        {
            return Err(Error::Validation(
                "density matrix has non-finite entries".into(),
            ));
        }
        let herm = self.hermiticity_error();
        if herm > HERMITIAN_TOL {
            return Err(Error::Validation(format!(
                "not Hermitian: max |ρ−ρ†| = {herm:e}"
            )));
        }
        let tr = self.trace();
        if (tr - Complex64::new(1.0, 0.0)).norm() > TRACE_TOL {
            return Err(Error::Validation(format!("trace is {tr}, expected 1")));
        }
        let min_eig = self.min_eigenvalue();
        if min_eig < -PSD_TOL {
            return Err(Error::Validation(format!(
                "not positive semidefinite: λ_min = {min_eig:e}"
            )));
        }
        Ok(())
    }

    /// `max_ij |ρ_ij − σ_ij|`.
    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        (&self.rho - &other.rho)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }
}
