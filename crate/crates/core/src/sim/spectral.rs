use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{CoreError, Result};

/// Eigendecomposition `H = V diag(lambda) V^dagger` of a Hermitian matrix,
/// eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<Complex64>,
}

impl SpectralDecomposition {
    pub fn new(h: &DMatrix<Complex64>) -> Result<Self> {
        let dim = h.nrows();
        if dim != h.ncols() {
            return Err(CoreError::DimensionMismatch {
                what: "hamiltonian (square matrix)",
                expected: dim,
                got: h.ncols(),
            });
        }
        let eig = h
            .clone()
            .try_symmetric_eigen(f64::EPSILON, 10_000)
            .ok_or(CoreError::EigenFailed { dim })?;

        // Sort ascending; nalgebra returns eigenpairs in no particular order.
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let eigenvalues = DVector::from_iterator(dim, order.iter().map(|&k| eig.eigenvalues[k]));
        let mut eigenvectors = DMatrix::zeros(dim, dim);
        for (new_col, &old_col) in order.iter().enumerate() {
            eigenvectors
                .column_mut(new_col)
                .copy_from(&eig.eigenvectors.column(old_col));
        }
        Ok(Self {
            eigenvalues,
            eigenvectors,
        })
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// Unitary matrix whose columns are the eigenvectors, in eigenvalue order.
    pub fn eigenvectors(&self) -> &DMatrix<Complex64> {
        &self.eigenvectors
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Phase vector `exp(-i lambda t)`.
    pub fn phases(&self, t: f64) -> DVector<Complex64> {
        DVector::from_iterator(
            self.dim(),
            self.eigenvalues
                .iter()
                .map(|&l| Complex64::from_polar(1.0, -l * t)),
        )
    }

    /// Dense propagator `U(t) = exp(-i H t)`.
    pub fn propagator(&self, t: f64) -> DMatrix<Complex64> {
        let v = &self.eigenvectors;
        let phases = self.phases(t);
        let mut scaled = v.clone();
        for (mut col, ph) in scaled.column_iter_mut().zip(phases.iter()) {
            col *= *ph;
        }
        scaled * v.adjoint()
    }

    /// Largest eigenvalue magnitude, used for the degeneracy threshold.
    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0, |m, &l| m.max(l.abs()))
    }
}
