use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::model::{assemble_hamiltonian, ModelSpec};
use super::pauli::PauliString;
use super::spectral::SpectralDecomposition;
use super::state::StateVector;
use crate::error::{CoreError, Result};

/// Threshold below which two eigenvalues are treated as degenerate in the
/// divided-difference kernel.
pub fn degeneracy_threshold(decomp: &SpectralDecomposition) -> f64 {
    1e-10 * decomp.spectral_radius().max(1.0)
}

/// Per-parameter-vector quantities reused across times, initial states and
/// parameter indices: one eigendecomposition plus (optionally) every
/// parameterized term rotated into the eigenbasis.
pub struct EvolutionCache {
    decomp: SpectralDecomposition,
    term_modes: Option<Vec<DMatrix<Complex64>>>,
    degen: f64,
}

impl EvolutionCache {
    /// Eigendecomposition only; enough to evolve states.
    pub fn new(spec: &ModelSpec, theta: &DVector<f64>) -> Result<Self> {
        let h = assemble_hamiltonian(spec, theta)?;
        let decomp = SpectralDecomposition::new(&h)?;
        let degen = degeneracy_threshold(&decomp);
        Ok(Self {
            decomp,
            term_modes: None,
            degen,
        })
    }

    /// Also rotates every parameterized term into the eigenbasis
    /// (`M_a = V^dagger P_a V`), needed for parameter derivatives.
    pub fn with_term_modes(spec: &ModelSpec, theta: &DVector<f64>) -> Result<Self> {
        let mut cache = Self::new(spec, theta)?;
        let v = cache.decomp.eigenvectors();
        let modes = spec
            .parameterized_terms()
            .iter()
            .map(|p| {
                let pav = apply_pauli_to_columns(p, v);
                v.ad_mul(&pav)
            })
            .collect();
        cache.term_modes = Some(modes);
        Ok(cache)
    }

    pub fn decomp(&self) -> &SpectralDecomposition {
        &self.decomp
    }

    pub fn term_modes(&self) -> Option<&[DMatrix<Complex64>]> {
        self.term_modes.as_deref()
    }

    /// `w = V^dagger psi0`, the initial state in the eigenbasis.
    pub fn state_in_eigenbasis(&self, state0: &StateVector) -> Result<DVector<Complex64>> {
        if state0.dim() != self.decomp.dim() {
            return Err(CoreError::DimensionMismatch {
                what: "initial state",
                expected: self.decomp.dim(),
                got: state0.dim(),
            });
        }
        Ok(self.decomp.eigenvectors().ad_mul(state0.amplitudes()))
    }

    /// Evolved amplitudes `psi(t) = V (phases . w)`.
    pub fn amplitudes_at(
        &self,
        w: &DVector<Complex64>,
        phases: &DVector<Complex64>,
    ) -> DVector<Complex64> {
        let scaled = DVector::from_iterator(
            w.len(),
            w.iter().zip(phases.iter()).map(|(wi, ph)| wi * ph),
        );
        self.decomp.eigenvectors() * scaled
    }

    /// Fills the divided-difference kernel
    /// `K_mn = (e^{-i l_m t} - e^{-i l_n t}) / (l_m - l_n)`
    /// with the limit `-i t e^{-i l_m t}` on (near-)degenerate pairs.
    pub fn fill_kernel(&self, t: f64, phases: &DVector<Complex64>, k: &mut DMatrix<Complex64>) {
        let lam = self.decomp.eigenvalues();
        let dim = lam.len();
        debug_assert_eq!(k.nrows(), dim);
        for n in 0..dim {
            for m in 0..dim {
                let d = lam[m] - lam[n];
                k[(m, n)] = if d.abs() > self.degen {
                    (phases[m] - phases[n]) / Complex64::new(d, 0.0)
                } else {
                    Complex64::new(0.0, -t) * phases[m]
                };
            }
        }
    }
}

/// `P * V` for a Pauli string: rows of `V` are permuted and scaled by the
/// string's unit coefficients, no matrix product needed.
fn apply_pauli_to_columns(p: &PauliString, v: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let dim = v.nrows();
    let mut out = DMatrix::zeros(dim, dim);
    for b in 0..dim {
        let (row, coeff) = p.column_action(b);
        for c in 0..dim {
            out[(row, c)] = coeff * v[(b, c)];
        }
    }
    out
}

/// Computational-basis populations `|<i| e^{-iHt} |psi0>|^2` for every time in
/// `times`; row `t`, column `i`. One eigendecomposition is reused across all
/// times.
pub fn evolve_populations(
    spec: &ModelSpec,
    theta: &DVector<f64>,
    state0: &StateVector,
    times: &[f64],
) -> Result<DMatrix<f64>> {
    let cache = EvolutionCache::new(spec, theta)?;
    let w = cache.state_in_eigenbasis(state0)?;
    let dim = cache.decomp().dim();
    let mut out = DMatrix::zeros(times.len(), dim);
    for (ti, &t) in times.iter().enumerate() {
        let phases = cache.decomp().phases(t);
        let psi = cache.amplitudes_at(&w, &phases);
        for i in 0..dim {
            out[(ti, i)] = psi[i].norm_sqr();
        }
    }
    Ok(out)
}

/// Exact derivative of the propagator with respect to one Hamiltonian
/// coefficient: `dU/dtheta_a = V [K . (V^dagger P_a V)] V^dagger` with the
/// divided-difference kernel `K` of [`EvolutionCache::fill_kernel`].
pub fn propagator_derivative(
    decomp: &SpectralDecomposition,
    term: &PauliString,
    t: f64,
) -> Result<DMatrix<Complex64>> {
    let dim = decomp.dim();
    if (1usize << term.n_qubits()) != dim {
        return Err(CoreError::DimensionMismatch {
            what: "pauli string dimension",
            expected: dim,
            got: 1usize << term.n_qubits(),
        });
    }
    let v = decomp.eigenvectors();
    let pav = apply_pauli_to_columns(term, v);
    let mut m = v.ad_mul(&pav);
    let phases = decomp.phases(t);
    let lam = decomp.eigenvalues();
    let degen = 1e-10 * decomp.spectral_radius().max(1.0);
    for n in 0..dim {
        for r in 0..dim {
            let d = lam[r] - lam[n];
            let k = if d.abs() > degen {
                (phases[r] - phases[n]) / Complex64::new(d, 0.0)
            } else {
                Complex64::new(0.0, -t) * phases[r]
            };
            m[(r, n)] *= k;
        }
    }
    Ok(v * m * v.adjoint())
}
