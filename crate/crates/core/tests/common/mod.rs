//! Shared helpers for the integration tests: an independent dense-matrix
//! construction of Pauli-term Hamiltonians (Kronecker products over explicit
//! 2x2 matrices) and a symmetrized product-formula evolver. These never call
//! the crate's own assembly or evolution code paths.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use quenchfit_core::objective::Objective;
use quenchfit_core::sim::{ModelSpec, Pauli, PauliString};
use quenchfit_core::Result;

fn single(p: Pauli) -> DMatrix<Complex64> {
    let z = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    match p {
        Pauli::I => DMatrix::from_row_slice(2, 2, &[one, z, z, one]),
        Pauli::X => DMatrix::from_row_slice(2, 2, &[z, one, one, z]),
        Pauli::Y => DMatrix::from_row_slice(2, 2, &[z, -i, i, z]),
        Pauli::Z => DMatrix::from_row_slice(2, 2, &[one, z, z, -one]),
    }
}

pub fn kron(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = DMatrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = a[(i, j)] * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Dense matrix of a Pauli string by folding Kronecker products, qubit 1
/// leftmost.
pub fn pauli_dense_oracle(term: &PauliString) -> DMatrix<Complex64> {
    let mut m = DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
    for &p in term.letters() {
        m = kron(&m, &single(p));
    }
    m
}

/// `H(theta)` assembled entirely from the oracle matrices.
pub fn hamiltonian_oracle(spec: &ModelSpec, theta: &DVector<f64>) -> DMatrix<Complex64> {
    let dim = spec.dim();
    let mut h = DMatrix::zeros(dim, dim);
    for (a, term) in spec.parameterized_terms().iter().enumerate() {
        h += pauli_dense_oracle(term) * Complex64::new(theta[a], 0.0);
    }
    for (term, c) in spec.fixed_terms() {
        h += pauli_dense_oracle(term) * Complex64::new(*c, 0.0);
    }
    h
}

/// Evolves `psi0` to time `t` with the symmetrized (Strang) product formula
/// at step `dt`: each step applies `exp(-i c_a P_a dt/2)` for every term in
/// order, then in reverse order. Term exponentials use
/// `exp(-i a P) = cos(a) I - i sin(a) P`, built from the oracle matrices.
pub fn trotter_evolve_oracle(
    spec: &ModelSpec,
    theta: &DVector<f64>,
    psi0: &DVector<Complex64>,
    t: f64,
    dt: f64,
) -> DVector<Complex64> {
    let dim = spec.dim();
    let eye = DMatrix::<Complex64>::identity(dim, dim);
    let mut half_steps: Vec<DMatrix<Complex64>> = Vec::new();
    let mut push_term = |p: &PauliString, coeff: f64| {
        let angle = coeff * dt / 2.0;
        let m = pauli_dense_oracle(p);
        half_steps.push(&eye * Complex64::new(angle.cos(), 0.0) + m * Complex64::new(0.0, -angle.sin()));
    };
    for (a, term) in spec.parameterized_terms().iter().enumerate() {
        push_term(term, theta[a]);
    }
    for (term, c) in spec.fixed_terms() {
        push_term(term, *c);
    }
    // One full Strang step as a single dense matrix.
    let mut step = eye.clone();
    for m in &half_steps {
        step = m * step;
    }
    for m in half_steps.iter().rev() {
        step = m * step;
    }
    let n_steps = (t / dt).round() as usize;
    let mut psi = psi0.clone();
    for _ in 0..n_steps {
        psi = &step * psi;
    }
    psi
}

/// A fixed quadratic bowl `f = ||theta - center||^2`; the cheap smooth test
/// objective.
pub struct Quadratic {
    pub center: DVector<f64>,
}

impl Objective for Quadratic {
    fn dim(&self) -> usize {
        self.center.len()
    }
    fn value(&self, theta: &DVector<f64>) -> Result<f64> {
        let d = theta - &self.center;
        Ok(d.dot(&d))
    }
    fn value_and_grad(&self, theta: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        let d = theta - &self.center;
        Ok((d.dot(&d), 2.0 * d))
    }
}

/// Uniform random parameter vector in `(1, 2)`.
pub fn random_theta(n: usize, seed: u64) -> DVector<f64> {
    use rand::Rng;
    let mut rng = quenchfit_core::rng::rng_from_seed(seed);
    DVector::from_iterator(n, (0..n).map(|_| rng.gen_range(1.0..2.0)))
}
