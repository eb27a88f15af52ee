use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use nalgebra::DMatrix;

/// Single-qubit Pauli operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    /// Action on a basis bit: returns `(output_bit, phase)` such that
    /// `P |b> = phase |output_bit>`.
    #[inline]
    pub fn bit_action(self, bit: u8) -> (u8, Complex64) {
        match self {
            Pauli::I => (bit, Complex64::new(1.0, 0.0)),
            Pauli::X => (1 - bit, Complex64::new(1.0, 0.0)),
            // Y|0> = i|1>,  Y|1> = -i|0>
            Pauli::Y => (
                1 - bit,
                if bit == 0 {
                    Complex64::new(0.0, 1.0)
                } else {
                    Complex64::new(0.0, -1.0)
                },
            ),
            Pauli::Z => (
                bit,
                if bit == 0 {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(-1.0, 0.0)
                },
            ),
        }
    }
}

/// A tensor product of single-qubit Paulis over `n` qubits.
///
/// Basis convention used everywhere in this crate: computational basis in
/// lexicographic order with qubit 1 as the most significant bit, so for
/// basis index `i` the bit of qubit `q` (1-based) is `(i >> (n - q)) & 1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PauliString {
    letters: Vec<Pauli>,
}

impl PauliString {
    pub fn new(letters: Vec<Pauli>) -> Result<Self> {
        if letters.is_empty() {
            return Err(CoreError::InvalidInput(
                "PauliString must act on at least one qubit".into(),
            ));
        }
        Ok(Self { letters })
    }

    /// All-identity string on `n` qubits.
    pub fn identity(n: usize) -> Self {
        Self {
            letters: vec![Pauli::I; n],
        }
    }

    /// Identity except `p` on `site` (1-based).
    pub fn single(n: usize, site: usize, p: Pauli) -> Self {
        let mut letters = vec![Pauli::I; n];
        letters[site - 1] = p;
        Self { letters }
    }

    /// Identity except `pa` on `site_a` and `pb` on `site_b` (1-based).
    pub fn two_site(n: usize, site_a: usize, pa: Pauli, site_b: usize, pb: Pauli) -> Self {
        let mut letters = vec![Pauli::I; n];
        letters[site_a - 1] = pa;
        letters[site_b - 1] = pb;
        Self { letters }
    }

    pub fn n_qubits(&self) -> usize {
        self.letters.len()
    }

    pub fn letters(&self) -> &[Pauli] {
        &self.letters
    }

    pub fn is_identity(&self) -> bool {
        self.letters.iter().all(|&p| p == Pauli::I)
    }

    /// A Pauli string maps each basis state to exactly one basis state with a
    /// unit-modulus coefficient. Returns `(row, coeff)` for column `col`,
    /// i.e. `P |col> = coeff |row>`.
    #[inline]
    pub fn column_action(&self, col: usize) -> (usize, Complex64) {
        let n = self.letters.len();
        let mut row = 0usize;
        let mut coeff = Complex64::new(1.0, 0.0);
        for (q, &p) in self.letters.iter().enumerate() {
            let shift = n - 1 - q;
            let bit = ((col >> shift) & 1) as u8;
            let (out_bit, phase) = p.bit_action(bit);
            row |= (out_bit as usize) << shift;
            coeff *= phase;
        }
        (row, coeff)
    }

    /// Dense matrix in the computational basis.
    pub fn dense(&self) -> DMatrix<Complex64> {
        let dim = 1usize << self.letters.len();
        let mut m = DMatrix::zeros(dim, dim);
        for col in 0..dim {
            let (row, coeff) = self.column_action(col);
            m[(row, col)] = coeff;
        }
        m
    }

    /// Applies the string to a state vector: `out = P psi`.
    pub fn apply(&self, psi: &nalgebra::DVector<Complex64>, out: &mut nalgebra::DVector<Complex64>) {
        for col in 0..psi.len() {
            let (row, coeff) = self.column_action(col);
            out[row] = coeff * psi[col];
        }
    }
}

impl std::fmt::Display for PauliString {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for p in &self.letters {
            write!(f, "{p:?}")?;
        }
        Ok(())
    }
}
