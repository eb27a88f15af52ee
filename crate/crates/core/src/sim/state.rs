use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Which product state the system is prepared in before the quench.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialStateKind {
    /// Every qubit in the +X eigenstate: the uniform superposition.
    AllPlusX,
    /// Every qubit in |0>: the basis state of index 0.
    AllZeroZ,
}

impl std::fmt::Display for InitialStateKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            InitialStateKind::AllPlusX => "all_plus_x",
            InitialStateKind::AllZeroZ => "all_zero_z",
        })
    }
}

impl std::str::FromStr for InitialStateKind {
    type Err = CoreError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all_plus_x" | "x" => Ok(InitialStateKind::AllPlusX),
            "all_zero_z" | "z" => Ok(InitialStateKind::AllZeroZ),
            other => Err(CoreError::InvalidInput(format!(
                "unknown initial state '{other}' (expected all_plus_x or all_zero_z)"
            ))),
        }
    }
}

/// A normalized pure state of `n` qubits, `2^n` complex amplitudes.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amplitudes: DVector<Complex64>,
}

impl StateVector {
    /// Wraps amplitudes, checking normalization to 1e-10.
    pub fn from_amplitudes(amplitudes: DVector<Complex64>) -> Result<Self> {
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(CoreError::InvalidInput(format!(
                "state vector norm {norm} differs from 1 by more than 1e-10"
            )));
        }
        Ok(Self { amplitudes })
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }
}

/// The two quench initial states.
pub fn initial_state(kind: InitialStateKind, n_qubits: usize) -> StateVector {
    assert!(n_qubits >= 1, "initial_state requires at least one qubit");
    let dim = 1usize << n_qubits;
    let amplitudes = match kind {
        InitialStateKind::AllZeroZ => {
            let mut v = DVector::zeros(dim);
            v[0] = Complex64::new(1.0, 0.0);
            v
        }
        InitialStateKind::AllPlusX => {
            let amp = Complex64::new(1.0 / (dim as f64).sqrt(), 0.0);
            DVector::from_element(dim, amp)
        }
    };
    StateVector { amplitudes }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_zero_is_first_basis_vector() {
        let s = initial_state(InitialStateKind::AllZeroZ, 2);
        assert_eq!(s.amplitudes()[0], Complex64::new(1.0, 0.0));
        assert!(s.amplitudes().iter().skip(1).all(|a| a.norm() == 0.0));
    }

    #[test]
    fn all_plus_x_is_uniform() {
        let s = initial_state(InitialStateKind::AllPlusX, 2);
        for a in s.amplitudes() {
            assert_eq!(*a, Complex64::new(0.5, 0.0));
        }
        let s4 = initial_state(InitialStateKind::AllPlusX, 4);
        assert_eq!(s4.dim(), 16);
        for a in s4.amplitudes() {
            assert!((a.re - 0.25).abs() < 1e-15 && a.im == 0.0);
        }
        let norm: f64 = s4.amplitudes().iter().map(|a| a.norm_sqr()).sum();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn from_amplitudes_rejects_unnormalized() {
        let v = DVector::from_element(4, Complex64::new(0.5, 0.5));
        assert!(StateVector::from_amplitudes(v).is_err());
    }
}
