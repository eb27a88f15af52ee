use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

use super::pauli::{Pauli, PauliString};
use crate::error::{CoreError, Result};

/// Supported Hamiltonian families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Nearest-neighbour XX couplings plus Z fields, periodic boundary.
    Tfim,
    /// XX couplings between every pair plus Z fields.
    AllToAllIsing,
    /// Nearest-neighbour XX and YY couplings plus unit Z fields (fixed).
    Xy,
    /// Caller-supplied terms via [`ModelSpec::custom`].
    Custom,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ModelKind::Tfim => "tfim",
            ModelKind::AllToAllIsing => "all_to_all_ising",
            ModelKind::Xy => "xy",
            ModelKind::Custom => "custom",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for ModelKind {
    type Err = CoreError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tfim" => Ok(ModelKind::Tfim),
            "all_to_all_ising" => Ok(ModelKind::AllToAllIsing),
            "xy" => Ok(ModelKind::Xy),
            "custom" => Ok(ModelKind::Custom),
            other => Err(CoreError::InvalidInput(format!(
                "unknown model kind '{other}' (expected tfim, all_to_all_ising, xy or custom)"
            ))),
        }
    }
}

/// Symbolic description of a parameterized Hamiltonian
/// `H(theta) = sum_a theta_a P_a + sum_b c_b Q_b`.
///
/// The order of `parameterized_terms` defines the meaning of the parameter
/// vector and is part of the public contract of each model kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    n_qubits: usize,
    kind: ModelKind,
    parameterized_terms: Vec<PauliString>,
    fixed_terms: Vec<(PauliString, f64)>,
    /// Indices of `parameterized_terms` sorted by the canonical (letter-wise)
    /// order. Assembly iterates in this order so that the assembled matrix is
    /// bit-identical under any permutation of the parameter list.
    #[serde(skip)]
    canonical_order: Vec<usize>,
}

impl ModelSpec {
    fn finish(
        n_qubits: usize,
        kind: ModelKind,
        parameterized_terms: Vec<PauliString>,
        fixed_terms: Vec<(PauliString, f64)>,
    ) -> Result<Self> {
        let mut seen = HashSet::new();
        for term in &parameterized_terms {
            if term.n_qubits() != n_qubits {
                return Err(CoreError::DimensionMismatch {
                    what: "parameterized term length",
                    expected: n_qubits,
                    got: term.n_qubits(),
                });
            }
            if !seen.insert(term.clone()) {
                return Err(CoreError::InvalidInput(format!(
                    "duplicate parameterized term {term}"
                )));
            }
        }
        for (term, _) in &fixed_terms {
            if term.n_qubits() != n_qubits {
                return Err(CoreError::DimensionMismatch {
                    what: "fixed term length",
                    expected: n_qubits,
                    got: term.n_qubits(),
                });
            }
        }
        let mut canonical_order: Vec<usize> = (0..parameterized_terms.len()).collect();
        canonical_order.sort_by(|&a, &b| parameterized_terms[a].cmp(&parameterized_terms[b]));
        Ok(Self {
            n_qubits,
            kind,
            parameterized_terms,
            fixed_terms,
            canonical_order,
        })
    }

    /// A spec from explicit term lists.
    pub fn custom(
        n_qubits: usize,
        parameterized_terms: Vec<PauliString>,
        fixed_terms: Vec<(PauliString, f64)>,
    ) -> Result<Self> {
        Self::finish(n_qubits, ModelKind::Custom, parameterized_terms, fixed_terms)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn param_count(&self) -> usize {
        self.parameterized_terms.len()
    }

    pub fn parameterized_terms(&self) -> &[PauliString] {
        &self.parameterized_terms
    }

    pub fn fixed_terms(&self) -> &[(PauliString, f64)] {
        &self.fixed_terms
    }

    /// The same spec with parameters relabelled by `perm` (new index `k`
    /// refers to old index `perm[k]`). Used for equivariance checks.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.param_count() {
            return Err(CoreError::DimensionMismatch {
                what: "permutation length",
                expected: self.param_count(),
                got: perm.len(),
            });
        }
        let terms = perm
            .iter()
            .map(|&k| self.parameterized_terms[k].clone())
            .collect();
        Self::finish(self.n_qubits, self.kind, terms, self.fixed_terms.clone())
    }

    /// Restores derived fields after deserialization.
    pub(crate) fn rebuild_canonical_order(&mut self) {
        let mut order: Vec<usize> = (0..self.parameterized_terms.len()).collect();
        order.sort_by(|&a, &b| self.parameterized_terms[a].cmp(&self.parameterized_terms[b]));
        self.canonical_order = order;
    }
}

/// Builds the standard model families.
///
/// * `Tfim` on `N >= 3` qubits: parameters `{J_1..J_N, B_1..B_N}` where bond
///   `i` couples sites `i` and `i mod N + 1`.
/// * `AllToAllIsing` on `N >= 2`: `N(N-1)/2` XX pairs with `i > j` ordered
///   lexicographically by `(i, j)`, then `N` Z fields.
/// * `Xy` on `N >= 3`: `{Jx_1..Jx_N, Jy_1..Jy_N}` bonds plus fixed unit Z
///   fields on every site.
pub fn build_model(kind: ModelKind, n_qubits: usize) -> Result<ModelSpec> {
    match kind {
        ModelKind::Tfim => {
            if n_qubits < 3 {
                return Err(CoreError::TooFewQubits {
                    model: "tfim (periodic boundary)",
                    min: 3,
                    got: n_qubits,
                });
            }
            let mut terms = Vec::with_capacity(2 * n_qubits);
            for i in 1..=n_qubits {
                let j = i % n_qubits + 1;
                terms.push(PauliString::two_site(n_qubits, i, Pauli::X, j, Pauli::X));
            }
            for i in 1..=n_qubits {
                terms.push(PauliString::single(n_qubits, i, Pauli::Z));
            }
            ModelSpec::finish(n_qubits, kind, terms, Vec::new())
        }
        ModelKind::AllToAllIsing => {
            if n_qubits < 2 {
                return Err(CoreError::TooFewQubits {
                    model: "all_to_all_ising",
                    min: 2,
                    got: n_qubits,
                });
            }
            let mut terms = Vec::new();
            for i in 2..=n_qubits {
                for j in 1..i {
                    terms.push(PauliString::two_site(n_qubits, i, Pauli::X, j, Pauli::X));
                }
            }
            for i in 1..=n_qubits {
                terms.push(PauliString::single(n_qubits, i, Pauli::Z));
            }
            ModelSpec::finish(n_qubits, kind, terms, Vec::new())
        }
        ModelKind::Xy => {
            if n_qubits < 3 {
                return Err(CoreError::TooFewQubits {
                    model: "xy (periodic boundary)",
                    min: 3,
                    got: n_qubits,
                });
            }
            let mut terms = Vec::with_capacity(2 * n_qubits);
            for i in 1..=n_qubits {
                let j = i % n_qubits + 1;
                terms.push(PauliString::two_site(n_qubits, i, Pauli::X, j, Pauli::X));
            }
            for i in 1..=n_qubits {
                let j = i % n_qubits + 1;
                terms.push(PauliString::two_site(n_qubits, i, Pauli::Y, j, Pauli::Y));
            }
            let fixed = (1..=n_qubits)
                .map(|i| (PauliString::single(n_qubits, i, Pauli::Z), 1.0))
                .collect();
            ModelSpec::finish(n_qubits, kind, terms, fixed)
        }
        ModelKind::Custom => Err(CoreError::InvalidInput(
            "custom models are built with ModelSpec::custom, not build_model".into(),
        )),
    }
}

/// Assembles the dense Hamiltonian `H(theta)`.
///
/// Parameterized terms are accumulated in a canonical term order (not the
/// user-facing parameter order), which makes the result bit-identical under
/// parameter permutations.
pub fn assemble_hamiltonian(spec: &ModelSpec, theta: &DVector<f64>) -> Result<DMatrix<Complex64>> {
    if theta.len() != spec.param_count() {
        return Err(CoreError::DimensionMismatch {
            what: "parameter vector",
            expected: spec.param_count(),
            got: theta.len(),
        });
    }
    let dim = spec.dim();
    let mut h = DMatrix::<Complex64>::zeros(dim, dim);
    for &a in &spec.canonical_order {
        let coeff = theta[a];
        let term = &spec.parameterized_terms[a];
        for col in 0..dim {
            let (row, phase) = term.column_action(col);
            h[(row, col)] += phase * coeff;
        }
    }
    for (term, coeff) in &spec.fixed_terms {
        for col in 0..dim {
            let (row, phase) = term.column_action(col);
            h[(row, col)] += phase * *coeff;
        }
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tfim_4_has_expected_terms() {
        let spec = build_model(ModelKind::Tfim, 4).unwrap();
        assert_eq!(spec.param_count(), 8);
        assert!(spec.fixed_terms().is_empty());
        let want = [
            "XXII", "IXXI", "IIXX", "XIIX", "ZIII", "IZII", "IIZI", "IIIZ",
        ];
        for (term, w) in spec.parameterized_terms().iter().zip(want) {
            assert_eq!(term.to_string(), w);
        }
    }

    #[test]
    fn all_to_all_4_has_ten_terms() {
        let spec = build_model(ModelKind::AllToAllIsing, 4).unwrap();
        assert_eq!(spec.param_count(), 10);
        assert_eq!(
            spec.parameterized_terms()[0].to_string(),
            "XXII" // pair (2,1)
        );
    }

    #[test]
    fn xy_4_has_eight_parameters_and_fixed_z() {
        let spec = build_model(ModelKind::Xy, 4).unwrap();
        assert_eq!(spec.param_count(), 8);
        assert_eq!(spec.fixed_terms().len(), 4);
        assert!(spec.fixed_terms().iter().all(|(_, c)| *c == 1.0));
    }

    #[test]
    fn rejects_too_few_qubits() {
        assert!(build_model(ModelKind::Tfim, 2).is_err());
        assert!(build_model(ModelKind::Xy, 2).is_err());
        assert!(build_model(ModelKind::AllToAllIsing, 1).is_err());
        assert!(build_model(ModelKind::AllToAllIsing, 2).is_ok());
    }

    #[test]
    fn rejects_duplicate_terms() {
        let t = PauliString::single(2, 1, Pauli::Z);
        assert!(ModelSpec::custom(2, vec![t.clone(), t], vec![]).is_err());
    }

    #[test]
    fn zero_theta_gives_zero_matrix() {
        let spec = build_model(ModelKind::Tfim, 3).unwrap();
        let h = assemble_hamiltonian(&spec, &DVector::zeros(6)).unwrap();
        assert!(h.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn pure_field_tfim_is_diagonal_sum_of_z() {
        // J = 0, B = 1: H = sum_i Z_i, diagonal {3,1,1,-1,1,-1,-1,-3}.
        let spec = build_model(ModelKind::Tfim, 3).unwrap();
        let theta = DVector::from_vec(vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let h = assemble_hamiltonian(&spec, &theta).unwrap();
        let want = [3.0, 1.0, 1.0, -1.0, 1.0, -1.0, -1.0, -3.0];
        for (i, w) in want.iter().enumerate() {
            assert_eq!(h[(i, i)], Complex64::new(*w, 0.0));
            for j in 0..8 {
                if j != i {
                    assert_eq!(h[(i, j)].norm(), 0.0);
                }
            }
        }
    }

    #[test]
    fn assembly_is_bit_identical_under_permutation() {
        let spec = build_model(ModelKind::Tfim, 3).unwrap();
        let theta = DVector::from_vec(vec![1.3, 1.7, 1.1, 1.9, 1.2, 1.6]);
        let perm = [5usize, 2, 0, 3, 1, 4];
        let pspec = spec.permuted(&perm).unwrap();
        let ptheta = DVector::from_iterator(6, perm.iter().map(|&k| theta[k]));
        let h = assemble_hamiltonian(&spec, &theta).unwrap();
        let hp = assemble_hamiltonian(&pspec, &ptheta).unwrap();
        assert_eq!(h, hp);
    }
}
