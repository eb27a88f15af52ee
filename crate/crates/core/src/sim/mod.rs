//! Exact small-system quantum simulation: Hamiltonian assembly,
//! diagonalization, quench evolution of pure states, computational-basis
//! populations and exact propagator derivatives.
//!
//! Everything is dense; the toolkit targets systems small enough for exact
//! diagonalization (dimension up to a few hundred).

mod evolve;
mod model;
mod pauli;
mod spectral;
mod state;

pub use evolve::{
    degeneracy_threshold, evolve_populations, propagator_derivative, EvolutionCache,
};
pub use model::{assemble_hamiltonian, build_model, ModelKind, ModelSpec};
pub use pauli::{Pauli, PauliString};
pub use spectral::SpectralDecomposition;
pub use state::{initial_state, InitialStateKind, StateVector};
