//! Oracle checks for the simulation layer: independent Kronecker-product
//! assembly, symmetrized product-formula evolution and finite-difference
//! propagator derivatives.

mod common;

use common::{hamiltonian_oracle, random_theta, trotter_evolve_oracle};
use nalgebra::DVector;
use quenchfit_core::sim::{
    assemble_hamiltonian, build_model, evolve_populations, initial_state, propagator_derivative,
    InitialStateKind, ModelKind, SpectralDecomposition,
};

const KINDS: [ModelKind; 3] = [ModelKind::Tfim, ModelKind::AllToAllIsing, ModelKind::Xy];

#[test]
fn assembly_matches_kronecker_oracle() {
    for (k, kind) in KINDS.iter().enumerate() {
        let spec = build_model(*kind, 3).unwrap();
        for rep in 0..4 {
            let theta = random_theta(spec.param_count(), (k * 10 + rep) as u64);
            let h = assemble_hamiltonian(&spec, &theta).unwrap();
            let oracle = hamiltonian_oracle(&spec, &theta);
            let diff = (&h - &oracle).iter().map(|c| c.norm()).fold(0.0, f64::max);
            assert!(diff < 1e-12, "{kind:?} rep {rep}: max entry diff {diff}");
        }
    }
}

#[test]
fn populations_match_product_formula_oracle() {
    let spec = build_model(ModelKind::Tfim, 3).unwrap();
    let theta = random_theta(6, 42);
    let t = 0.7;
    for state_kind in [InitialStateKind::AllPlusX, InitialStateKind::AllZeroZ] {
        let psi0 = initial_state(state_kind, 3);
        let pops = evolve_populations(&spec, &theta, &psi0, &[t]).unwrap();
        let psi_t = trotter_evolve_oracle(&spec, &theta, psi0.amplitudes(), t, 1e-4);
        for i in 0..8 {
            let want = psi_t[i].norm_sqr();
            assert!(
                (pops[(0, i)] - want).abs() < 1e-6,
                "{state_kind:?} entry {i}: {} vs {want}",
                pops[(0, i)]
            );
        }
    }
}

#[test]
fn populations_match_product_formula_for_fixed_term_models() {
    // XY carries unparameterized Z fields; the oracle must see them too.
    let spec = build_model(ModelKind::Xy, 3).unwrap();
    let theta = random_theta(6, 7);
    let psi0 = initial_state(InitialStateKind::AllZeroZ, 3);
    let t = 0.9;
    let pops = evolve_populations(&spec, &theta, &psi0, &[t]).unwrap();
    let psi_t = trotter_evolve_oracle(&spec, &theta, psi0.amplitudes(), t, 1e-4);
    for i in 0..8 {
        assert!((pops[(0, i)] - psi_t[i].norm_sqr()).abs() < 1e-6);
    }
}

#[test]
fn propagator_derivative_matches_finite_differences_all_kinds() {
    let t = 1.3;
    let h_step = 1e-5;
    for (k, kind) in KINDS.iter().enumerate() {
        let spec = build_model(*kind, 3).unwrap();
        let theta = random_theta(spec.param_count(), 100 + k as u64);
        let h = assemble_hamiltonian(&spec, &theta).unwrap();
        let decomp = SpectralDecomposition::new(&h).unwrap();
        for a in 0..spec.param_count() {
            let du = propagator_derivative(&decomp, &spec.parameterized_terms()[a], t).unwrap();
            let mut plus = theta.clone();
            plus[a] += h_step;
            let mut minus = theta.clone();
            minus[a] -= h_step;
            let u_plus = SpectralDecomposition::new(&assemble_hamiltonian(&spec, &plus).unwrap())
                .unwrap()
                .propagator(t);
            let u_minus = SpectralDecomposition::new(&assemble_hamiltonian(&spec, &minus).unwrap())
                .unwrap()
                .propagator(t);
            let fd = (u_plus - u_minus) / nalgebra::Complex::new(2.0 * h_step, 0.0);
            let num: f64 = (&du - &fd).iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            let den: f64 = fd.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            assert!(
                num / den < 1e-5,
                "{kind:?} term {a}: relative Frobenius error {}",
                num / den
            );
        }
    }
}

#[test]
fn evolving_in_two_hops_equals_one_hop() {
    let spec = build_model(ModelKind::AllToAllIsing, 3).unwrap();
    let theta = random_theta(6, 5);
    let psi0 = initial_state(InitialStateKind::AllPlusX, 3);
    let (t1, t2) = (0.6, 1.1);
    let h = assemble_hamiltonian(&spec, &theta).unwrap();
    let d = SpectralDecomposition::new(&h).unwrap();
    let hop1 = d.propagator(t1) * psi0.amplitudes();
    let two_hop = d.propagator(t2) * hop1;
    let direct = d.propagator(t1 + t2) * psi0.amplitudes();
    for i in 0..8 {
        assert!((two_hop[i] - direct[i]).norm() < 1e-8);
    }
}

#[test]
fn single_time_row_from_empty_theta_errors() {
    let spec = build_model(ModelKind::Tfim, 3).unwrap();
    let psi0 = initial_state(InitialStateKind::AllPlusX, 3);
    let bad = DVector::from_vec(vec![1.0; 5]);
    assert!(evolve_populations(&spec, &bad, &psi0, &[0.1]).is_err());
}
