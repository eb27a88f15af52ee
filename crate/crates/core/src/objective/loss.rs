use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::dataset::QuenchDataset;
use crate::error::{CoreError, Result};
use crate::sim::{initial_state, EvolutionCache, ModelSpec};

/// Floor applied to model populations before logarithms in the KL loss.
pub const KL_FLOOR: f64 = 1e-12;

/// Which data-misfit loss to optimize.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// `f = sum_{i,j,t} (y - y_model)^2`.
    SquaredError,
    /// Sum over `(j, t)` of `D_KL(P || Q)` between the renormalized observed
    /// row and the floored, renormalized model row.
    Kl,
}

impl std::fmt::Display for LossKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LossKind::SquaredError => "squared_error",
            LossKind::Kl => "kl",
        })
    }
}

/// Loss value together with its exact gradient.
#[derive(Clone, Debug)]
pub struct LossEvaluation {
    pub value: f64,
    pub gradient: DVector<f64>,
}

fn check_theta(spec: &ModelSpec, theta: &DVector<f64>) -> Result<()> {
    if theta.len() != spec.param_count() {
        return Err(CoreError::DimensionMismatch {
            what: "parameter vector",
            expected: spec.param_count(),
            got: theta.len(),
        });
    }
    if let Some(coord) = theta.iter().position(|t| !t.is_finite()) {
        return Err(CoreError::NonFinite {
            what: "parameter vector",
            coordinate: Some(coord),
        });
    }
    Ok(())
}

/// Per-row loss contribution and the coefficients `c_i = df/d(pop_i)` used by
/// the shared gradient contraction.
fn row_terms(
    kind: LossKind,
    pops: &[f64],
    observed: &[f64],
    coeffs: Option<&mut [f64]>,
) -> Result<f64> {
    match kind {
        LossKind::SquaredError => {
            let mut f = 0.0;
            if let Some(c) = coeffs {
                for i in 0..pops.len() {
                    let r = pops[i] - observed[i];
                    f += r * r;
                    c[i] = 2.0 * r;
                }
            } else {
                for i in 0..pops.len() {
                    let r = pops[i] - observed[i];
                    f += r * r;
                }
            }
            Ok(f)
        }
        LossKind::Kl => {
            let obs_sum: f64 = observed.iter().sum();
            if obs_sum <= 0.0 {
                return Err(CoreError::InvalidInput(
                    "KL loss undefined: observed row sums to zero".into(),
                ));
            }
            let model_sum: f64 = pops.iter().map(|&q| q.max(KL_FLOOR)).sum();
            let mut f = 0.0;
            for i in 0..pops.len() {
                let p = observed[i] / obs_sum;
                if p > 0.0 {
                    let q = pops[i].max(KL_FLOOR) / model_sum;
                    f += p * (p / q).ln();
                }
            }
            if let Some(c) = coeffs {
                for i in 0..pops.len() {
                    let floored = pops[i] < KL_FLOOR;
                    c[i] = if floored {
                        0.0
                    } else {
                        let p = observed[i] / obs_sum;
                        1.0 / model_sum - p / pops[i]
                    };
                }
            }
            Ok(f)
        }
    }
}

/// Loss value only (skips the derivative machinery; used by derivative-free
/// optimizers and finite differences).
pub fn loss_value(
    spec: &ModelSpec,
    theta: &DVector<f64>,
    dataset: &QuenchDataset,
    kind: LossKind,
) -> Result<f64> {
    check_theta(spec, theta)?;
    let cache = EvolutionCache::new(spec, theta)?;
    let dim = spec.dim();
    let mut pops = vec![0.0; dim];
    let mut total = 0.0;
    for (j, &state_kind) in dataset.initial_states().iter().enumerate() {
        let psi0 = initial_state(state_kind, spec.n_qubits());
        let w = cache.state_in_eigenbasis(&psi0)?;
        let observed = dataset.observed(j);
        for (ti, &t) in dataset.times().iter().enumerate() {
            let phases = cache.decomp().phases(t);
            let psi = cache.amplitudes_at(&w, &phases);
            for i in 0..dim {
                pops[i] = psi[i].norm_sqr();
            }
            let row: Vec<f64> = observed.row(ti).iter().copied().collect();
            total += row_terms(kind, &pops, &row, None)?;
        }
    }
    Ok(total)
}

/// Loss value and exact gradient.
///
/// One eigendecomposition per call, reused across all `(state, time,
/// parameter)` combinations. Per row the gradient uses
/// `d pop_i / d theta_a = 2 Re( conj(psi_i) * [V (K . M_a) w]_i )`,
/// contracted without forming any `dU/dtheta_a` matrix.
pub fn loss_and_grad(
    spec: &ModelSpec,
    theta: &DVector<f64>,
    dataset: &QuenchDataset,
    kind: LossKind,
) -> Result<LossEvaluation> {
    check_theta(spec, theta)?;
    let cache = EvolutionCache::with_term_modes(spec, theta)?;
    let modes = cache.term_modes().expect("term modes requested");
    let dim = spec.dim();
    let n_params = spec.param_count();
    let v = cache.decomp().eigenvectors();

    let mut value = 0.0;
    let mut gradient = DVector::zeros(n_params);
    let mut pops = vec![0.0; dim];
    let mut coeffs = vec![0.0; dim];
    let mut kernel = DMatrix::<Complex64>::zeros(dim, dim);
    let mut weighted = DVector::<Complex64>::zeros(dim);

    for (j, &state_kind) in dataset.initial_states().iter().enumerate() {
        let psi0 = initial_state(state_kind, spec.n_qubits());
        let w = cache.state_in_eigenbasis(&psi0)?;
        let observed = dataset.observed(j);
        for (ti, &t) in dataset.times().iter().enumerate() {
            let phases = cache.decomp().phases(t);
            let psi = cache.amplitudes_at(&w, &phases);
            for i in 0..dim {
                pops[i] = psi[i].norm_sqr();
            }
            let row: Vec<f64> = observed.row(ti).iter().copied().collect();
            value += row_terms(kind, &pops, &row, Some(&mut coeffs))?;

            // rv = V^T (c . conj(psi)); then
            // grad_a += 2 Re( sum_{m,n} rv_m K_mn (M_a)_mn w_n ).
            for i in 0..dim {
                weighted[i] = psi[i].conj() * coeffs[i];
            }
            let rv = v.tr_mul(&weighted);
            cache.fill_kernel(t, &phases, &mut kernel);
            let k_cols = kernel.as_slice();
            let rv_s = rv.as_slice();
            let w_s = w.as_slice();
            for (a, mode) in modes.iter().enumerate() {
                let m_cols = mode.as_slice();
                let mut acc = Complex64::new(0.0, 0.0);
                for n in 0..dim {
                    let base = n * dim;
                    let mut col_sum = Complex64::new(0.0, 0.0);
                    for m in 0..dim {
                        col_sum += rv_s[m] * k_cols[base + m] * m_cols[base + m];
                    }
                    acc += col_sum * w_s[n];
                }
                gradient[a] += 2.0 * acc.re;
            }
        }
    }
    Ok(LossEvaluation { value, gradient })
}

/// Central finite differences of the loss value,
/// `(f(theta + h e_a) - f(theta - h e_a)) / 2h` per component.
pub fn finite_diff_grad(
    spec: &ModelSpec,
    theta: &DVector<f64>,
    dataset: &QuenchDataset,
    kind: LossKind,
    h: f64,
) -> Result<DVector<f64>> {
    central_difference(|th| loss_value(spec, th, dataset, kind), theta, h)
}

/// Central finite differences of an arbitrary scalar function.
pub fn central_difference<F>(mut f: F, theta: &DVector<f64>, h: f64) -> Result<DVector<f64>>
where
    F: FnMut(&DVector<f64>) -> Result<f64>,
{
    if h <= 0.0 {
        return Err(CoreError::InvalidInput("step h must be positive".into()));
    }
    let mut grad = DVector::zeros(theta.len());
    let mut probe = theta.clone();
    for a in 0..theta.len() {
        probe[a] = theta[a] + h;
        let plus = f(&probe)?;
        probe[a] = theta[a] - h;
        let minus = f(&probe)?;
        probe[a] = theta[a];
        grad[a] = (plus - minus) / (2.0 * h);
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::dataset::{generate_dataset, time_grid};
    use crate::rng::rng_from_seed;
    use crate::sim::{build_model, ModelKind};
    use rand::Rng;

    fn setup(seed: u64, sigma: f64) -> (ModelSpec, DVector<f64>, QuenchDataset) {
        let spec = build_model(ModelKind::Tfim, 3).unwrap();
        let mut rng = rng_from_seed(seed);
        let theta = DVector::from_iterator(6, (0..6).map(|_| rng.gen_range(1.0..2.0)));
        let ds = generate_dataset(&spec, &theta, &time_grid(4.0, 12), sigma, &mut rng).unwrap();
        (spec, theta, ds)
    }

    #[test]
    fn zero_noise_truth_is_exact_minimum() {
        let (spec, theta, ds) = setup(4, 0.0);
        let eval = loss_and_grad(&spec, &theta, &ds, LossKind::SquaredError).unwrap();
        assert!(eval.value.abs() < 1e-18);
        assert!(eval.gradient.amax() < 1e-9);
    }

    #[test]
    fn kl_of_identical_rows_is_zero() {
        let (spec, theta, ds) = setup(6, 0.0);
        let f = loss_value(&spec, &theta, &ds, LossKind::Kl).unwrap();
        assert!(f.abs() < 1e-10, "KL at truth was {f}");
    }

    #[test]
    fn kl_rejects_all_zero_observed_row() {
        let (spec, theta, mut_ds) = setup(8, 0.0);
        // Zero out one observed row.
        let mut blocks: Vec<_> = (0..mut_ds.initial_states().len())
            .map(|j| mut_ds.observed(j).clone())
            .collect();
        for i in 0..blocks[0].ncols() {
            blocks[0][(2, i)] = 0.0;
        }
        let ds = QuenchDataset::new(
            mut_ds.times().to_vec(),
            mut_ds.initial_states().to_vec(),
            blocks,
            0.0,
        )
        .unwrap();
        assert!(loss_value(&spec, &theta, &ds, LossKind::Kl).is_err());
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let (spec, theta, ds) = setup(10, 1e-3);
        let mut rng = rng_from_seed(99);
        let probe =
            DVector::from_iterator(6, theta.iter().map(|&t| t + rng.gen_range(-0.1..0.1)));
        for kind in [LossKind::SquaredError, LossKind::Kl] {
            let eval = loss_and_grad(&spec, &probe, &ds, kind).unwrap();
            let fd = finite_diff_grad(&spec, &probe, &ds, kind, 1e-5).unwrap();
            for a in 0..6 {
                let rel = (eval.gradient[a] - fd[a]).abs() / fd[a].abs().max(1e-12);
                assert!(rel < 1e-5, "{kind}: component {a} rel err {rel}");
            }
        }
    }

    #[test]
    fn central_difference_is_exact_on_quadratics() {
        let theta = DVector::from_vec(vec![0.3, -1.2, 2.0]);
        for h in [1e-1, 1e-3, 1e-6] {
            let g = central_difference(|t| Ok(t.dot(t)), &theta, h).unwrap();
            for a in 0..3 {
                assert!((g[a] - 2.0 * theta[a]).abs() < 1e-9 / h.min(1.0));
            }
        }
    }

    #[test]
    fn loss_value_agrees_with_loss_and_grad() {
        let (spec, theta, ds) = setup(12, 1e-3);
        for kind in [LossKind::SquaredError, LossKind::Kl] {
            let v = loss_value(&spec, &theta, &ds, kind).unwrap();
            let e = loss_and_grad(&spec, &theta, &ds, kind).unwrap();
            assert_eq!(v, e.value);
        }
    }
}
