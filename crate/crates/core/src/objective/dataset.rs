use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::sim::{build_model, evolve_populations, initial_state, InitialStateKind, ModelKind, ModelSpec};

/// Number of sample times in the default quench grid.
pub const DEFAULT_N_TIMES: usize = 50;
/// Extent of the default quench grid (inclusive).
pub const DEFAULT_T_MAX: f64 = 10.0;

/// The default time grid: `DEFAULT_N_TIMES` equally spaced times spanning
/// `[0, DEFAULT_T_MAX]` inclusive of both endpoints.
pub fn default_time_grid() -> Vec<f64> {
    time_grid(DEFAULT_T_MAX, DEFAULT_N_TIMES)
}

/// `n` equally spaced times spanning `[0, t_max]` inclusive.
pub fn time_grid(t_max: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2, "time grid needs at least two points");
    let step = t_max / (n - 1) as f64;
    (0..n).map(|k| k as f64 * step).collect()
}

/// The default pair of easy-to-prepare initial states.
pub fn default_initial_states() -> Vec<InitialStateKind> {
    vec![InitialStateKind::AllPlusX, InitialStateKind::AllZeroZ]
}

/// Observed populations over initial states, times and basis states, with
/// clipped additive Gaussian noise.
#[derive(Clone, Debug, PartialEq)]
pub struct QuenchDataset {
    times: Vec<f64>,
    initial_states: Vec<InitialStateKind>,
    /// One `[n_times x 2^N]` matrix per initial state.
    observed: Vec<DMatrix<f64>>,
    noise_sigma: f64,
}

impl QuenchDataset {
    pub fn new(
        times: Vec<f64>,
        initial_states: Vec<InitialStateKind>,
        observed: Vec<DMatrix<f64>>,
        noise_sigma: f64,
    ) -> Result<Self> {
        if initial_states.is_empty() {
            return Err(CoreError::InvalidInput(
                "dataset needs at least one initial state".into(),
            ));
        }
        if observed.len() != initial_states.len() {
            return Err(CoreError::DimensionMismatch {
                what: "observed blocks",
                expected: initial_states.len(),
                got: observed.len(),
            });
        }
        if !times.windows(2).all(|w| w[0] < w[1]) {
            return Err(CoreError::InvalidInput(
                "times must be strictly increasing".into(),
            ));
        }
        if noise_sigma < 0.0 {
            return Err(CoreError::InvalidInput("noise sigma must be >= 0".into()));
        }
        for block in &observed {
            if block.nrows() != times.len() {
                return Err(CoreError::DimensionMismatch {
                    what: "observed rows",
                    expected: times.len(),
                    got: block.nrows(),
                });
            }
            if block.iter().any(|&y| !(0.0..=1.0).contains(&y)) {
                return Err(CoreError::InvalidInput(
                    "observed populations must lie in [0, 1]".into(),
                ));
            }
        }
        Ok(Self {
            times,
            initial_states,
            observed,
            noise_sigma,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn initial_states(&self) -> &[InitialStateKind] {
        &self.initial_states
    }

    /// Observed populations for initial state index `j`; rows are times.
    pub fn observed(&self, j: usize) -> &DMatrix<f64> {
        &self.observed[j]
    }

    pub fn noise_sigma(&self) -> f64 {
        self.noise_sigma
    }

    /// Total number of scalar observations.
    pub fn n_entries(&self) -> usize {
        self.observed.iter().map(|b| b.len()).sum()
    }
}

/// Simulates the quench at `theta_true` and adds clipped Gaussian noise:
/// `y = clip(y_exact + eps, 0, 1)`, `eps ~ N(0, sigma^2)` i.i.d. per entry.
/// Noise is drawn in (state, time, basis-index) order.
pub fn generate_dataset_with_states<R: Rng>(
    spec: &ModelSpec,
    theta_true: &DVector<f64>,
    times: &[f64],
    states: &[InitialStateKind],
    sigma: f64,
    rng: &mut R,
) -> Result<QuenchDataset> {
    if sigma < 0.0 {
        return Err(CoreError::InvalidInput("noise sigma must be >= 0".into()));
    }
    let normal = if sigma > 0.0 {
        Some(Normal::new(0.0, sigma).map_err(|e| CoreError::InvalidInput(e.to_string()))?)
    } else {
        None
    };
    let mut observed = Vec::with_capacity(states.len());
    for &kind in states {
        let psi0 = initial_state(kind, spec.n_qubits());
        let mut pops = evolve_populations(spec, theta_true, &psi0, times)?;
        // The clip applies even at sigma = 0: exact populations can stray
        // from [0, 1] by rounding.
        for t in 0..pops.nrows() {
            for i in 0..pops.ncols() {
                let noise = normal.as_ref().map_or(0.0, |n| n.sample(rng));
                pops[(t, i)] = (pops[(t, i)] + noise).clamp(0.0, 1.0);
            }
        }
        observed.push(pops);
    }
    QuenchDataset::new(times.to_vec(), states.to_vec(), observed, sigma)
}

/// [`generate_dataset_with_states`] with the default X/Z initial-state pair.
pub fn generate_dataset<R: Rng>(
    spec: &ModelSpec,
    theta_true: &DVector<f64>,
    times: &[f64],
    sigma: f64,
    rng: &mut R,
) -> Result<QuenchDataset> {
    generate_dataset_with_states(spec, theta_true, times, &default_initial_states(), sigma, rng)
}

/// On-disk dataset schema (JSON).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DatasetDocument {
    pub model_kind: ModelKind,
    pub n_qubits: usize,
    pub times: Vec<f64>,
    pub sigma: f64,
    pub seed: u64,
    pub theta_true: Vec<f64>,
    pub initial_states: Vec<InitialStateKind>,
    /// `observed[j][t][i]`.
    pub observed: Vec<Vec<Vec<f64>>>,
}

impl DatasetDocument {
    pub fn from_dataset(
        spec: &ModelSpec,
        theta_true: &DVector<f64>,
        seed: u64,
        dataset: &QuenchDataset,
    ) -> Result<Self> {
        if spec.kind() == ModelKind::Custom {
            return Err(CoreError::InvalidInput(
                "custom model specs cannot be exported by kind tag".into(),
            ));
        }
        let observed = dataset
            .observed
            .iter()
            .map(|block| {
                (0..block.nrows())
                    .map(|t| block.row(t).iter().copied().collect())
                    .collect()
            })
            .collect();
        Ok(Self {
            model_kind: spec.kind(),
            n_qubits: spec.n_qubits(),
            times: dataset.times.clone(),
            sigma: dataset.noise_sigma,
            seed,
            theta_true: theta_true.iter().copied().collect(),
            initial_states: dataset.initial_states.clone(),
            observed,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(doc: &str) -> Result<Self> {
        Ok(serde_json::from_str(doc)?)
    }

    /// Rebuilds the model spec and dataset from the document.
    pub fn into_parts(self) -> Result<(ModelSpec, DVector<f64>, QuenchDataset)> {
        let spec = build_model(self.model_kind, self.n_qubits)?;
        if self.theta_true.len() != spec.param_count() {
            return Err(CoreError::DimensionMismatch {
                what: "theta_true in dataset document",
                expected: spec.param_count(),
                got: self.theta_true.len(),
            });
        }
        let dim = spec.dim();
        let mut observed = Vec::with_capacity(self.observed.len());
        for block in &self.observed {
            let mut m = DMatrix::zeros(self.times.len(), dim);
            if block.len() != self.times.len() {
                return Err(CoreError::DimensionMismatch {
                    what: "observed time rows",
                    expected: self.times.len(),
                    got: block.len(),
                });
            }
            for (t, row) in block.iter().enumerate() {
                if row.len() != dim {
                    return Err(CoreError::DimensionMismatch {
                        what: "observed basis columns",
                        expected: dim,
                        got: row.len(),
                    });
                }
                for (i, &y) in row.iter().enumerate() {
                    m[(t, i)] = y;
                }
            }
            observed.push(m);
        }
        let theta = DVector::from_vec(self.theta_true);
        let dataset = QuenchDataset::new(self.times, self.initial_states, observed, self.sigma)?;
        Ok((spec, theta, dataset))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn default_grid_is_inclusive_of_both_endpoints() {
        let g = default_time_grid();
        assert_eq!(g.len(), 50);
        assert_eq!(g[0], 0.0);
        assert!((g[49] - 10.0).abs() < 1e-12);
        let step = g[1] - g[0];
        assert!((step - 10.0 / 49.0).abs() < 1e-12);
    }

    #[test]
    fn sigma_zero_reproduces_exact_populations() {
        let spec = build_model(ModelKind::Tfim, 3).unwrap();
        let theta = DVector::from_element(6, 1.5);
        let times = time_grid(2.0, 5);
        let mut rng = rng_from_seed(0);
        let ds = generate_dataset(&spec, &theta, &times, 0.0, &mut rng).unwrap();
        let psi0 = initial_state(InitialStateKind::AllPlusX, 3);
        let exact = evolve_populations(&spec, &theta, &psi0, &times)
            .unwrap()
            .map(|y| y.clamp(0.0, 1.0));
        assert_eq!(ds.observed(0), &exact);
    }

    #[test]
    fn json_round_trip_is_lossless() {
        let spec = build_model(ModelKind::Xy, 3).unwrap();
        let theta = DVector::from_element(6, 1.25);
        let mut rng = rng_from_seed(7);
        let ds = generate_dataset(&spec, &theta, &time_grid(1.0, 4), 0.01, &mut rng).unwrap();
        let doc = DatasetDocument::from_dataset(&spec, &theta, 7, &ds).unwrap();
        let json = doc.to_json().unwrap();
        let (spec2, theta2, ds2) = DatasetDocument::from_json(&json).unwrap().into_parts().unwrap();
        assert_eq!(spec2.param_count(), spec.param_count());
        assert_eq!(theta2, theta);
        assert_eq!(ds2, ds);
    }
}
