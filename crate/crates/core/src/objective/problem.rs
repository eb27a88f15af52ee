use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::dataset::{default_initial_states, default_time_grid, generate_dataset_with_states, QuenchDataset};
use super::loss::LossKind;
use crate::error::{CoreError, Result};
use crate::rng::rng_from_seed;
use crate::sim::{InitialStateKind, ModelSpec};

/// One optimization episode: a ground truth, its noisy dataset and a starting
/// guess drawn from the prior.
#[derive(Clone, Debug)]
pub struct ProblemInstance {
    pub spec: ModelSpec,
    pub theta_true: DVector<f64>,
    pub dataset: QuenchDataset,
    pub theta_init: DVector<f64>,
    pub loss_kind: LossKind,
    pub rng_seed: u64,
}

/// Knobs for [`sample_problem_seeded`]. Defaults follow the training setup:
/// `sigma_in = 0.1`, parameters uniform on `(1, 2)`, the 50-point time grid
/// and both initial states.
#[derive(Clone, Debug)]
pub struct SampleOptions {
    pub sigma: f64,
    pub sigma_in: f64,
    pub param_range: (f64, f64),
    pub loss_kind: LossKind,
    pub times: Vec<f64>,
    pub initial_states: Vec<InitialStateKind>,
}

impl Default for SampleOptions {
    fn default() -> Self {
        Self {
            sigma: 1e-3,
            sigma_in: 0.1,
            param_range: (1.0, 2.0),
            loss_kind: LossKind::SquaredError,
            times: default_time_grid(),
            initial_states: default_initial_states(),
        }
    }
}

impl SampleOptions {
    fn validate(&self) -> Result<()> {
        let (lo, hi) = self.param_range;
        if !(lo < hi) {
            return Err(CoreError::InvalidInput(format!(
                "invalid parameter range ({lo}, {hi})"
            )));
        }
        if self.sigma_in < 0.0 {
            return Err(CoreError::InvalidInput("sigma_in must be >= 0".into()));
        }
        Ok(())
    }
}

/// Deterministically samples one problem from `seed`: `theta*_i ~ U(lo, hi)`,
/// `theta0 ~ N(theta*, sigma_in^2 I)`, then the noisy dataset. Draw order is
/// fixed (`theta*`, `theta0`, noise), so a recorded seed reproduces the
/// instance bit-for-bit.
pub fn sample_problem_seeded(
    spec: &ModelSpec,
    seed: u64,
    options: &SampleOptions,
) -> Result<ProblemInstance> {
    options.validate()?;
    let mut rng = rng_from_seed(seed);
    let p = spec.param_count();
    let (lo, hi) = options.param_range;
    let theta_true = DVector::from_iterator(p, (0..p).map(|_| rng.gen_range(lo..hi)));
    let theta_init = if options.sigma_in > 0.0 {
        let prior = Normal::new(0.0, options.sigma_in)
            .map_err(|e| CoreError::InvalidInput(e.to_string()))?;
        DVector::from_iterator(p, theta_true.iter().map(|&t| t + prior.sample(&mut rng)))
    } else {
        theta_true.clone()
    };
    let dataset = generate_dataset_with_states(
        spec,
        &theta_true,
        &options.times,
        &options.initial_states,
        options.sigma,
        &mut rng,
    )?;
    Ok(ProblemInstance {
        spec: spec.clone(),
        theta_true,
        dataset,
        theta_init,
        loss_kind: options.loss_kind,
        rng_seed: seed,
    })
}

/// Samples one problem, drawing the instance seed from `rng`.
pub fn sample_problem<R: Rng>(
    spec: &ModelSpec,
    rng: &mut R,
    sigma: f64,
    sigma_in: f64,
    param_range: (f64, f64),
) -> Result<ProblemInstance> {
    let options = SampleOptions {
        sigma,
        sigma_in,
        param_range,
        ..SampleOptions::default()
    };
    sample_problem_seeded(spec, rng.gen::<u64>(), &options)
}

impl ProblemInstance {
    /// The same problem with parameters relabelled by `perm` (new index `k`
    /// is old index `perm[k]`). The dataset does not depend on parameter
    /// labels and is shared unchanged.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let spec = self.spec.permuted(perm)?;
        let pick = |v: &DVector<f64>| DVector::from_iterator(perm.len(), perm.iter().map(|&k| v[k]));
        Ok(Self {
            spec,
            theta_true: pick(&self.theta_true),
            dataset: self.dataset.clone(),
            theta_init: pick(&self.theta_init),
            loss_kind: self.loss_kind,
            rng_seed: self.rng_seed,
        })
    }
}
