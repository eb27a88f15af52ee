//! Meta-training loop: one freshly sampled Hamiltonian problem per epoch, a
//! `T`-step unroll, backpropagation through the trajectory and an Adam
//! update of the meta-optimizer weights, with periodic validation on a fixed
//! held-out problem set and best-checkpoint selection.

use serde::{Deserialize, Serialize};
use std::time::Instant;

use crate::error::{CoreError, Result};
use crate::metaopt::{init_weights, unroll_backward, unroll_forward, LstmWeights, MetaOptConfig};
use crate::objective::{sample_problem_seeded, LossKind, ProblemInstance, SampleOptions};
use crate::rng::{derive_seed, rng_from_seed, stream};
use crate::sim::{build_model, ModelKind, ModelSpec};

/// Everything a training run needs. Defaults follow the training protocol:
/// `10^4` epochs of `T = 100` steps on the 4-qubit nearest-neighbour Ising
/// model at `sigma = 0.001`, validating every 100 epochs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub unroll_steps: usize,
    pub sigma: f64,
    pub sigma_in: f64,
    pub param_range: (f64, f64),
    pub model_kind: ModelKind,
    pub n_qubits: usize,
    pub loss_kind: LossKind,
    pub validate_every: usize,
    pub n_validation_problems: usize,
    pub meta_lr: f64,
    /// Global-norm clip on the meta-gradient; `None` disables clipping.
    pub grad_clip: Option<f64>,
    pub seed: u64,
    pub metaopt: MetaOptConfig,
    /// Epoch numbering starts here (non-zero when resuming).
    pub start_epoch: usize,
    /// Truncated-BPTT segment length: the unroll is split into segments of
    /// this many steps, each backpropagated and applied as its own update
    /// (recurrent state carried across, gradients stopped at boundaries).
    /// `None` backpropagates the full unroll as a single update per epoch.
    pub bptt_segment: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10_000,
            unroll_steps: 100,
            sigma: 1e-3,
            sigma_in: 0.1,
            param_range: (1.0, 2.0),
            model_kind: ModelKind::Tfim,
            n_qubits: 4,
            loss_kind: LossKind::SquaredError,
            validate_every: 100,
            n_validation_problems: 32,
            meta_lr: 3e-3,
            grad_clip: Some(1.0),
            seed: 0,
            metaopt: MetaOptConfig::default(),
            start_epoch: 0,
            bptt_segment: Some(20),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.unroll_steps == 0 || self.validate_every == 0 {
            return Err(CoreError::InvalidConfig(
                "epochs, unroll_steps and validate_every must be positive".into(),
            ));
        }
        if self.n_validation_problems == 0 {
            return Err(CoreError::InvalidConfig(
                "need at least one validation problem".into(),
            ));
        }
        if self.sigma < 0.0 || self.sigma_in < 0.0 {
            return Err(CoreError::InvalidConfig("sigma values must be >= 0".into()));
        }
        if !(self.meta_lr > 0.0) {
            return Err(CoreError::InvalidConfig("meta_lr must be > 0".into()));
        }
        self.metaopt.validate()
    }

    pub fn sample_options(&self) -> SampleOptions {
        SampleOptions {
            sigma: self.sigma,
            sigma_in: self.sigma_in,
            param_range: self.param_range,
            loss_kind: self.loss_kind,
            ..SampleOptions::default()
        }
    }

    pub fn model_spec(&self) -> Result<ModelSpec> {
        build_model(self.model_kind, self.n_qubits)
    }

    /// Deterministic per-epoch instance seed from the training stream.
    pub fn epoch_seed(&self, epoch: usize) -> u64 {
        derive_seed(self.seed, stream::TRAINING, epoch as u64)
    }
}

/// One epoch's log line.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub meta_loss: f64,
    pub clipped: bool,
    /// `true` when the epoch produced a non-finite meta-loss and was skipped.
    pub skipped: bool,
    pub wall_ms: f64,
    pub instance_seed: u64,
    /// Filled on validation epochs.
    pub val_mean_final_loss: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ValidationRecord {
    pub epoch: usize,
    pub mean_final_loss: f64,
    pub mean_trajectory_loss: f64,
}

/// Full training history.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
    pub validations: Vec<ValidationRecord>,
    pub best_epoch: Option<usize>,
    pub best_validation_loss: Option<f64>,
    pub validation_seeds: Vec<u64>,
    pub clip_events: usize,
    pub skipped_epochs: usize,
}

/// Mean final loss and mean trajectory loss over a problem set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ValidationSummary {
    pub mean_final_loss: f64,
    pub mean_trajectory_loss: f64,
}

/// Runs the unrolled meta-optimizer on each problem (forward only) and
/// averages the final loss and the per-step mean trajectory loss.
pub fn validate(
    weights: &LstmWeights,
    problems: &[ProblemInstance],
    t_steps: usize,
) -> Result<ValidationSummary> {
    if problems.is_empty() {
        return Err(CoreError::InvalidInput(
            "validation needs at least one problem".into(),
        ));
    }
    let mut final_sum = 0.0;
    let mut traj_sum = 0.0;
    for problem in problems {
        let traj = unroll_forward(weights, &problem.objective(), &problem.theta_init, t_steps)?;
        final_sum += traj.final_loss();
        traj_sum += traj.mean_trajectory_loss();
    }
    let n = problems.len() as f64;
    Ok(ValidationSummary {
        mean_final_loss: final_sum / n,
        mean_trajectory_loss: traj_sum / n,
    })
}

/// The held-out validation set, generated once from `seed + 1` so its seed
/// stream never overlaps the training stream.
pub fn validation_problems(config: &TrainConfig) -> Result<Vec<ProblemInstance>> {
    let spec = config.model_spec()?;
    let options = config.sample_options();
    (0..config.n_validation_problems)
        .map(|i| {
            let seed = derive_seed(config.seed + 1, stream::VALIDATION, i as u64);
            sample_problem_seeded(&spec, seed, &options)
        })
        .collect()
}

/// Adam state over the flattened weight vector.
struct MetaAdam {
    m1: Vec<f64>,
    m2: Vec<f64>,
    t: i32,
    lr: f64,
}

impl MetaAdam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize, lr: f64) -> Self {
        Self {
            m1: vec![0.0; n],
            m2: vec![0.0; n],
            t: 0,
            lr,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let bc1 = 1.0 - Self::BETA1.powi(self.t);
        let bc2 = 1.0 - Self::BETA2.powi(self.t);
        for a in 0..params.len() {
            self.m1[a] = Self::BETA1 * self.m1[a] + (1.0 - Self::BETA1) * grad[a];
            self.m2[a] = Self::BETA2 * self.m2[a] + (1.0 - Self::BETA2) * grad[a] * grad[a];
            let mh = self.m1[a] / bc1;
            let vh = self.m2[a] / bc2;
            params[a] -= self.lr * mh / (vh.sqrt() + Self::EPS);
        }
    }

    pub fn describe(lr: f64) -> String {
        format!(
            "adam(lr={lr},b1={},b2={},eps={})",
            Self::BETA1,
            Self::BETA2,
            Self::EPS
        )
    }
}

/// Human-readable description of the meta-optimizer used on phi, recorded in
/// checkpoint metadata.
pub fn meta_optimizer_description(meta_lr: f64) -> String {
    MetaAdam::describe(meta_lr)
}

/// Result of [`meta_train`]: the best-validation weights plus the history.
pub struct TrainOutcome {
    pub best_weights: LstmWeights,
    pub final_weights: LstmWeights,
    pub log: TrainLog,
}

/// Meta-training. Starts from `initial` weights when given (resume), else
/// from a fresh seeded initialization. Aborts if more than 10% of epochs
/// produce a non-finite meta-loss.
pub fn meta_train(config: &TrainConfig, initial: Option<LstmWeights>) -> Result<TrainOutcome> {
    config.validate()?;
    let spec = config.model_spec()?;
    let options = config.sample_options();

    let mut weights = match initial {
        Some(w) => {
            if w.config != config.metaopt {
                return Err(CoreError::InvalidConfig(
                    "resume weights disagree with the configured architecture".into(),
                ));
            }
            w
        }
        None => init_weights(&config.metaopt, &mut rng_from_seed(config.seed))?,
    };

    let val_problems = validation_problems(config)?;
    let val_seeds: Vec<u64> = val_problems.iter().map(|p| p.rng_seed).collect();

    let mut log = TrainLog {
        validation_seeds: val_seeds,
        ..TrainLog::default()
    };
    let mut adam = MetaAdam::new(weights.n_scalars(), config.meta_lr);
    let mut best: Option<(f64, usize, LstmWeights)> = None;

    let segment_len = config
        .bptt_segment
        .unwrap_or(config.unroll_steps)
        .clamp(1, config.unroll_steps);

    let epoch_range = (config.start_epoch + 1)..=(config.start_epoch + config.epochs);
    for epoch in epoch_range {
        let started = Instant::now();
        let instance_seed = config.epoch_seed(epoch);
        let problem = sample_problem_seeded(&spec, instance_seed, &options)?;

        let mut record = EpochRecord {
            epoch,
            meta_loss: f64::NAN,
            clipped: false,
            skipped: false,
            wall_ms: 0.0,
            instance_seed,
            val_mean_final_loss: None,
        };
        match run_epoch(
            config,
            segment_len,
            &problem,
            &mut weights,
            &mut adam,
            &mut record,
            &mut log,
        ) {
            Ok(()) => {}
            Err(CoreError::NonFinite { .. }) => {
                record.skipped = true;
                log.skipped_epochs += 1;
            }
            Err(other) => return Err(other),
        }

        let epochs_done = epoch - config.start_epoch;
        if epochs_done % config.validate_every == 0 || epochs_done == config.epochs {
            let summary = validate(&weights, &val_problems, config.unroll_steps)?;
            record.val_mean_final_loss = Some(summary.mean_final_loss);
            log.validations.push(ValidationRecord {
                epoch,
                mean_final_loss: summary.mean_final_loss,
                mean_trajectory_loss: summary.mean_trajectory_loss,
            });
            let better = match &best {
                Some((best_loss, _, _)) => summary.mean_final_loss < *best_loss,
                None => true,
            };
            if better {
                best = Some((summary.mean_final_loss, epoch, weights.clone()));
            }
        }

        record.wall_ms = started.elapsed().as_secs_f64() * 1e3;
        log.epochs.push(record);

        if log.skipped_epochs * 10 > config.epochs {
            return Err(CoreError::InvalidInput(format!(
                "aborting: {} of {} epochs produced non-finite meta-losses",
                log.skipped_epochs, config.epochs
            )));
        }
    }

    let (best_loss, best_epoch, best_weights) =
        best.expect("at least one validation ran (final epoch validates)");
    log.best_epoch = Some(best_epoch);
    log.best_validation_loss = Some(best_loss);
    Ok(TrainOutcome {
        best_weights,
        final_weights: weights,
        log,
    })
}

/// One training epoch: unroll in segments, each segment backpropagated and
/// applied as its own clipped Adam update. The recurrent state and iterate
/// carry across segment boundaries; gradients do not (truncated BPTT).
fn run_epoch(
    config: &TrainConfig,
    segment_len: usize,
    problem: &ProblemInstance,
    weights: &mut LstmWeights,
    adam: &mut MetaAdam,
    record: &mut EpochRecord,
    log: &mut TrainLog,
) -> Result<()> {
    use crate::metaopt::{final_eval, unroll_segment, LstmState};

    let objective = problem.objective();
    let mut state = LstmState::zeros(weights, problem.theta_init.len());
    let mut theta = problem.theta_init.clone();
    let mut carried_eval: Option<(f64, nalgebra::DVector<f64>)> = None;
    let mut meta_loss = 0.0f64;
    let mut remaining = config.unroll_steps;

    while remaining > 0 {
        let steps = segment_len.min(remaining);
        let (traj, next_state) =
            unroll_segment(weights, &objective, &theta, steps, state, carried_eval)?;
        meta_loss += traj.losses[1..].iter().sum::<f64>();
        if !meta_loss.is_finite() {
            return Err(CoreError::NonFinite {
                what: "meta loss",
                coordinate: None,
            });
        }
        let grad = unroll_backward(weights, &traj)?;
        let mut flat_grad = grad.to_flat();
        if let Some(limit) = config.grad_clip {
            let norm: f64 = flat_grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if norm > limit {
                let scale = limit / norm;
                for g in &mut flat_grad {
                    *g *= scale;
                }
                record.clipped = true;
                log.clip_events += 1;
            }
        }
        let mut flat = weights.to_flat();
        adam.step(&mut flat, &flat_grad);
        *weights = weights.from_flat(&flat)?;

        carried_eval = Some(final_eval(&traj));
        theta = traj.final_theta().clone();
        state = next_state;
        remaining -= steps;
    }
    record.meta_loss = meta_loss;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::Objective;

    fn tiny_config() -> TrainConfig {
        TrainConfig {
            epochs: 2,
            unroll_steps: 3,
            n_qubits: 3,
            validate_every: 1,
            n_validation_problems: 2,
            seed: 7,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn single_epoch_bookkeeping() {
        let config = TrainConfig {
            epochs: 1,
            ..tiny_config()
        };
        let out = meta_train(&config, None).unwrap();
        assert_eq!(out.log.epochs.len(), 1);
        assert!(out.log.best_epoch.is_some());
        assert!(out.log.epochs[0].meta_loss.is_finite());
    }

    #[test]
    fn training_is_deterministic() {
        let config = tiny_config();
        let a = meta_train(&config, None).unwrap();
        let b = meta_train(&config, None).unwrap();
        assert_eq!(a.final_weights, b.final_weights);
        let al: Vec<f64> = a.log.epochs.iter().map(|e| e.meta_loss).collect();
        let bl: Vec<f64> = b.log.epochs.iter().map(|e| e.meta_loss).collect();
        assert_eq!(al, bl);
    }

    #[test]
    fn training_and_validation_seeds_are_disjoint() {
        let config = tiny_config();
        let out = meta_train(&config, None).unwrap();
        let train_seeds: std::collections::HashSet<u64> =
            out.log.epochs.iter().map(|e| e.instance_seed).collect();
        for vs in &out.log.validation_seeds {
            assert!(!train_seeds.contains(vs));
        }
    }

    #[test]
    fn best_checkpoint_matches_minimum_recorded_validation() {
        let config = TrainConfig {
            epochs: 4,
            ..tiny_config()
        };
        let out = meta_train(&config, None).unwrap();
        let min = out
            .log
            .validations
            .iter()
            .map(|v| v.mean_final_loss)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(out.log.best_validation_loss.unwrap(), min);
    }

    #[test]
    fn validate_on_duplicate_list_equals_single_problem() {
        let config = tiny_config();
        let spec = config.model_spec().unwrap();
        let problem =
            sample_problem_seeded(&spec, 3, &config.sample_options()).unwrap();
        let weights = init_weights(&config.metaopt, &mut rng_from_seed(0)).unwrap();
        let single = validate(&weights, &[problem.clone()], 3).unwrap();
        let double = validate(&weights, &[problem.clone(), problem], 3).unwrap();
        assert!((single.mean_final_loss - double.mean_final_loss).abs() < 1e-15);
        assert!((single.mean_trajectory_loss - double.mean_trajectory_loss).abs() < 1e-15);
    }

    #[test]
    fn zero_network_validation_equals_initial_loss() {
        let config = tiny_config();
        let spec = config.model_spec().unwrap();
        let problem = sample_problem_seeded(&spec, 5, &config.sample_options()).unwrap();
        let w = init_weights(&config.metaopt, &mut rng_from_seed(0)).unwrap();
        let zero = w.from_flat(&vec![0.0; w.n_scalars()]).unwrap();
        let summary = validate(&zero, &[problem.clone()], 4).unwrap();
        let f0 = problem.objective().value(&problem.theta_init).unwrap();
        assert!((summary.mean_final_loss - f0).abs() < 1e-15);
    }
}
