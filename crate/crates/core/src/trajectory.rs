//! The record every optimizer produces: iterates, losses, gradients and
//! bookkeeping shared by the benchmark harness.

use nalgebra::DVector;

use crate::metaopt::UnrollTape;

/// Loss value above which a run is declared diverged and frozen.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

/// A `T`-step optimization trajectory.
///
/// `thetas` and `losses` have length `T + 1` (iterates 0..=T); `gradients`
/// has length `T` (the gradients consumed at iterates 0..T-1), and is empty
/// for derivative-free optimizers. Diverged runs are truncated at the last
/// finite iterate and padded with it so that per-iteration statistics stay
/// well defined.
#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub thetas: Vec<DVector<f64>>,
    pub losses: Vec<f64>,
    pub gradients: Vec<DVector<f64>>,
    /// Recorded LSTM activations, present only on meta-optimizer unrolls.
    pub tape: Option<UnrollTape>,
    pub meta: TrajectoryMeta,
}

#[derive(Clone, Debug, Default)]
pub struct TrajectoryMeta {
    /// Calls that evaluated the loss value (line searches included).
    pub value_evals: usize,
    /// Calls that evaluated the gradient.
    pub grad_evals: usize,
    pub diverged: bool,
    /// Step index at which divergence froze the run, if any.
    pub truncated_at: Option<usize>,
    /// Free-form events such as line-search fallbacks.
    pub events: Vec<String>,
}

impl Trajectory {
    pub fn n_steps(&self) -> usize {
        self.thetas.len().saturating_sub(1)
    }

    pub fn final_theta(&self) -> &DVector<f64> {
        self.thetas.last().expect("trajectory is never empty")
    }

    pub fn final_loss(&self) -> f64 {
        *self.losses.last().expect("trajectory is never empty")
    }

    /// Mean of `f(theta^k)` over `k = 1..=T`, the per-trajectory term of the
    /// meta-training objective divided by `T`.
    pub fn mean_trajectory_loss(&self) -> f64 {
        let t = self.n_steps();
        if t == 0 {
            return self.final_loss();
        }
        self.losses[1..].iter().sum::<f64>() / t as f64
    }

    /// Freezes the trajectory at step `k`: later entries repeat the values at
    /// `k` so the lengths still cover `T` steps.
    pub fn pad_from(&mut self, k: usize, total_steps: usize) {
        let theta = self.thetas[k].clone();
        let loss = self.losses[k];
        self.thetas.truncate(k + 1);
        self.losses.truncate(k + 1);
        while self.thetas.len() <= total_steps {
            self.thetas.push(theta.clone());
            self.losses.push(loss);
        }
        self.meta.diverged = true;
        self.meta.truncated_at = Some(k);
    }
}
