//! Noisy quench datasets and the optimizee loss `f(theta)` with its exact
//! gradient, for both the squared-error and KL variants.

mod dataset;
mod loss;
mod problem;

pub use dataset::{
    default_initial_states, default_time_grid, generate_dataset, generate_dataset_with_states,
    time_grid, DatasetDocument, QuenchDataset, DEFAULT_N_TIMES, DEFAULT_T_MAX,
};
pub use loss::{
    central_difference, finite_diff_grad, loss_and_grad, loss_value, LossEvaluation, LossKind,
    KL_FLOOR,
};
pub use problem::{sample_problem, sample_problem_seeded, ProblemInstance, SampleOptions};

use crate::error::Result;
use nalgebra::DVector;

/// A minimization target: every optimizer in this crate (hand-designed or
/// learned) consumes one of these.
pub trait Objective {
    fn dim(&self) -> usize;
    fn value(&self, theta: &DVector<f64>) -> Result<f64>;
    fn value_and_grad(&self, theta: &DVector<f64>) -> Result<(f64, DVector<f64>)>;
}

impl<T: Objective + ?Sized> Objective for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, theta: &DVector<f64>) -> Result<f64> {
        (**self).value(theta)
    }
    fn value_and_grad(&self, theta: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        (**self).value_and_grad(theta)
    }
}

/// The quench-data misfit objective of one [`ProblemInstance`].
pub struct ProblemObjective<'a> {
    spec: &'a crate::sim::ModelSpec,
    dataset: &'a QuenchDataset,
    kind: LossKind,
}

impl ProblemInstance {
    pub fn objective(&self) -> ProblemObjective<'_> {
        ProblemObjective {
            spec: &self.spec,
            dataset: &self.dataset,
            kind: self.loss_kind,
        }
    }
}

impl Objective for ProblemObjective<'_> {
    fn dim(&self) -> usize {
        self.spec.param_count()
    }

    fn value(&self, theta: &DVector<f64>) -> Result<f64> {
        loss_value(self.spec, theta, self.dataset, self.kind)
    }

    fn value_and_grad(&self, theta: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        let eval = loss_and_grad(self.spec, theta, self.dataset, self.kind)?;
        Ok((eval.value, eval.gradient))
    }
}
