//! Hand-designed optimizers producing [`Trajectory`] records on the same
//! problems as the meta-optimizer: SGD, Adam, L-BFGS and Nelder-Mead, plus a
//! learning-rate sweep harness.

mod lbfgs;
mod nelder_mead;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::objective::{Objective, ProblemInstance};
use crate::trajectory::{Trajectory, TrajectoryMeta, DIVERGENCE_LIMIT};

/// Which hand-designed optimizer to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Sgd,
    Adam,
    Lbfgs,
    NelderMead,
}

impl std::fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BaselineKind::Sgd => "sgd",
            BaselineKind::Adam => "adam",
            BaselineKind::Lbfgs => "lbfgs",
            BaselineKind::NelderMead => "nelder_mead",
        })
    }
}

/// Hyperparameters for every baseline; only the fields of the selected kind
/// are consulted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub kind: BaselineKind,
    /// Step size for SGD/Adam.
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    /// L-BFGS history length.
    pub lbfgs_memory: usize,
    pub wolfe_c1: f64,
    pub wolfe_c2: f64,
    pub max_line_search_evals: usize,
    /// Fixed steepest-descent step taken when the line search fails.
    pub fallback_step: f64,
    pub nm_reflection: f64,
    pub nm_expansion: f64,
    pub nm_contraction: f64,
    pub nm_shrink: f64,
    pub nm_initial_edge: f64,
}

impl BaselineConfig {
    fn base(kind: BaselineKind, learning_rate: f64) -> Self {
        Self {
            kind,
            learning_rate,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            lbfgs_memory: 10,
            wolfe_c1: 1e-4,
            wolfe_c2: 0.9,
            max_line_search_evals: 20,
            fallback_step: 1e-3,
            nm_reflection: 1.0,
            nm_expansion: 2.0,
            nm_contraction: 0.5,
            nm_shrink: 0.5,
            nm_initial_edge: 0.05,
        }
    }

    pub fn sgd(learning_rate: f64) -> Self {
        Self::base(BaselineKind::Sgd, learning_rate)
    }

    pub fn adam(learning_rate: f64) -> Self {
        Self::base(BaselineKind::Adam, learning_rate)
    }

    pub fn lbfgs() -> Self {
        Self::base(BaselineKind::Lbfgs, 1.0)
    }

    pub fn nelder_mead() -> Self {
        Self::base(BaselineKind::NelderMead, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            BaselineKind::Sgd | BaselineKind::Adam => {
                if !(self.learning_rate > 0.0) {
                    return Err(CoreError::InvalidConfig(
                        "learning rate must be > 0".into(),
                    ));
                }
            }
            BaselineKind::Lbfgs => {
                if !(0.0 < self.wolfe_c1 && self.wolfe_c1 < self.wolfe_c2 && self.wolfe_c2 < 1.0) {
                    return Err(CoreError::InvalidConfig(
                        "wolfe constants must satisfy 0 < c1 < c2 < 1".into(),
                    ));
                }
                if self.lbfgs_memory == 0 {
                    return Err(CoreError::InvalidConfig("lbfgs memory must be >= 1".into()));
                }
            }
            BaselineKind::NelderMead => {
                if !(self.nm_initial_edge > 0.0) {
                    return Err(CoreError::InvalidConfig(
                        "simplex edge must be > 0".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// `true` if this loss value freezes the run under the divergence policy.
pub(crate) fn diverged(f: f64) -> bool {
    !f.is_finite() || f > DIVERGENCE_LIMIT
}

/// Runs `T` iterations of the configured optimizer from `theta0`.
///
/// A diverged run (loss above `1e6` or non-finite) is truncated at its last
/// healthy iterate, padded to full length and flagged rather than erroring,
/// so that paired benchmark statistics stay defined.
pub fn run_baseline<O: Objective>(
    config: &BaselineConfig,
    objective: &O,
    theta0: &DVector<f64>,
    t_steps: usize,
) -> Result<Trajectory> {
    config.validate()?;
    if t_steps == 0 {
        return Err(CoreError::InvalidInput("baseline run needs T >= 1".into()));
    }
    match config.kind {
        BaselineKind::Sgd | BaselineKind::Adam => first_order(config, objective, theta0, t_steps),
        BaselineKind::Lbfgs => lbfgs::run(config, objective, theta0, t_steps),
        BaselineKind::NelderMead => nelder_mead::run(config, objective, theta0, t_steps),
    }
}

/// Convenience wrapper running on a problem's own objective and start point.
pub fn run_baseline_on_problem(
    config: &BaselineConfig,
    problem: &ProblemInstance,
    t_steps: usize,
) -> Result<Trajectory> {
    run_baseline(config, &problem.objective(), &problem.theta_init, t_steps)
}

fn first_order<O: Objective>(
    config: &BaselineConfig,
    objective: &O,
    theta0: &DVector<f64>,
    t_steps: usize,
) -> Result<Trajectory> {
    let dim = theta0.len();
    let mut traj = Trajectory {
        thetas: Vec::with_capacity(t_steps + 1),
        losses: Vec::with_capacity(t_steps + 1),
        gradients: Vec::with_capacity(t_steps),
        tape: None,
        meta: TrajectoryMeta::default(),
    };
    let (f0, mut grad) = objective.value_and_grad(theta0)?;
    traj.meta.value_evals += 1;
    traj.meta.grad_evals += 1;
    if diverged(f0) {
        return Err(CoreError::NonFinite {
            what: "loss at the initial iterate",
            coordinate: None,
        });
    }
    traj.thetas.push(theta0.clone());
    traj.losses.push(f0);

    let mut m1 = DVector::zeros(dim);
    let mut m2 = DVector::zeros(dim);
    for k in 0..t_steps {
        traj.gradients.push(grad.clone());
        let theta_next = match config.kind {
            BaselineKind::Sgd => &traj.thetas[k] - config.learning_rate * &grad,
            BaselineKind::Adam => {
                let t = (k + 1) as i32;
                let b1 = config.adam_beta1;
                let b2 = config.adam_beta2;
                m1 = b1 * &m1 + (1.0 - b1) * &grad;
                m2.zip_apply(&grad, |m: &mut f64, g: f64| *m = b2 * *m + (1.0 - b2) * g * g);
                let bc1 = 1.0 - b1.powi(t);
                let bc2 = 1.0 - b2.powi(t);
                let mut step = DVector::<f64>::zeros(dim);
                for a in 0..dim {
                    let mh = m1[a] / bc1;
                    let vh: f64 = m2[a] / bc2;
                    step[a] = config.learning_rate * mh / (vh.sqrt() + config.adam_epsilon);
                }
                &traj.thetas[k] - step
            }
            _ => unreachable!(),
        };
        let last = k + 1 == t_steps;
        let (f, g) = if last {
            traj.meta.value_evals += 1;
            (objective.value(&theta_next)?, None)
        } else {
            let (f, g) = objective.value_and_grad(&theta_next)?;
            traj.meta.value_evals += 1;
            traj.meta.grad_evals += 1;
            (f, Some(g))
        };
        if diverged(f) {
            traj.meta
                .events
                .push(format!("diverged at step {} (f={f})", k + 1));
            traj.pad_from(k, t_steps);
            return Ok(traj);
        }
        traj.thetas.push(theta_next);
        traj.losses.push(f);
        if let Some(g) = g {
            grad = g;
        }
    }
    Ok(traj)
}

/// Mean loss-vs-iteration curves per learning rate, over a shared problem
/// set. A diverged run contributes `+inf` to its learning rate's statistics
/// and is counted in `diverged_runs`.
#[derive(Clone, Debug)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    /// Index into `rows` of the smallest finite mean final loss.
    pub best_index: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct SweepRow {
    pub eta: f64,
    pub mean_curve: Vec<f64>,
    pub mean_final_loss: f64,
    pub diverged_runs: usize,
}

impl SweepTable {
    pub fn best_eta(&self) -> Option<f64> {
        self.best_index.map(|i| self.rows[i].eta)
    }
}

pub fn sweep_learning_rates(
    kind: BaselineKind,
    etas: &[f64],
    problems: &[ProblemInstance],
    t_steps: usize,
) -> Result<SweepTable> {
    let objectives: Vec<_> = problems.iter().map(|p| p.objective()).collect();
    let cases: Vec<(&dyn Objective, &DVector<f64>)> = problems
        .iter()
        .zip(&objectives)
        .map(|(p, o)| (o as &dyn Objective, &p.theta_init))
        .collect();
    sweep_objectives(kind, etas, &cases, t_steps)
}

/// Sweep over arbitrary objective/start pairs; [`sweep_learning_rates`] is
/// the problem-list front end.
pub fn sweep_objectives(
    kind: BaselineKind,
    etas: &[f64],
    cases: &[(&dyn Objective, &DVector<f64>)],
    t_steps: usize,
) -> Result<SweepTable> {
    if !matches!(kind, BaselineKind::Sgd | BaselineKind::Adam) {
        return Err(CoreError::InvalidInput(
            "learning-rate sweeps apply to sgd and adam only".into(),
        ));
    }
    if etas.is_empty() || cases.is_empty() {
        return Err(CoreError::InvalidInput(
            "sweep needs at least one learning rate and one problem".into(),
        ));
    }
    let mut rows = Vec::with_capacity(etas.len());
    for &eta in etas {
        let config = match kind {
            BaselineKind::Sgd => BaselineConfig::sgd(eta),
            BaselineKind::Adam => BaselineConfig::adam(eta),
            _ => unreachable!(),
        };
        let mut curve = vec![0.0; t_steps + 1];
        let mut final_sum = 0.0;
        let mut diverged_runs = 0;
        for &(objective, theta0) in cases {
            let traj = run_baseline(&config, &objective, theta0, t_steps)?;
            if traj.meta.diverged {
                diverged_runs += 1;
                let cut = traj.meta.truncated_at.unwrap_or(0);
                for (k, slot) in curve.iter_mut().enumerate() {
                    *slot += if k <= cut { traj.losses[k] } else { f64::INFINITY };
                }
                final_sum = f64::INFINITY;
            } else {
                for (slot, &f) in curve.iter_mut().zip(&traj.losses) {
                    *slot += f;
                }
                final_sum += traj.final_loss();
            }
        }
        let n = cases.len() as f64;
        for slot in &mut curve {
            *slot /= n;
        }
        rows.push(SweepRow {
            eta,
            mean_curve: curve,
            mean_final_loss: final_sum / n,
            diverged_runs,
        });
    }
    let best_index = rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.mean_final_loss.is_finite())
        .min_by(|(_, a), (_, b)| a.mean_final_loss.total_cmp(&b.mean_final_loss))
        .map(|(i, _)| i);
    Ok(SweepTable { rows, best_index })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Bowl {
        center: DVector<f64>,
    }

    impl Objective for Bowl {
        fn dim(&self) -> usize {
            self.center.len()
        }
        fn value(&self, theta: &DVector<f64>) -> Result<f64> {
            let d = theta - &self.center;
            Ok(d.dot(&d))
        }
        fn value_and_grad(&self, theta: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
            let d = theta - &self.center;
            Ok((d.dot(&d), 2.0 * d))
        }
    }

    #[test]
    fn sgd_with_tiny_rate_barely_moves_and_records_shapes() {
        let bowl = Bowl {
            center: DVector::from_vec(vec![1.0, 1.0]),
        };
        let traj = run_baseline(
            &BaselineConfig::sgd(1e-12),
            &bowl,
            &DVector::zeros(2),
            5,
        )
        .unwrap();
        assert_eq!(traj.thetas.len(), 6);
        assert_eq!(traj.gradients.len(), 5);
        assert!((traj.final_loss() - traj.losses[0]).abs() < 1e-9);
    }

    #[test]
    fn adam_first_step_has_magnitude_close_to_learning_rate() {
        let bowl = Bowl {
            center: DVector::from_vec(vec![5.0, -5.0, 2.0]),
        };
        let eta = 0.03;
        let traj = run_baseline(&BaselineConfig::adam(eta), &bowl, &DVector::zeros(3), 1).unwrap();
        let step = &traj.thetas[1] - &traj.thetas[0];
        for a in 0..3 {
            let expected = -eta * traj.gradients[0][a].signum();
            assert!(
                (step[a] - expected).abs() < 1e-6 * eta,
                "component {a}: step {} vs {expected}",
                step[a]
            );
        }
    }

    #[test]
    fn divergent_run_is_padded_and_flagged() {
        let bowl = Bowl {
            center: DVector::from_vec(vec![0.0]),
        };
        // eta = 10 on f = theta^2 multiplies the iterate by -19 each step.
        let traj = run_baseline(
            &BaselineConfig::sgd(10.0),
            &bowl,
            &DVector::from_vec(vec![1.0]),
            8,
        )
        .unwrap();
        assert!(traj.meta.diverged);
        assert_eq!(traj.thetas.len(), 9);
        assert_eq!(traj.losses.len(), 9);
        let cut = traj.meta.truncated_at.unwrap();
        assert!(traj.losses[cut].is_finite());
        assert_eq!(traj.losses[cut], *traj.losses.last().unwrap());
    }

    #[test]
    fn sweep_flags_divergent_rate_and_prefers_stable_one() {
        // SGD at eta = 10 on an unbounded quadratic blows past the
        // divergence limit; the eta = 1e-3 row stays finite and wins.
        let bowl = Bowl {
            center: DVector::from_vec(vec![0.0, 0.0]),
        };
        let start = DVector::from_vec(vec![1.0, -1.0]);
        let cases: Vec<(&dyn crate::objective::Objective, &DVector<f64>)> =
            vec![(&bowl, &start)];
        let table = sweep_objectives(BaselineKind::Sgd, &[1e-3, 10.0], &cases, 12).unwrap();
        assert_eq!(table.rows.len(), 2);
        assert_eq!(table.rows[1].diverged_runs, 1);
        assert!(table.rows[1].mean_final_loss.is_infinite());
        assert_eq!(table.best_index, Some(0));
    }

    #[test]
    fn sweep_on_problems_returns_one_row_per_eta() {
        use crate::objective::{sample_problem_seeded, SampleOptions};
        use crate::sim::{build_model, ModelKind};
        let spec = build_model(ModelKind::Tfim, 3).unwrap();
        let opts = SampleOptions {
            times: crate::objective::time_grid(2.0, 8),
            ..SampleOptions::default()
        };
        let problems: Vec<_> = (0..2)
            .map(|s| sample_problem_seeded(&spec, s, &opts).unwrap())
            .collect();
        let table = sweep_learning_rates(BaselineKind::Sgd, &[1e-3], &problems, 6).unwrap();
        assert_eq!(table.rows.len(), 1);
        assert_eq!(table.rows[0].diverged_runs, 0);
        // Single eta: the row equals direct evaluation.
        let direct: f64 = problems
            .iter()
            .map(|p| {
                run_baseline_on_problem(&BaselineConfig::sgd(1e-3), p, 6)
                    .unwrap()
                    .final_loss()
            })
            .sum::<f64>()
            / problems.len() as f64;
        assert_eq!(table.rows[0].mean_final_loss, direct);
    }
}
