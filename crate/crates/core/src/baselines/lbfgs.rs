//! L-BFGS with two-loop recursion and a strong-Wolfe line search.
//!
//! One trajectory iteration is one outer quasi-Newton step; line-search
//! evaluations are extra function calls recorded in the trajectory metadata.

use nalgebra::DVector;
use std::collections::VecDeque;

use super::{diverged, BaselineConfig};
use crate::error::{CoreError, Result};
use crate::objective::Objective;
use crate::trajectory::{Trajectory, TrajectoryMeta};

struct Pair {
    s: DVector<f64>,
    y: DVector<f64>,
    rho: f64,
}

/// Two-loop recursion: returns the search direction `-H_k grad`.
fn direction(history: &VecDeque<Pair>, grad: &DVector<f64>) -> DVector<f64> {
    let mut q = grad.clone();
    let mut alphas = Vec::with_capacity(history.len());
    for pair in history.iter().rev() {
        let alpha = pair.rho * pair.s.dot(&q);
        q.axpy(-alpha, &pair.y, 1.0);
        alphas.push(alpha);
    }
    // Initial Hessian scaling gamma = s.y / y.y from the most recent pair.
    if let Some(last) = history.back() {
        let gamma = last.s.dot(&last.y) / last.y.dot(&last.y);
        q *= gamma;
    }
    for (pair, alpha) in history.iter().zip(alphas.into_iter().rev()) {
        let beta = pair.rho * pair.y.dot(&q);
        q.axpy(alpha - beta, &pair.s, 1.0);
    }
    -q
}

struct ProbeResult {
    alpha: f64,
    theta: DVector<f64>,
    f: f64,
    grad: DVector<f64>,
}

struct LineSearch<'a, O: Objective> {
    objective: &'a O,
    theta: &'a DVector<f64>,
    dir: &'a DVector<f64>,
    f0: f64,
    slope0: f64,
    c1: f64,
    c2: f64,
    evals_left: usize,
    evals_used: usize,
}

impl<O: Objective> LineSearch<'_, O> {
    fn probe(&mut self, alpha: f64) -> Result<Option<ProbeResult>> {
        if self.evals_left == 0 {
            return Ok(None);
        }
        self.evals_left -= 1;
        self.evals_used += 1;
        let theta = self.theta + alpha * self.dir;
        let (f, grad) = self.objective.value_and_grad(&theta)?;
        Ok(Some(ProbeResult {
            alpha,
            theta,
            f,
            grad,
        }))
    }

    fn sufficient_decrease(&self, p: &ProbeResult) -> bool {
        p.f <= self.f0 + self.c1 * p.alpha * self.slope0
    }

    fn curvature_ok(&self, slope: f64) -> bool {
        slope.abs() <= -self.c2 * self.slope0
    }

    /// Strong-Wolfe search (bracket then bisection zoom). Returns `None`
    /// when the evaluation budget runs out without a Wolfe point.
    fn run(&mut self) -> Result<Option<ProbeResult>> {
        let mut prev_alpha = 0.0;
        let mut prev_f = self.f0;
        let mut alpha = 1.0;
        let mut bracket: Option<(f64, f64, f64)> = None; // (lo, hi, f_lo)

        for iter in 0..self.evals_left.max(1) {
            let Some(p) = self.probe(alpha)? else {
                return Ok(None);
            };
            if !p.f.is_finite() {
                bracket = Some((prev_alpha, alpha, prev_f));
                break;
            }
            if !self.sufficient_decrease(&p) || (iter > 0 && p.f >= prev_f) {
                bracket = Some((prev_alpha, alpha, prev_f));
                break;
            }
            let slope = p.grad.dot(self.dir);
            if self.curvature_ok(slope) {
                return Ok(Some(p));
            }
            if slope >= 0.0 {
                bracket = Some((alpha, prev_alpha, p.f));
                break;
            }
            prev_alpha = alpha;
            prev_f = p.f;
            alpha *= 2.0;
        }

        let Some((lo, hi, flo)) = bracket else {
            return Ok(None);
        };
        let mut alpha_lo = lo;
        let mut f_lo = flo;
        let mut alpha_hi = hi;
        while self.evals_left > 0 {
            let mid = 0.5 * (alpha_lo + alpha_hi);
            let Some(p) = self.probe(mid)? else {
                return Ok(None);
            };
            if !p.f.is_finite() || !self.sufficient_decrease(&p) || p.f >= f_lo {
                alpha_hi = mid;
                continue;
            }
            let slope = p.grad.dot(self.dir);
            if self.curvature_ok(slope) {
                return Ok(Some(p));
            }
            if slope * (alpha_hi - alpha_lo) >= 0.0 {
                alpha_hi = alpha_lo;
            }
            alpha_lo = mid;
            f_lo = p.f;
        }
        Ok(None)
    }
}

pub(super) fn run<O: Objective>(
    config: &BaselineConfig,
    objective: &O,
    theta0: &DVector<f64>,
    t_steps: usize,
) -> Result<Trajectory> {
    let mut traj = Trajectory {
        thetas: Vec::with_capacity(t_steps + 1),
        losses: Vec::with_capacity(t_steps + 1),
        gradients: Vec::with_capacity(t_steps),
        tape: None,
        meta: TrajectoryMeta::default(),
    };
    let (mut f, mut grad) = objective.value_and_grad(theta0)?;
    traj.meta.value_evals += 1;
    traj.meta.grad_evals += 1;
    if diverged(f) {
        return Err(CoreError::NonFinite {
            what: "loss at the initial iterate",
            coordinate: None,
        });
    }
    traj.thetas.push(theta0.clone());
    traj.losses.push(f);

    let mut history: VecDeque<Pair> = VecDeque::with_capacity(config.lbfgs_memory);
    for k in 0..t_steps {
        traj.gradients.push(grad.clone());
        let mut dir = direction(&history, &grad);
        let mut slope = dir.dot(&grad);
        if slope >= 0.0 {
            // Not a descent direction (stale curvature); fall back to
            // steepest descent for this step.
            traj.meta.events.push(format!("non_descent_direction@{k}"));
            dir = -&grad;
            slope = dir.dot(&grad);
        }
        let theta_k = traj.thetas[k].clone();
        let mut search = LineSearch {
            objective,
            theta: &theta_k,
            dir: &dir,
            f0: f,
            slope0: slope,
            c1: config.wolfe_c1,
            c2: config.wolfe_c2,
            evals_left: config.max_line_search_evals,
            evals_used: 0,
        };
        let outcome = search.run()?;
        traj.meta.value_evals += search.evals_used;
        traj.meta.grad_evals += search.evals_used;

        let (theta_next, f_next, grad_next) = match outcome {
            Some(p) => (p.theta, p.f, p.grad),
            None => {
                traj.meta.events.push(format!("line_search_fallback@{k}"));
                let theta_next = &theta_k - config.fallback_step * &grad;
                let (f_next, grad_next) = objective.value_and_grad(&theta_next)?;
                traj.meta.value_evals += 1;
                traj.meta.grad_evals += 1;
                (theta_next, f_next, grad_next)
            }
        };
        if diverged(f_next) {
            traj.meta
                .events
                .push(format!("diverged at step {} (f={f_next})", k + 1));
            traj.pad_from(k, t_steps);
            return Ok(traj);
        }
        let s = &theta_next - &theta_k;
        let y = &grad_next - &grad;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if history.len() == config.lbfgs_memory {
                history.pop_front();
            }
            history.push_back(Pair {
                rho: 1.0 / sy,
                s,
                y,
            });
        }
        traj.thetas.push(theta_next);
        traj.losses.push(f_next);
        f = f_next;
        grad = grad_next;
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Quadratic {
        center: DVector<f64>,
    }

    impl Objective for Quadratic {
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
    fn solves_quadratic_within_ten_iterations() {
        let q = Quadratic {
            center: DVector::from_vec(vec![3.0, -1.5]),
        };
        let traj = run(
            &BaselineConfig::lbfgs(),
            &q,
            &DVector::from_vec(vec![0.0, 0.0]),
            10,
        )
        .unwrap();
        assert!(
            traj.final_loss() < 1e-12,
            "final loss {}",
            traj.final_loss()
        );
    }

    #[test]
    fn losses_are_monotone_nonincreasing_under_wolfe() {
        let q = Quadratic {
            center: DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]),
        };
        let traj = run(&BaselineConfig::lbfgs(), &q, &DVector::zeros(4), 15).unwrap();
        for w in traj.losses.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }
}
