//! Nelder-Mead downhill simplex. Derivative-free: the objective's gradient
//! is never requested. One trajectory iteration is one simplex operation
//! (reflect, expand, contract or shrink); the recorded iterate is the best
//! vertex after the operation.

use nalgebra::DVector;

use super::{diverged, BaselineConfig};
use crate::error::{CoreError, Result};
use crate::objective::Objective;
use crate::trajectory::{Trajectory, TrajectoryMeta};

struct Vertex {
    theta: DVector<f64>,
    f: f64,
}

pub(super) fn run<O: Objective>(
    config: &BaselineConfig,
    objective: &O,
    theta0: &DVector<f64>,
    t_steps: usize,
) -> Result<Trajectory> {
    let dim = theta0.len();
    let mut traj = Trajectory {
        thetas: Vec::with_capacity(t_steps + 1),
        losses: Vec::with_capacity(t_steps + 1),
        gradients: Vec::new(),
        tape: None,
        meta: TrajectoryMeta::default(),
    };
    let eval = |theta: &DVector<f64>, evals: &mut usize| -> Result<f64> {
        *evals += 1;
        objective.value(theta)
    };

    let mut evals = 0usize;
    let f0 = eval(theta0, &mut evals)?;
    if diverged(f0) {
        return Err(CoreError::NonFinite {
            what: "loss at the initial iterate",
            coordinate: None,
        });
    }
    traj.thetas.push(theta0.clone());
    traj.losses.push(f0);

    // Initial simplex: theta0 plus one offset vertex per coordinate.
    let mut simplex = Vec::with_capacity(dim + 1);
    simplex.push(Vertex {
        theta: theta0.clone(),
        f: f0,
    });
    for a in 0..dim {
        let mut v = theta0.clone();
        v[a] += config.nm_initial_edge;
        let f = eval(&v, &mut evals)?;
        simplex.push(Vertex { theta: v, f });
    }

    for k in 0..t_steps {
        simplex.sort_by(|a, b| a.f.total_cmp(&b.f));
        let worst = simplex.len() - 1;
        // Centroid of all but the worst vertex.
        let mut centroid = DVector::zeros(dim);
        for v in &simplex[..worst] {
            centroid += &v.theta;
        }
        centroid /= worst as f64;

        let reflected = &centroid + config.nm_reflection * (&centroid - &simplex[worst].theta);
        let f_reflected = eval(&reflected, &mut evals)?;

        if f_reflected < simplex[0].f {
            // Try to expand past the reflection.
            let expanded = &centroid + config.nm_expansion * (&reflected - &centroid);
            let f_expanded = eval(&expanded, &mut evals)?;
            if f_expanded < f_reflected {
                simplex[worst] = Vertex {
                    theta: expanded,
                    f: f_expanded,
                };
            } else {
                simplex[worst] = Vertex {
                    theta: reflected,
                    f: f_reflected,
                };
            }
        } else if f_reflected < simplex[worst - 1].f {
            simplex[worst] = Vertex {
                theta: reflected,
                f: f_reflected,
            };
        } else {
            // Contraction, towards the better of the worst and the reflection.
            let (towards, f_towards) = if f_reflected < simplex[worst].f {
                (&reflected, f_reflected)
            } else {
                (&simplex[worst].theta, simplex[worst].f)
            };
            let contracted = &centroid + config.nm_contraction * (towards - &centroid);
            let f_contracted = eval(&contracted, &mut evals)?;
            if f_contracted < f_towards {
                simplex[worst] = Vertex {
                    theta: contracted,
                    f: f_contracted,
                };
            } else {
                // Shrink everything towards the best vertex.
                let best = simplex[0].theta.clone();
                for v in simplex.iter_mut().skip(1) {
                    v.theta = &best + config.nm_shrink * (&v.theta - &best);
                    v.f = eval(&v.theta, &mut evals)?;
                }
            }
        }

        let best = simplex
            .iter()
            .min_by(|a, b| a.f.total_cmp(&b.f))
            .expect("simplex is non-empty");
        if diverged(best.f) {
            traj.meta
                .events
                .push(format!("diverged at step {} (f={})", k + 1, best.f));
            traj.meta.value_evals = evals;
            traj.pad_from(k, t_steps);
            return Ok(traj);
        }
        traj.thetas.push(best.theta.clone());
        traj.losses.push(best.f);
    }
    traj.meta.value_evals = evals;
    Ok(traj)
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
        fn value_and_grad(&self, _theta: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
            panic!("Nelder-Mead must never request a gradient");
        }
    }

    #[test]
    fn descends_a_quadratic_without_gradients() {
        let bowl = Bowl {
            center: DVector::from_vec(vec![0.4, -0.2]),
        };
        let traj = run(
            &BaselineConfig::nelder_mead(),
            &bowl,
            &DVector::zeros(2),
            60,
        )
        .unwrap();
        assert_eq!(traj.gradients.len(), 0);
        assert_eq!(traj.meta.grad_evals, 0);
        assert!(traj.final_loss() < 1e-3, "final {}", traj.final_loss());
        // Best-vertex losses never increase.
        for w in traj.losses[1..].windows(2) {
            assert!(w[1] <= w[0]);
        }
    }
}
