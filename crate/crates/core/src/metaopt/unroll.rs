use nalgebra::{DMatrix, DVector};

use super::cell::{step_with_trace, LstmState, StepTrace};
use super::weights::LstmWeights;
use crate::error::{CoreError, Result};
use crate::objective::Objective;
use crate::trajectory::{Trajectory, TrajectoryMeta};

/// Everything the backward pass needs beyond the trajectory itself: the
/// per-step activations and the gradient at the final iterate.
#[derive(Clone, Debug)]
pub struct UnrollTape {
    pub steps: Vec<StepTrace>,
    pub final_gradient: DVector<f64>,
}

/// Runs `T` meta-optimizer steps from the problem's initial guess with a
/// fresh zero state, recording the full tape. The objective supplies
/// `f` and `grad f` at every iterate; a non-finite loss aborts the unroll.
pub fn unroll_forward<O: Objective>(
    weights: &LstmWeights,
    objective: &O,
    theta0: &DVector<f64>,
    t_steps: usize,
) -> Result<Trajectory> {
    let (traj, _) = unroll_segment(
        weights,
        objective,
        theta0,
        t_steps,
        LstmState::zeros(weights, theta0.len()),
        None,
    )?;
    Ok(traj)
}

/// One segment of an unroll: like [`unroll_forward`] but continuing from a
/// caller-supplied recurrent state, returning the advanced state for the
/// next segment. `start_eval` carries an already-computed `(f, grad)` at
/// `theta0` so segment boundaries are not evaluated twice.
pub fn unroll_segment<O: Objective>(
    weights: &LstmWeights,
    objective: &O,
    theta0: &DVector<f64>,
    t_steps: usize,
    mut state: LstmState,
    start_eval: Option<(f64, DVector<f64>)>,
) -> Result<(Trajectory, LstmState)> {
    if t_steps == 0 {
        return Err(CoreError::InvalidInput("unroll needs T >= 1".into()));
    }
    let mut thetas = Vec::with_capacity(t_steps + 1);
    let mut losses = Vec::with_capacity(t_steps + 1);
    let mut gradients = Vec::with_capacity(t_steps);
    let mut steps = Vec::with_capacity(t_steps);
    let mut fresh_evals = 0;

    let (f0, mut grad) = match start_eval {
        Some(eval) => eval,
        None => {
            fresh_evals += 1;
            objective.value_and_grad(theta0)?
        }
    };
    if !f0.is_finite() {
        return Err(CoreError::NonFinite {
            what: "loss at the initial iterate",
            coordinate: None,
        });
    }
    thetas.push(theta0.clone());
    losses.push(f0);

    for k in 0..t_steps {
        gradients.push(grad.clone());
        let (update, trace) = step_with_trace(weights, &mut state, &grad, true)?;
        let theta_next = &thetas[k] + update;
        let (f, g) = objective.value_and_grad(&theta_next)?;
        fresh_evals += 1;
        if !f.is_finite() {
            return Err(CoreError::NonFinite {
                what: "loss during unroll",
                coordinate: None,
            });
        }
        thetas.push(theta_next);
        losses.push(f);
        steps.push(trace.expect("trace recorded"));
        grad = g;
    }

    let traj = Trajectory {
        thetas,
        losses,
        gradients,
        tape: Some(UnrollTape {
            steps,
            final_gradient: grad,
        }),
        meta: TrajectoryMeta {
            value_evals: fresh_evals,
            grad_evals: fresh_evals,
            ..TrajectoryMeta::default()
        },
    };
    Ok((traj, state))
}

/// The `(f, grad)` pair recorded at a trajectory's final iterate, for
/// chaining segments without re-evaluating.
pub fn final_eval(traj: &Trajectory) -> (f64, DVector<f64>) {
    (
        traj.final_loss(),
        traj.tape
            .as_ref()
            .expect("segment trajectories carry tapes")
            .final_gradient
            .clone(),
    )
}

/// Reverse-mode gradient of the meta-loss `L = sum_{k=1..T} f(theta_k)` with
/// respect to the weights.
///
/// The gradient inputs recorded on the tape are treated as constants (no
/// second derivatives of `f`): the adjoint of each iterate is seeded with the
/// recorded `grad f(theta_k)` and propagated through the update chain and
/// every LSTM cell across time and layers.
pub fn unroll_backward(weights: &LstmWeights, trajectory: &Trajectory) -> Result<LstmWeights> {
    let tape = trajectory.tape.as_ref().ok_or_else(|| {
        CoreError::InvalidInput("trajectory has no tape; run unroll_forward first".into())
    })?;
    let t_steps = tape.steps.len();
    if t_steps == 0 || trajectory.gradients.len() != t_steps || trajectory.thetas.len() != t_steps + 1
    {
        return Err(CoreError::InvalidInput(
            "incomplete tape: step, gradient and iterate counts disagree".into(),
        ));
    }
    let n_coords = tape.final_gradient.len();
    let n_layers = weights.layers.len();
    let hidden = weights.hidden_size();
    let scale = weights.config.output_scale;

    // suffix[k] = sum_{m=k..T} grad f(theta_m); the adjoint of update g_k is
    // suffix[k+1].
    let mut suffix = vec![DVector::<f64>::zeros(n_coords); t_steps + 1];
    suffix[t_steps] = tape.final_gradient.clone();
    for k in (1..t_steps).rev() {
        suffix[k] = &trajectory.gradients[k] + &suffix[k + 1];
    }

    let mut grads = weights.zeros_like();
    let mut dh_carry = vec![DMatrix::<f64>::zeros(n_coords, hidden); n_layers];
    let mut dc_carry = vec![DMatrix::<f64>::zeros(n_coords, hidden); n_layers];

    for k in (0..t_steps).rev() {
        let trace = &tape.steps[k];
        let dg = &suffix[k + 1];

        // Readout backward into the top layer's hidden output.
        let top = n_layers - 1;
        let h_top = trace.layers[top]
            .gate_o
            .component_mul(&trace.layers[top].tanh_c);
        for a in 0..n_coords {
            let coeff = scale * dg[a];
            grads.readout_bias += coeff;
            for u in 0..hidden {
                grads.readout_weight[u] += coeff * h_top[(a, u)];
            }
        }
        let mut dh_above = DMatrix::zeros(n_coords, hidden);
        for a in 0..n_coords {
            let coeff = scale * dg[a];
            for u in 0..hidden {
                dh_above[(a, u)] = coeff * weights.readout_weight[u];
            }
        }

        for layer in (0..n_layers).rev() {
            let x = if layer == 0 {
                trace.features.clone()
            } else {
                trace.layers[layer - 1]
                    .gate_o
                    .component_mul(&trace.layers[layer - 1].tanh_c)
            };
            let dh_total = &dh_carry[layer] + &dh_above;
            let (dx, dh_prev, dc_prev) = super::cell::layer_backward(
                &weights.layers[layer],
                &trace.layers[layer],
                &x,
                &dh_total,
                &dc_carry[layer],
                &mut grads.layers[layer],
            );
            dh_carry[layer] = dh_prev;
            dc_carry[layer] = dc_prev;
            // The layer below sees this layer's input gradient; the features
            // of layer 0 are stop-gradients and absorb it.
            dh_above = dx;
        }
    }
    Ok(grads)
}
