use nalgebra::{DMatrix, DVector};

use super::weights::{LayerWeights, LstmWeights};
use crate::error::{CoreError, Result};

/// Recurrent state: one hidden and one cell vector per coordinate per layer.
/// Rows index coordinates, columns hidden units.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmState {
    pub layers: Vec<LayerState>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerState {
    pub h: DMatrix<f64>,
    pub c: DMatrix<f64>,
}

impl LstmState {
    /// Fresh all-zero state for `n_coords` coordinates.
    pub fn zeros(weights: &LstmWeights, n_coords: usize) -> Self {
        let h = weights.hidden_size();
        Self {
            layers: (0..weights.layers.len())
                .map(|_| LayerState {
                    h: DMatrix::zeros(n_coords, h),
                    c: DMatrix::zeros(n_coords, h),
                })
                .collect(),
        }
    }

    pub fn n_coords(&self) -> usize {
        self.layers[0].h.nrows()
    }

    /// Reorders the per-coordinate rows; used by equivariance checks.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let pick = |m: &DMatrix<f64>| {
            let mut out = m.clone_owned();
            for (new_row, &old_row) in perm.iter().enumerate() {
                out.row_mut(new_row).copy_from(&m.row(old_row));
            }
            out
        };
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| LayerState {
                    h: pick(&l.h),
                    c: pick(&l.c),
                })
                .collect(),
        }
    }
}

/// Forward activations of one layer at one step, retained for backprop.
#[derive(Clone, Debug)]
pub struct LayerTrace {
    pub h_prev: DMatrix<f64>,
    pub c_prev: DMatrix<f64>,
    pub gate_i: DMatrix<f64>,
    pub gate_f: DMatrix<f64>,
    pub gate_g: DMatrix<f64>,
    pub gate_o: DMatrix<f64>,
    pub tanh_c: DMatrix<f64>,
}

/// One recorded step: the preprocessed inputs plus every layer trace.
#[derive(Clone, Debug)]
pub struct StepTrace {
    pub features: DMatrix<f64>,
    pub layers: Vec<LayerTrace>,
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Advances one layer for all coordinates at once. `x` is `[C x input_dim]`.
/// Returns the new hidden matrix and optionally the trace.
fn layer_forward(
    weights: &LayerWeights,
    state: &mut LayerState,
    x: &DMatrix<f64>,
    record: bool,
) -> (DMatrix<f64>, Option<LayerTrace>) {
    let h = state.h.ncols();
    let c_count = x.nrows();
    // z = x W_in + h_prev W_rec + bias
    let mut z = x * &weights.w_input;
    z += &state.h * &weights.w_recurrent;
    for mut row in z.row_iter_mut() {
        row += weights.bias.transpose();
    }
    let mut gate_i = DMatrix::zeros(c_count, h);
    let mut gate_f = DMatrix::zeros(c_count, h);
    let mut gate_g = DMatrix::zeros(c_count, h);
    let mut gate_o = DMatrix::zeros(c_count, h);
    for r in 0..c_count {
        for k in 0..h {
            gate_i[(r, k)] = sigmoid(z[(r, k)]);
            gate_f[(r, k)] = sigmoid(z[(r, h + k)]);
            gate_g[(r, k)] = z[(r, 2 * h + k)].tanh();
            gate_o[(r, k)] = sigmoid(z[(r, 3 * h + k)]);
        }
    }
    let h_prev = if record { Some(state.h.clone()) } else { None };
    let c_prev = if record { Some(state.c.clone()) } else { None };

    let mut tanh_c = DMatrix::zeros(c_count, h);
    let mut h_new = DMatrix::zeros(c_count, h);
    for r in 0..c_count {
        for k in 0..h {
            let c_new = gate_f[(r, k)] * state.c[(r, k)] + gate_i[(r, k)] * gate_g[(r, k)];
            state.c[(r, k)] = c_new;
            let tc = c_new.tanh();
            tanh_c[(r, k)] = tc;
            h_new[(r, k)] = gate_o[(r, k)] * tc;
        }
    }
    state.h.copy_from(&h_new);

    let trace = if record {
        Some(LayerTrace {
            h_prev: h_prev.unwrap(),
            c_prev: c_prev.unwrap(),
            gate_i,
            gate_f,
            gate_g,
            gate_o,
            tanh_c,
        })
    } else {
        None
    };
    (h_new, trace)
}

/// Builds the `[C x input_dim]` feature matrix from a gradient vector.
pub(crate) fn feature_matrix(weights: &LstmWeights, grad: &DVector<f64>) -> Result<DMatrix<f64>> {
    if let Some(coord) = grad.iter().position(|g| !g.is_finite()) {
        return Err(CoreError::NonFinite {
            what: "gradient input",
            coordinate: Some(coord),
        });
    }
    let in_dim = weights.input_dim();
    let mut x = DMatrix::zeros(grad.len(), in_dim);
    let mut buf = [0.0; 2];
    for (a, &g) in grad.iter().enumerate() {
        weights.config.preprocess.features_into(g, &mut buf[..in_dim]);
        for d in 0..in_dim {
            x[(a, d)] = buf[d];
        }
    }
    Ok(x)
}

/// Applies the readout to the top-layer hidden matrix.
pub(crate) fn readout(weights: &LstmWeights, h_top: &DMatrix<f64>) -> DVector<f64> {
    let mut update = h_top * &weights.readout_weight;
    update.add_scalar_mut(weights.readout_bias);
    update * weights.config.output_scale
}

pub(crate) fn step_with_trace(
    weights: &LstmWeights,
    state: &mut LstmState,
    grad: &DVector<f64>,
    record: bool,
) -> Result<(DVector<f64>, Option<StepTrace>)> {
    if state.n_coords() != grad.len() {
        return Err(CoreError::DimensionMismatch {
            what: "per-coordinate state",
            expected: grad.len(),
            got: state.n_coords(),
        });
    }
    let features = feature_matrix(weights, grad)?;
    let mut input = features.clone();
    let mut traces = Vec::with_capacity(weights.layers.len());
    for (lw, ls) in weights.layers.iter().zip(state.layers.iter_mut()) {
        let (h_new, trace) = layer_forward(lw, ls, &input, record);
        if let Some(tr) = trace {
            traces.push(tr);
        }
        input = h_new;
    }
    let update = readout(weights, &input);
    let trace = record.then_some(StepTrace {
        features,
        layers: traces,
    });
    Ok((update, trace))
}

/// One application of the learned update rule: runs the shared-weight LSTM
/// independently on every coordinate of `grad` and returns the additive
/// update `g_k` together with the advanced state.
pub fn lstm_step(
    weights: &LstmWeights,
    state: &LstmState,
    grad: &DVector<f64>,
) -> Result<(DVector<f64>, LstmState)> {
    let mut next = state.clone();
    let (update, _) = step_with_trace(weights, &mut next, grad, false)?;
    Ok((update, next))
}

/// Backward pass of one layer step. Consumes the output-side gradients
/// (`dh`, plus `dc_carry` flowing from the next step) and produces the
/// input-side ones, accumulating weight gradients into `grads`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn layer_backward(
    weights: &LayerWeights,
    trace: &LayerTrace,
    x: &DMatrix<f64>,
    dh: &DMatrix<f64>,
    dc_carry: &DMatrix<f64>,
    grads: &mut LayerWeights,
) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let c_count = dh.nrows();
    let h = dh.ncols();
    // dc = dh . o . (1 - tanh_c^2) + dc_carry
    let mut dz = DMatrix::zeros(c_count, 4 * h);
    let mut dc_prev = DMatrix::zeros(c_count, h);
    for r in 0..c_count {
        for k in 0..h {
            let o = trace.gate_o[(r, k)];
            let tc = trace.tanh_c[(r, k)];
            let dc = dh[(r, k)] * o * (1.0 - tc * tc) + dc_carry[(r, k)];
            let i = trace.gate_i[(r, k)];
            let f = trace.gate_f[(r, k)];
            let g = trace.gate_g[(r, k)];
            dz[(r, k)] = dc * g * i * (1.0 - i);
            dz[(r, h + k)] = dc * trace.c_prev[(r, k)] * f * (1.0 - f);
            dz[(r, 2 * h + k)] = dc * i * (1.0 - g * g);
            dz[(r, 3 * h + k)] = dh[(r, k)] * tc * o * (1.0 - o);
            dc_prev[(r, k)] = dc * f;
        }
    }
    grads.w_input += x.tr_mul(&dz);
    grads.w_recurrent += trace.h_prev.tr_mul(&dz);
    for r in 0..c_count {
        for k in 0..4 * h {
            grads.bias[k] += dz[(r, k)];
        }
    }
    let dx = &dz * weights.w_input.transpose();
    let dh_prev = &dz * weights.w_recurrent.transpose();
    (dx, dh_prev, dc_prev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metaopt::config::MetaOptConfig;
    use crate::metaopt::weights::init_weights;
    use crate::rng::rng_from_seed;

    fn zero_weights(cfg: &MetaOptConfig) -> LstmWeights {
        let w = init_weights(cfg, &mut rng_from_seed(0)).unwrap();
        let flat = vec![0.0; w.n_scalars()];
        w.from_flat(&flat).unwrap()
    }

    #[test]
    fn zero_network_produces_zero_updates() {
        let cfg = MetaOptConfig::default();
        let w = zero_weights(&cfg);
        let state = LstmState::zeros(&w, 5);
        let grad = DVector::from_vec(vec![0.3, -0.1, 2.0, 0.0, -5.0]);
        let (update, _) = lstm_step(&w, &state, &grad).unwrap();
        assert!(update.iter().all(|&u| u == 0.0));
    }

    #[test]
    fn permuting_coordinates_permutes_updates_exactly() {
        let cfg = MetaOptConfig::default();
        let w = init_weights(&cfg, &mut rng_from_seed(7)).unwrap();
        let mut state = LstmState::zeros(&w, 4);
        let g0 = DVector::from_vec(vec![0.5, -0.2, 0.05, -1.4]);
        // advance once so states are nontrivial
        let (_, s1) = lstm_step(&w, &state, &g0).unwrap();
        state = s1;
        let grad = DVector::from_vec(vec![1.0, 2.0, -0.7, 0.01]);
        let (update, _) = lstm_step(&w, &state, &grad).unwrap();

        let perm = [2usize, 0, 3, 1];
        let pstate = state.permuted(&perm);
        let pgrad = DVector::from_iterator(4, perm.iter().map(|&k| grad[k]));
        let (pupdate, _) = lstm_step(&w, &pstate, &pgrad).unwrap();
        for (new_idx, &old_idx) in perm.iter().enumerate() {
            assert_eq!(pupdate[new_idx], update[old_idx]);
        }
    }

    #[test]
    fn identical_histories_give_identical_updates() {
        let cfg = MetaOptConfig::default();
        let w = init_weights(&cfg, &mut rng_from_seed(21)).unwrap();
        let mut state = LstmState::zeros(&w, 3);
        // coordinates 0 and 2 share the same gradient history
        for step in 0..4 {
            let g = DVector::from_vec(vec![0.1 * (step as f64 + 1.0), -0.4, 0.1 * (step as f64 + 1.0)]);
            let (update, next) = lstm_step(&w, &state, &g).unwrap();
            assert_eq!(update[0], update[2]);
            state = next;
        }
    }

    #[test]
    fn rejects_non_finite_gradient_naming_coordinate() {
        let cfg = MetaOptConfig::default();
        let w = init_weights(&cfg, &mut rng_from_seed(3)).unwrap();
        let state = LstmState::zeros(&w, 3);
        let grad = DVector::from_vec(vec![0.1, f64::NAN, 0.2]);
        let err = lstm_step(&w, &state, &grad).unwrap_err();
        assert!(err.to_string().contains("coordinate 1"), "{err}");
    }
}
