use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::config::MetaOptConfig;
use crate::error::{CoreError, Result};

/// Weights of one LSTM layer. Gate blocks are laid out along the `4H` axis
/// in the order input, forget, cell, output.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerWeights {
    /// `[input_dim x 4H]`.
    pub w_input: DMatrix<f64>,
    /// `[H x 4H]`.
    pub w_recurrent: DMatrix<f64>,
    /// `[4H]`.
    pub bias: DVector<f64>,
}

/// The meta-optimizer parameters phi: the stacked LSTM layers shared across
/// all coordinates plus the scalar readout.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmWeights {
    pub config: MetaOptConfig,
    pub layers: Vec<LayerWeights>,
    /// `[H]`; the update for a coordinate is
    /// `output_scale * (h_top . readout_weight + readout_bias)`.
    pub readout_weight: DVector<f64>,
    pub readout_bias: f64,
}

impl LstmWeights {
    pub fn hidden_size(&self) -> usize {
        self.config.hidden_size
    }

    pub fn input_dim(&self) -> usize {
        self.config.preprocess.feature_count()
    }

    /// All-zero weights with the same shapes; the gradient accumulator.
    pub fn zeros_like(&self) -> Self {
        Self {
            config: self.config,
            layers: self
                .layers
                .iter()
                .map(|l| LayerWeights {
                    w_input: DMatrix::zeros(l.w_input.nrows(), l.w_input.ncols()),
                    w_recurrent: DMatrix::zeros(l.w_recurrent.nrows(), l.w_recurrent.ncols()),
                    bias: DVector::zeros(l.bias.len()),
                })
                .collect(),
            readout_weight: DVector::zeros(self.readout_weight.len()),
            readout_bias: 0.0,
        }
    }

    pub fn n_scalars(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.w_input.len() + l.w_recurrent.len() + l.bias.len())
            .sum::<usize>()
            + self.readout_weight.len()
            + 1
    }

    /// Flattens every scalar in a fixed order (per layer: input weights,
    /// recurrent weights, bias, each column-major; then readout weight and
    /// bias). The inverse is [`LstmWeights::from_flat`].
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_scalars());
        for l in &self.layers {
            out.extend_from_slice(l.w_input.as_slice());
            out.extend_from_slice(l.w_recurrent.as_slice());
            out.extend_from_slice(l.bias.as_slice());
        }
        out.extend_from_slice(self.readout_weight.as_slice());
        out.push(self.readout_bias);
        out
    }

    pub fn from_flat(&self, flat: &[f64]) -> Result<Self> {
        if flat.len() != self.n_scalars() {
            return Err(CoreError::DimensionMismatch {
                what: "flat weight vector",
                expected: self.n_scalars(),
                got: flat.len(),
            });
        }
        let mut w = self.clone();
        let mut cursor = 0;
        for l in &mut w.layers {
            for dst in [l.w_input.as_mut_slice(), l.w_recurrent.as_mut_slice()] {
                dst.copy_from_slice(&flat[cursor..cursor + dst.len()]);
                cursor += dst.len();
            }
            let b = l.bias.as_mut_slice();
            b.copy_from_slice(&flat[cursor..cursor + b.len()]);
            cursor += b.len();
        }
        let r = w.readout_weight.as_mut_slice();
        r.copy_from_slice(&flat[cursor..cursor + r.len()]);
        cursor += r.len();
        w.readout_bias = flat[cursor];
        Ok(w)
    }

    pub fn all_finite(&self) -> bool {
        self.layers.iter().all(|l| {
            l.w_input.iter().all(|x| x.is_finite())
                && l.w_recurrent.iter().all(|x| x.is_finite())
                && l.bias.iter().all(|x| x.is_finite())
        }) && self.readout_weight.iter().all(|x| x.is_finite())
            && self.readout_bias.is_finite()
    }
}

/// Fresh weights: gate weights uniform on `(-s, s)` with `s = 1/sqrt(H)`,
/// biases zero except the forget-gate block at +1, readout weights scaled
/// down by 0.01 so an untrained optimizer takes conservative first steps.
pub fn init_weights<R: Rng>(config: &MetaOptConfig, rng: &mut R) -> Result<LstmWeights> {
    config.validate()?;
    let h = config.hidden_size;
    let s = 1.0 / (h as f64).sqrt();
    let mut uniform_mat = |rows: usize, cols: usize, scale: f64| {
        let data: Vec<f64> = (0..rows * cols)
            .map(|_| rng.gen_range(-s..s) * scale)
            .collect();
        DMatrix::from_column_slice(rows, cols, &data)
    };
    let mut layers = Vec::with_capacity(config.n_layers);
    for layer_idx in 0..config.n_layers {
        let input_dim = if layer_idx == 0 {
            config.preprocess.feature_count()
        } else {
            h
        };
        let w_input = uniform_mat(input_dim, 4 * h, 1.0);
        let w_recurrent = uniform_mat(h, 4 * h, 1.0);
        let mut bias = DVector::zeros(4 * h);
        for k in h..2 * h {
            bias[k] = 1.0;
        }
        layers.push(LayerWeights {
            w_input,
            w_recurrent,
            bias,
        });
    }
    let readout = uniform_mat(h, 1, 0.01);
    Ok(LstmWeights {
        config: *config,
        layers,
        readout_weight: readout.column(0).into_owned(),
        readout_bias: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn same_seed_same_weights() {
        let cfg = MetaOptConfig::default();
        let a = init_weights(&cfg, &mut rng_from_seed(3)).unwrap();
        let b = init_weights(&cfg, &mut rng_from_seed(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn forget_bias_is_one_and_everything_finite() {
        let cfg = MetaOptConfig::default();
        let w = init_weights(&cfg, &mut rng_from_seed(0)).unwrap();
        assert!(w.all_finite());
        let h = cfg.hidden_size;
        for l in &w.layers {
            for k in 0..4 * h {
                let want = if (h..2 * h).contains(&k) { 1.0 } else { 0.0 };
                assert_eq!(l.bias[k], want);
            }
        }
        assert_eq!(w.readout_bias, 0.0);
    }

    #[test]
    fn flat_round_trip() {
        let cfg = MetaOptConfig::default();
        let w = init_weights(&cfg, &mut rng_from_seed(11)).unwrap();
        let flat = w.to_flat();
        assert_eq!(flat.len(), w.n_scalars());
        let back = w.from_flat(&flat).unwrap();
        assert_eq!(back, w);
    }
}
