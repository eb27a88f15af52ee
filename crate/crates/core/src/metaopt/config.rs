use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Gradient preprocessing applied per coordinate before the LSTM input.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Preprocess {
    /// Feed the raw gradient component.
    Raw,
    /// The scale-robust pair `(log|g|/p, sign(g))` for `|g| >= e^-p`, and
    /// `(-1, e^p g)` below that.
    LogSign { p: f64 },
}

impl Preprocess {
    pub fn feature_count(&self) -> usize {
        match self {
            Preprocess::Raw => 1,
            Preprocess::LogSign { .. } => 2,
        }
    }

    /// Writes the features of one gradient component into `out`.
    #[inline]
    pub fn features_into(&self, g: f64, out: &mut [f64]) {
        match *self {
            Preprocess::Raw => out[0] = g,
            Preprocess::LogSign { p } => {
                if g.abs() >= (-p).exp() {
                    out[0] = g.abs().ln() / p;
                    out[1] = g.signum();
                } else {
                    out[0] = -1.0;
                    out[1] = p.exp() * g;
                }
            }
        }
    }
}

/// Preprocessed feature vector for one gradient component.
pub fn preprocess_gradient(g: f64, mode: Preprocess) -> Vec<f64> {
    let mut out = vec![0.0; mode.feature_count()];
    mode.features_into(g, &mut out);
    out
}

/// Architecture of the coordinate-wise LSTM optimizer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetaOptConfig {
    pub hidden_size: usize,
    pub n_layers: usize,
    pub preprocess: Preprocess,
    /// Multiplier on the readout; the update is `scale * readout(h_top)`.
    pub output_scale: f64,
}

impl Default for MetaOptConfig {
    fn default() -> Self {
        Self {
            hidden_size: 20,
            n_layers: 2,
            preprocess: Preprocess::LogSign { p: 10.0 },
            output_scale: 1.0,
        }
    }
}

impl MetaOptConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_size == 0 {
            return Err(CoreError::InvalidConfig("hidden_size must be >= 1".into()));
        }
        if self.n_layers == 0 {
            return Err(CoreError::InvalidConfig("n_layers must be >= 1".into()));
        }
        if let Preprocess::LogSign { p } = self.preprocess {
            if !(p > 0.0) {
                return Err(CoreError::InvalidConfig("log-sign p must be > 0".into()));
            }
        }
        if !self.output_scale.is_finite() {
            return Err(CoreError::InvalidConfig("output_scale must be finite".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_sign_branches() {
        let m = Preprocess::LogSign { p: 10.0 };
        assert_eq!(preprocess_gradient(1.0, m), vec![0.0, 1.0]);
        assert_eq!(preprocess_gradient(0.0, m), vec![-1.0, 0.0]);
        let f = preprocess_gradient(-0.5, m);
        assert!((f[0] - 0.5f64.ln() / 10.0).abs() < 1e-15);
        assert_eq!(f[1], -1.0);
    }

    #[test]
    fn raw_is_identity() {
        assert_eq!(preprocess_gradient(-0.3, Preprocess::Raw), vec![-0.3]);
    }

    #[test]
    fn small_gradient_branch_is_continuous_at_the_switch() {
        let p = 10.0;
        let m = Preprocess::LogSign { p };
        let edge = (-p as f64).exp();
        let below = preprocess_gradient(edge * 0.999, m);
        let above = preprocess_gradient(edge * 1.001, m);
        assert!((below[0] - above[0]).abs() < 1e-3);
        assert!((below[1] - above[1]).abs() < 2e-3);
    }
}
