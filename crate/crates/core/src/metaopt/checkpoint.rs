use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::config::MetaOptConfig;
use super::weights::{LayerWeights, LstmWeights};
use crate::error::{CoreError, Result};

pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;

/// Training provenance stored alongside the weights.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMetadata {
    pub seed: u64,
    pub epochs_trained: usize,
    pub best_epoch: Option<usize>,
    pub best_validation_loss: Option<f64>,
    /// The optimizer that trained phi, e.g. "adam(lr=0.001,b1=0.9,b2=0.999,eps=1e-8)".
    pub meta_optimizer: String,
    pub rng_algorithm: String,
    pub model: String,
    pub train_sigma: f64,
    pub unroll_steps: usize,
}

#[derive(Serialize, Deserialize)]
struct LayerDoc {
    /// Row-major `[input_dim][4H]`.
    w_input: Vec<Vec<f64>>,
    /// Row-major `[H][4H]`.
    w_recurrent: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointDoc {
    schema_version: u32,
    config: MetaOptConfig,
    metadata: CheckpointMetadata,
    layers: Vec<LayerDoc>,
    readout_weight: Vec<f64>,
    readout_bias: f64,
}

fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|r| m.row(r).iter().copied().collect())
        .collect()
}

fn rows_to_matrix(rows: &[Vec<f64>], what: &'static str, nrows: usize, ncols: usize) -> Result<DMatrix<f64>> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(CoreError::Checkpoint(format!(
            "{what}: expected shape {nrows}x{ncols}"
        )));
    }
    let mut m = DMatrix::zeros(nrows, ncols);
    for (r, row) in rows.iter().enumerate() {
        for (c, &x) in row.iter().enumerate() {
            m[(r, c)] = x;
        }
    }
    Ok(m)
}

/// Serializes weights and metadata to the versioned JSON document. The
/// round trip through [`load_checkpoint`] is lossless and byte-stable.
pub fn save_checkpoint(weights: &LstmWeights, metadata: &CheckpointMetadata) -> Result<String> {
    let doc = CheckpointDoc {
        schema_version: CHECKPOINT_SCHEMA_VERSION,
        config: weights.config,
        metadata: metadata.clone(),
        layers: weights
            .layers
            .iter()
            .map(|l| LayerDoc {
                w_input: matrix_to_rows(&l.w_input),
                w_recurrent: matrix_to_rows(&l.w_recurrent),
                bias: l.bias.iter().copied().collect(),
            })
            .collect(),
        readout_weight: weights.readout_weight.iter().copied().collect(),
        readout_bias: weights.readout_bias,
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

/// Parses and validates a checkpoint document.
pub fn load_checkpoint(document: &str) -> Result<(LstmWeights, CheckpointMetadata)> {
    let doc: CheckpointDoc = serde_json::from_str(document)
        .map_err(|e| CoreError::Checkpoint(format!("malformed document: {e}")))?;
    if doc.schema_version != CHECKPOINT_SCHEMA_VERSION {
        return Err(CoreError::Checkpoint(format!(
            "schema version {} not supported (expected {})",
            doc.schema_version, CHECKPOINT_SCHEMA_VERSION
        )));
    }
    doc.config.validate().map_err(|e| match e {
        CoreError::InvalidConfig(m) => CoreError::Checkpoint(m),
        other => other,
    })?;
    let h = doc.config.hidden_size;
    if doc.layers.len() != doc.config.n_layers {
        return Err(CoreError::Checkpoint(format!(
            "layer count {} does not match config n_layers {}",
            doc.layers.len(),
            doc.config.n_layers
        )));
    }
    let mut layers = Vec::with_capacity(doc.layers.len());
    for (idx, l) in doc.layers.iter().enumerate() {
        let in_dim = if idx == 0 {
            doc.config.preprocess.feature_count()
        } else {
            h
        };
        let w_input = rows_to_matrix(&l.w_input, "layer input weights", in_dim, 4 * h)?;
        let w_recurrent = rows_to_matrix(&l.w_recurrent, "layer recurrent weights", h, 4 * h)?;
        if l.bias.len() != 4 * h {
            return Err(CoreError::Checkpoint(format!(
                "layer bias length {} (expected {})",
                l.bias.len(),
                4 * h
            )));
        }
        layers.push(LayerWeights {
            w_input,
            w_recurrent,
            bias: DVector::from_vec(l.bias.clone()),
        });
    }
    if doc.readout_weight.len() != h {
        return Err(CoreError::Checkpoint(format!(
            "readout weight length {} (expected {h})",
            doc.readout_weight.len()
        )));
    }
    let weights = LstmWeights {
        config: doc.config,
        layers,
        readout_weight: DVector::from_vec(doc.readout_weight),
        readout_bias: doc.readout_bias,
    };
    if !weights.all_finite() {
        return Err(CoreError::Checkpoint("non-finite weight entries".into()));
    }
    Ok((weights, doc.metadata))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metaopt::weights::init_weights;
    use crate::rng::rng_from_seed;

    fn meta() -> CheckpointMetadata {
        CheckpointMetadata {
            seed: 9,
            epochs_trained: 12,
            best_epoch: Some(10),
            best_validation_loss: Some(0.123),
            meta_optimizer: "adam(lr=0.001,b1=0.9,b2=0.999,eps=1e-8)".into(),
            rng_algorithm: "chacha8".into(),
            model: "tfim_n4".into(),
            train_sigma: 1e-3,
            unroll_steps: 100,
        }
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let w = init_weights(&MetaOptConfig::default(), &mut rng_from_seed(4)).unwrap();
        let doc1 = save_checkpoint(&w, &meta()).unwrap();
        let (w2, m2) = load_checkpoint(&doc1).unwrap();
        assert_eq!(w2, w);
        let doc2 = save_checkpoint(&w2, &m2).unwrap();
        assert_eq!(doc1, doc2);
    }

    #[test]
    fn truncated_document_is_a_schema_error() {
        let w = init_weights(&MetaOptConfig::default(), &mut rng_from_seed(4)).unwrap();
        let doc = save_checkpoint(&w, &meta()).unwrap();
        let truncated = &doc[..doc.len() / 2];
        assert!(matches!(
            load_checkpoint(truncated),
            Err(CoreError::Checkpoint(_))
        ));
    }

    #[test]
    fn wrong_schema_version_is_rejected() {
        let w = init_weights(&MetaOptConfig::default(), &mut rng_from_seed(4)).unwrap();
        let doc = save_checkpoint(&w, &meta()).unwrap();
        let bumped = doc.replace("\"schema_version\": 1", "\"schema_version\": 2");
        assert!(load_checkpoint(&bumped).is_err());
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let w = init_weights(&MetaOptConfig::default(), &mut rng_from_seed(4)).unwrap();
        let doc = save_checkpoint(&w, &meta()).unwrap();
        // Claim a different hidden size than the stored arrays.
        let tampered = doc.replace("\"hidden_size\": 20", "\"hidden_size\": 10");
        assert!(load_checkpoint(&tampered).is_err());
    }
}
