//! The coordinate-wise LSTM meta-optimizer.
//!
//! One small LSTM (shared weights) is applied independently to every
//! parameter component; each component carries its own hidden state. That
//! construction is what lets a network trained on one problem size run on
//! any other and makes the update rule equivariant under coordinate
//! permutations. Training differentiates the summed trajectory loss through
//! the unrolled updates, treating the supplied objective gradients as
//! constants.

mod cell;
mod checkpoint;
mod config;
mod unroll;
mod weights;

pub use cell::{lstm_step, LayerState, LstmState, StepTrace};
pub use checkpoint::{
    load_checkpoint, save_checkpoint, CheckpointMetadata, CHECKPOINT_SCHEMA_VERSION,
};
pub use config::{preprocess_gradient, MetaOptConfig, Preprocess};
pub use unroll::{final_eval, unroll_backward, unroll_forward, unroll_segment, UnrollTape};
pub use weights::{init_weights, LayerWeights, LstmWeights};
