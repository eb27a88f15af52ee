//! The four subcommands. Each returns a structured outcome (consumed by
//! tests) and optionally writes its file set into an output directory.

mod bench;
mod gen;
mod sweep;
mod train;

pub use bench::{first_iteration_at_or_below, run_bench, BenchOutcome, OptimizerResult};
pub use gen::{run_gen, GenOutcome};
pub use sweep::{load_best_eta, run_sweep, SweepOutcome};
pub use train::{run_train, TrainOutcomeFiles};

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::output;
use crate::CliError;

/// Per-instance manifest entry shared by `gen` and `bench`.
#[derive(Clone, Debug, Serialize)]
pub struct InstanceRecord {
    pub index: usize,
    pub seed: u64,
    pub theta_true: Vec<f64>,
    pub theta_init: Vec<f64>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    seed: u64,
    model_kind: String,
    n_qubits: usize,
    sigma: f64,
    sigma_in: f64,
    param_lo: f64,
    param_hi: f64,
    loss: String,
    n_instances: usize,
    instances_hash: String,
    instances: &'a [InstanceRecord],
}

/// Serializes the instance manifest with its content hash filled in.
/// Returns `(json, hash)`.
pub(crate) fn manifest_json(
    config: &ExperimentConfig,
    seed: u64,
    instances: &[InstanceRecord],
) -> Result<(String, String), CliError> {
    let inner = serde_json::to_string(instances)
        .map_err(|e| CliError::Runtime(format!("manifest serialization: {e}")))?;
    let hash = output::sha256_hex(&inner);
    let manifest = Manifest {
        seed,
        model_kind: config.model.kind.clone(),
        n_qubits: config.model.n_qubits,
        sigma: config.data.sigma,
        sigma_in: config.data.sigma_in,
        param_lo: config.data.param_lo,
        param_hi: config.data.param_hi,
        loss: config.data.loss.clone(),
        n_instances: instances.len(),
        instances_hash: hash.clone(),
        instances,
    };
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| CliError::Runtime(format!("manifest serialization: {e}")))?;
    Ok((json, hash))
}
