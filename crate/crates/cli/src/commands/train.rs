use std::path::Path;

use quenchfit_core::metaopt::{load_checkpoint, save_checkpoint, CheckpointMetadata};
use quenchfit_core::trainer::{meta_optimizer_description, meta_train, TrainLog};

use crate::config::ExperimentConfig;
use crate::output::{csv_document, fmt_f64, write_file};
use crate::CliError;

pub struct TrainOutcomeFiles {
    pub epochs_trained: usize,
    pub best_epoch: Option<usize>,
    pub best_validation_loss: Option<f64>,
    pub log: TrainLog,
}

/// Meta-trains (optionally resuming from a checkpoint, which continues the
/// epoch numbering) and writes `checkpoint.json` (the best-validation
/// weights), `train_log.csv` and the config echo.
pub fn run_train(
    config: &ExperimentConfig,
    seed: u64,
    out: &Path,
    resume: Option<&Path>,
) -> Result<TrainOutcomeFiles, CliError> {
    let mut train_config = config.train_config(seed)?;
    let target_epochs = train_config.epochs;

    let initial = match resume {
        Some(path) => {
            let doc = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            let (weights, metadata) = load_checkpoint(&doc)?;
            if metadata.epochs_trained >= target_epochs {
                return Err(CliError::Runtime(format!(
                    "checkpoint already trained for {} epochs (target {})",
                    metadata.epochs_trained, target_epochs
                )));
            }
            train_config.start_epoch = metadata.epochs_trained;
            train_config.epochs = target_epochs - metadata.epochs_trained;
            Some(weights)
        }
        None => None,
    };

    let outcome = meta_train(&train_config, initial)?;
    let metadata = CheckpointMetadata {
        seed,
        epochs_trained: target_epochs,
        best_epoch: outcome.log.best_epoch,
        best_validation_loss: outcome.log.best_validation_loss,
        meta_optimizer: meta_optimizer_description(train_config.meta_lr),
        rng_algorithm: "chacha8".into(),
        model: format!("{}_n{}", config.model.kind, config.model.n_qubits),
        train_sigma: config.data.sigma,
        unroll_steps: train_config.unroll_steps,
    };

    write_file(
        &out.join("checkpoint.json"),
        &save_checkpoint(&outcome.best_weights, &metadata)?,
    )?;

    let rows: Vec<Vec<String>> = outcome
        .log
        .epochs
        .iter()
        .map(|e| {
            vec![
                e.epoch.to_string(),
                fmt_f64(e.meta_loss),
                e.val_mean_final_loss.map(fmt_f64).unwrap_or_default(),
                u8::from(e.clipped).to_string(),
            ]
        })
        .collect();
    write_file(
        &out.join("train_log.csv"),
        &csv_document(&["epoch", "meta_loss", "val_mean_final_f", "clipped_flag"], &rows),
    )?;
    write_file(&out.join("config_echo.toml"), &config.echo_with_seed(seed)?)?;

    Ok(TrainOutcomeFiles {
        epochs_trained: target_epochs,
        best_epoch: outcome.log.best_epoch,
        best_validation_loss: outcome.log.best_validation_loss,
        log: outcome.log,
    })
}
