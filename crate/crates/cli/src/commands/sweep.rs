use serde::{Deserialize, Serialize};
use std::path::Path;

use quenchfit_core::baselines::{sweep_learning_rates, BaselineKind, SweepTable};
use quenchfit_core::objective::{sample_problem_seeded, ProblemInstance};
use quenchfit_core::rng::{derive_seed, stream};
use quenchfit_core::sim::build_model;

use crate::config::ExperimentConfig;
use crate::output::{csv_document, fmt_f64, write_file};
use crate::CliError;

pub struct SweepOutcome {
    pub kind: BaselineKind,
    pub table: SweepTable,
}

/// The machine-readable sweep result consumed by `bench --use-best-eta`.
#[derive(Serialize, Deserialize)]
pub struct SweepSummaryDoc {
    pub optimizer: String,
    pub best_eta: Option<f64>,
    pub rows: Vec<SweepRowDoc>,
}

#[derive(Serialize, Deserialize)]
pub struct SweepRowDoc {
    pub eta: f64,
    pub mean_final_f: f64,
    pub diverged_runs: usize,
}

pub fn sweep_kind(name: &str) -> Result<BaselineKind, CliError> {
    match name {
        "sgd" => Ok(BaselineKind::Sgd),
        "adam" => Ok(BaselineKind::Adam),
        other => Err(CliError::Config(format!(
            "sweep.optimizer '{other}' is not sweepable (expected sgd or adam)"
        ))),
    }
}

/// Runs the learning-rate sweep on instances drawn from the same stream as
/// `bench` (so a follow-up benchmark is paired) and writes `sweep.csv`,
/// `sweep_curves.csv` and `sweep_summary.json`.
pub fn run_sweep(
    config: &ExperimentConfig,
    seed: u64,
    out: &Path,
) -> Result<SweepOutcome, CliError> {
    let sweep = &config.sweep;
    let kind = sweep_kind(&sweep.optimizer)?;
    if sweep.etas.is_empty() || sweep.n_problems == 0 {
        return Err(CliError::Config(
            "sweep needs at least one eta and one problem".into(),
        ));
    }
    let spec = build_model(config.model_kind()?, config.model.n_qubits)?;
    let options = config.sample_options()?;
    let problems: Vec<ProblemInstance> = (0..sweep.n_problems)
        .map(|i| {
            let instance_seed = derive_seed(seed, stream::BENCH_INSTANCES, i as u64);
            sample_problem_seeded(&spec, instance_seed, &options).map_err(CliError::from)
        })
        .collect::<Result<_, _>>()?;

    let table = sweep_learning_rates(kind, &sweep.etas, &problems, sweep.unroll_steps)?;

    let rows: Vec<Vec<String>> = table
        .rows
        .iter()
        .map(|r| {
            vec![
                fmt_f64(r.eta),
                fmt_f64(r.mean_final_loss),
                r.diverged_runs.to_string(),
            ]
        })
        .collect();
    write_file(
        &out.join("sweep.csv"),
        &csv_document(&["eta", "mean_final_f", "diverged_runs"], &rows),
    )?;

    let mut curve_rows = Vec::new();
    for r in &table.rows {
        for (k, &f) in r.mean_curve.iter().enumerate() {
            curve_rows.push(vec![fmt_f64(r.eta), k.to_string(), fmt_f64(f)]);
        }
    }
    write_file(
        &out.join("sweep_curves.csv"),
        &csv_document(&["eta", "iteration", "mean_f"], &curve_rows),
    )?;

    let summary = SweepSummaryDoc {
        optimizer: sweep.optimizer.clone(),
        best_eta: table.best_eta(),
        rows: table
            .rows
            .iter()
            .map(|r| SweepRowDoc {
                eta: r.eta,
                mean_final_f: r.mean_final_loss,
                diverged_runs: r.diverged_runs,
            })
            .collect(),
    };
    let json = serde_json::to_string_pretty(&summary)
        .map_err(|e| CliError::Runtime(format!("sweep summary serialization: {e}")))?;
    write_file(&out.join("sweep_summary.json"), &json)?;
    write_file(&out.join("config_echo.toml"), &config.echo_with_seed(seed)?)?;

    Ok(SweepOutcome { kind, table })
}

/// Parses a `sweep_summary.json` (given directly or inside a directory) into
/// the learning-rate override for `bench`.
pub fn load_best_eta(path: &Path) -> Result<(BaselineKind, f64), CliError> {
    let file = if path.is_dir() {
        path.join("sweep_summary.json")
    } else {
        path.to_path_buf()
    };
    let text = std::fs::read_to_string(&file)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", file.display())))?;
    let doc: SweepSummaryDoc = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", file.display())))?;
    let kind = sweep_kind(&doc.optimizer)?;
    let eta = doc.best_eta.ok_or_else(|| {
        CliError::Runtime("sweep summary has no usable best_eta (all rates diverged)".into())
    })?;
    Ok((kind, eta))
}
