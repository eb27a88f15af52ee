use std::path::Path;

use quenchfit_core::objective::{sample_problem_seeded, DatasetDocument};
use quenchfit_core::rng::{derive_seed, stream};
use quenchfit_core::sim::build_model;

use super::InstanceRecord;
use crate::config::ExperimentConfig;
use crate::output::write_file;
use crate::CliError;

pub struct GenOutcome {
    pub n_instances: usize,
    pub manifest_hash: String,
}

/// Writes one dataset JSON per instance plus the instance manifest, all
/// derived deterministically from the run seed.
pub fn run_gen(config: &ExperimentConfig, seed: u64, out: &Path) -> Result<GenOutcome, CliError> {
    let n = config.gen.n_instances;
    if n == 0 {
        return Err(CliError::Config("gen.n_instances must be >= 1".into()));
    }
    let spec = build_model(config.model_kind()?, config.model.n_qubits)?;
    let options = config.sample_options()?;

    let mut instances = Vec::with_capacity(n);
    for index in 0..n {
        let instance_seed = derive_seed(seed, stream::GEN, index as u64);
        let problem = sample_problem_seeded(&spec, instance_seed, &options)?;
        let doc = DatasetDocument::from_dataset(
            &problem.spec,
            &problem.theta_true,
            instance_seed,
            &problem.dataset,
        )?;
        write_file(&out.join(format!("dataset_{index:04}.json")), &doc.to_json()?)?;
        instances.push(InstanceRecord {
            index,
            seed: instance_seed,
            theta_true: problem.theta_true.iter().copied().collect(),
            theta_init: problem.theta_init.iter().copied().collect(),
        });
    }

    let (manifest, hash) = super::manifest_json(config, seed, &instances)?;
    write_file(&out.join("manifest.json"), &manifest)?;
    write_file(&out.join("config_echo.toml"), &config.echo_with_seed(seed)?)?;
    Ok(GenOutcome {
        n_instances: n,
        manifest_hash: hash,
    })
}
