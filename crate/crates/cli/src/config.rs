//! One TOML document per experiment; every section has defaults so a minimal
//! file (or an empty one plus `--seed`) is runnable. A resolved copy is
//! echoed next to every output for provenance.

use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use std::str::FromStr;

use quenchfit_core::metaopt::{MetaOptConfig, Preprocess};
use quenchfit_core::objective::{time_grid, LossKind, SampleOptions};
use quenchfit_core::sim::{InitialStateKind, ModelKind};
use quenchfit_core::trainer::TrainConfig;

use crate::CliError;

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Run seed; a `--seed` flag overrides it.
    pub seed: Option<u64>,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub gen: GenSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub bench: BenchSection,
    #[serde(default)]
    pub sweep: SweepSection,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: String,
    pub n_qubits: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            kind: "tfim".into(),
            n_qubits: 4,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub sigma: f64,
    pub sigma_in: f64,
    pub param_lo: f64,
    pub param_hi: f64,
    pub t_max: f64,
    pub n_times: usize,
    pub initial_states: Vec<String>,
    pub loss: String,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            sigma: 1e-3,
            sigma_in: 0.1,
            param_lo: 1.0,
            param_hi: 2.0,
            t_max: 10.0,
            n_times: 50,
            initial_states: vec!["all_plus_x".into(), "all_zero_z".into()],
            loss: "squared_error".into(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenSection {
    pub n_instances: usize,
}

impl Default for GenSection {
    fn default() -> Self {
        Self { n_instances: 300 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: usize,
    pub unroll_steps: usize,
    pub meta_lr: f64,
    pub validate_every: usize,
    pub n_validation_problems: usize,
    pub hidden_size: usize,
    pub n_layers: usize,
    /// "log_sign" or "raw".
    pub preprocess: String,
    pub log_sign_p: f64,
    pub output_scale: f64,
    /// Global-norm clip on the meta-gradient; absent disables clipping.
    pub grad_clip: Option<f64>,
    /// Steps per truncated-BPTT segment; absent backpropagates the full
    /// unroll in one update per epoch.
    pub bptt_segment: Option<usize>,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            epochs: 10_000,
            unroll_steps: 100,
            meta_lr: 3e-3,
            validate_every: 100,
            n_validation_problems: 32,
            hidden_size: 20,
            n_layers: 2,
            preprocess: "log_sign".into(),
            log_sign_p: 10.0,
            output_scale: 1.0,
            grad_clip: Some(1.0),
            bptt_segment: Some(20),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSection {
    pub n_test_problems: usize,
    pub unroll_steps: usize,
    pub checkpoint: Option<PathBuf>,
    pub optimizers: Vec<OptimizerSpec>,
    pub n_bootstrap: usize,
    pub ci_level: f64,
    pub histogram_bins: usize,
}

impl Default for BenchSection {
    fn default() -> Self {
        Self {
            n_test_problems: 300,
            unroll_steps: 100,
            checkpoint: None,
            optimizers: vec![
                OptimizerSpec::Lstm,
                OptimizerSpec::Adam {
                    learning_rate: 0.03,
                },
                OptimizerSpec::Sgd {
                    learning_rate: 0.001,
                },
                OptimizerSpec::Lbfgs,
                OptimizerSpec::NelderMead,
            ],
            n_bootstrap: 1000,
            ci_level: 0.95,
            histogram_bins: 30,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OptimizerSpec {
    Lstm,
    Sgd { learning_rate: f64 },
    Adam { learning_rate: f64 },
    Lbfgs,
    NelderMead,
}

impl OptimizerSpec {
    /// Stable label used in every output file.
    pub fn label(&self) -> String {
        match self {
            OptimizerSpec::Lstm => "lstm".into(),
            OptimizerSpec::Sgd { learning_rate } => format!("sgd@{learning_rate}"),
            OptimizerSpec::Adam { learning_rate } => format!("adam@{learning_rate}"),
            OptimizerSpec::Lbfgs => "lbfgs".into(),
            OptimizerSpec::NelderMead => "nelder_mead".into(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// "sgd" or "adam".
    pub optimizer: String,
    pub etas: Vec<f64>,
    pub n_problems: usize,
    pub unroll_steps: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            optimizer: "adam".into(),
            etas: vec![0.001, 0.003, 0.01, 0.03, 0.1],
            n_problems: 40,
            unroll_steps: 100,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn resolve_seed(&self, flag: Option<u64>) -> Result<u64, CliError> {
        flag.or(self.seed).ok_or_else(|| {
            CliError::Config("no seed: set `seed` in the config or pass --seed".into())
        })
    }

    pub fn model_kind(&self) -> Result<ModelKind, CliError> {
        ModelKind::from_str(&self.model.kind).map_err(CliError::from)
    }

    pub fn loss_kind(&self) -> Result<LossKind, CliError> {
        match self.data.loss.as_str() {
            "squared_error" => Ok(LossKind::SquaredError),
            "kl" => Ok(LossKind::Kl),
            other => Err(CliError::Config(format!(
                "unknown loss '{other}' (expected squared_error or kl)"
            ))),
        }
    }

    pub fn initial_states(&self) -> Result<Vec<InitialStateKind>, CliError> {
        if self.data.initial_states.is_empty() {
            return Err(CliError::Config("need at least one initial state".into()));
        }
        self.data
            .initial_states
            .iter()
            .map(|s| InitialStateKind::from_str(s).map_err(CliError::from))
            .collect()
    }

    pub fn sample_options(&self) -> Result<SampleOptions, CliError> {
        Ok(SampleOptions {
            sigma: self.data.sigma,
            sigma_in: self.data.sigma_in,
            param_range: (self.data.param_lo, self.data.param_hi),
            loss_kind: self.loss_kind()?,
            times: time_grid(self.data.t_max, self.data.n_times),
            initial_states: self.initial_states()?,
        })
    }

    pub fn metaopt_config(&self) -> Result<MetaOptConfig, CliError> {
        let preprocess = match self.train.preprocess.as_str() {
            "raw" => Preprocess::Raw,
            "log_sign" => Preprocess::LogSign {
                p: self.train.log_sign_p,
            },
            other => {
                return Err(CliError::Config(format!(
                    "unknown preprocess '{other}' (expected raw or log_sign)"
                )))
            }
        };
        Ok(MetaOptConfig {
            hidden_size: self.train.hidden_size,
            n_layers: self.train.n_layers,
            preprocess,
            output_scale: self.train.output_scale,
        })
    }

    pub fn train_config(&self, seed: u64) -> Result<TrainConfig, CliError> {
        Ok(TrainConfig {
            epochs: self.train.epochs,
            unroll_steps: self.train.unroll_steps,
            sigma: self.data.sigma,
            sigma_in: self.data.sigma_in,
            param_range: (self.data.param_lo, self.data.param_hi),
            model_kind: self.model_kind()?,
            n_qubits: self.model.n_qubits,
            loss_kind: self.loss_kind()?,
            validate_every: self.train.validate_every,
            n_validation_problems: self.train.n_validation_problems,
            meta_lr: self.train.meta_lr,
            grad_clip: self.train.grad_clip,
            seed,
            metaopt: self.metaopt_config()?,
            start_epoch: 0,
            bptt_segment: self.train.bptt_segment,
        })
    }

    /// The resolved TOML echoed next to outputs.
    pub fn echo_with_seed(&self, seed: u64) -> Result<String, CliError> {
        let mut resolved = self.clone();
        resolved.seed = Some(seed);
        toml::to_string_pretty(&resolved)
            .map_err(|e| CliError::Config(format!("cannot serialize config echo: {e}")))
    }
}
