use serde::Serialize;
use std::path::Path;

use quenchfit_core::baselines::{run_baseline_on_problem, BaselineConfig, BaselineKind};
use quenchfit_core::metaopt::{load_checkpoint, unroll_forward, LstmWeights};
use quenchfit_core::objective::{sample_problem_seeded, Objective, ProblemInstance};
use quenchfit_core::rng::{derive_seed, rng_from_seed, stream};
use quenchfit_core::sim::build_model;
use quenchfit_core::stats::{bootstrap_ci, log_histogram, summarize, Histogram, SummaryStats};
use quenchfit_core::trajectory::{Trajectory, TrajectoryMeta};

use super::InstanceRecord;
use crate::config::{ExperimentConfig, OptimizerSpec};
use crate::output::{csv_document, fmt_f64, write_file};
use crate::CliError;

/// Aggregated results for one optimizer over the paired instance set.
#[derive(Clone, Debug)]
pub struct OptimizerResult {
    pub label: String,
    pub mean_curve: Vec<f64>,
    pub mean_log10_curve: Vec<f64>,
    pub ci_lo: Vec<f64>,
    pub ci_hi: Vec<f64>,
    pub final_losses: Vec<f64>,
    pub diverged: Vec<bool>,
    pub summary: SummaryStats,
    pub final_ci: (f64, f64),
    pub delta_theta_sq: Vec<f64>,
    pub histogram: Histogram,
    pub n_diverged: usize,
    pub value_evals: usize,
    pub grad_evals: usize,
    pub mean_trajectory_loss: f64,
}

pub struct BenchOutcome {
    pub results: Vec<OptimizerResult>,
    pub manifest_hash: String,
    pub t_steps: usize,
    pub n_instances: usize,
}

impl BenchOutcome {
    pub fn result(&self, label: &str) -> Option<&OptimizerResult> {
        self.results.iter().find(|r| r.label == label)
    }
}

/// First iteration whose mean loss is at or below `target`; `None` if the
/// curve never reaches it.
pub fn first_iteration_at_or_below(curve: &[f64], target: f64) -> Option<usize> {
    curve.iter().position(|&f| f <= target)
}

fn placeholder_trajectory(
    problem: &ProblemInstance,
    t_steps: usize,
    error: &str,
) -> Result<Trajectory, CliError> {
    let f0 = problem.objective().value(&problem.theta_init)?;
    let mut traj = Trajectory {
        thetas: vec![problem.theta_init.clone()],
        losses: vec![f0],
        gradients: Vec::new(),
        tape: None,
        meta: TrajectoryMeta {
            value_evals: 1,
            events: vec![format!("run failed: {error}")],
            ..TrajectoryMeta::default()
        },
    };
    traj.pad_from(0, t_steps);
    Ok(traj)
}

/// Runs every configured optimizer on the same `n_test_problems` instances
/// and aggregates mean curves with bootstrap confidence bands, final-loss
/// statistics, per-parameter deviations and histograms. `best_eta`
/// overrides the learning rate of optimizers of the matching kind.
pub fn run_bench(
    config: &ExperimentConfig,
    seed: u64,
    out: Option<&Path>,
    best_eta: Option<(BaselineKind, f64)>,
) -> Result<BenchOutcome, CliError> {
    let bench = &config.bench;
    if bench.n_test_problems == 0 {
        return Err(CliError::Config("bench.n_test_problems must be >= 1".into()));
    }
    if bench.optimizers.is_empty() {
        return Err(CliError::Config("bench.optimizers must not be empty".into()));
    }
    let t_steps = bench.unroll_steps;
    let spec = build_model(config.model_kind()?, config.model.n_qubits)?;
    let options = config.sample_options()?;

    // Apply a sweep-selected learning rate before labelling.
    let mut optimizers = bench.optimizers.clone();
    if let Some((kind, eta)) = best_eta {
        for opt in &mut optimizers {
            match (kind, &mut *opt) {
                (BaselineKind::Sgd, OptimizerSpec::Sgd { learning_rate }) => *learning_rate = eta,
                (BaselineKind::Adam, OptimizerSpec::Adam { learning_rate }) => *learning_rate = eta,
                _ => {}
            }
        }
    }

    let lstm_weights: Option<LstmWeights> = if optimizers.contains(&OptimizerSpec::Lstm) {
        let path = bench.checkpoint.as_ref().ok_or_else(|| {
            CliError::Config("bench.checkpoint is required when the lstm optimizer is listed".into())
        })?;
        let doc = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Some(load_checkpoint(&doc)?.0)
    } else {
        None
    };

    let problems: Vec<ProblemInstance> = (0..bench.n_test_problems)
        .map(|i| {
            let instance_seed = derive_seed(seed, stream::BENCH_INSTANCES, i as u64);
            sample_problem_seeded(&spec, instance_seed, &options).map_err(CliError::from)
        })
        .collect::<Result<_, _>>()?;

    let instances: Vec<InstanceRecord> = problems
        .iter()
        .enumerate()
        .map(|(index, p)| InstanceRecord {
            index,
            seed: p.rng_seed,
            theta_true: p.theta_true.iter().copied().collect(),
            theta_init: p.theta_init.iter().copied().collect(),
        })
        .collect();
    let (manifest, manifest_hash) = super::manifest_json(config, seed, &instances)?;

    let mut results = Vec::with_capacity(optimizers.len());
    for (opt_idx, opt) in optimizers.iter().enumerate() {
        let label = opt.label();
        let mut trajectories = Vec::with_capacity(problems.len());
        for problem in &problems {
            let traj = match opt {
                OptimizerSpec::Lstm => {
                    let weights = lstm_weights.as_ref().expect("checked above");
                    unroll_forward(weights, &problem.objective(), &problem.theta_init, t_steps)
                        .map_err(|e| e.to_string())
                }
                OptimizerSpec::Sgd { learning_rate } => {
                    run_baseline_on_problem(&BaselineConfig::sgd(*learning_rate), problem, t_steps)
                        .map_err(|e| e.to_string())
                }
                OptimizerSpec::Adam { learning_rate } => {
                    run_baseline_on_problem(&BaselineConfig::adam(*learning_rate), problem, t_steps)
                        .map_err(|e| e.to_string())
                }
                OptimizerSpec::Lbfgs => {
                    run_baseline_on_problem(&BaselineConfig::lbfgs(), problem, t_steps)
                        .map_err(|e| e.to_string())
                }
                OptimizerSpec::NelderMead => {
                    run_baseline_on_problem(&BaselineConfig::nelder_mead(), problem, t_steps)
                        .map_err(|e| e.to_string())
                }
            };
            let traj = match traj {
                Ok(t) => t,
                Err(msg) => placeholder_trajectory(problem, t_steps, &msg)?,
            };
            trajectories.push(traj);
        }
        results.push(aggregate(
            label,
            opt_idx,
            &trajectories,
            &problems,
            seed,
            bench.n_bootstrap,
            bench.ci_level,
            bench.histogram_bins,
        )?);
    }

    let outcome = BenchOutcome {
        results,
        manifest_hash,
        t_steps,
        n_instances: bench.n_test_problems,
    };
    if let Some(dir) = out {
        write_outputs(config, seed, dir, &manifest, &outcome)?;
    }
    Ok(outcome)
}

#[allow(clippy::too_many_arguments)]
fn aggregate(
    label: String,
    opt_idx: usize,
    trajectories: &[Trajectory],
    problems: &[ProblemInstance],
    seed: u64,
    n_bootstrap: usize,
    ci_level: f64,
    histogram_bins: usize,
) -> Result<OptimizerResult, CliError> {
    let n = trajectories.len();
    let t_steps = trajectories[0].n_steps();
    let n_params = problems[0].theta_true.len();

    let mut mean_curve = Vec::with_capacity(t_steps + 1);
    let mut mean_log10_curve = Vec::with_capacity(t_steps + 1);
    let mut ci_lo = Vec::with_capacity(t_steps + 1);
    let mut ci_hi = Vec::with_capacity(t_steps + 1);
    for k in 0..=t_steps {
        let at_k: Vec<f64> = trajectories.iter().map(|t| t.losses[k]).collect();
        mean_curve.push(at_k.iter().sum::<f64>() / n as f64);
        mean_log10_curve
            .push(at_k.iter().map(|&f| f.max(1e-300).log10()).sum::<f64>() / n as f64);
        if n >= 2 {
            let mut rng = rng_from_seed(derive_seed(
                seed,
                stream::BOOTSTRAP,
                ((opt_idx as u64) << 32) | k as u64,
            ));
            let (lo, hi) = bootstrap_ci(&at_k, n_bootstrap, ci_level, &mut rng)?;
            ci_lo.push(lo);
            ci_hi.push(hi);
        } else {
            ci_lo.push(mean_curve[k]);
            ci_hi.push(mean_curve[k]);
        }
    }

    let final_losses: Vec<f64> = trajectories.iter().map(|t| t.final_loss()).collect();
    let diverged: Vec<bool> = trajectories.iter().map(|t| t.meta.diverged).collect();
    let summary = summarize(&final_losses)?;
    let final_ci = if n >= 2 {
        let mut rng = rng_from_seed(derive_seed(
            seed,
            stream::BOOTSTRAP,
            ((opt_idx as u64) << 32) | 0xffff_ffff,
        ));
        bootstrap_ci(&final_losses, n_bootstrap, ci_level, &mut rng)?
    } else {
        (summary.mean, summary.mean)
    };

    let mut delta_theta_sq = vec![0.0; n_params];
    for (traj, problem) in trajectories.iter().zip(problems) {
        let theta_final = traj.final_theta();
        for a in 0..n_params {
            let d: f64 = theta_final[a] - problem.theta_true[a];
            delta_theta_sq[a] += d * d;
        }
    }
    for d in &mut delta_theta_sq {
        *d /= n as f64;
    }

    Ok(OptimizerResult {
        label,
        mean_curve,
        mean_log10_curve,
        ci_lo,
        ci_hi,
        histogram: log_histogram(&final_losses, histogram_bins)?,
        n_diverged: diverged.iter().filter(|&&d| d).count(),
        value_evals: trajectories.iter().map(|t| t.meta.value_evals).sum(),
        grad_evals: trajectories.iter().map(|t| t.meta.grad_evals).sum(),
        mean_trajectory_loss: trajectories
            .iter()
            .map(|t| t.mean_trajectory_loss())
            .sum::<f64>()
            / n as f64,
        final_losses,
        diverged,
        summary,
        final_ci,
        delta_theta_sq,
    })
}

#[derive(Serialize)]
struct SummaryDoc<'a> {
    seed: u64,
    manifest_hash: &'a str,
    n_instances: usize,
    t_steps: usize,
    optimizers: Vec<OptimizerSummaryDoc<'a>>,
}

#[derive(Serialize)]
struct OptimizerSummaryDoc<'a> {
    label: &'a str,
    mean: f64,
    std: f64,
    min: f64,
    p25: f64,
    median: f64,
    p75: f64,
    max: f64,
    ci_lo: f64,
    ci_hi: f64,
    mean_trajectory_loss: f64,
    n_diverged: usize,
    value_evals: usize,
    grad_evals: usize,
}

fn write_outputs(
    config: &ExperimentConfig,
    seed: u64,
    dir: &Path,
    manifest: &str,
    outcome: &BenchOutcome,
) -> Result<(), CliError> {
    write_file(&dir.join("manifest.json"), manifest)?;
    write_file(&dir.join("config_echo.toml"), &config.echo_with_seed(seed)?)?;

    let mut curve_rows = Vec::new();
    for r in &outcome.results {
        for k in 0..r.mean_curve.len() {
            curve_rows.push(vec![
                r.label.clone(),
                k.to_string(),
                fmt_f64(r.mean_curve[k]),
                fmt_f64(r.mean_log10_curve[k]),
                fmt_f64(r.ci_lo[k]),
                fmt_f64(r.ci_hi[k]),
            ]);
        }
    }
    write_file(
        &dir.join("curves.csv"),
        &csv_document(
            &["optimizer", "iteration", "mean_f", "mean_log10_f", "ci_lo", "ci_hi"],
            &curve_rows,
        ),
    )?;

    let mut final_rows = Vec::new();
    for r in &outcome.results {
        for (i, &f) in r.final_losses.iter().enumerate() {
            final_rows.push(vec![
                r.label.clone(),
                i.to_string(),
                fmt_f64(f),
                u8::from(r.diverged[i]).to_string(),
            ]);
        }
    }
    write_file(
        &dir.join("final_losses.csv"),
        &csv_document(&["optimizer", "instance", "final_f", "diverged"], &final_rows),
    )?;

    let mut delta_rows = Vec::new();
    for r in &outcome.results {
        for (a, &d) in r.delta_theta_sq.iter().enumerate() {
            delta_rows.push(vec![r.label.clone(), a.to_string(), fmt_f64(d)]);
        }
    }
    write_file(
        &dir.join("delta_theta.csv"),
        &csv_document(&["optimizer", "param_index", "mean_sq_dev"], &delta_rows),
    )?;

    let mut hist_rows = Vec::new();
    for r in &outcome.results {
        for (b, &count) in r.histogram.counts.iter().enumerate() {
            hist_rows.push(vec![
                r.label.clone(),
                fmt_f64(r.histogram.edges[b]),
                fmt_f64(r.histogram.edges[b + 1]),
                count.to_string(),
            ]);
        }
    }
    write_file(
        &dir.join("histogram.csv"),
        &csv_document(&["optimizer", "bin_lo", "bin_hi", "count"], &hist_rows),
    )?;

    let summary = SummaryDoc {
        seed,
        manifest_hash: &outcome.manifest_hash,
        n_instances: outcome.n_instances,
        t_steps: outcome.t_steps,
        optimizers: outcome
            .results
            .iter()
            .map(|r| OptimizerSummaryDoc {
                label: &r.label,
                mean: r.summary.mean,
                std: r.summary.std,
                min: r.summary.min,
                p25: r.summary.p25,
                median: r.summary.median,
                p75: r.summary.p75,
                max: r.summary.max,
                ci_lo: r.final_ci.0,
                ci_hi: r.final_ci.1,
                mean_trajectory_loss: r.mean_trajectory_loss,
                n_diverged: r.n_diverged,
                value_evals: r.value_evals,
                grad_evals: r.grad_evals,
            })
            .collect(),
    };
    let summary_json = serde_json::to_string_pretty(&summary)
        .map_err(|e| CliError::Runtime(format!("summary serialization: {e}")))?;
    write_file(&dir.join("summary.json"), &summary_json)?;
    Ok(())
}
