use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use quenchfit_cli::commands::{load_best_eta, run_bench, run_gen, run_sweep, run_train};
use quenchfit_cli::config::ExperimentConfig;
use quenchfit_cli::output::error_json;
use quenchfit_cli::CliError;

/// Trains and benchmarks a learned optimizer for estimating spin-Hamiltonian
/// coefficients from noisy quench-dynamics time series.
#[derive(Parser)]
#[command(name = "quenchfit", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate reproducible problem instances and dataset files.
    Gen {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed in the config file.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Meta-train the LSTM optimizer and write the best checkpoint.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Continue from an existing checkpoint (epoch numbering resumes).
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Run every configured optimizer on a paired instance set.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Take the winning learning rate from a sweep output
        /// (directory or sweep_summary.json path).
        #[arg(long)]
        use_best_eta: Option<PathBuf>,
    },
    /// Sweep learning rates for SGD or Adam over a shared problem set.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Gen { config, seed, out } => {
            let config = ExperimentConfig::load(&config)?;
            let seed = config.resolve_seed(seed)?;
            let outcome = run_gen(&config, seed, &out)?;
            eprintln!(
                "gen: {} instances written to {} (manifest {})",
                outcome.n_instances,
                out.display(),
                &outcome.manifest_hash[..12]
            );
        }
        Command::Train {
            config,
            seed,
            out,
            resume,
        } => {
            let config = ExperimentConfig::load(&config)?;
            let seed = config.resolve_seed(seed)?;
            let outcome = run_train(&config, seed, &out, resume.as_deref())?;
            eprintln!(
                "train: {} epochs, best epoch {:?} (validation {:?})",
                outcome.epochs_trained, outcome.best_epoch, outcome.best_validation_loss
            );
        }
        Command::Bench {
            config,
            seed,
            out,
            use_best_eta,
        } => {
            let config = ExperimentConfig::load(&config)?;
            let seed = config.resolve_seed(seed)?;
            let best = use_best_eta.as_deref().map(load_best_eta).transpose()?;
            let outcome = run_bench(&config, seed, Some(&out), best)?;
            for r in &outcome.results {
                eprintln!(
                    "bench: {:<12} mean_final={:.6} std={:.6} diverged={}",
                    r.label, r.summary.mean, r.summary.std, r.n_diverged
                );
            }
        }
        Command::Sweep { config, seed, out } => {
            let config = ExperimentConfig::load(&config)?;
            let seed = config.resolve_seed(seed)?;
            let outcome = run_sweep(&config, seed, &out)?;
            eprintln!(
                "sweep: {:?} best eta {:?}",
                outcome.kind,
                outcome.table.best_eta()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version requests are successful exits.
            if err.use_stderr() {
                eprintln!("{}", error_json("usage", &err.to_string()));
                return ExitCode::from(2);
            }
            let _ = err.print();
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", error_json(err.kind(), &err.to_string()));
            ExitCode::from(1)
        }
    }
}
