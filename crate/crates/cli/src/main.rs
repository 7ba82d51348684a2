use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rbai::environments::{make_irrelevant_dims, make_unit_sphere};
use rbai_cli::config::ConfigOverrides;
use rbai_cli::experiment::{run_experiment, RESULTS_FILE};
use rbai_cli::inspect::{complexity_file, validate_file};
use rbai_cli::{CliError, CliResult, ExperimentConfig, ExperimentKind};

#[derive(Parser)]
#[command(name = "rbai", version, about = "Robust best-arm identification experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a strategy sweep and write results.csv, summary.json and traces.jsonl.
    Run {
        /// JSON file mirroring the experiment config; flags override its fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: ConfigOverrides,
    },
    /// Print H_R, the worst-case bound and the oracle's predicted sample count.
    Complexity {
        instance: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
    },
    /// Check an instance file (span, unique best arm, gaps).
    Validate { instance: PathBuf },
    /// Write a generated instance as JSON.
    Gen {
        #[arg(long, default_value = "irrelevant_dims")]
        experiment: String,
        /// Dimension.
        #[arg(long, short = 'd', default_value_t = 10)]
        dim: usize,
        /// Number of arms (unit_sphere only).
        #[arg(long, default_value_t = 20)]
        n_arms: usize,
        #[arg(long, default_value_t = 5)]
        n_y: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> CliResult<ExitCode> {
    match command {
        Command::Run { config, overrides } => {
            let mut cfg = match config {
                Some(path) => ExperimentConfig::from_json_file(&path)?,
                None => ExperimentConfig::default(),
            };
            overrides.apply(&mut cfg);
            let output = run_experiment(&cfg)?;
            for cell in &output.summary.cells {
                println!(
                    "{:>6} {:>3} d={:<3} arms={:<3} median={:<10} mean={:<12.1} correct={:.3} aborted={}",
                    cell.strategy.as_str(),
                    cell.sweep_value,
                    cell.d,
                    cell.n_arms,
                    cell.median_pulls,
                    cell.mean_pulls,
                    cell.correct_rate,
                    cell.aborted
                );
            }
            eprintln!("wrote {}", cfg.out_dir.join(RESULTS_FILE).display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Complexity { instance, delta } => {
            let report = complexity_file(&instance, delta)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { instance } => {
            let diag = validate_file(&instance)?;
            println!("{}", serde_json::to_string_pretty(&diag)?);
            Ok(if diag.valid { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Gen { experiment, dim, n_arms, n_y, alpha, seed, out } => {
            let inst = match experiment.parse::<ExperimentKind>()? {
                ExperimentKind::IrrelevantDims => make_irrelevant_dims(dim, n_y)?,
                ExperimentKind::UnitSphere => make_unit_sphere(dim, n_arms, n_y, alpha, seed)?,
                ExperimentKind::FromFile => {
                    return Err(CliError::Config("gen supports irrelevant_dims and unit_sphere".into()))
                }
            };
            let text = serde_json::to_string_pretty(&inst)?;
            match out {
                Some(path) => std::fs::write(&path, text + "\n").map_err(|source| CliError::Io { path, source })?,
                None => println!("{text}"),
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
