use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use rbai::algorithms::DEFAULT_MAX_PULLS;
use rbai::{DeltaSchedule, FwParams, Strategy, StrategyConfig};
use serde::{Deserialize, Serialize};

use crate::error::{io_err, CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Sweep values are the dimension `d`.
    IrrelevantDims,
    /// Sweep values are the number of arms; the dimension is `dim`.
    UnitSphere,
    /// One instance read from `instance`; sweep values only label cells.
    FromFile,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::IrrelevantDims => "irrelevant_dims",
            ExperimentKind::UnitSphere => "unit_sphere",
            ExperimentKind::FromFile => "from_file",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentKind {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "irrelevant_dims" => Ok(ExperimentKind::IrrelevantDims),
            "unit_sphere" => Ok(ExperimentKind::UnitSphere),
            "from_file" => Ok(ExperimentKind::FromFile),
            other => Err(CliError::Config(format!(
                "unknown experiment {other:?} (expected irrelevant_dims, unit_sphere or from_file)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub strategies: Vec<Strategy>,
    pub sweep: Vec<usize>,
    pub replications: u64,
    pub delta: f64,
    pub eps: f64,
    pub base_seed: u64,
    pub out_dir: PathBuf,
    /// Worker threads; `None` uses every available core.
    pub jobs: Option<usize>,
    pub max_pulls: u64,
    pub rage_delta_schedule: DeltaSchedule,
    pub n_y: usize,
    /// Dimension of the unit-sphere experiment.
    pub dim: usize,
    pub alpha: f64,
    /// Seed of the sphere generator; cell `v` uses `instance_seed + v`.
    pub instance_seed: u64,
    pub instance: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: ExperimentKind::IrrelevantDims,
            strategies: Strategy::ALL.to_vec(),
            sweep: vec![5, 10, 15, 20],
            replications: 20,
            delta: 0.05,
            eps: 0.1,
            base_seed: 0,
            out_dir: PathBuf::from("results"),
            jobs: None,
            max_pulls: DEFAULT_MAX_PULLS,
            rage_delta_schedule: DeltaSchedule::Alg1,
            n_y: 5,
            dim: 10,
            alpha: 0.05,
            instance_seed: 0,
            instance: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_file(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.replications < 1 {
            return Err(CliError::Config("replications must be at least 1".into()));
        }
        if self.sweep.is_empty() {
            return Err(CliError::Config("sweep must not be empty".into()));
        }
        if self.strategies.is_empty() {
            return Err(CliError::Config("strategies must not be empty".into()));
        }
        if self.jobs == Some(0) {
            return Err(CliError::Config("jobs must be positive".into()));
        }
        if self.n_y == 0 {
            return Err(CliError::Config("n_y must be positive".into()));
        }
        match self.experiment {
            ExperimentKind::IrrelevantDims => {
                if let Some(&d) = self.sweep.iter().find(|&&d| d < 2) {
                    return Err(CliError::Config(format!("irrelevant_dims needs d >= 2, got {d}")));
                }
            }
            ExperimentKind::UnitSphere => {
                if let Some(&n) = self.sweep.iter().find(|&&n| n < 2) {
                    return Err(CliError::Config(format!("unit_sphere needs at least 2 arms, got {n}")));
                }
                if self.dim < 2 {
                    return Err(CliError::Config("unit_sphere needs dim >= 2".into()));
                }
            }
            ExperimentKind::FromFile => {
                if self.instance.is_none() {
                    return Err(CliError::Config("from_file needs an instance path".into()));
                }
            }
        }
        self.strategy_config(0).validate()?;
        Ok(())
    }

    pub fn strategy_config(&self, seed: u64) -> StrategyConfig {
        StrategyConfig {
            delta: self.delta,
            eps: self.eps,
            gamma: None,
            fw: FwParams::default(),
            seed,
            max_pulls: self.max_pulls,
            delta_schedule: self.rage_delta_schedule,
        }
    }
}

/// Command-line overrides; every field replaces the config value when given.
#[derive(Args, Clone, Debug, Default)]
pub struct ConfigOverrides {
    #[arg(long, value_parser = parse_kind)]
    pub experiment: Option<ExperimentKind>,
    /// Comma-separated subset of oracle,static,rage.
    #[arg(long, value_delimiter = ',', value_parser = parse_strategy)]
    pub strategies: Option<Vec<Strategy>>,
    /// Comma-separated d values (or arm counts for unit_sphere).
    #[arg(long, value_delimiter = ',')]
    pub sweep: Option<Vec<usize>>,
    #[arg(long = "reps", visible_alias = "replications")]
    pub replications: Option<u64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long = "seed", visible_alias = "base-seed")]
    pub base_seed: Option<u64>,
    #[arg(long = "out", visible_alias = "out-dir")]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub max_pulls: Option<u64>,
    #[arg(long, value_parser = parse_schedule)]
    pub rage_delta_schedule: Option<DeltaSchedule>,
    #[arg(long)]
    pub n_y: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub instance_seed: Option<u64>,
    #[arg(long)]
    pub instance: Option<PathBuf>,
}

impl ConfigOverrides {
    pub fn apply(self, config: &mut ExperimentConfig) {
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { config.$field = v; })*
            };
        }
        set!(experiment, strategies, sweep, replications, delta, eps, base_seed, out_dir, max_pulls);
        set!(rage_delta_schedule, n_y, dim, alpha, instance_seed);
        if self.jobs.is_some() {
            config.jobs = self.jobs;
        }
        if self.instance.is_some() {
            config.instance = self.instance;
        }
    }
}

fn parse_kind(s: &str) -> Result<ExperimentKind, String> {
    s.parse().map_err(|e: CliError| e.to_string())
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    s.parse().map_err(|e: rbai::RbaiError| e.to_string())
}

fn parse_schedule(s: &str) -> Result<DeltaSchedule, String> {
    s.parse().map_err(|e: rbai::RbaiError| e.to_string())
}
