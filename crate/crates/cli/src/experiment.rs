//! Strategy × instance sweeps with seeded replications.
//!
//! Every (sweep value, strategy, replication) triple is an independent job. Jobs
//! run on a worker pool, but results are collected in job order (cell, then
//! replication), so the CSV is identical for any number of workers.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use rbai::environments::{make_irrelevant_dims, make_unit_sphere, PRNG_ID};
use rbai::{run_strategy, Instance, RbaiError, RunResult, Strategy};
use serde::Serialize;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::{io_err, CliError, CliResult};

pub const CSV_HEADER: [&str; 12] = [
    "strategy",
    "experiment",
    "d",
    "n_arms",
    "n_y",
    "seed",
    "delta",
    "eps",
    "total_pulls",
    "phases",
    "correct",
    "aborted",
];

pub const RESULTS_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const TRACES_FILE: &str = "traces.jsonl";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResultRow {
    pub strategy: Strategy,
    pub experiment: ExperimentKind,
    pub d: usize,
    pub n_arms: usize,
    pub n_y: usize,
    pub seed: u64,
    pub delta: f64,
    pub eps: f64,
    pub total_pulls: u64,
    pub phases: usize,
    /// False for aborted runs: they never returned an answer.
    pub correct: bool,
    pub aborted: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct TraceRecord {
    pub sweep_value: usize,
    pub seed: u64,
    pub aborted: bool,
    pub result: RunResult,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellSummary {
    pub strategy: Strategy,
    pub sweep_value: usize,
    pub d: usize,
    pub n_arms: usize,
    pub n_y: usize,
    pub runs: usize,
    pub mean_pulls: f64,
    pub median_pulls: f64,
    pub std_pulls: f64,
    pub correct_rate: f64,
    pub aborted: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub prng: &'static str,
    pub config: ExperimentConfig,
    pub cells: Vec<CellSummary>,
}

#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    pub traces: Vec<TraceRecord>,
    pub summary: Summary,
}

struct Cell {
    value: usize,
    instance: Instance,
    n_y: usize,
}

fn build_cells(config: &ExperimentConfig) -> CliResult<Vec<Cell>> {
    let from_file = match (config.experiment, &config.instance) {
        (ExperimentKind::FromFile, Some(path)) => Some(load_instance(path)?),
        _ => None,
    };
    config
        .sweep
        .iter()
        .map(|&value| {
            let (instance, n_y) = match config.experiment {
                ExperimentKind::IrrelevantDims => (make_irrelevant_dims(value, config.n_y)?, config.n_y),
                ExperimentKind::UnitSphere => {
                    let seed = config.instance_seed.wrapping_add(value as u64);
                    let inst = make_unit_sphere(config.dim, value, config.n_y, config.alpha, seed)?;
                    (inst, config.n_y)
                }
                ExperimentKind::FromFile => {
                    let inst = from_file.clone().expect("validated");
                    let n_y = inst.adversaries().iter().map(|a| a.actions.len()).max().unwrap_or(0);
                    (inst, n_y)
                }
            };
            Ok(Cell { value, instance, n_y })
        })
        .collect()
}

pub fn load_instance(path: &Path) -> CliResult<Instance> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    Ok(serde_json::from_str(&text)?)
}

/// Runs every job of `config` without touching the filesystem.
pub fn execute(config: &ExperimentConfig) -> CliResult<ExperimentOutput> {
    config.validate()?;
    let cells = build_cells(config)?;
    let jobs: Vec<(usize, Strategy, u64)> = (0..cells.len())
        .flat_map(|c| {
            config
                .strategies
                .iter()
                .flat_map(move |&s| (0..config.replications).map(move |r| (c, s, r)))
        })
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
    let outcomes: Vec<(RunResult, bool)> = pool.install(|| {
        jobs.par_iter()
            .map(|&(c, strategy, r)| {
                let seed = config.base_seed.wrapping_add(r);
                match run_strategy(strategy, &cells[c].instance, &config.strategy_config(seed)) {
                    Ok(result) => Ok((result, false)),
                    Err(RbaiError::AbortedBudget(partial)) => Ok((*partial, true)),
                    Err(e) => Err(CliError::from(e)),
                }
            })
            .collect::<CliResult<Vec<_>>>()
    })?;

    let mut rows = Vec::with_capacity(jobs.len());
    let mut traces = Vec::with_capacity(jobs.len());
    for (&(c, strategy, r), (result, aborted)) in jobs.iter().zip(outcomes) {
        let cell = &cells[c];
        let seed = config.base_seed.wrapping_add(r);
        rows.push(ResultRow {
            strategy,
            experiment: config.experiment,
            d: cell.instance.dim(),
            n_arms: cell.instance.n_arms(),
            n_y: cell.n_y,
            seed,
            delta: config.delta,
            eps: config.eps,
            total_pulls: result.total_pulls,
            phases: result.phases.len(),
            correct: result.correct && !aborted,
            aborted,
        });
        traces.push(TraceRecord { sweep_value: cell.value, seed, aborted, result });
    }

    let per_cell = config.replications as usize;
    let cells_summary = rows
        .chunks(per_cell)
        .zip(jobs.chunks(per_cell))
        .map(|(chunk, job)| summarize(chunk, cells[job[0].0].value))
        .collect();
    Ok(ExperimentOutput {
        rows,
        traces,
        summary: Summary { prng: PRNG_ID, config: config.clone(), cells: cells_summary },
    })
}

fn summarize(rows: &[ResultRow], sweep_value: usize) -> CellSummary {
    let mut pulls: Vec<f64> = rows.iter().map(|r| r.total_pulls as f64).collect();
    pulls.sort_by(f64::total_cmp);
    let n = pulls.len();
    let mean = pulls.iter().sum::<f64>() / n as f64;
    let var = if n > 1 {
        pulls.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    let first = &rows[0];
    CellSummary {
        strategy: first.strategy,
        sweep_value,
        d: first.d,
        n_arms: first.n_arms,
        n_y: first.n_y,
        runs: n,
        mean_pulls: mean,
        median_pulls: median_sorted(&pulls),
        std_pulls: var.sqrt(),
        correct_rate: rows.iter().filter(|r| r.correct).count() as f64 / n as f64,
        aborted: rows.iter().filter(|r| r.aborted).count(),
    }
}

/// Median of an ascending slice; the mean of the two middle values for even lengths.
pub fn median_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Writes the results CSV. The first line is a `# generated` timestamp comment;
/// everything after it depends only on the config.
pub fn write_csv(rows: &[ResultRow], path: &Path) -> CliResult<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    writeln!(out, "# generated {stamp}").map_err(io_err(path))?;
    let mut writer = csv::Writer::from_writer(out);
    if rows.is_empty() {
        writer.write_record(CSV_HEADER)?;
    }
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush().map_err(io_err(path))?;
    Ok(())
}

pub fn write_outputs(output: &ExperimentOutput, out_dir: &Path) -> CliResult<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let csv_path = out_dir.join(RESULTS_FILE);
    write_csv(&output.rows, &csv_path)?;

    let summary_path = out_dir.join(SUMMARY_FILE);
    let text = serde_json::to_string_pretty(&output.summary)?;
    std::fs::write(&summary_path, text + "\n").map_err(io_err(&summary_path))?;

    let traces_path = out_dir.join(TRACES_FILE);
    let mut out = BufWriter::new(File::create(&traces_path).map_err(io_err(&traces_path))?);
    for trace in &output.traces {
        serde_json::to_writer(&mut out, trace)?;
        out.write_all(b"\n").map_err(io_err(&traces_path))?;
    }
    out.flush().map_err(io_err(&traces_path))?;
    Ok(vec![csv_path, summary_path, traces_path])
}

pub fn run_experiment(config: &ExperimentConfig) -> CliResult<ExperimentOutput> {
    let output = execute(config)?;
    write_outputs(&output, &config.out_dir)?;
    Ok(output)
}
