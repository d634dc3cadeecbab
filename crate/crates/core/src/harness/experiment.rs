//! Seeded multi-run execution and result files.

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{validate, ExperimentConfig};
use crate::error::{NgviError, Result};
use crate::expfam::{ExpParam, Family};
use crate::optimizer::{default_init, init_from_param, run, RunSpec, RunStatus, RunTrace};

pub const RESULTS_FILE: &str = "results.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const RESULTS_HEADER: [&str; 7] = ["run", "iter", "eta", "batch", "budget", "metric", "value"];

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Worker threads; `NGVI_JOBS` takes precedence, the default is the
    /// available parallelism.
    pub jobs: Option<usize>,
    /// Directory against which relative data paths are resolved.
    pub base_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub statuses: Vec<RunStatus>,
    pub failures: usize,
    pub wall_time_secs: f64,
    pub started_unix_secs: u64,
    pub jobs: usize,
}

#[derive(Debug)]
pub struct ExperimentOutput {
    pub traces: Vec<RunTrace>,
    pub manifest: Manifest,
}

fn resolve_jobs(requested: Option<usize>) -> usize {
    let from_env = std::env::var("NGVI_JOBS").ok().and_then(|v| v.trim().parse::<usize>().ok());
    from_env
        .or(requested)
        .filter(|&j| j > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

/// Runs `config.runs` independent runs with seeds `base_seed + r`.
///
/// When `config.output` is set, writes `results.csv` and `manifest.json`
/// into that directory.
pub fn run_experiment(config: &ExperimentConfig, opts: &RunOptions) -> Result<ExperimentOutput> {
    let errors = validate(config);
    if !errors.is_empty() {
        let msg: Vec<String> = errors.iter().map(|e| e.to_string()).collect();
        return Err(NgviError::Config(msg.join("; ")));
    }
    let started = Instant::now();
    let started_unix_secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);

    let model = config.model.build(opts.base_dir.as_deref())?;
    let family = Family::new(config.family, model.dim())?;
    let optimum = match &config.optimum {
        Some(m) => Some(ExpParam::from_moments(family, m)?),
        None => None,
    };
    let spec = RunSpec {
        model: &model,
        family,
        constraint: config.constraint()?,
        schedule: config.schedule,
        estimator: config.estimator,
        iterations: config.iterations,
        metrics: config.metrics,
        optimum,
    };
    let fixed_init = match &config.init {
        Some(m) => Some(init_from_param(family, m)?),
        None => None,
    };
    let seeds: Vec<u64> = (0..config.runs as u64).map(|r| config.base_seed + r).collect();

    let jobs = resolve_jobs(opts.jobs);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| NgviError::InvalidArgument(format!("thread pool: {e}")))?;
    let traces: Vec<RunTrace> = pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| {
                let omega0 = match &fixed_init {
                    Some(w) => w.clone(),
                    None => default_init(&model, family, seed)?,
                };
                run(&spec, &omega0, seed)
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let statuses: Vec<RunStatus> = traces.iter().map(|t| t.status).collect();
    let manifest = Manifest {
        config: config.to_value(),
        seeds,
        failures: statuses.iter().filter(|s| **s != RunStatus::Completed).count(),
        statuses,
        wall_time_secs: started.elapsed().as_secs_f64(),
        started_unix_secs,
        jobs,
    };
    if let Some(dir) = &config.output {
        write_outputs(dir, &traces, &manifest)?;
    }
    Ok(ExperimentOutput { traces, manifest })
}

fn opt_string<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes one row per (run, iteration, metric).
pub fn write_results(path: &Path, traces: &[RunTrace]) -> Result<()> {
    let csv_err = |e: csv::Error| NgviError::Schema(format!("writing {}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(RESULTS_HEADER).map_err(csv_err)?;
    for (run, trace) in traces.iter().enumerate() {
        for p in &trace.points {
            for (name, value) in [("bregman", p.bregman), ("elbo", p.elbo)] {
                let Some(v) = value else { continue };
                w.write_record([
                    run.to_string(),
                    p.iter.to_string(),
                    opt_string(p.eta),
                    opt_string(p.batch),
                    p.budget.to_string(),
                    name.to_string(),
                    v.to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
    }
    w.flush().map_err(|e| NgviError::io(path, e))
}

pub fn write_outputs(dir: &Path, traces: &[RunTrace], manifest: &Manifest) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| NgviError::io(dir, e))?;
    write_results(&dir.join(RESULTS_FILE), traces)?;
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    std::fs::write(&path, text + "\n").map_err(|e| NgviError::io(&path, e))
}
