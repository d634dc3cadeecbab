//! Command-line front end. Exit codes: 0 success, 1 invalid configuration,
//! 2 runtime failure (usage errors also exit 2).

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::Value;

use super::aggregate::{aggregate, read_results, Abscissa, Statistic};
use super::experiment::{run_experiment, RunOptions, RESULTS_FILE};
use super::{validate, ExperimentConfig};
use crate::error::{NgviError, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "ngvi", version, about = "Projected stochastic natural-gradient VI experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum StatArg {
    Mean,
    MedianIqr,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum XArg {
    Iteration,
    Budget,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check a config file and list every problem found.
    Validate { config: PathBuf },
    /// Run an experiment and write results.csv and manifest.json.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Base seed; run r uses seed + r.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        iters: Option<usize>,
        /// Worker threads (NGVI_JOBS overrides).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Summarize results.csv of a run directory over runs.
    Aggregate {
        dir: PathBuf,
        #[arg(long, value_enum, default_value = "mean")]
        stat: StatArg,
        #[arg(long, value_enum, default_value = "iteration")]
        x: XArg,
        #[arg(long)]
        out: PathBuf,
        /// bregman or elbo; defaults to bregman when present.
        #[arg(long)]
        metric: Option<String>,
    },
    /// Run one child experiment per point of a parameter grid.
    Sweep {
        config: PathBuf,
        /// JSON object mapping dotted config keys to lists of values.
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        jobs: Option<usize>,
    },
}

enum Failure {
    Invalid(String),
    Runtime(String),
}

impl From<NgviError> for Failure {
    fn from(e: NgviError) -> Failure {
        match e {
            NgviError::Parse { .. } | NgviError::Config(_) => Failure::Invalid(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

/// Parses `argv` (program name first) and runs the subcommand.
pub fn cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Cli::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_RUNTIME } else { EXIT_OK };
        }
    };
    match dispatch(args.command) {
        Ok(()) => EXIT_OK,
        Err(Failure::Invalid(msg)) => {
            eprintln!("invalid configuration: {msg}");
            EXIT_INVALID
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            EXIT_RUNTIME
        }
    }
}

fn base_dir(config: &Path) -> Option<PathBuf> {
    config.parent().map(Path::to_path_buf)
}

fn check(config: &ExperimentConfig) -> std::result::Result<(), Failure> {
    let errors = validate(config);
    if errors.is_empty() {
        return Ok(());
    }
    for e in &errors {
        eprintln!("{e}");
    }
    Err(Failure::Invalid(format!("{} problem(s) found", errors.len())))
}

fn dispatch(command: Command) -> std::result::Result<(), Failure> {
    match command {
        Command::Validate { config } => {
            let cfg = ExperimentConfig::load(&config).map_err(|e| match e {
                NgviError::Io { .. } => Failure::Invalid(e.to_string()),
                other => other.into(),
            })?;
            check(&cfg)?;
            println!("{}: ok", config.display());
            Ok(())
        }
        Command::Run { config, out, seed, runs, iters, jobs } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.base_seed = s;
            }
            if let Some(r) = runs {
                cfg.runs = r;
            }
            if let Some(t) = iters {
                cfg.iterations = t;
            }
            if out.is_some() {
                cfg.output = out;
            }
            if cfg.output.is_none() {
                return Err(Failure::Invalid("no output directory (use --out or the output key)".into()));
            }
            check(&cfg)?;
            let result = run_experiment(&cfg, &RunOptions { jobs, base_dir: base_dir(&config) })?;
            let m = &result.manifest;
            println!(
                "{} runs, {} failed, {:.2}s -> {}",
                m.seeds.len(),
                m.failures,
                m.wall_time_secs,
                cfg.output.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
            );
            Ok(())
        }
        Command::Aggregate { dir, stat, x, out, metric } => {
            let results = dir.join(RESULTS_FILE);
            let metric = match metric {
                Some(m) => m,
                None => default_metric(&results)?,
            };
            let traces = read_results(&results, &metric)?;
            let abscissa = match x {
                XArg::Iteration => Abscissa::Iteration,
                XArg::Budget => Abscissa::Budget,
            };
            let statistic = match stat {
                StatArg::Mean => Statistic::Mean,
                StatArg::MedianIqr => Statistic::MedianIqr,
            };
            aggregate(&traces, abscissa, statistic)?.write_csv(&out)?;
            Ok(())
        }
        Command::Sweep { config, grid, out, jobs } => {
            let text = std::fs::read_to_string(&config).map_err(|e| NgviError::io(&config, e))?;
            let base: Value = serde_json::from_str(&text).map_err(|e| Failure::Invalid(e.to_string()))?;
            let grid_text = std::fs::read_to_string(&grid).map_err(|e| NgviError::io(&grid, e))?;
            let grid: Value = serde_json::from_str(&grid_text).map_err(|e| Failure::Invalid(e.to_string()))?;
            let root = match out {
                Some(o) => o,
                None => match base.get("output").and_then(Value::as_str) {
                    Some(o) => PathBuf::from(o),
                    None => return Err(Failure::Invalid("no output directory (use --out or the output key)".into())),
                },
            };
            let children = expand_grid(&base, &grid).map_err(|e| Failure::Invalid(e.to_string()))?;
            let mut configs = Vec::with_capacity(children.len());
            for (name, mut value) in children {
                let dir = root.join(&name);
                set_dotted(&mut value, "output", Value::String(dir.display().to_string()))
                    .map_err(|e| Failure::Invalid(e.to_string()))?;
                let cfg = ExperimentConfig::from_value(value)
                    .map_err(|e| Failure::Invalid(format!("{name}: {e}")))?;
                check(&cfg).map_err(|_| Failure::Invalid(format!("child {name} is invalid")))?;
                configs.push((name, cfg));
            }
            for (name, cfg) in configs {
                let result = run_experiment(&cfg, &RunOptions { jobs, base_dir: base_dir(&config) })?;
                println!("{name}: {} runs, {} failed", result.manifest.seeds.len(), result.manifest.failures);
            }
            Ok(())
        }
    }
}

fn default_metric(results: &Path) -> Result<String> {
    for metric in ["bregman", "elbo"] {
        if read_results(results, metric)?.iter().any(|t| !t.points.is_empty()) {
            return Ok(metric.to_string());
        }
    }
    Err(NgviError::EmptyInput(format!("{} records no metric", results.display())))
}

/// Sets `key` (dot-separated) in a JSON object, creating objects on the way.
pub fn set_dotted(doc: &mut Value, key: &str, value: Value) -> Result<()> {
    let mut node = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| NgviError::Config(format!("{key}: {} is not an object", parts[..i].join("."))))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("split yields at least one part")
}

fn label(v: &Value) -> String {
    let s = match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    };
    s.chars().map(|c| if c.is_ascii_alphanumeric() || "._-".contains(c) { c } else { '_' }).collect()
}

/// Cartesian product of the grid, as `(child name, config document)`
/// pairs in a fixed order (keys sorted, values in listed order).
pub fn expand_grid(base: &Value, grid: &Value) -> Result<Vec<(String, Value)>> {
    let grid = grid.as_object().ok_or_else(|| NgviError::Config("grid must be a JSON object".into()))?;
    let mut children = vec![(Vec::<String>::new(), base.clone())];
    for (key, values) in grid {
        let values = values
            .as_array()
            .filter(|v| !v.is_empty())
            .ok_or_else(|| NgviError::Config(format!("grid entry {key} must be a non-empty list")))?;
        let mut next = Vec::with_capacity(children.len() * values.len());
        for (names, doc) in &children {
            for v in values {
                let mut doc = doc.clone();
                set_dotted(&mut doc, key, v.clone())?;
                let mut names = names.clone();
                names.push(format!("{key}={}", label(v)));
                next.push((names, doc));
            }
        }
        children = next;
    }
    Ok(children.into_iter().enumerate().map(|(i, (names, doc))| (format!("{i:03}_{}", names.join("_")), doc)).collect())
}
