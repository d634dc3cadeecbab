//! Experiment plumbing: configuration, seeded multi-run execution, result
//! files, aggregation over runs and the command-line front end.

pub mod aggregate;
pub mod cli;
pub mod experiment;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use aggregate::{aggregate, fit_log_linear_slope, fit_loglog_slope, read_results, Abscissa, AggregateRow,
    AggregateSeries, MetricTrace, Statistic};
pub use experiment::{run_experiment, ExperimentOutput, Manifest, RunOptions};

use crate::error::{NgviError, Result};
use crate::estimators::EstimatorKind;
use crate::expfam::{FamilyKind, MomentParam};
use crate::linalg::Block;
use crate::models::config::ModelConfig;
use crate::optimizer::{Metrics, Schedule};
use crate::projections::ConstraintSet;

fn one() -> usize {
    1
}

/// One experiment: a model, a variational family and an optimizer setting,
/// repeated over `runs` seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub family: FamilyKind,
    pub model: ModelConfig,
    #[serde(flatten)]
    pub estimator: EstimatorKind,
    #[serde(flatten)]
    pub projection: ProjectionSpec,
    pub schedule: Schedule,
    pub iterations: usize,
    #[serde(default = "one")]
    pub runs: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub metrics: Metrics,
    /// Fixed starting point for every run instead of the seeded default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<MomentParam>,
    /// Optimum for the Bregman metric when no closed form is available.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimum: Option<MomentParam>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionKind {
    #[default]
    None,
    EigenClip,
    NonnegMean,
}

/// Top-level `projection` key plus the eigen-clip bounds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ProjectionSpec {
    #[serde(default)]
    pub projection: ProjectionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
}

impl ProjectionSpec {
    pub fn from_constraint(c: ConstraintSet) -> ProjectionSpec {
        match c {
            ConstraintSet::Unconstrained => ProjectionSpec::default(),
            ConstraintSet::EigenClip { alpha, beta } => {
                ProjectionSpec { projection: ProjectionKind::EigenClip, alpha: Some(alpha), beta: Some(beta) }
            }
            ConstraintSet::NonNegativeMean => {
                ProjectionSpec { projection: ProjectionKind::NonnegMean, alpha: None, beta: None }
            }
        }
    }

    pub fn constraint(&self) -> std::result::Result<ConstraintSet, String> {
        match self.projection {
            ProjectionKind::None => Ok(ConstraintSet::Unconstrained),
            ProjectionKind::NonnegMean => Ok(ConstraintSet::NonNegativeMean),
            ProjectionKind::EigenClip => match (self.alpha, self.beta) {
                (Some(alpha), Some(beta)) => Ok(ConstraintSet::EigenClip { alpha, beta }),
                _ => Err("eigen_clip needs both alpha and beta".into()),
            },
        }
    }
}

/// A violated config constraint and where it was found.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValidationError {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for ValidationError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

impl ExperimentConfig {
    /// The constraint set; call after [`validate`].
    pub fn constraint(&self) -> Result<ConstraintSet> {
        self.projection.constraint().map_err(NgviError::Config)
    }

    pub fn from_json(text: &str) -> Result<ExperimentConfig> {
        serde_json::from_str(text).map_err(|e| NgviError::Parse {
            row: e.line(),
            column: e.column().to_string(),
            message: e.to_string(),
        })
    }

    pub fn from_value(value: serde_json::Value) -> Result<ExperimentConfig> {
        serde_json::from_value(value).map_err(|e| NgviError::Parse { row: 0, column: String::new(), message: e.to_string() })
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| NgviError::io(path, e))?;
        ExperimentConfig::from_json(&text)
    }

    pub fn to_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

/// Parses `text` and checks it; a malformed document is an error, a
/// well-formed but invalid one yields a non-empty list.
pub fn validate_str(text: &str) -> Result<Vec<ValidationError>> {
    Ok(validate(&ExperimentConfig::from_json(text)?))
}

/// Every violated constraint of `config`, each with its field path.
pub fn validate(config: &ExperimentConfig) -> Vec<ValidationError> {
    let mut errors = Vec::new();
    let mut push = |path: &str, message: String| errors.push(ValidationError { path: path.into(), message });

    if config.runs == 0 {
        push("runs", "must be at least 1".into());
    }
    if config.iterations == 0 {
        push("iterations", "must be at least 1".into());
    }
    if let Err((path, msg)) = config.model.validate() {
        push(&path, msg);
    }
    for (path, msg) in config.schedule.validate() {
        push(&format!("schedule.{path}"), msg);
    }

    let model = &config.model;
    let conjugate = matches!(model, ModelConfig::Gaussian { .. } | ModelConfig::Blr { .. });
    match config.estimator {
        EstimatorKind::Subsample if !matches!(model, ModelConfig::Blr { .. }) => push(
            "estimator",
            "subsample needs a finite-sum model with closed-form per-datum terms (blr)".into(),
        ),
        EstimatorKind::Exact if !conjugate => {
            push("estimator", "exact needs a conjugate model (gaussian or blr)".into())
        }
        _ => {}
    }
    let constraint = match config.projection.constraint() {
        Ok(c) => c,
        Err(msg) => {
            push("projection", msg);
            ConstraintSet::Unconstrained
        }
    };
    match constraint {
        ConstraintSet::Unconstrained => {}
        ConstraintSet::EigenClip { alpha, beta } => {
            if !(alpha.is_finite() && beta.is_finite() && alpha > 0.0 && alpha < beta) {
                push("projection", format!("eigen_clip requires 0 < alpha < beta, got alpha={alpha}, beta={beta}"));
            }
        }
        ConstraintSet::NonNegativeMean => {
            if config.family != FamilyKind::GaussianDiag {
                push("projection", "nonneg_mean applies only to the diagonal Gaussian family".into());
            }
        }
    }

    let m = &config.metrics;
    if m.metric_stride == 0 {
        push("metrics.metric_stride", "must be at least 1".into());
    }
    if m.elbo.is_some_and(|e| e.n_samples == 0) {
        push("metrics.elbo.n_samples", "must be at least 1".into());
    }
    if m.bregman && config.optimum.is_none() {
        if !conjugate {
            push("metrics.bregman", "needs a conjugate model or an explicit optimum".into());
        } else if config.family == FamilyKind::GaussianDiag && constraint == ConstraintSet::NonNegativeMean {
            push("metrics.bregman", "no closed-form optimum under nonneg_mean; supply one".into());
        }
    }
    if !m.bregman && m.elbo.is_none() {
        push("metrics", "record at least one of bregman and elbo".into());
    }

    let dim = model.dim_hint();
    for (path, param) in [("init", &config.init), ("optimum", &config.optimum)] {
        let Some(p) = param else { continue };
        if let Some(d) = dim {
            if p.dim() != d {
                push(path, format!("dimension {} differs from the model dimension {d}", p.dim()));
            }
        }
        if config.family != FamilyKind::GaussianFull {
            if let Block::Full(s) = &p.sigma {
                let off_diag = (0..s.nrows()).any(|i| (0..s.ncols()).any(|j| i != j && s[(i, j)] != 0.0));
                if off_diag {
                    push(path, "covariance must be diagonal for a diagonal family".into());
                }
            }
        }
        if config.family == FamilyKind::GaussianDiagCentered && p.mu.iter().any(|&x| x != 0.0) {
            push(path, "mean must be zero for the centered family".into());
        }
    }
    errors
}

#[cfg(test)]
mod tests;
