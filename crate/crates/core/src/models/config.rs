//! JSON description of a target model.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::data::{load_csv, synthetic_linear, synthetic_logistic, synthetic_student, Dataset};
use super::{synthetic_gaussian, GaussianPrior, TargetModel};
use crate::error::{NgviError, Result};

fn default_true() -> bool {
    true
}

fn default_prior_scale() -> f64 {
    5.0
}

fn default_noise_var() -> f64 {
    1.0
}

fn default_x_star() -> f64 {
    5.0
}

/// Seeded synthetic data of `m` rows and `d` covariates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticData {
    pub m: usize,
    pub d: usize,
    #[serde(default)]
    pub seed: u64,
    /// Common value of the true coefficients (logistic data only).
    #[serde(default = "default_x_star")]
    pub x_star: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DataSource {
    Csv {
        csv: PathBuf,
        response: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        covariates: Option<Vec<String>>,
        #[serde(default = "default_true")]
        standardize: bool,
    },
    Synthetic {
        synthetic: SyntheticData,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelConfig {
    Gaussian {
        dim: usize,
        kappa: f64,
        #[serde(default)]
        seed: u64,
    },
    Blr {
        #[serde(flatten)]
        data: DataSource,
        #[serde(default = "default_prior_scale")]
        prior_scale: f64,
        #[serde(default = "default_noise_var")]
        noise_var: f64,
    },
    Logistic {
        #[serde(flatten)]
        data: DataSource,
        #[serde(default = "default_prior_scale")]
        prior_scale: f64,
    },
    Student {
        dof: f64,
        #[serde(flatten)]
        data: DataSource,
        #[serde(default = "default_prior_scale")]
        prior_scale: f64,
        #[serde(default = "default_noise_var")]
        noise_var: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        prior_mean: Option<Vec<f64>>,
    },
}

impl ModelConfig {
    /// Builds the model, resolving relative CSV paths against `base`.
    pub fn build(&self, base: Option<&Path>) -> Result<TargetModel> {
        match self {
            ModelConfig::Gaussian { dim, kappa, seed } => synthetic_gaussian(*dim, *kappa, *seed),
            ModelConfig::Blr { data, prior_scale, noise_var } => {
                let data = load(data, base, Kind::Linear)?;
                let d = data.dim();
                TargetModel::blr(data, DMatrix::identity(d, d) * *prior_scale, *noise_var)
            }
            ModelConfig::Logistic { data, prior_scale } => {
                let data = load(data, base, Kind::Logistic)?;
                let d = data.dim();
                TargetModel::logistic(data, DMatrix::identity(d, d) * *prior_scale)
            }
            ModelConfig::Student { dof, data, prior_scale, noise_var, prior_mean } => {
                let data = load(data, base, Kind::Student(*dof))?;
                let d = data.dim();
                let mean = match prior_mean {
                    Some(m) => DVector::from_column_slice(m),
                    None => DVector::zeros(d),
                };
                let prior = GaussianPrior::new(mean, DMatrix::identity(d, d) * *prior_scale)?;
                TargetModel::student(data, prior, *noise_var, *dof)
            }
        }
    }

    pub fn dim_hint(&self) -> Option<usize> {
        match self {
            ModelConfig::Gaussian { dim, .. } => Some(*dim),
            ModelConfig::Blr { data, .. } | ModelConfig::Logistic { data, .. } | ModelConfig::Student { data, .. } => {
                match data {
                    DataSource::Synthetic { synthetic } => Some(synthetic.d),
                    DataSource::Csv { .. } => None,
                }
            }
        }
    }

    /// Checks parameter ranges without touching the filesystem.
    pub fn validate(&self) -> std::result::Result<(), (String, String)> {
        let err = |path: &str, msg: &str| Err((path.to_string(), msg.to_string()));
        let positive = |v: f64| v.is_finite() && v > 0.0;
        match self {
            ModelConfig::Gaussian { dim, kappa, .. } => {
                if *dim == 0 {
                    return err("model.dim", "must be at least 1");
                }
                if !(kappa.is_finite() && *kappa >= 1.0) {
                    return err("model.kappa", "must be >= 1");
                }
            }
            ModelConfig::Blr { data, prior_scale, noise_var } => {
                validate_data(data)?;
                if !positive(*prior_scale) {
                    return err("model.prior_scale", "must be positive");
                }
                if !positive(*noise_var) {
                    return err("model.noise_var", "must be positive");
                }
            }
            ModelConfig::Logistic { data, prior_scale } => {
                validate_data(data)?;
                if !positive(*prior_scale) {
                    return err("model.prior_scale", "must be positive");
                }
            }
            ModelConfig::Student { dof, data, prior_scale, noise_var, prior_mean } => {
                validate_data(data)?;
                if !positive(*dof) {
                    return err("model.dof", "must be positive");
                }
                if !positive(*prior_scale) {
                    return err("model.prior_scale", "must be positive");
                }
                if !positive(*noise_var) {
                    return err("model.noise_var", "must be positive");
                }
                if let (Some(m), DataSource::Synthetic { synthetic }) = (prior_mean, data) {
                    if m.len() != synthetic.d {
                        return err("model.prior_mean", "length must equal the number of covariates");
                    }
                }
            }
        }
        Ok(())
    }
}

fn validate_data(data: &DataSource) -> std::result::Result<(), (String, String)> {
    match data {
        DataSource::Synthetic { synthetic } => {
            if synthetic.m == 0 {
                return Err(("model.synthetic.m".into(), "must be at least 1".into()));
            }
            if synthetic.d == 0 {
                return Err(("model.synthetic.d".into(), "must be at least 1".into()));
            }
        }
        DataSource::Csv { response, .. } => {
            if response.is_empty() {
                return Err(("model.response".into(), "must name a column".into()));
            }
        }
    }
    Ok(())
}

enum Kind {
    Linear,
    Logistic,
    Student(f64),
}

fn load(source: &DataSource, base: Option<&Path>, kind: Kind) -> Result<Dataset> {
    match source {
        DataSource::Csv { csv, response, covariates, standardize } => {
            let path = match base {
                Some(b) if csv.is_relative() => b.join(csv),
                _ => csv.clone(),
            };
            load_csv(path, response, covariates.as_deref(), *standardize)
        }
        DataSource::Synthetic { synthetic: s } => {
            if s.m == 0 || s.d == 0 {
                return Err(NgviError::InvalidArgument("synthetic data needs m >= 1 and d >= 1".into()));
            }
            Ok(match kind {
                Kind::Linear => synthetic_linear(s.m, s.d, s.seed),
                Kind::Logistic => synthetic_logistic(s.m, s.d, s.x_star, s.seed),
                Kind::Student(dof) => synthetic_student(s.m, s.d, dof, s.seed),
            })
        }
    }
}
