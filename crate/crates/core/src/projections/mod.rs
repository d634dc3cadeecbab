//! Bregman projections onto constraint sets in the geometry of `A*`.
//!
//! Both supported sets admit closed forms:
//!
//! * `EigenClip { alpha, beta }`: `{(μ, Σ + μμᵀ) : αI ≼ Σ ≼ βI}`. The
//!   projection keeps the mean and replaces every eigenvalue of `Σ` outside
//!   `[α, β]` by the nearest bound, keeping the eigenvectors. For the diagonal
//!   kinds the same rule acts componentwise on the variances (an immediate
//!   extension of the full-covariance result, not a separate derivation).
//! * `NonNegativeMean` (diagonal Gaussians): `{μ ≥ 0}`. The projection clips
//!   the mean at zero and keeps the variances.

pub mod oracle;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{NgviError, Result};
use crate::expfam::{Block, ExpParam, Family, FamilyKind};

/// Eigenvalues within this relative distance of a bound count as on it.
const SNAP: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "projection", rename_all = "snake_case")]
pub enum ConstraintSet {
    #[default]
    #[serde(rename = "none")]
    Unconstrained,
    EigenClip {
        alpha: f64,
        beta: f64,
    },
    #[serde(rename = "nonneg_mean")]
    NonNegativeMean,
}

impl ConstraintSet {
    /// Checks the set's own parameters and that it applies to `family`.
    pub fn validate(&self, family: &Family) -> Result<()> {
        match *self {
            ConstraintSet::Unconstrained => Ok(()),
            ConstraintSet::EigenClip { alpha, beta } => {
                if !(alpha.is_finite() && beta.is_finite() && alpha > 0.0 && alpha < beta) {
                    return Err(NgviError::InvalidConstraint(format!(
                        "eigen_clip requires 0 < alpha < beta, got alpha={alpha}, beta={beta}"
                    )));
                }
                Ok(())
            }
            ConstraintSet::NonNegativeMean => {
                if family.kind != FamilyKind::GaussianDiag {
                    return Err(NgviError::WrongFamily(
                        "nonneg_mean applies only to the diagonal Gaussian family".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// Membership predicate, with the same snapping tolerance as `project`.
    pub fn contains(&self, omega: &ExpParam) -> bool {
        match *self {
            ConstraintSet::Unconstrained => true,
            ConstraintSet::EigenClip { alpha, beta } => {
                spectrum(&omega.covariance()).iter().all(|&l| within(l, alpha, beta))
            }
            ConstraintSet::NonNegativeMean => omega.mean().iter().all(|&m| m >= 0.0),
        }
    }
}

fn within(l: f64, alpha: f64, beta: f64) -> bool {
    l >= alpha - SNAP * alpha.max(1.0) && l <= beta + SNAP * beta.max(1.0)
}

fn clip(l: f64, alpha: f64, beta: f64) -> f64 {
    if within(l, alpha, beta) {
        l.clamp(alpha, beta)
    } else if l < alpha {
        alpha
    } else {
        beta
    }
}

fn spectrum(cov: &Block) -> DVector<f64> {
    match cov {
        Block::Full(s) => SymmetricEigen::new(s.clone()).eigenvalues,
        Block::Diag(v) => v.clone(),
    }
}

/// `proj_C^{A*}(ω) = argmin_{ω' ∈ C} d_{A*}(ω', ω)` in closed form.
pub fn project(omega: &ExpParam, c: &ConstraintSet) -> Result<ExpParam> {
    let family = omega.family();
    c.validate(&family)?;
    match *c {
        ConstraintSet::Unconstrained => Ok(omega.clone()),
        ConstraintSet::EigenClip { alpha, beta } => {
            if c.contains(omega) {
                return Ok(omega.clone());
            }
            let cov = match omega.covariance() {
                Block::Full(s) => {
                    let eig = SymmetricEigen::new(s);
                    let clipped = eig.eigenvalues.map(|l| clip(l, alpha, beta));
                    let q = &eig.eigenvectors;
                    Block::Full(q * DMatrix::from_diagonal(&clipped) * q.transpose())
                }
                Block::Diag(v) => Block::Diag(v.map(|l| clip(l, alpha, beta))),
            };
            ExpParam::from_mean_cov(family, omega.mean().clone(), cov)
        }
        ConstraintSet::NonNegativeMean => {
            if c.contains(omega) {
                return Ok(omega.clone());
            }
            let mean = omega.mean().map(|m| m.max(0.0));
            ExpParam::from_mean_cov(family, mean, omega.covariance())
        }
    }
}
