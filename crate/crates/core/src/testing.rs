//! Random generators for interior parameters, shared by unit tests and the
//! acceptance suite.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::expfam::{Block, ExpParam, Family, FamilyKind};

/// Random SPD matrix `AAᵀ/d + 0.2·I` with standard normal `A`.
pub fn random_spd<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DMatrix<f64> {
    let a = DMatrix::<f64>::from_fn(d, d, |_, _| rng.sample(StandardNormal));
    (&a * a.transpose()) / d as f64 + DMatrix::identity(d, d) * 0.2
}

/// Random member of `family` with mean uniform on `[-2, 2]^d`.
pub fn random_exp<R: Rng + ?Sized>(family: Family, rng: &mut R) -> ExpParam {
    let d = family.dim;
    let mean = match family.kind {
        FamilyKind::GaussianDiagCentered => DVector::zeros(d),
        _ => DVector::from_fn(d, |_, _| rng.random_range(-2.0..2.0)),
    };
    let cov = match family.kind {
        FamilyKind::GaussianFull => Block::Full(random_spd(d, rng)),
        _ => Block::Diag(DVector::from_fn(d, |_, _| rng.random_range(0.2..3.0))),
    };
    ExpParam::from_mean_cov(family, mean, cov).expect("generated parameter is interior")
}

pub const ALL_KINDS: [FamilyKind; 3] =
    [FamilyKind::GaussianFull, FamilyKind::GaussianDiag, FamilyKind::GaussianDiagCentered];
