//! Brute-force numerical Bregman projection, used to check the closed forms.
//!
//! Minimizes `ω' ↦ d_{A*}(ω', ω)` over `C` by projected gradient descent in the
//! moment parametrization `(μ', Σ')`, where the divergence is the Gaussian KL
//! `½(tr(Σ⁻¹Σ') + (μ−μ')ᵀΣ⁻¹(μ−μ') − d + logdet Σ − logdet Σ')`. Trial points
//! are made feasible by the Euclidean projection onto `C` in those coordinates
//! (spectral clipping of `Σ'`, clipping of `μ'` at zero) and the step shrinks
//! by backtracking. Intended for `d ≤ 3`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::ConstraintSet;
use crate::error::{NgviError, Result};
use crate::expfam::{Block, ExpParam, FamilyKind};
use crate::linalg::{symmetrize, SpdFactor};

const MAX_EVALUATIONS: usize = 100_000;

#[derive(Clone)]
struct Point {
    mu: DVector<f64>,
    cov: Block,
}

struct Problem<'a> {
    target_mu: &'a DVector<f64>,
    target_prec: DMatrix<f64>,
    target_logdet: f64,
    c: ConstraintSet,
    centered: bool,
}

impl Problem<'_> {
    fn objective(&self, p: &Point) -> Option<f64> {
        let s = p.cov.to_matrix();
        let f = SpdFactor::full(&s)?;
        let dm = self.target_mu - &p.mu;
        let d = dm.len() as f64;
        Some(0.5 * ((&self.target_prec * &s).trace() + dm.dot(&(&self.target_prec * &dm)) - d + self.target_logdet - f.logdet()))
    }

    fn gradient(&self, p: &Point) -> Point {
        let mu = if self.centered { DVector::zeros(p.mu.len()) } else { &self.target_prec * (&p.mu - self.target_mu) };
        let cov = match &p.cov {
            Block::Full(s) => {
                let inv = s.clone().try_inverse().expect("trial covariance is invertible");
                Block::Full(symmetrize(&((&self.target_prec - inv) * 0.5)))
            }
            Block::Diag(v) => Block::Diag(DVector::from_fn(v.len(), |i, _| 0.5 * (self.target_prec[(i, i)] - 1.0 / v[i]))),
        };
        Point { mu, cov }
    }

    fn feasible(&self, mut p: Point) -> Point {
        match self.c {
            ConstraintSet::Unconstrained => {}
            ConstraintSet::EigenClip { alpha, beta } => {
                p.cov = match p.cov {
                    Block::Full(s) => {
                        let eig = SymmetricEigen::new(symmetrize(&s));
                        let l = eig.eigenvalues.map(|x| x.clamp(alpha, beta));
                        Block::Full(&eig.eigenvectors * DMatrix::from_diagonal(&l) * eig.eigenvectors.transpose())
                    }
                    Block::Diag(v) => Block::Diag(v.map(|x| x.clamp(alpha, beta))),
                }
            }
            ConstraintSet::NonNegativeMean => p.mu = p.mu.map(|x| x.max(0.0)),
        }
        p
    }

    fn step(&self, p: &Point, g: &Point, t: f64) -> Point {
        let mu = if self.centered { p.mu.clone() } else { &p.mu - &g.mu * t };
        self.feasible(Point { mu, cov: p.cov.lin_comb(1.0, &g.cov, -t) })
    }
}

fn sq_dist(a: &Point, b: &Point) -> f64 {
    (&a.mu - &b.mu).norm_squared() + a.cov.lin_comb(1.0, &b.cov, -1.0).norm().powi(2)
}

/// Numerically minimizes `d_{A*}(·, omega)` over `c`, to gradient-mapping
/// norm `tol`.
pub fn project_oracle(omega: &ExpParam, c: &ConstraintSet, tol: f64) -> Result<ExpParam> {
    let family = omega.family();
    c.validate(&family)?;
    if family.dim > 3 {
        return Err(NgviError::InvalidArgument("project_oracle supports d <= 3".into()));
    }
    if *c == ConstraintSet::Unconstrained {
        return Ok(omega.clone());
    }
    let d = family.dim;
    let target_cov = omega.cov_factor();
    let problem = Problem {
        target_mu: omega.mean(),
        target_prec: target_cov.inverse().to_matrix(),
        target_logdet: target_cov.logdet(),
        c: *c,
        centered: family.kind == FamilyKind::GaussianDiagCentered,
    };

    // Start away from the answer: a feasible point unrelated to omega.
    let start_var = match *c {
        ConstraintSet::EigenClip { alpha, beta } => 0.5 * (alpha + beta),
        _ => 1.0,
    };
    let mu0 = if problem.centered { DVector::zeros(d) } else { omega.mean().map(|m| m.abs() + 1.0) };
    let cov0 = match family.kind {
        FamilyKind::GaussianFull => Block::Full(DMatrix::identity(d, d) * start_var),
        _ => Block::Diag(DVector::from_element(d, start_var)),
    };
    let mut x = problem.feasible(Point { mu: mu0, cov: cov0 });
    let mut fx = problem.objective(&x).expect("start point is interior");
    let mut evaluations = 1;
    let mut t = 1.0;
    let mut last_mapping = f64::INFINITY;

    while evaluations < MAX_EVALUATIONS {
        let g = problem.gradient(&x);
        t *= 2.0;
        let (next, fnext) = loop {
            let trial = problem.step(&x, &g, t);
            evaluations += 1;
            if let Some(ft) = problem.objective(&trial) {
                let dist = sq_dist(&trial, &x);
                // Sufficient decrease for a proximal-gradient step.
                let lin = g.mu.dot(&(&trial.mu - &x.mu)) + g.cov.dot(&trial.cov.lin_comb(1.0, &x.cov, -1.0));
                if ft <= fx + lin + dist / (2.0 * t) + 1e-15 * fx.abs() {
                    break (trial, ft);
                }
            }
            t *= 0.5;
            if t < 1e-300 || evaluations >= MAX_EVALUATIONS {
                return Err(NgviError::NoConvergence { evaluations, gap: last_mapping });
            }
        };
        last_mapping = sq_dist(&next, &x).sqrt() / t;
        x = next;
        fx = fnext;
        if last_mapping < tol {
            return ExpParam::from_mean_cov(family, x.mu, x.cov);
        }
    }
    Err(NgviError::NoConvergence { evaluations, gap: last_mapping })
}
