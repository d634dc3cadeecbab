//! The projected stochastic natural-gradient loop.
//!
//! One step mixes natural parameters, `θ₊ = (1 − η)θ + η·g`, checks that
//! `θ₊` is still a valid natural parameter, maps it back to expectation
//! coordinates and projects onto the constraint set.

pub mod schedule;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use schedule::{schedule_values, BatchSchedule, Schedule, StepSchedule};

use crate::error::{NgviError, Result};
use crate::estimators::{EstimatorKind, GradientEstimate};
use crate::expfam::{bregman_dual, check_same_family, exp_to_nat, nat_to_exp, negative_entropy, sample, Block,
    ExpParam, Family, FamilyKind, MomentParam, NatParam};
use crate::models::TargetModel;
use crate::projections::{project, ConstraintSet};

const OPT_STREAM: u64 = 0;
const ELBO_STREAM: u64 = 1;
const INIT_STREAM: u64 = 2;

/// One iteration: `project(∇A((1 − η)∇A*(ω) + η·g), c)`.
pub fn ngvi_step(omega: &ExpParam, eta: f64, g: &GradientEstimate, c: &ConstraintSet) -> Result<ExpParam> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(NgviError::InvalidArgument(format!("eta must lie in (0, 1], got {eta}")));
    }
    if g.value.family() != omega.family() {
        return Err(NgviError::WrongFamily("gradient estimate layout differs from the iterate's family".into()));
    }
    let theta = exp_to_nat(omega)?;
    let coords = theta.coords().lin_comb(1.0 - eta, &g.value, eta);
    let plus = NatParam::new(coords).map_err(|e| match e {
        NgviError::DomainViolation(msg) => NgviError::WellPosednessViolated(msg),
        other => other,
    })?;
    let omega_plus = nat_to_exp(&plus).map_err(|e| match e {
        NgviError::DomainViolation(msg) => NgviError::WellPosednessViolated(msg),
        other => other,
    })?;
    project(&omega_plus, c)
}

/// `d_{A*}(ω_*, ω)`, the divergence tracked in the convergence bounds.
pub fn bregman_to_optimum(omega: &ExpParam, omega_star: &ExpParam) -> Result<f64> {
    bregman_dual(omega_star, omega)
}

/// Monte Carlo ELBO: `(1/n) Σ log π̃(X_i) − A*(ω)`, `X_i ~ q_ω`.
pub fn elbo_mc<R: Rng + ?Sized>(model: &TargetModel, omega: &ExpParam, n_samples: usize, rng: &mut R) -> Result<f64> {
    if n_samples == 0 {
        return Err(NgviError::InvalidArgument("n_samples must be at least 1".into()));
    }
    let xs = sample(omega, n_samples, rng);
    let v = model.log_density_sum(&xs)? / n_samples as f64 - negative_entropy(omega);
    if !v.is_finite() {
        return Err(NgviError::NonFiniteValue("ELBO".into()));
    }
    Ok(v)
}

fn default_stride() -> usize {
    1
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElboSpec {
    pub n_samples: usize,
}

/// Which metrics to record, and how often.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metrics {
    #[serde(default)]
    pub bregman: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elbo: Option<ElboSpec>,
    /// Record metrics every `metric_stride` iterations (and at the last).
    #[serde(default = "default_stride")]
    pub metric_stride: usize,
}

impl Default for Metrics {
    fn default() -> Self {
        Metrics { bregman: false, elbo: None, metric_stride: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TracePoint {
    /// 0 is the initial point; `t + 1` is the iterate after step `t`.
    pub iter: usize,
    /// Step size and batch size of the step that produced this iterate.
    pub eta: Option<f64>,
    pub batch: Option<usize>,
    /// Samples or data points consumed so far.
    pub budget: u64,
    pub bregman: Option<f64>,
    pub elbo: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    /// Step `t` produced an invalid natural parameter.
    WellPosednessViolated { t: usize },
    /// Step `t` produced a non-finite value.
    NonFinite { t: usize },
}

#[derive(Clone, Debug)]
pub struct RunTrace {
    pub seed: u64,
    pub points: Vec<TracePoint>,
    pub status: RunStatus,
    pub last: ExpParam,
}

impl RunTrace {
    pub fn failed(&self) -> bool {
        self.status != RunStatus::Completed
    }
}

/// Everything a single run needs.
#[derive(Clone, Debug)]
pub struct RunSpec<'a> {
    pub model: &'a TargetModel,
    pub family: Family,
    pub constraint: ConstraintSet,
    pub schedule: Schedule,
    pub estimator: EstimatorKind,
    pub iterations: usize,
    pub metrics: Metrics,
    /// Override of the optimum used by the Bregman metric.
    pub optimum: Option<ExpParam>,
}

/// Cross-checks family, model, estimator, constraint and metrics.
pub fn check_compatibility(spec: &RunSpec<'_>) -> Result<Option<ExpParam>> {
    let bad = |msg: String| Err(NgviError::Config(msg));
    if spec.family.dim != spec.model.dim() {
        return bad(format!("family dimension {} differs from model dimension {}", spec.family.dim, spec.model.dim()));
    }
    if spec.iterations == 0 {
        return bad("iterations must be at least 1".into());
    }
    let errs = spec.schedule.validate();
    if let Some((_, msg)) = errs.first() {
        return bad(msg.clone());
    }
    spec.constraint.validate(&spec.family).map_err(|e| NgviError::Config(e.to_string()))?;
    spec.estimator.check(spec.model).map_err(|e| NgviError::Config(e.to_string()))?;
    if spec.estimator == EstimatorKind::Subsample && spec.model.prior().is_some_and(|p| p.mean().iter().any(|&m| m != 0.0)) {
        return bad("subsampling needs a centered prior".into());
    }
    if spec.metrics.metric_stride == 0 {
        return bad("metric_stride must be at least 1".into());
    }
    if let Some(e) = spec.metrics.elbo {
        if e.n_samples == 0 {
            return bad("metrics.elbo.n_samples must be at least 1".into());
        }
    }
    let optimum = match &spec.optimum {
        Some(o) => {
            check_same_family(&o.family(), &spec.family).map_err(|e| NgviError::Config(e.to_string()))?;
            Some(o.clone())
        }
        None if spec.metrics.bregman => match spec.model.optimum(spec.family, &spec.constraint)? {
            Some(o) => Some(o),
            None => {
                return bad(format!(
                    "the bregman metric needs a closed-form optimum, unavailable for {} with this family/constraint",
                    spec.model.name()
                ))
            }
        },
        None => None,
    };
    Ok(optimum)
}

/// Default starting point: mean uniform on `[-5, 5]^d` with covariance `10·I`
/// (conjugate models) or `0.5·I` (logistic); the prior for Student
/// regression. The centered kind starts at mean 0.
pub fn default_init(model: &TargetModel, family: Family, seed: u64) -> Result<ExpParam> {
    let d = family.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(INIT_STREAM);
    let (mean, var): (DVector<f64>, Option<f64>) = match model {
        TargetModel::StudentReg { prior, .. } => (prior.mean().clone(), None),
        TargetModel::Logistic { .. } => (DVector::from_fn(d, |_, _| rng.random_range(-5.0..=5.0)), Some(0.5)),
        _ => (DVector::from_fn(d, |_, _| rng.random_range(-5.0..=5.0)), Some(10.0)),
    };
    let cov_full = match (var, model) {
        (Some(v), _) => DMatrix::identity(d, d) * v,
        (None, TargetModel::StudentReg { prior, .. }) => prior.cov().clone(),
        (None, _) => unreachable!(),
    };
    init_from_moments(family, mean, cov_full)
}

/// Member of `family` with the given mean and covariance, keeping the
/// diagonal of the covariance for the diagonal kinds (and a zero mean for
/// the centered kind).
pub fn init_from_moments(family: Family, mean: DVector<f64>, cov: DMatrix<f64>) -> Result<ExpParam> {
    match family.kind {
        FamilyKind::GaussianFull => ExpParam::from_mean_cov(family, mean, Block::Full(cov)),
        FamilyKind::GaussianDiag => ExpParam::from_mean_cov(family, mean, Block::Diag(cov.diagonal())),
        FamilyKind::GaussianDiagCentered => {
            ExpParam::from_mean_cov(family, DVector::zeros(family.dim), Block::Diag(cov.diagonal()))
        }
    }
}

/// Converts a user-supplied starting point to `family`.
pub fn init_from_param(family: Family, m: &MomentParam) -> Result<ExpParam> {
    if m.mu.len() != family.dim {
        return Err(NgviError::DimensionMismatch { expected: family.dim, got: m.mu.len() });
    }
    let cov = m.sigma.to_matrix();
    if family.is_diagonal() && matches!(m.sigma, Block::Full(_)) {
        let mut off = cov.clone();
        off.fill_diagonal(0.0);
        if off.iter().any(|&x| x != 0.0) {
            return Err(NgviError::WrongFamily("initial covariance must be diagonal for a diagonal family".into()));
        }
    }
    if family.kind == FamilyKind::GaussianDiagCentered && m.mu.iter().any(|&x| x != 0.0) {
        return Err(NgviError::WrongFamily("initial mean must be zero for the centered family".into()));
    }
    init_from_moments(family, m.mu.clone(), cov)
}

/// Runs the loop from `omega0` for `spec.iterations` steps.
///
/// Guard failures end the run early with the failure recorded in the
/// returned trace. Inconsistent settings are reported as `Config` errors
/// before the first step.
pub fn run(spec: &RunSpec<'_>, omega0: &ExpParam, seed: u64) -> Result<RunTrace> {
    let optimum = check_compatibility(spec)?;
    if omega0.family() != spec.family {
        return Err(NgviError::Config("initial point is not a member of the run's family".into()));
    }
    let mut omega = project(omega0, &spec.constraint)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(OPT_STREAM);
    let mut elbo_rng = ChaCha8Rng::seed_from_u64(seed);
    elbo_rng.set_stream(ELBO_STREAM);

    let record = |omega: &ExpParam, iter: usize, elbo_rng: &mut ChaCha8Rng| -> Result<(Option<f64>, Option<f64>)> {
        let due = iter.is_multiple_of(spec.metrics.metric_stride) || iter == spec.iterations;
        if !due {
            return Ok((None, None));
        }
        let b = match &optimum {
            Some(star) => Some(bregman_to_optimum(omega, star)?),
            None => None,
        };
        let e = match spec.metrics.elbo {
            Some(ElboSpec { n_samples }) => Some(elbo_mc(spec.model, omega, n_samples, elbo_rng)?),
            None => None,
        };
        Ok((b, e))
    };

    let (bregman, elbo) = record(&omega, 0, &mut elbo_rng)?;
    let mut points = vec![TracePoint { iter: 0, eta: None, batch: None, budget: 0, bregman, elbo }];
    let mut budget: u64 = 0;
    let mut status = RunStatus::Completed;

    for t in 0..spec.iterations {
        let (eta, n) = schedule_values(&spec.schedule, t);
        let next = spec
            .estimator
            .estimate(spec.model, &omega, n, &mut rng)
            .and_then(|g| {
                budget += n as u64;
                ngvi_step(&omega, eta, &g, &spec.constraint)
            })
            .and_then(|w| {
                let m = record(&w, t + 1, &mut elbo_rng)?;
                Ok((w, m))
            });
        match next {
            Ok((w, (bregman, elbo))) => {
                omega = w;
                points.push(TracePoint { iter: t + 1, eta: Some(eta), batch: Some(n), budget, bregman, elbo });
            }
            Err(NgviError::WellPosednessViolated(_)) | Err(NgviError::DomainViolation(_)) => {
                status = RunStatus::WellPosednessViolated { t };
                break;
            }
            Err(NgviError::NonFiniteValue(_)) => {
                status = RunStatus::NonFinite { t };
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(RunTrace { seed, points, status, last: omega })
}
