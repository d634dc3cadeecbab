//! Estimators of `∇_ω E_{q_ω}[log π(X)]`, returned in natural-parameter
//! layout.

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{NgviError, Result};
use crate::expfam::{bregman_dual, exp_to_nat, nat_to_exp, quadratic_gradient, sample, Block, Coords, ExpParam,
    FamilyKind, NatParam};
use crate::models::TargetModel;

/// An element of the natural-parameter space (no domain requirement) and
/// the number of samples or data points it consumed.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientEstimate {
    pub value: Coords,
    pub n_used: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "estimator", rename_all = "snake_case")]
pub enum EstimatorKind {
    BonnetPrice,
    Subsample,
    Exact,
}

impl EstimatorKind {
    /// Whether the estimator can run on `model`.
    pub fn check(&self, model: &TargetModel) -> Result<()> {
        let caps = model.capabilities();
        match self {
            EstimatorKind::BonnetPrice if !caps.hessian => {
                Err(NgviError::ModelCapabilityMissing(format!("{} exposes no Hessian", model.name())))
            }
            EstimatorKind::Subsample if !matches!(model, TargetModel::BayesLinReg { .. }) => {
                Err(NgviError::ModelCapabilityMissing(format!(
                    "{} has no closed-form per-datum terms for subsampling",
                    model.name()
                )))
            }
            EstimatorKind::Exact if !caps.conjugate => {
                Err(NgviError::ModelCapabilityMissing(format!("{} has no exact gradient", model.name())))
            }
            _ => Ok(()),
        }
    }

    pub fn estimate<R: Rng + ?Sized>(
        &self,
        model: &TargetModel,
        omega: &ExpParam,
        n: usize,
        rng: &mut R,
    ) -> Result<GradientEstimate> {
        match self {
            EstimatorKind::BonnetPrice => bonnet_price(model, omega, n, rng),
            EstimatorKind::Subsample => subsample_gradient(model, omega, n, rng),
            EstimatorKind::Exact => exact_gradient(model, omega),
        }
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(NgviError::InvalidArgument("sample/batch size must be at least 1".into()));
    }
    Ok(())
}

fn finite(value: Coords, n_used: usize) -> Result<GradientEstimate> {
    if !value.is_finite() {
        return Err(NgviError::NonFiniteValue("gradient estimate".into()));
    }
    Ok(GradientEstimate { value, n_used })
}

/// Monte Carlo estimate from `n` draws of `q_ω`, using Bonnet's and Price's
/// identities: `g₁ = mean(∇log π − ∇²log π·μ)`, `g₂ = ½ mean(∇²log π)`.
/// The diagonal kinds keep only the Hessian diagonal, and `g₁` is corrected
/// by `diag(∇²log π)∘μ` accordingly.
pub fn bonnet_price<R: Rng + ?Sized>(
    model: &TargetModel,
    omega: &ExpParam,
    n: usize,
    rng: &mut R,
) -> Result<GradientEstimate> {
    check_n(n)?;
    EstimatorKind::BonnetPrice.check(model)?;
    if omega.dim() != model.dim() {
        return Err(NgviError::DimensionMismatch { expected: model.dim(), got: omega.dim() });
    }
    let xs = sample(omega, n, rng);
    let sums = model.batch_sums(&xs, false)?;
    let inv_n = 1.0 / n as f64;
    let grad = sums.grad * inv_n;
    let hess = sums.hess * inv_n;
    let mu = omega.mean();
    let value = match omega.family().kind {
        FamilyKind::GaussianFull => Coords { first: Some(&grad - &hess * mu), second: Block::Full(hess * 0.5) },
        FamilyKind::GaussianDiag => {
            let h = hess.diagonal();
            Coords { first: Some(&grad - h.component_mul(mu)), second: Block::Diag(h * 0.5) }
        }
        FamilyKind::GaussianDiagCentered => Coords { first: None, second: Block::Diag(hess.diagonal() * 0.5) },
    };
    finite(value, n)
}

/// `L₀ᵀθ₀ + (M/n) Σ_k θ_{y_{U_k}}(ω)` with `U_k` drawn uniformly with
/// replacement.
pub fn subsample_gradient<R: Rng + ?Sized>(
    model: &TargetModel,
    omega: &ExpParam,
    n: usize,
    rng: &mut R,
) -> Result<GradientEstimate> {
    check_n(n)?;
    EstimatorKind::Subsample.check(model)?;
    let m = model.data().map(|d| d.len()).unwrap_or(0);
    let indices: Vec<usize> = (0..n).map(|_| rng.random_range(0..m)).collect();
    subsample_with_indices(model, omega, &indices)
}

/// The subsampling estimate for a given multiset of datum indices.
pub fn subsample_with_indices(model: &TargetModel, omega: &ExpParam, indices: &[usize]) -> Result<GradientEstimate> {
    check_n(indices.len())?;
    EstimatorKind::Subsample.check(model)?;
    let m = model.data().map(|d| d.len()).unwrap_or(0);
    let mut sum = Coords::zeros(omega.family());
    for &i in indices {
        sum = sum.add(&model.per_datum_nat(i, omega)?);
    }
    let value = model.prior_nat(omega)?.lin_comb(1.0, &sum, m as f64 / indices.len() as f64);
    finite(value, indices.len())
}

/// `∇E_{q_ω}[log π(X)]` in closed form for the conjugate models. For a
/// Gaussian target and the full family this is `θ_π`; `n_used` is `M` for
/// regression and 0 for a synthetic target.
pub fn exact_gradient(model: &TargetModel, omega: &ExpParam) -> Result<GradientEstimate> {
    EstimatorKind::Exact.check(model)?;
    if omega.dim() != model.dim() {
        return Err(NgviError::DimensionMismatch { expected: model.dim(), got: omega.dim() });
    }
    match model {
        TargetModel::SyntheticGaussian(g) => {
            let c = g.theta().coords();
            let value = quadratic_gradient(omega, c.first.as_ref(), &c.second.to_matrix());
            finite(value, 0)
        }
        TargetModel::BayesLinReg { data, .. } => {
            let mut value = model.prior_nat(omega)?;
            for m in 0..data.len() {
                value = value.add(&model.per_datum_nat(m, omega)?);
            }
            finite(value, data.len())
        }
        _ => unreachable!("checked above"),
    }
}

/// Monte Carlo estimate of `(1/η²) E[d_{A*}(ω̄₊, ω₊)]` at `omega`, where
/// `ω̄₊` takes the step with the exact gradient and `ω₊` with `estimator`.
pub fn variance_proxy<R: Rng + ?Sized>(
    model: &TargetModel,
    omega: &ExpParam,
    estimator: EstimatorKind,
    eta: f64,
    n: usize,
    trials: usize,
    rng: &mut R,
) -> Result<f64> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(NgviError::InvalidArgument(format!("eta must lie in (0, 1], got {eta}")));
    }
    if trials == 0 {
        return Err(NgviError::InvalidArgument("trials must be at least 1".into()));
    }
    let theta = exp_to_nat(omega)?;
    let step = |g: &Coords| -> Result<ExpParam> {
        let coords = theta.coords().lin_comb(1.0 - eta, g, eta);
        let plus = NatParam::new(coords)
            .map_err(|_| NgviError::WellPosednessViolated("θ₊ left the natural domain".into()))?;
        nat_to_exp(&plus)
    };
    let bar = step(&exact_gradient(model, omega)?.value)?;
    let mut total = 0.0;
    for _ in 0..trials {
        let g = estimator.estimate(model, omega, n, rng)?;
        total += bregman_dual(&bar, &step(&g.value)?)?;
    }
    Ok(total / trials as f64 / (eta * eta))
}

/// Per-component sample variance of the flattened estimate over `trials`
/// draws.
pub fn component_variances<R: Rng + ?Sized>(
    model: &TargetModel,
    omega: &ExpParam,
    estimator: EstimatorKind,
    n: usize,
    trials: usize,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let mut draws = Vec::with_capacity(trials);
    for _ in 0..trials {
        draws.push(flatten(&estimator.estimate(model, omega, n, rng)?.value));
    }
    let k = draws[0].len();
    let t = trials as f64;
    let mean = draws.iter().fold(DVector::zeros(k), |acc, d| acc + d) / t;
    let var = draws.iter().fold(DVector::zeros(k), |acc, d| acc + (d - &mean).map(|x| x * x)) / (t - 1.0);
    Ok(var)
}

/// Concatenation of the first block and the (upper-triangular part of the)
/// second block.
pub fn flatten(c: &Coords) -> DVector<f64> {
    let mut out: Vec<f64> = c.first.as_ref().map(|f| f.iter().copied().collect()).unwrap_or_default();
    match &c.second {
        Block::Full(m) => {
            for j in 0..m.ncols() {
                for i in 0..=j {
                    out.push(m[(i, j)]);
                }
            }
        }
        Block::Diag(v) => out.extend(v.iter()),
    }
    DVector::from_vec(out)
}
