//! Target posteriors and what the estimators need from them.
//!
//! Log-densities are evaluated on batches of points stored as the columns of
//! a `d × N` matrix, returning sums over the batch. The regression models
//! aggregate per-datum weights across the batch before touching the design
//! matrix, so the Hessian sum costs one `ZᵀWZ` product per call.

pub mod config;
pub mod data;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub use config::{DataSource, ModelConfig, SyntheticData};
pub use data::{load_csv, Dataset};

use crate::error::{NgviError, Result};
use crate::expfam::{exp_to_nat, log_partition, nat_to_exp, quadratic_gradient, Block, Coords, ExpParam, Family,
    FamilyKind, NatParam};
use crate::linalg::{symmetrize, SpdFactor};
use crate::projections::{project, ConstraintSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Capabilities {
    pub log_density: bool,
    pub gradient: bool,
    pub hessian: bool,
    pub finite_sum: bool,
    pub conjugate: bool,
}

/// Gaussian prior `N(μ₀, Σ₀)` with its precision cached.
#[derive(Clone, Debug)]
pub struct GaussianPrior {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    precision: DMatrix<f64>,
}

impl GaussianPrior {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<GaussianPrior> {
        if cov.nrows() != mean.len() || cov.ncols() != mean.len() {
            return Err(NgviError::DimensionMismatch { expected: mean.len(), got: cov.nrows() });
        }
        let f = SpdFactor::full(&cov)
            .ok_or_else(|| NgviError::DomainViolation("prior covariance is not positive definite".into()))?;
        Ok(GaussianPrior { mean, cov: symmetrize(&cov), precision: f.inverse().to_matrix() })
    }

    /// `N(0, scale·I)`.
    pub fn isotropic(dim: usize, scale: f64) -> Result<GaussianPrior> {
        GaussianPrior::new(DVector::zeros(dim), DMatrix::identity(dim, dim) * scale)
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    fn is_centered(&self) -> bool {
        self.mean.iter().all(|&m| m == 0.0)
    }
}

/// Gaussian target `π = N(μ_π, Σ_π)` described by `θ_π`.
#[derive(Clone, Debug)]
pub struct GaussianTarget {
    theta: NatParam,
    mean: DVector<f64>,
    precision: DMatrix<f64>,
    log_partition: f64,
}

impl GaussianTarget {
    pub fn new(theta: NatParam) -> Result<GaussianTarget> {
        if theta.family().kind != FamilyKind::GaussianFull {
            return Err(NgviError::WrongFamily("a Gaussian target is given in full natural coordinates".into()));
        }
        let omega = nat_to_exp(&theta)?;
        let precision = theta.coords().second.scale(-2.0).to_matrix();
        Ok(GaussianTarget {
            mean: omega.mean().clone(),
            log_partition: log_partition(&theta),
            precision,
            theta,
        })
    }

    pub fn theta(&self) -> &NatParam {
        &self.theta
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        self.theta.precision().inverse().to_matrix()
    }
}

#[derive(Clone, Debug)]
pub enum TargetModel {
    SyntheticGaussian(GaussianTarget),
    BayesLinReg { data: Dataset, prior: GaussianPrior, noise_var: f64 },
    Logistic { data: Dataset, prior: GaussianPrior },
    StudentReg { data: Dataset, prior: GaussianPrior, noise_var: f64, dof: f64 },
}

/// Sums of `log π`, `∇log π` and `∇²log π` over a batch of points.
#[derive(Clone, Debug)]
pub struct BatchSums {
    pub n: usize,
    pub log_density: f64,
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(NgviError::InvalidArgument(format!("{name} must be positive, got {v}")))
    }
}

fn check_prior(data: &Dataset, prior: &GaussianPrior) -> Result<()> {
    if prior.mean.len() != data.dim() {
        return Err(NgviError::DimensionMismatch { expected: data.dim(), got: prior.mean.len() });
    }
    Ok(())
}

/// `θ_π` of the conjugate linear-regression posterior under a centered prior
/// `N(0, Σ₀)`: `((1/σ²)Σ y_m z_m, −½Σ₀⁻¹ − (1/2σ²)Σ z_m z_mᵀ)`.
///
/// `z` holds one datum per row and may have zero rows.
pub fn blr_posterior_nat(z: &DMatrix<f64>, y: &DVector<f64>, prior_cov: &DMatrix<f64>, noise_var: f64) -> Result<NatParam> {
    check_positive("noise_var", noise_var)?;
    let prior = GaussianPrior::new(DVector::zeros(prior_cov.nrows()), prior_cov.clone())?;
    if z.ncols() != prior_cov.nrows() {
        return Err(NgviError::DimensionMismatch { expected: prior_cov.nrows(), got: z.ncols() });
    }
    let first = z.transpose() * y / noise_var;
    let second = prior.precision * -0.5 - z.transpose() * z / (2.0 * noise_var);
    NatParam::new(Coords { first: Some(first), second: Block::Full(symmetrize(&second)) })
}

impl TargetModel {
    pub fn gaussian(theta: NatParam) -> Result<TargetModel> {
        Ok(TargetModel::SyntheticGaussian(GaussianTarget::new(theta)?))
    }

    /// Linear regression with a centered Gaussian prior and Gaussian noise.
    pub fn blr(data: Dataset, prior_cov: DMatrix<f64>, noise_var: f64) -> Result<TargetModel> {
        check_positive("noise_var", noise_var)?;
        let prior = GaussianPrior::new(DVector::zeros(data.dim()), prior_cov)?;
        check_prior(&data, &prior)?;
        Ok(TargetModel::BayesLinReg { data, prior, noise_var })
    }

    /// Logistic regression with responses in `{0, 1}` and a centered prior.
    pub fn logistic(data: Dataset, prior_cov: DMatrix<f64>) -> Result<TargetModel> {
        if data.y.iter().any(|&y| y != 0.0 && y != 1.0) {
            return Err(NgviError::InvalidArgument("logistic responses must be 0 or 1".into()));
        }
        let prior = GaussianPrior::new(DVector::zeros(data.dim()), prior_cov)?;
        check_prior(&data, &prior)?;
        Ok(TargetModel::Logistic { data, prior })
    }

    /// Linear regression with Student-t noise of scale `noise_var` and `dof`
    /// degrees of freedom.
    pub fn student(data: Dataset, prior: GaussianPrior, noise_var: f64, dof: f64) -> Result<TargetModel> {
        check_positive("noise_var", noise_var)?;
        check_positive("dof", dof)?;
        check_prior(&data, &prior)?;
        Ok(TargetModel::StudentReg { data, prior, noise_var, dof })
    }

    pub fn name(&self) -> &'static str {
        match self {
            TargetModel::SyntheticGaussian(_) => "gaussian",
            TargetModel::BayesLinReg { .. } => "blr",
            TargetModel::Logistic { .. } => "logistic",
            TargetModel::StudentReg { .. } => "student",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            TargetModel::SyntheticGaussian(g) => g.mean.len(),
            TargetModel::BayesLinReg { data, .. }
            | TargetModel::Logistic { data, .. }
            | TargetModel::StudentReg { data, .. } => data.dim(),
        }
    }

    pub fn capabilities(&self) -> Capabilities {
        let conjugate = matches!(self, TargetModel::SyntheticGaussian(_) | TargetModel::BayesLinReg { .. });
        Capabilities {
            log_density: true,
            gradient: true,
            hessian: true,
            finite_sum: !matches!(self, TargetModel::SyntheticGaussian(_)),
            conjugate,
        }
    }

    pub fn data(&self) -> Option<&Dataset> {
        match self {
            TargetModel::SyntheticGaussian(_) => None,
            TargetModel::BayesLinReg { data, .. }
            | TargetModel::Logistic { data, .. }
            | TargetModel::StudentReg { data, .. } => Some(data),
        }
    }

    pub fn prior(&self) -> Option<&GaussianPrior> {
        match self {
            TargetModel::SyntheticGaussian(_) => None,
            TargetModel::BayesLinReg { prior, .. }
            | TargetModel::Logistic { prior, .. }
            | TargetModel::StudentReg { prior, .. } => Some(prior),
        }
    }

    /// `θ_π` for the conjugate models.
    pub fn posterior_nat(&self) -> Result<NatParam> {
        match self {
            TargetModel::SyntheticGaussian(g) => Ok(g.theta.clone()),
            TargetModel::BayesLinReg { data, prior, noise_var } => {
                blr_posterior_nat(&data.z, &data.y, &prior.cov, *noise_var)
            }
            _ => Err(NgviError::ModelCapabilityMissing(format!("{} has no conjugate posterior", self.name()))),
        }
    }

    /// `log π(x)` up to a constant, with gradient and Hessian.
    pub fn log_density_grad_hess(&self, x: &DVector<f64>) -> Result<(f64, DVector<f64>, DMatrix<f64>)> {
        let xs = DMatrix::from_column_slice(x.len(), 1, x.as_slice());
        let s = self.batch_sums(&xs, true)?;
        Ok((s.log_density, s.grad, s.hess))
    }

    pub fn log_density(&self, x: &DVector<f64>) -> Result<f64> {
        Ok(self.log_density_grad_hess(x)?.0)
    }

    /// Sum of `log π` over the columns of `xs`.
    pub fn log_density_sum(&self, xs: &DMatrix<f64>) -> Result<f64> {
        self.check_points(xs)?;
        let n = xs.ncols() as f64;
        let v = match self {
            TargetModel::SyntheticGaussian(g) => {
                // ⟨θ_π, Γ(x)⟩ − A(θ_π), i.e. normalized against ν.
                let c = g.theta.coords();
                let t1 = c.first.as_ref().expect("full family");
                let t2 = c.second.to_matrix();
                let lin: f64 = (xs.transpose() * t1).sum();
                let quad = (&t2 * xs).component_mul(xs).sum();
                lin + quad - n * g.log_partition
            }
            _ => self.regression_sums(xs, true, false)?.log_density,
        };
        finite(v, "log-density")
    }

    /// Sums of `log π`, `∇log π` and `∇²log π` over the columns of `xs`. The
    /// log-density is skipped (left at 0) unless `with_value`.
    pub fn batch_sums(&self, xs: &DMatrix<f64>, with_value: bool) -> Result<BatchSums> {
        self.check_points(xs)?;
        let n = xs.ncols();
        let sums = match self {
            TargetModel::SyntheticGaussian(g) => {
                // ∇log π(x) = P(μ_π − x), ∇²log π = −P.
                let xsum = xs.column_sum();
                let grad = &g.precision * (&g.mean * n as f64 - xsum);
                let hess = &g.precision * -(n as f64);
                let log_density = if with_value { self.log_density_sum(xs)? } else { 0.0 };
                BatchSums { n, log_density, grad, hess }
            }
            _ => self.regression_sums(xs, with_value, true)?,
        };
        if !(sums.log_density.is_finite() && sums.grad.iter().all(|v| v.is_finite()) && sums.hess.iter().all(|v| v.is_finite())) {
            return Err(NgviError::NonFiniteValue(format!("{} log-density derivatives", self.name())));
        }
        Ok(sums)
    }

    fn check_points(&self, xs: &DMatrix<f64>) -> Result<()> {
        if xs.nrows() != self.dim() {
            return Err(NgviError::DimensionMismatch { expected: self.dim(), got: xs.nrows() });
        }
        Ok(())
    }

    /// Batch sums for the three regression models.
    fn regression_sums(&self, xs: &DMatrix<f64>, with_value: bool, with_derivs: bool) -> Result<BatchSums> {
        let (data, prior) = match self {
            TargetModel::BayesLinReg { data, prior, .. }
            | TargetModel::Logistic { data, prior }
            | TargetModel::StudentReg { data, prior, .. } => (data, prior),
            TargetModel::SyntheticGaussian(_) => unreachable!(),
        };
        let n = xs.ncols();
        let d = xs.nrows();
        let m = data.len();
        // s[(m, n)] = z_mᵀ x_n
        let s = &data.z * xs;
        // Per datum: Σ_n of the gradient coefficient c_mn and Hessian weight w_mn,
        // so that Σ∇ = Zᵀc − ..., Σ∇² = −Zᵀ diag(w) Z − ....
        let mut c = DVector::<f64>::zeros(m);
        let mut w = DVector::<f64>::zeros(m);
        let mut value = 0.0;
        match self {
            TargetModel::BayesLinReg { noise_var, .. } => {
                for j in 0..n {
                    for i in 0..m {
                        let r = data.y[i] - s[(i, j)];
                        c[i] += r / noise_var;
                        if with_value {
                            value -= r * r / (2.0 * noise_var);
                        }
                    }
                }
                w.fill(n as f64 / noise_var);
            }
            TargetModel::Logistic { .. } => {
                for j in 0..n {
                    for i in 0..m {
                        let si = s[(i, j)];
                        let e = (-si.abs()).exp();
                        let p = if si >= 0.0 { 1.0 / (1.0 + e) } else { e / (1.0 + e) };
                        c[i] += data.y[i] - p;
                        w[i] += p * (1.0 - p);
                        if with_value {
                            // y·s − log(1 + eˢ), with the softplus kept stable.
                            value += data.y[i] * si - (si.max(0.0) + e.ln_1p());
                        }
                    }
                }
            }
            TargetModel::StudentReg { noise_var, dof, .. } => {
                let rs2 = dof * noise_var;
                for j in 0..n {
                    for i in 0..m {
                        let r = data.y[i] - s[(i, j)];
                        let den = rs2 + r * r;
                        c[i] += (dof + 1.0) * r / den;
                        w[i] += (dof + 1.0) * (rs2 - r * r) / (den * den);
                        if with_value {
                            value -= 0.5 * (dof + 1.0) * den.ln();
                        }
                    }
                }
            }
            TargetModel::SyntheticGaussian(_) => unreachable!(),
        }
        // Prior: −½(x − μ₀)ᵀΣ₀⁻¹(x − μ₀).
        let centered = if prior.is_centered() {
            xs.clone()
        } else {
            let mut cx = xs.clone();
            for mut col in cx.column_iter_mut() {
                col -= &prior.mean;
            }
            cx
        };
        let pc = &prior.precision * &centered;
        if with_value {
            value -= 0.5 * pc.component_mul(&centered).sum();
        }
        let (grad, hess) = if with_derivs {
            let grad = data.z.transpose() * &c - pc.column_sum();
            let mut zw = data.z.clone();
            for (mut row, wi) in zw.row_iter_mut().zip(w.iter()) {
                row *= *wi;
            }
            let hess = -(data.z.transpose() * zw) - &prior.precision * n as f64;
            (grad, symmetrize(&hess))
        } else {
            (DVector::zeros(d), DMatrix::zeros(d, d))
        };
        Ok(BatchSums { n, log_density: value, grad, hess })
    }

    /// Image `L₀ᵀθ₀` of the prior in `omega`'s coordinates (finite-sum models
    /// with a centered prior).
    pub fn prior_nat(&self, omega: &ExpParam) -> Result<Coords> {
        let prior = self
            .prior()
            .ok_or_else(|| NgviError::ModelCapabilityMissing(format!("{} is not of finite-sum form", self.name())))?;
        self.check_family_dim(omega)?;
        let lin = prior.precision() * prior.mean();
        Ok(quadratic_gradient(omega, Some(&lin), &(prior.precision() * -0.5)))
    }

    /// `θ_{y_m}(ω) = ∇E_{q_ω}[log p(y_m | X)]` for `m` in `0..M`. Closed form
    /// only for linear regression, where it is `(1/2σ²)(2y_m z_m, −z_m z_mᵀ)`
    /// for the full family.
    pub fn per_datum_nat(&self, m: usize, omega: &ExpParam) -> Result<Coords> {
        match self {
            TargetModel::BayesLinReg { data, noise_var, .. } => {
                self.check_family_dim(omega)?;
                if m >= data.len() {
                    return Err(NgviError::InvalidArgument(format!("datum index {m} out of range 0..{}", data.len())));
                }
                let z = data.z.row(m).transpose();
                let lin = &z * (data.y[m] / noise_var);
                let quad = &z * z.transpose() * (-0.5 / noise_var);
                Ok(quadratic_gradient(omega, Some(&lin), &quad))
            }
            _ => Err(NgviError::ModelCapabilityMissing(format!(
                "{} has no closed-form per-datum natural parameter",
                self.name()
            ))),
        }
    }

    fn check_family_dim(&self, omega: &ExpParam) -> Result<()> {
        if omega.dim() != self.dim() {
            return Err(NgviError::DimensionMismatch { expected: self.dim(), got: omega.dim() });
        }
        Ok(())
    }

    /// Solution of the constrained problem for conjugate models:
    /// `project(∇A(L_πᵀθ_π), c)`, where `L_πᵀ` keeps `θ_π` for the full
    /// family and its diagonal for the centered kind.
    ///
    /// The non-centered diagonal family is not a linear enlargement of a
    /// Gaussian target, but its problem still separates into the mean `μ_π`
    /// and variances `1/(Σ_π⁻¹)_ii`; that closed form is returned for the
    /// unconstrained and eigen-clip cases. `None` when no closed form exists.
    pub fn optimum(&self, family: Family, c: &ConstraintSet) -> Result<Option<ExpParam>> {
        if !self.capabilities().conjugate {
            return Ok(None);
        }
        if family.dim != self.dim() {
            return Err(NgviError::DimensionMismatch { expected: self.dim(), got: family.dim });
        }
        c.validate(&family)?;
        let theta = self.posterior_nat()?;
        let tc = theta.coords();
        let t2 = tc.second.to_matrix();
        let unconstrained = match family.kind {
            FamilyKind::GaussianFull => nat_to_exp(&theta)?,
            FamilyKind::GaussianDiagCentered => {
                nat_to_exp(&NatParam::new(Coords { first: None, second: Block::Diag(t2.diagonal()) })?)?
            }
            FamilyKind::GaussianDiag => {
                if *c == ConstraintSet::NonNegativeMean {
                    return Ok(None);
                }
                let mean = nat_to_exp(&theta)?.mean().clone();
                let var = t2.diagonal().map(|t| -0.5 / t);
                ExpParam::from_mean_cov(family, mean, Block::Diag(var))?
            }
        };
        Ok(Some(project(&unconstrained, c)?))
    }
}

fn finite(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(NgviError::NonFiniteValue(what.into()))
    }
}

/// Gaussian target with a log-spaced covariance spectrum on `[1, κ]`, a
/// random orthogonal basis (QR of a Gaussian matrix) and mean uniform on
/// `[-1, 1]^d`.
pub fn synthetic_gaussian(dim: usize, kappa: f64, seed: u64) -> Result<TargetModel> {
    if dim == 0 {
        return Err(NgviError::InvalidArgument("dim must be positive".into()));
    }
    if !(kappa.is_finite() && kappa >= 1.0) {
        return Err(NgviError::InvalidArgument(format!("kappa must be >= 1, got {kappa}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::<f64>::from_fn(dim, dim, |_, _| rng.sample(StandardNormal));
    let q = g.qr().q();
    let lambda = DVector::from_fn(dim, |i, _| {
        if dim == 1 { 1.0 } else { kappa.powf(i as f64 / (dim - 1) as f64) }
    });
    let mean = DVector::from_fn(dim, |_, _| rng.random_range(-1.0..=1.0));
    let cov = symmetrize(&(&q * DMatrix::from_diagonal(&lambda) * q.transpose()));
    let omega = ExpParam::from_mean_cov(Family::full(dim), mean, Block::Full(cov))?;
    TargetModel::gaussian(exp_to_nat(&omega)?)
}
