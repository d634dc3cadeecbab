//! Exponential-family calculus for three Gaussian families.
//!
//! Densities are taken with respect to the base measure `(2π)^{-d/2}·Lebesgue`,
//! so for a member with natural parameter `θ` and sufficient statistic `Γ`,
//! `q_θ(x) = exp(⟨θ, Γ(x)⟩ − A(θ))`. The three realized families are
//!
//! | kind                   | `Γ(x)`      | natural parameter                   |
//! |------------------------|-------------|-------------------------------------|
//! | `GaussianFull`         | `(x, xxᵀ)`  | `(Σ⁻¹μ, −½Σ⁻¹)`                     |
//! | `GaussianDiag`         | `(x, x∘x)`  | `(μ/σ², −½/σ²)` componentwise       |
//! | `GaussianDiagCentered` | `x∘x`       | `−½/σ²` componentwise               |
//!
//! Expectation parameters are `ω = E[Γ(X)] = ∇A(θ)`; the inverse map is
//! `∇A*`. Both parameter types carry a cached factorization of the implied
//! covariance (or precision), and constructing one is the domain test.

mod coords;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{NgviError, Result};
pub use crate::linalg::Block;
use crate::linalg::{symmetrize, SpdFactor};
pub use coords::Coords;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    #[serde(alias = "full")]
    GaussianFull,
    #[serde(alias = "diag")]
    GaussianDiag,
    #[serde(alias = "diag_centered")]
    GaussianDiagCentered,
}

/// Which Gaussian family and in which dimension.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Family {
    pub kind: FamilyKind,
    pub dim: usize,
}

impl Family {
    pub fn new(kind: FamilyKind, dim: usize) -> Result<Family> {
        if dim == 0 {
            return Err(NgviError::InvalidArgument("family dimension must be >= 1".into()));
        }
        Ok(Family { kind, dim })
    }

    pub fn full(dim: usize) -> Family {
        Family { kind: FamilyKind::GaussianFull, dim }
    }

    pub fn diag(dim: usize) -> Family {
        Family { kind: FamilyKind::GaussianDiag, dim }
    }

    pub fn diag_centered(dim: usize) -> Family {
        Family { kind: FamilyKind::GaussianDiagCentered, dim }
    }

    pub fn has_mean(&self) -> bool {
        self.kind != FamilyKind::GaussianDiagCentered
    }

    pub fn is_diagonal(&self) -> bool {
        self.kind != FamilyKind::GaussianFull
    }
}

/// Natural parameter `θ`, guaranteed to lie in `int dom A`.
#[derive(Clone, Debug)]
pub struct NatParam {
    coords: Coords,
    /// Factor of the precision `−2θ₂`.
    precision: SpdFactor,
}

impl NatParam {
    /// Validates membership in `int dom A`: `−2θ₂` must be positive definite.
    pub fn new(coords: Coords) -> Result<NatParam> {
        let coords = coords.symmetrized();
        if !coords.is_finite() {
            return Err(NgviError::DomainViolation("natural parameter is not finite".into()));
        }
        let precision = SpdFactor::from_block(&coords.second.scale(-2.0)).ok_or_else(|| {
            NgviError::DomainViolation("−2θ₂ is not positive definite".into())
        })?;
        Ok(NatParam { coords, precision })
    }

    pub fn coords(&self) -> &Coords {
        &self.coords
    }

    pub fn into_coords(self) -> Coords {
        self.coords
    }

    pub fn family(&self) -> Family {
        self.coords.family()
    }

    pub fn precision(&self) -> &SpdFactor {
        &self.precision
    }

    /// Membership predicate for `int dom A`, applied to an arbitrary element.
    pub fn is_interior(coords: &Coords) -> bool {
        coords.is_finite()
            && SpdFactor::from_block(&coords.second.scale(-2.0)).is_some()
    }
}

/// Expectation parameter `ω`, guaranteed to lie in `int dom A*`.
#[derive(Clone, Debug)]
pub struct ExpParam {
    coords: Coords,
    mean: DVector<f64>,
    cov: SpdFactor,
}

impl ExpParam {
    /// Validates membership in `int dom A*`: the implied covariance
    /// `ω₂ − ω₁ω₁ᵀ` (or its diagonal analogue) must be positive definite.
    pub fn new(coords: Coords) -> Result<ExpParam> {
        let coords = coords.symmetrized();
        if !coords.is_finite() {
            return Err(NgviError::DomainViolation("expectation parameter is not finite".into()));
        }
        let d = coords.second.dim();
        let mean = coords.first.clone().unwrap_or_else(|| DVector::zeros(d));
        let cov = match &coords.second {
            Block::Full(w2) => Block::Full(w2 - &mean * mean.transpose()),
            Block::Diag(w2) => Block::Diag(w2 - mean.component_mul(&mean)),
        };
        let cov = SpdFactor::from_block(&cov).ok_or_else(|| {
            NgviError::DomainViolation("implied covariance is not positive definite".into())
        })?;
        Ok(ExpParam { coords, mean, cov })
    }

    /// Builds `(μ, Σ + μμᵀ)` in the given family from a mean and covariance.
    ///
    /// For the centered kind the mean must be zero (it is ignored otherwise
    /// only if exactly zero).
    pub fn from_mean_cov(family: Family, mean: DVector<f64>, cov: Block) -> Result<ExpParam> {
        if mean.len() != family.dim {
            return Err(NgviError::DimensionMismatch { expected: family.dim, got: mean.len() });
        }
        if cov.dim() != family.dim {
            return Err(NgviError::DimensionMismatch { expected: family.dim, got: cov.dim() });
        }
        let cov = match (family.kind, cov) {
            (FamilyKind::GaussianFull, Block::Full(m)) => Block::Full(symmetrize(&m)),
            (FamilyKind::GaussianFull, Block::Diag(v)) => Block::Full(DMatrix::from_diagonal(&v)),
            (_, Block::Diag(v)) => Block::Diag(v),
            (_, Block::Full(m)) => {
                let off = m.iter().enumerate().any(|(k, v)| k % (family.dim + 1) != 0 && *v != 0.0);
                if off {
                    return Err(NgviError::WrongFamily(
                        "diagonal family given a covariance with off-diagonal entries".into(),
                    ));
                }
                Block::Diag(m.diagonal())
            }
        };
        if !mean.iter().all(|v| v.is_finite()) {
            return Err(NgviError::DomainViolation("mean is not finite".into()));
        }
        let factor = SpdFactor::from_block(&cov)
            .ok_or_else(|| NgviError::DomainViolation("covariance is not positive definite".into()))?;
        let (first, second, mean) = match (&cov, family.kind) {
            (Block::Full(s), _) => (Some(mean.clone()), Block::Full(s + &mean * mean.transpose()), mean),
            (Block::Diag(s), FamilyKind::GaussianDiag) => {
                (Some(mean.clone()), Block::Diag(s + mean.component_mul(&mean)), mean)
            }
            (Block::Diag(s), _) => {
                if mean.iter().any(|v| *v != 0.0) {
                    return Err(NgviError::WrongFamily("centered family requires a zero mean".into()));
                }
                (None, Block::Diag(s.clone()), mean)
            }
        };
        Ok(ExpParam { coords: Coords { first, second }, mean, cov: factor })
    }

    pub fn from_moments(family: Family, m: &MomentParam) -> Result<ExpParam> {
        ExpParam::from_mean_cov(family, m.mu.clone(), m.sigma.clone())
    }

    pub fn coords(&self) -> &Coords {
        &self.coords
    }

    pub fn family(&self) -> Family {
        self.coords.family()
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// `E[X]` (zero for the centered kind).
    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> Block {
        self.cov.block()
    }

    pub fn cov_factor(&self) -> &SpdFactor {
        &self.cov
    }

    pub fn moments(&self) -> MomentParam {
        MomentParam { mu: self.mean.clone(), sigma: self.covariance() }
    }

    /// Membership predicate for `int dom A*`.
    pub fn is_interior(coords: &Coords) -> bool {
        ExpParam::new(coords.clone()).is_ok()
    }
}

/// Human-readable `(μ, Σ)` view. Serialized as `{"mu": [..], "sigma": [[..]]}`;
/// a flat `sigma` vector is read as a diagonal covariance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MomentRepr", into = "MomentRepr")]
pub struct MomentParam {
    pub mu: DVector<f64>,
    pub sigma: Block,
}

impl MomentParam {
    pub fn new(mu: DVector<f64>, sigma: Block) -> Result<MomentParam> {
        if mu.len() != sigma.dim() {
            return Err(NgviError::DimensionMismatch { expected: mu.len(), got: sigma.dim() });
        }
        let sigma = match sigma {
            Block::Full(m) => Block::Full(symmetrize(&m)),
            b => b,
        };
        if SpdFactor::from_block(&sigma).is_none() {
            return Err(NgviError::DomainViolation("sigma is not positive definite".into()));
        }
        Ok(MomentParam { mu, sigma })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }
}

#[derive(Serialize, Deserialize)]
struct MomentRepr {
    mu: Vec<f64>,
    sigma: SigmaRepr,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum SigmaRepr {
    Matrix(Vec<Vec<f64>>),
    Vector(Vec<f64>),
}

impl TryFrom<MomentRepr> for MomentParam {
    type Error = NgviError;

    fn try_from(r: MomentRepr) -> Result<MomentParam> {
        let d = r.mu.len();
        let sigma = match r.sigma {
            SigmaRepr::Vector(v) => Block::Diag(DVector::from_vec(v)),
            SigmaRepr::Matrix(rows) => {
                if rows.len() != d || rows.iter().any(|row| row.len() != d) {
                    return Err(NgviError::DimensionMismatch { expected: d, got: rows.len() });
                }
                Block::Full(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
            }
        };
        MomentParam::new(DVector::from_vec(r.mu), sigma)
    }
}

impl From<MomentParam> for MomentRepr {
    fn from(m: MomentParam) -> MomentRepr {
        let sigma = match &m.sigma {
            Block::Full(s) => SigmaRepr::Matrix(
                (0..s.nrows()).map(|i| s.row(i).iter().copied().collect()).collect(),
            ),
            Block::Diag(v) => SigmaRepr::Vector(v.iter().copied().collect()),
        };
        MomentRepr { mu: m.mu.iter().copied().collect(), sigma }
    }
}

/// `ω = ∇A(θ)`.
pub fn nat_to_exp(theta: &NatParam) -> Result<ExpParam> {
    let family = theta.family();
    let cov = theta.precision.inverse();
    let mean = match &theta.coords.first {
        Some(t1) => theta.precision.solve(t1),
        None => DVector::zeros(family.dim),
    };
    ExpParam::from_mean_cov(family, mean, cov)
}

/// `θ = ∇A*(ω)`.
pub fn exp_to_nat(omega: &ExpParam) -> Result<NatParam> {
    let precision = omega.cov.inverse();
    let first = omega.coords.first.as_ref().map(|_| omega.cov.solve(&omega.mean));
    NatParam::new(Coords { first, second: precision.scale(-0.5) })
}

/// Log-partition function `A(θ) = ½ θ₁ᵀ(−2θ₂)⁻¹θ₁ − ½ logdet(−2θ₂)`.
pub fn log_partition(theta: &NatParam) -> f64 {
    let quad = match &theta.coords.first {
        Some(t1) => 0.5 * t1.dot(&theta.precision.solve(t1)),
        None => 0.0,
    };
    quad - 0.5 * theta.precision.logdet()
}

/// Convex conjugate `A*(ω) = E_{q_ω}[log q_ω(X)] = −d/2 − ½ logdet Σ`.
pub fn negative_entropy(omega: &ExpParam) -> f64 {
    -0.5 * omega.dim() as f64 - 0.5 * omega.cov.logdet()
}

/// Bregman divergence of `A*`: `A*(ω_a) − A*(ω_b) − ⟨∇A*(ω_b), ω_a − ω_b⟩`,
/// which equals `KL(q_{ω_a} ‖ q_{ω_b})`.
pub fn bregman_dual(omega_a: &ExpParam, omega_b: &ExpParam) -> Result<f64> {
    check_same_family(&omega_a.family(), &omega_b.family())?;
    let theta_b = exp_to_nat(omega_b)?;
    let diff = omega_a.coords.sub(&omega_b.coords);
    Ok(negative_entropy(omega_a) - negative_entropy(omega_b) - theta_b.coords.dot(&diff))
}

pub(crate) fn check_same_family(a: &Family, b: &Family) -> Result<()> {
    if a.dim != b.dim {
        return Err(NgviError::DimensionMismatch { expected: a.dim, got: b.dim });
    }
    if a.kind != b.kind {
        return Err(NgviError::WrongFamily(format!("{:?} vs {:?}", a.kind, b.kind)));
    }
    Ok(())
}

/// Closed-form `KL(N(μp, Σp) ‖ N(μq, Σq))` computed from moments.
pub fn kl_gaussian_oracle(p: &MomentParam, q: &MomentParam) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(NgviError::DimensionMismatch { expected: p.dim(), got: q.dim() });
    }
    let d = p.dim() as f64;
    let sp = SpdFactor::full(&p.sigma.to_matrix())
        .ok_or_else(|| NgviError::DomainViolation("Σp is not positive definite".into()))?;
    let sq = SpdFactor::full(&q.sigma.to_matrix())
        .ok_or_else(|| NgviError::DomainViolation("Σq is not positive definite".into()))?;
    let trace = match &sq {
        SpdFactor::Full(c) => c.solve(&p.sigma.to_matrix()).trace(),
        SpdFactor::Diag(_) => unreachable!(),
    };
    let dm = &q.mu - &p.mu;
    let maha = dm.dot(&sq.solve(&dm));
    Ok(0.5 * (trace + maha - d + sq.logdet() - sp.logdet()))
}

/// Draws `n` independent samples from `q_ω`, one per column.
pub fn sample<R: Rng + ?Sized>(omega: &ExpParam, n: usize, rng: &mut R) -> DMatrix<f64> {
    let d = omega.dim();
    let mut out = DMatrix::zeros(d, n);
    let mut z = DVector::zeros(d);
    match &omega.cov {
        SpdFactor::Full(c) => {
            let l = c.l();
            for mut col in out.column_iter_mut() {
                for zi in z.iter_mut() {
                    *zi = rng.sample(StandardNormal);
                }
                col.copy_from(&omega.mean);
                col.gemv(1.0, &l, &z, 1.0);
            }
        }
        SpdFactor::Diag(v) => {
            let sd = v.map(f64::sqrt);
            for mut col in out.column_iter_mut() {
                for i in 0..d {
                    let e: f64 = rng.sample(StandardNormal);
                    col[i] = omega.mean[i] + sd[i] * e;
                }
            }
        }
    }
    out
}

/// Linear map from a diagonal family's expectation parameters into the full
/// family: `(ω₁, ω₂) ↦ (ω₁, diag ω₂)` and, for the centered kind,
/// `ω ↦ (0, diag ω)`.
pub fn embed_diag_to_full(omega: &ExpParam) -> Result<ExpParam> {
    let family = omega.family();
    let w2 = match &omega.coords.second {
        Block::Diag(v) => v,
        Block::Full(_) => {
            return Err(NgviError::WrongFamily("embedding expects a diagonal family".into()))
        }
    };
    let first = omega.coords.first.clone().unwrap_or_else(|| DVector::zeros(family.dim));
    ExpParam::new(Coords { first: Some(first), second: Block::Full(DMatrix::from_diagonal(w2)) })
}

/// Gradient, in `ω`'s own coordinates, of
/// `ω ↦ E_{q_ω}[⟨lin, X⟩ + ⟨quad, XXᵀ⟩]` for a symmetric `quad`.
///
/// For the full family this is `(lin, quad)`. For the diagonal kinds the
/// expectation of the off-diagonal part depends on `μ_i μ_j`, which gives the
/// extra `2·offdiag(quad)·μ` term; the centered kind drops the linear part.
pub fn quadratic_gradient(omega: &ExpParam, lin: Option<&DVector<f64>>, quad: &DMatrix<f64>) -> Coords {
    let d = omega.dim();
    let lin = lin.cloned().unwrap_or_else(|| DVector::zeros(d));
    match omega.family().kind {
        FamilyKind::GaussianFull => Coords { first: Some(lin), second: Block::Full(quad.clone()) },
        FamilyKind::GaussianDiag => {
            let mut off = quad.clone();
            off.fill_diagonal(0.0);
            let first = lin + (off * omega.mean()) * 2.0;
            Coords { first: Some(first), second: Block::Diag(quad.diagonal()) }
        }
        FamilyKind::GaussianDiagCentered => Coords { first: None, second: Block::Diag(quad.diagonal()) },
    }
}
