use nalgebra::DVector;

use super::{Family, FamilyKind};
use crate::linalg::{symmetrize, Block};

/// An element of the parameter space `ℋ` with no domain requirement.
///
/// Natural parameters, expectation parameters and gradient estimates all
/// share this layout; the first block is absent for the centered family.
#[derive(Clone, Debug, PartialEq)]
pub struct Coords {
    pub first: Option<DVector<f64>>,
    pub second: Block,
}

impl Coords {
    pub fn zeros(family: Family) -> Coords {
        let d = family.dim;
        match family.kind {
            FamilyKind::GaussianFull => Coords {
                first: Some(DVector::zeros(d)),
                second: Block::Full(nalgebra::DMatrix::zeros(d, d)),
            },
            FamilyKind::GaussianDiag => Coords {
                first: Some(DVector::zeros(d)),
                second: Block::Diag(DVector::zeros(d)),
            },
            FamilyKind::GaussianDiagCentered => Coords { first: None, second: Block::Diag(DVector::zeros(d)) },
        }
    }

    /// Family implied by the layout.
    pub fn family(&self) -> Family {
        let kind = match (&self.first, &self.second) {
            (_, Block::Full(_)) => FamilyKind::GaussianFull,
            (Some(_), Block::Diag(_)) => FamilyKind::GaussianDiag,
            (None, Block::Diag(_)) => FamilyKind::GaussianDiagCentered,
        };
        Family { kind, dim: self.second.dim() }
    }

    pub fn dot(&self, other: &Coords) -> f64 {
        let first = match (&self.first, &other.first) {
            (Some(a), Some(b)) => a.dot(b),
            (None, None) => 0.0,
            _ => panic!("coordinate layout mismatch"),
        };
        first + self.second.dot(&other.second)
    }

    /// `a * self + b * other`.
    pub fn lin_comb(&self, a: f64, other: &Coords, b: f64) -> Coords {
        let first = match (&self.first, &other.first) {
            (Some(x), Some(y)) => Some(x * a + y * b),
            (None, None) => None,
            _ => panic!("coordinate layout mismatch"),
        };
        Coords { first, second: self.second.lin_comb(a, &other.second, b) }
    }

    pub fn add(&self, other: &Coords) -> Coords {
        self.lin_comb(1.0, other, 1.0)
    }

    pub fn sub(&self, other: &Coords) -> Coords {
        self.lin_comb(1.0, other, -1.0)
    }

    pub fn scale(&self, a: f64) -> Coords {
        Coords { first: self.first.as_ref().map(|v| v * a), second: self.second.scale(a) }
    }

    pub fn norm(&self) -> f64 {
        let f = self.first.as_ref().map_or(0.0, |v| v.norm_squared());
        (f + self.second.norm().powi(2)).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.first.as_ref().is_none_or(|v| v.iter().all(|x| x.is_finite())) && self.second.is_finite()
    }

    pub(crate) fn symmetrized(self) -> Coords {
        match self.second {
            Block::Full(m) => Coords { first: self.first, second: Block::Full(symmetrize(&m)) },
            b => Coords { first: self.first, second: b },
        }
    }

    /// `‖self − other‖ / max(1, ‖other‖)`.
    pub fn rel_diff(&self, other: &Coords) -> f64 {
        self.sub(other).norm() / other.norm().max(1.0)
    }
}
