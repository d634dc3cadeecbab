//! Small dense linear-algebra helpers shared by the parameter maps.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

/// Second block of an element of the parameter space: a symmetric matrix for
/// full-covariance Gaussians, a vector for the diagonal kinds.
#[derive(Clone, Debug, PartialEq)]
pub enum Block {
    Full(DMatrix<f64>),
    Diag(DVector<f64>),
}

impl Block {
    pub fn dim(&self) -> usize {
        match self {
            Block::Full(m) => m.nrows(),
            Block::Diag(v) => v.len(),
        }
    }

    pub fn is_full(&self) -> bool {
        matches!(self, Block::Full(_))
    }

    /// Frobenius inner product (plain dot product for the diagonal layout).
    pub fn dot(&self, other: &Block) -> f64 {
        match (self, other) {
            (Block::Full(a), Block::Full(b)) => a.dot(b),
            (Block::Diag(a), Block::Diag(b)) => a.dot(b),
            _ => panic!("block layout mismatch"),
        }
    }

    pub fn scale(&self, a: f64) -> Block {
        match self {
            Block::Full(m) => Block::Full(m * a),
            Block::Diag(v) => Block::Diag(v * a),
        }
    }

    /// `a * self + b * other`.
    pub fn lin_comb(&self, a: f64, other: &Block, b: f64) -> Block {
        match (self, other) {
            (Block::Full(x), Block::Full(y)) => Block::Full(x * a + y * b),
            (Block::Diag(x), Block::Diag(y)) => Block::Diag(x * a + y * b),
            _ => panic!("block layout mismatch"),
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            Block::Full(m) => m.iter().all(|v| v.is_finite()),
            Block::Diag(v) => v.iter().all(|v| v.is_finite()),
        }
    }

    pub fn norm(&self) -> f64 {
        match self {
            Block::Full(m) => m.norm(),
            Block::Diag(v) => v.norm(),
        }
    }

    /// Dense matrix view (diagonal kinds become diagonal matrices).
    pub fn to_matrix(&self) -> DMatrix<f64> {
        match self {
            Block::Full(m) => m.clone(),
            Block::Diag(v) => DMatrix::from_diagonal(v),
        }
    }
}

/// `(M + Mᵀ) / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Factorization of a symmetric positive definite operator.
///
/// Construction is the single positive-definiteness test used by the crate:
/// it succeeds iff the Cholesky factorization exists with a strictly positive,
/// finite diagonal.
#[derive(Clone, Debug)]
pub enum SpdFactor {
    Full(Cholesky<f64, Dyn>),
    Diag(DVector<f64>),
}

impl SpdFactor {
    /// Symmetrizes `m` and factorizes it. `None` if not positive definite.
    pub fn full(m: &DMatrix<f64>) -> Option<SpdFactor> {
        if !m.is_square() || m.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let chol = Cholesky::new(symmetrize(m))?;
        let l = chol.l_dirty();
        if (0..l.nrows()).all(|i| {
            let v = l[(i, i)];
            v.is_finite() && v > 0.0
        }) {
            Some(SpdFactor::Full(chol))
        } else {
            None
        }
    }

    pub fn diag(v: &DVector<f64>) -> Option<SpdFactor> {
        if v.iter().all(|x| x.is_finite() && *x > 0.0) {
            Some(SpdFactor::Diag(v.clone()))
        } else {
            None
        }
    }

    pub fn from_block(b: &Block) -> Option<SpdFactor> {
        match b {
            Block::Full(m) => SpdFactor::full(m),
            Block::Diag(v) => SpdFactor::diag(v),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            SpdFactor::Full(c) => c.l_dirty().nrows(),
            SpdFactor::Diag(v) => v.len(),
        }
    }

    pub fn logdet(&self) -> f64 {
        match self {
            SpdFactor::Full(c) => {
                let l = c.l_dirty();
                2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>()
            }
            SpdFactor::Diag(v) => v.iter().map(|x| x.ln()).sum(),
        }
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        match self {
            SpdFactor::Full(c) => c.solve(b),
            SpdFactor::Diag(v) => b.component_div(v),
        }
    }

    /// The factorized operator itself.
    pub fn block(&self) -> Block {
        match self {
            SpdFactor::Full(c) => {
                let l = c.l();
                Block::Full(symmetrize(&(&l * l.transpose())))
            }
            SpdFactor::Diag(v) => Block::Diag(v.clone()),
        }
    }

    pub fn inverse(&self) -> Block {
        match self {
            SpdFactor::Full(c) => Block::Full(symmetrize(&c.inverse())),
            SpdFactor::Diag(v) => Block::Diag(v.map(|x| 1.0 / x)),
        }
    }

    /// Applies the square-root factor: `L z` (or `sqrt(v) ∘ z`).
    pub fn mul_sqrt(&self, z: &DVector<f64>) -> DVector<f64> {
        match self {
            SpdFactor::Full(c) => c.l() * z,
            SpdFactor::Diag(v) => z.zip_map(v, |a, b| a * b.sqrt()),
        }
    }

    /// Lower-triangular square-root factor as a dense matrix.
    pub fn sqrt_matrix(&self) -> DMatrix<f64> {
        match self {
            SpdFactor::Full(c) => c.l(),
            SpdFactor::Diag(v) => DMatrix::from_diagonal(&v.map(f64::sqrt)),
        }
    }
}

/// Relative distance `‖a − b‖ / max(1, ‖b‖)`.
pub fn rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(1.0)
}
