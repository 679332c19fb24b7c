use crate::error::Result;
use crate::linalg::{schatten_norm, ComplexMatrix, SchattenIndex};

/// Comparison of two sides of a matrix identity in a Schatten norm.
///
/// The relative error follows the uniform `abs / (1 + magnitude)` policy,
/// where the magnitude is the larger of the two side norms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residual {
    pub lhs_norm: f64,
    pub rhs_norm: f64,
    pub abs_err: f64,
}

impl Residual {
    pub fn between(lhs: &ComplexMatrix, rhs: &ComplexMatrix, p: SchattenIndex) -> Result<Self> {
        Ok(Residual {
            lhs_norm: schatten_norm(lhs, p)?,
            rhs_norm: schatten_norm(rhs, p)?,
            abs_err: schatten_norm(&(lhs - rhs), p)?,
        })
    }

    pub fn frobenius(lhs: &ComplexMatrix, rhs: &ComplexMatrix) -> Self {
        Residual {
            lhs_norm: lhs.frobenius_norm(),
            rhs_norm: rhs.frobenius_norm(),
            abs_err: (lhs - rhs).frobenius_norm(),
        }
    }

    pub fn scale(&self) -> f64 {
        1.0 + self.lhs_norm.max(self.rhs_norm)
    }

    pub fn rel_err(&self) -> f64 {
        self.abs_err / self.scale()
    }

    /// `abs_err ≤ tol·(1 + magnitude)`.
    pub fn within(&self, tol: f64) -> bool {
        self.rel_err() <= tol
    }
}
