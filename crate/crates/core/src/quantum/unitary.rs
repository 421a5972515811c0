use serde::{Deserialize, Serialize};

use super::linalg::Matrix;
use super::{PureState, EPS_NORM};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawUnitary", into = "RawUnitary")]
pub struct UnitaryOp {
    matrix: Matrix,
}

#[derive(Serialize, Deserialize)]
struct RawUnitary {
    dim: usize,
    matrix: Matrix,
}

impl TryFrom<RawUnitary> for UnitaryOp {
    type Error = Error;

    fn try_from(raw: RawUnitary) -> Result<Self> {
        if raw.dim != raw.matrix.dim() {
            return Err(Error::DimensionMismatch {
                expected: raw.dim,
                found: raw.matrix.dim(),
            });
        }
        UnitaryOp::new(raw.matrix)
    }
}

impl From<UnitaryOp> for RawUnitary {
    fn from(u: UnitaryOp) -> Self {
        RawUnitary {
            dim: u.matrix.dim(),
            matrix: u.matrix,
        }
    }
}

impl UnitaryOp {
    pub fn new(matrix: Matrix) -> Result<Self> {
        if matrix.dim() == 0 {
            return Err(Error::InvalidOperator("dimension must be positive".into()));
        }
        let product = &matrix.adjoint() * &matrix;
        if !product.approx_eq(&Matrix::identity(matrix.dim()), EPS_NORM) {
            return Err(Error::InvalidOperator("matrix is not unitary".into()));
        }
        Ok(Self { matrix })
    }

    /// Free evolution with zero Hamiltonian.
    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: Matrix::identity(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn is_identity(&self) -> bool {
        self.matrix.approx_eq(&Matrix::identity(self.dim()), 0.0)
    }

    pub fn adjoint(&self) -> Self {
        Self {
            matrix: self.matrix.adjoint(),
        }
    }

    /// `self` followed by `next`.
    pub fn then(&self, next: &UnitaryOp) -> Result<Self> {
        if self.dim() != next.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: next.dim(),
            });
        }
        Ok(Self {
            matrix: &next.matrix * &self.matrix,
        })
    }
}

pub fn evolve(state: &PureState, u: &UnitaryOp) -> Result<PureState> {
    state.check_dim(u.dim())?;
    state.with_amplitudes(u.matrix.apply(state.amplitudes()))
}
