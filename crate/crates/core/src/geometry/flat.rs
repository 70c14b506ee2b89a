use nalgebra::{DMatrix, DVector};

use super::lu::{norm1, Lu};
use super::{Covector, GeometryError, TwoFormMatrix};

/// Condition numbers above this are treated as a degenerate structure.
pub const CONDITION_LIMIT: f64 = 1e12;

/// The musical isomorphism `X -> i_X omega + sum_k eta_k(X) eta_k` at one
/// state, as the matrix `B = W^T + sum_k eta_k eta_k^T`.
///
/// The factorisation and a 1-norm condition number are computed once at
/// construction.
#[derive(Debug, Clone)]
pub struct FlatOperator {
    matrix: DMatrix<f64>,
    lu: Option<Lu>,
    condition: f64,
}

impl FlatOperator {
    pub fn new(omega: &TwoFormMatrix, etas: &[Covector]) -> Result<Self, GeometryError> {
        let d = omega.dim();
        let mut matrix = omega.matrix().transpose();
        for eta in etas {
            if eta.dim() != d {
                return Err(GeometryError::DimensionMismatch {
                    expected: d,
                    found: eta.dim(),
                });
            }
            matrix += &eta.0 * eta.0.transpose();
        }
        let lu = Lu::factor(&matrix);
        let condition = match &lu {
            Some(lu) => norm1(&matrix) * norm1(&lu.inverse()),
            None => f64::INFINITY,
        };
        Ok(FlatOperator {
            matrix,
            lu,
            condition,
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn determinant(&self) -> f64 {
        self.lu.as_ref().map_or(0.0, Lu::determinant)
    }

    pub fn is_nondegenerate(&self) -> bool {
        self.lu.is_some() && self.condition.is_finite() && self.condition <= CONDITION_LIMIT
    }

    pub fn apply(&self, x: &DVector<f64>) -> Covector {
        Covector(&self.matrix * x)
    }

    /// The unique `X` with `flat(X) = rhs`.
    pub fn solve(&self, rhs: &Covector) -> Result<DVector<f64>, GeometryError> {
        if rhs.dim() != self.dim() {
            return Err(GeometryError::DimensionMismatch {
                expected: self.dim(),
                found: rhs.dim(),
            });
        }
        let lu = match &self.lu {
            Some(lu) if self.is_nondegenerate() => lu,
            _ => {
                return Err(GeometryError::DegenerateStructure {
                    condition: self.condition,
                })
            }
        };
        let mut x = lu.solve(&rhs.0);
        // one round of iterative refinement
        let r = &rhs.0 - &self.matrix * &x;
        x += lu.solve(&r);
        let residual = (&self.matrix * &x - &rhs.0).norm();
        if !(residual <= 1e-10 * (1.0 + rhs.0.norm())) {
            return Err(GeometryError::DegenerateStructure {
                condition: self.condition,
            });
        }
        Ok(x)
    }
}

/// Reeb fields `R_k` with `i_{R_k} omega = 0` and `eta_j(R_k) = delta_jk`,
/// obtained as `R_k = flat^{-1}(eta_k)`.
pub fn reeb_family(op: &FlatOperator, etas: &[Covector]) -> Result<Vec<DVector<f64>>, GeometryError> {
    etas.iter().map(|eta| op.solve(eta)).collect()
}

/// A 2-form together with `p` one-forms: a partially cosymplectic
/// structure of order `p` at a point.
#[derive(Debug, Clone)]
pub struct PartiallyCosymplectic {
    pub omega: TwoFormMatrix,
    pub etas: Vec<Covector>,
}

impl PartiallyCosymplectic {
    pub fn new(omega: TwoFormMatrix, etas: Vec<Covector>) -> Self {
        PartiallyCosymplectic { omega, etas }
    }

    pub fn order(&self) -> usize {
        self.etas.len()
    }

    pub fn flat(&self) -> Result<FlatOperator, GeometryError> {
        FlatOperator::new(&self.omega, &self.etas)
    }

    pub fn reeb_fields(&self) -> Result<Vec<DVector<f64>>, GeometryError> {
        reeb_family(&self.flat()?, &self.etas)
    }

    /// `[eta_j(X_k)]` for a family of vectors.
    pub fn pairing_matrix(&self, fields: &[DVector<f64>]) -> DMatrix<f64> {
        DMatrix::from_fn(self.etas.len(), fields.len(), |j, k| self.etas[j].pair(&fields[k]))
    }

    /// Evolution field of a function with differential `df` subject to the
    /// force `force`: `flat(E) = df + sum_k eta_k - force`.
    pub fn evolution_field(&self, df: &Covector, force: &Covector) -> Result<DVector<f64>, GeometryError> {
        let mut rhs = &df.0 - &force.0;
        for eta in &self.etas {
            rhs += &eta.0;
        }
        self.flat()?.solve(&Covector(rhs))
    }
}
