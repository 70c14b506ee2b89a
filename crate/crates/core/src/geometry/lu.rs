//! Dense LU factorisation with partial pivoting for the small systems the
//! flat operator produces.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct Lu {
    factors: DMatrix<f64>,
    perm: Vec<usize>,
    swaps: usize,
}

impl Lu {
    /// Factors `a` as `P a = L U`. Returns `None` when a pivot is exactly zero.
    pub fn factor(a: &DMatrix<f64>) -> Option<Lu> {
        assert!(a.is_square(), "LU of a non-square matrix");
        let n = a.nrows();
        let mut m = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut swaps = 0;
        for col in 0..n {
            let (pivot_row, pivot) = (col..n)
                .map(|r| (r, m[(r, col)].abs()))
                .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot == 0.0 || !pivot.is_finite() {
                return None;
            }
            if pivot_row != col {
                m.swap_rows(pivot_row, col);
                perm.swap(pivot_row, col);
                swaps += 1;
            }
            let diag = m[(col, col)];
            for r in col + 1..n {
                let factor = m[(r, col)] / diag;
                m[(r, col)] = factor;
                if factor != 0.0 {
                    for c in col + 1..n {
                        let u = m[(col, c)];
                        m[(r, c)] -= factor * u;
                    }
                }
            }
        }
        Some(Lu {
            factors: m,
            perm,
            swaps,
        })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.dim();
        let mut x = DVector::from_iterator(n, self.perm.iter().map(|&p| b[p]));
        for r in 0..n {
            let mut acc = x[r];
            for c in 0..r {
                acc -= self.factors[(r, c)] * x[c];
            }
            x[r] = acc;
        }
        for r in (0..n).rev() {
            let mut acc = x[r];
            for c in r + 1..n {
                acc -= self.factors[(r, c)] * x[c];
            }
            x[r] = acc / self.factors[(r, r)];
        }
        x
    }

    pub fn determinant(&self) -> f64 {
        let sign = if self.swaps % 2 == 0 { 1.0 } else { -1.0 };
        sign * self.factors.diagonal().product()
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut inv = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut e = DVector::zeros(n);
            e[j] = 1.0;
            inv.set_column(j, &self.solve(&e));
        }
        inv
    }
}

/// Induced 1-norm (max absolute column sum).
pub fn norm1(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}
