use std::ops::{Index, IndexMut};

use nalgebra::{DMatrix, DVector};

use super::{ChartSpec, GeometryError};
use crate::systems::SystemClass;

/// A 1-form in the chart basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Covector(pub DVector<f64>);

impl Covector {
    pub fn zeros(dim: usize) -> Self {
        Covector(DVector::zeros(dim))
    }

    pub fn from_vec(components: Vec<f64>) -> Self {
        Covector(DVector::from_vec(components))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn components(&self) -> &DVector<f64> {
        &self.0
    }

    /// `<alpha, X> = sum_i alpha_i X^i`.
    pub fn pair(&self, x: &DVector<f64>) -> f64 {
        self.0.dot(x)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, factor: f64) -> Covector {
        Covector(&self.0 * factor)
    }
}

impl Index<usize> for Covector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for Covector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

/// Coordinate matrix `W` of a 2-form, `omega(X, Y) = X^T W Y`, so that
/// `(i_X omega)_j = sum_i X^i W_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoFormMatrix(DMatrix<f64>);

impl TwoFormMatrix {
    /// Darboux form of `class`: `dq^i ^ dp_i + dW^k ^ dN_k + dGamma^A ^ d(S_A - Sigma_A)`.
    pub fn build(chart: &ChartSpec, class: SystemClass) -> Result<Self, GeometryError> {
        chart.check_class(class)?;
        let d = chart.dim();
        let mut w = DMatrix::zeros(d, d);
        let mut pair = |i: usize, j: usize, v: f64| {
            w[(i, j)] = v;
            w[(j, i)] = -v;
        };
        for (q, p) in chart.q_range().zip(chart.p_range()) {
            pair(q, p, 1.0);
        }
        for (wk, nk) in chart.w_range().zip(chart.n_range()) {
            pair(wk, nk, 1.0);
        }
        if chart.subsystems() > 0 {
            for ((g, s), sig) in chart
                .gamma_range()
                .zip(chart.s_range())
                .zip(chart.sigma_range())
            {
                pair(g, s, 1.0);
                pair(g, sig, -1.0);
            }
        }
        Ok(TwoFormMatrix(w))
    }

    /// Wraps a numerically antisymmetric matrix, projecting out the
    /// symmetric part left by roundoff.
    pub fn from_matrix(m: DMatrix<f64>, tolerance: f64) -> Result<Self, GeometryError> {
        if !m.is_square() {
            return Err(GeometryError::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        let asym = (&m + m.transpose()).abs().max();
        if asym > tolerance * (1.0 + m.abs().max()) {
            return Err(GeometryError::NotAntisymmetric { defect: asym });
        }
        Ok(TwoFormMatrix((&m - m.transpose()) * 0.5))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    /// `i_X omega` as a covector.
    pub fn interior(&self, x: &DVector<f64>) -> Covector {
        Covector(self.0.tr_mul(x))
    }

    pub fn eval(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        x.dot(&(&self.0 * y))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_class_darboux_block() {
        let chart = ChartSpec::simple_closed(1);
        let w = TwoFormMatrix::build(&chart, SystemClass::SimpleClosed).unwrap();
        let m = w.matrix();
        assert_eq!(m.nrows(), 3);
        assert_eq!(m[(0, 1)], 1.0);
        assert_eq!(m[(1, 0)], -1.0);
        assert!(m.row(2).iter().chain(m.column(2).iter()).all(|v| *v == 0.0));
    }

    #[test]
    fn interior_product_of_coordinate_fields() {
        // i_{d/dq} omega = dp and i_{d/dp} omega = -dq
        let chart = ChartSpec::simple_closed(1);
        let w = TwoFormMatrix::build(&chart, SystemClass::SimpleClosed).unwrap();
        let dq = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        let dp = DVector::from_vec(vec![0.0, 1.0, 0.0]);
        assert_eq!(w.interior(&dq).0, dp);
        assert_eq!(w.interior(&dp).0, -dq);
    }

    #[test]
    fn non_simple_thermal_block_signs() {
        let chart = ChartSpec::non_simple(1, 1);
        let w = TwoFormMatrix::build(&chart, SystemClass::NonSimple).unwrap();
        let (g, s, sig) = (chart.gamma_range().start, chart.s_range().start, chart.sigma_range().start);
        let m = w.matrix();
        assert_eq!((m[(g, s)], m[(g, sig)]), (1.0, -1.0));
        // i_{d/dSigma} omega = dGamma
        let mut e = DVector::zeros(chart.dim());
        e[sig] = 1.0;
        let mut expected = DVector::zeros(chart.dim());
        expected[g] = 1.0;
        assert_eq!(w.interior(&e).0, expected);
    }

    #[test]
    fn antisymmetric_for_every_class() {
        let cases = [
            (ChartSpec::simple_closed(2), SystemClass::SimpleClosed),
            (ChartSpec::mass_transfer(1, 3), SystemClass::MassTransfer),
            (ChartSpec::non_simple(2, 3), SystemClass::NonSimple),
            (ChartSpec::open_simple(1, 2, 2), SystemClass::OpenSimple),
        ];
        for (chart, class) in cases {
            let w = TwoFormMatrix::build(&chart, class).unwrap();
            assert!((w.matrix() + w.matrix().transpose()).iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn layout_mismatch() {
        let chart = ChartSpec::simple_closed(1);
        assert!(matches!(
            TwoFormMatrix::build(&chart, SystemClass::NonSimple),
            Err(GeometryError::LayoutMismatch { .. })
        ));
    }

    #[test]
    fn from_matrix_rejects_symmetric_part() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(TwoFormMatrix::from_matrix(m, 1e-9).is_err());
    }
}
