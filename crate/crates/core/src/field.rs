//! Scalar functions of the state.

use nalgebra::DVector;

use crate::expr::BoundExpr;
use crate::Result;

/// A real function of the state vector; forces and fluxes only need values.
pub trait StateFn: Send + Sync {
    fn value(&self, x: &[f64]) -> Result<f64>;
}

/// A state function with an exact first derivative.
pub trait ScalarField: StateFn {
    fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, DVector<f64>)>;
}

impl StateFn for BoundExpr {
    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.eval(x)?)
    }
}

impl ScalarField for BoundExpr {
    fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, DVector<f64>)> {
        let d = self.eval_dual(x)?;
        Ok((d.value, DVector::from_vec(d.derivs)))
    }
}

/// A constant, mostly useful for zero forces.
#[derive(Debug, Clone, Copy)]
pub struct Constant(pub f64);

impl StateFn for Constant {
    fn value(&self, _x: &[f64]) -> Result<f64> {
        Ok(self.0)
    }
}

/// A map between state charts, used to evaluate terms written in one chart
/// at states of another.
pub trait PointMap: Send + Sync {
    fn map(&self, x: &[f64]) -> Result<Vec<f64>>;
}
