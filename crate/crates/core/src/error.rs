use thiserror::Error;

use crate::expr::ExprError;
use crate::geometry::GeometryError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("temperature vanishes for entropy coordinate `{coordinate}`: the structure degenerates")]
    TemperatureDegenerate { coordinate: String },
    #[error("invalid system: {0}")]
    InvalidSystem(String),
    #[error("singular Legendre map at {state:?}: velocity Hessian condition {condition:e}")]
    SingularLegendre { state: Vec<f64>, condition: f64 },
    #[error("Newton inversion of the Legendre map did not converge (last velocity {last_iterate:?}, residual {residual:e})")]
    NewtonDivergence {
        last_iterate: Vec<f64>,
        residual: f64,
    },
    #[error("state dimension {found} does not match chart dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },
}

impl Error {
    /// True for failures that mark a physical boundary of the state space
    /// (vanishing temperature, degenerate structure) rather than bad input.
    pub fn is_degeneracy(&self) -> bool {
        matches!(
            self,
            Error::TemperatureDegenerate { .. }
                | Error::Geometry(GeometryError::DegenerateStructure { .. })
        )
    }
}
