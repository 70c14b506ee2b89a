//! Partially cosymplectic structures of order `p` in one global chart.
//!
//! All quantities are dimensionless internal units: the musical isomorphism
//! adds `i_X omega` and `eta(X) eta` componentwise even though the two
//! terms carry different physical dimensions.

mod chart;
mod flat;
mod form;
pub mod lu;

pub use chart::ChartSpec;
pub use flat::{reeb_family, FlatOperator, PartiallyCosymplectic, CONDITION_LIMIT};
pub use form::{Covector, TwoFormMatrix};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("chart does not fit class {class}: {reason}")]
    LayoutMismatch { class: String, reason: String },
    #[error("degenerate structure: flat operator condition number {condition:e} exceeds the limit")]
    DegenerateStructure { condition: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not antisymmetric (defect {defect:e})")]
    NotAntisymmetric { defect: f64 },
}
