//! Numerical engine for thermodynamic systems described by partially
//! cosymplectic structures.
//!
//! The crate is organised bottom-up:
//!
//! * [`expr`] parses user expressions and differentiates them exactly;
//! * [`geometry`] holds charts, the two-form, and the musical isomorphism
//!   `X -> i_X w + sum_k eta_k(X) eta_k` together with its inverse;
//! * [`systems`] builds the four system classes (simple closed, internal
//!   mass transfer, non-simple, open) and their evolution vector fields;
//! * [`legendre`] covers the Lagrangian picture and the Legendre map;
//! * [`dynamics`] integrates trajectories and checks invariants along them.

pub mod dynamics;
mod error;
pub mod expr;
pub mod field;
pub mod geometry;
pub mod legendre;
pub mod systems;

pub use error::Error;
pub use geometry::{ChartSpec, Covector, FlatOperator, TwoFormMatrix};
pub use systems::{SystemClass, SystemInstance};

pub type Result<T, E = Error> = std::result::Result<T, E>;
