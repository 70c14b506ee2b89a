//! Time integration of evolution fields and invariant checks along the
//! resulting trajectories.
//!
//! Besides the state, the integrators carry two quadratures with the same
//! Runge-Kutta stages: the work done on the system (external forces plus
//! exchange power) and the entropy brought in through ports and heat
//! sources. Balance laws are then checked against these integrals instead
//! of against differenced time series.

mod integrate;
mod invariants;

use std::collections::BTreeMap;

use nalgebra::DVector;

use crate::geometry::ChartSpec;
use crate::legendre::LagrangianSystem;
use crate::systems::{kernel, state_diagnostics, SystemClass, SystemInstance};
use crate::{Error, Result};

pub use integrate::{integrate, IntegrationError, IntegrationFailure, IntegratorConfig, Scheme};
pub use invariants::{check_invariants, InvariantEntry, InvariantReport, Tolerances};

/// Rates integrated alongside the state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Rates {
    /// Power supplied by external forces and exchanges.
    pub power: f64,
    /// Entropy inflow from outside the system.
    pub entropy_inflow: f64,
}

/// Anything with an evolution field that can be integrated and monitored.
pub trait EvolutionSystem: Sync {
    fn class(&self) -> SystemClass;
    /// The chart whose block ranges describe the state vector.
    fn chart(&self) -> &ChartSpec;
    fn coordinate_names(&self) -> Vec<String>;
    /// The energy function whose evolution field is integrated.
    fn energy(&self, x: &DVector<f64>) -> Result<f64>;
    fn field_and_rates(&self, x: &DVector<f64>) -> Result<(DVector<f64>, Rates)>;
    fn diagnostics(&self, x: &DVector<f64>, xdot: &DVector<f64>) -> Result<BTreeMap<String, f64>>;

    fn dim(&self) -> usize {
        self.chart().dim()
    }

    fn field(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.field_and_rates(x)?.0)
    }
}

impl EvolutionSystem for SystemInstance {
    fn class(&self) -> SystemClass {
        SystemInstance::class(self)
    }

    fn chart(&self) -> &ChartSpec {
        SystemInstance::chart(self)
    }

    fn coordinate_names(&self) -> Vec<String> {
        self.chart().names().to_vec()
    }

    fn energy(&self, x: &DVector<f64>) -> Result<f64> {
        SystemInstance::energy(self, x)
    }

    fn field_and_rates(&self, x: &DVector<f64>) -> Result<(DVector<f64>, Rates)> {
        let (xdot, terms) = self.evolution_field_with_terms(x)?;
        let class = SystemInstance::class(self);
        let chart = SystemInstance::chart(self);
        let rates = Rates {
            power: kernel::supplied_power(chart, class, &terms.data, &xdot),
            entropy_inflow: kernel::entropy_inflow(class, &terms.data),
        };
        Ok((xdot, rates))
    }

    fn diagnostics(&self, x: &DVector<f64>, xdot: &DVector<f64>) -> Result<BTreeMap<String, f64>> {
        SystemInstance::diagnostics(self, x, xdot)
    }
}

impl EvolutionSystem for LagrangianSystem {
    fn class(&self) -> SystemClass {
        LagrangianSystem::class(self)
    }

    fn chart(&self) -> &ChartSpec {
        LagrangianSystem::chart(self)
    }

    fn coordinate_names(&self) -> Vec<String> {
        self.velocity_names().to_vec()
    }

    fn energy(&self, x: &DVector<f64>) -> Result<f64> {
        self.lagrangian_energy(x)
    }

    fn field_and_rates(&self, x: &DVector<f64>) -> Result<(DVector<f64>, Rates)> {
        let (xdot, data) = self.evolution_field_with_data(x)?;
        let class = LagrangianSystem::class(self);
        let chart = LagrangianSystem::chart(self);
        let rates = Rates {
            power: kernel::supplied_power(chart, class, &data, &xdot),
            entropy_inflow: kernel::entropy_inflow(class, &data),
        };
        Ok((xdot, rates))
    }

    fn diagnostics(&self, x: &DVector<f64>, xdot: &DVector<f64>) -> Result<BTreeMap<String, f64>> {
        let class = LagrangianSystem::class(self);
        let chart = LagrangianSystem::chart(self);
        let data = self.point_data(x)?;
        let mut d = state_diagnostics(chart, class, &data, x, xdot);
        let power = kernel::supplied_power(chart, class, &data, xdot);
        d.insert(
            "energy_rate_residual".into(),
            self.energy_gradient(x)?.dot(xdot) - power,
        );
        d.extend(self.corollary_residuals(x, xdot)?);
        Ok(d)
    }
}

/// A time series of states with per-step diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub class: SystemClass,
    pub names: Vec<String>,
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    /// Energy function value at each step.
    pub energy: Vec<f64>,
    /// Accumulated supplied work since `t = 0`.
    pub work: Vec<f64>,
    /// Accumulated entropy inflow since `t = 0`.
    pub entropy_supplied: Vec<f64>,
    pub diagnostics: Vec<BTreeMap<String, f64>>,
    /// Set when integration stopped early at a degenerate state.
    pub halt: Option<Halt>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Halt {
    /// Time of the last accepted state.
    pub time: f64,
    pub reason: Error,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> Option<&DVector<f64>> {
        self.states.last()
    }

    pub fn is_halted(&self) -> bool {
        self.halt.is_some()
    }

    /// Values of one coordinate over time.
    pub fn series(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.names.iter().position(|n| n == name)?;
        Some(self.states.iter().map(|x| x[i]).collect())
    }

    /// Values of one diagnostic over time.
    pub fn diagnostic_series(&self, key: &str) -> Option<Vec<f64>> {
        self.diagnostics.iter().map(|d| d.get(key).copied()).collect()
    }

    /// Union of the diagnostic keys, sorted.
    pub fn diagnostic_keys(&self) -> Vec<String> {
        let mut keys: Vec<String> = self
            .diagnostics
            .iter()
            .flat_map(|d| d.keys().cloned())
            .collect();
        keys.sort();
        keys.dedup();
        keys
    }
}
