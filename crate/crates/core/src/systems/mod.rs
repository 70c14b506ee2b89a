//! The four thermodynamic system classes and their evolution vector fields.
//!
//! A [`SystemInstance`] evaluates, at a given state, the eta forms and the
//! right-hand side `dH + c sum_k eta_k - F^ext` (with `c = 1` except for the
//! open class), then solves `flat(E) = rhs` for the evolution field `E`.
//! [`SystemInstance::explicit_rhs_oracle`] writes the same field out in
//! closed form, without any linear algebra, and serves as a cross-check.

mod forcing;
pub(crate) mod kernel;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DVector;

use crate::expr::{BoundExpr, Vocabulary};
use crate::field::{PointMap, ScalarField};
use crate::geometry::{ChartSpec, Covector, FlatOperator, TwoFormMatrix};
use crate::{Error, Result};

pub use forcing::{
    FluxSpec, ForceSpec, Forces, Fluxes, ForcingValues, PairFlux, Port, PortSpec, PortValues, Source,
    SourceSpec, SourceValues, Term,
};
pub use kernel::PointData;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SystemClass {
    SimpleClosed,
    MassTransfer,
    NonSimple,
    OpenSimple,
}

impl SystemClass {
    pub const ALL: [SystemClass; 4] = [
        SystemClass::SimpleClosed,
        SystemClass::MassTransfer,
        SystemClass::NonSimple,
        SystemClass::OpenSimple,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SystemClass::SimpleClosed => "simple-closed",
            SystemClass::MassTransfer => "mass-transfer",
            SystemClass::NonSimple => "non-simple",
            SystemClass::OpenSimple => "open-simple",
        }
    }

    /// Number of eta forms (the order of the structure).
    pub fn eta_count(self, chart: &ChartSpec) -> usize {
        match self {
            SystemClass::NonSimple => chart.subsystems(),
            _ => 1,
        }
    }

    /// Coordinates the Hamiltonian may not depend on.
    pub fn excluded_from_hamiltonian(self, chart: &ChartSpec) -> Vec<String> {
        let names = chart.names();
        let mut excluded: Vec<String> = names[chart.w_range()].to_vec();
        if matches!(self, SystemClass::NonSimple | SystemClass::OpenSimple) {
            excluded.extend_from_slice(&names[chart.gamma_range()]);
            excluded.extend_from_slice(&names[chart.sigma_range()]);
        }
        excluded
    }
}

impl fmt::Display for SystemClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SystemClass {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        SystemClass::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| {
                Error::InvalidSystem(format!(
                    "unknown system class `{s}` (expected one of simple-closed, mass-transfer, non-simple, open-simple)"
                ))
            })
    }
}

/// Which temperature divides the entropy equation of subsystem `k` in the
/// closed-form non-simple equations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EntropyDivisor {
    /// `dS_k/dt` is divided by the temperature of subsystem `k`.
    #[default]
    OwnSubsystem,
    /// Every `dS_k/dt` is divided by the temperature of one fixed subsystem.
    Reference(usize),
}

/// Everything evaluated at one state on the Hamiltonian side.
#[derive(Debug, Clone)]
pub struct StateTerms {
    pub energy: f64,
    pub gradient: DVector<f64>,
    pub data: PointData,
}

/// One system of a given class, ready to be evaluated at states.
#[derive(Clone)]
pub struct SystemInstance {
    class: SystemClass,
    chart: ChartSpec,
    hamiltonian: Arc<dyn ScalarField>,
    forces: Forces,
    fluxes: Fluxes,
    two_form: TwoFormMatrix,
    term_map: Option<Arc<dyn PointMap>>,
}

impl fmt::Debug for SystemInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemInstance")
            .field("class", &self.class)
            .field("chart", &self.chart.names())
            .finish_non_exhaustive()
    }
}

impl SystemInstance {
    pub fn new(
        class: SystemClass,
        chart: ChartSpec,
        hamiltonian: Arc<dyn ScalarField>,
        forces: Forces,
        fluxes: Fluxes,
    ) -> Result<Self> {
        let two_form = TwoFormMatrix::build(&chart, class)?;
        check_terms(class, &chart, &forces, &fluxes)?;
        Ok(SystemInstance {
            class,
            chart,
            hamiltonian,
            forces,
            fluxes,
            two_form,
            term_map: None,
        })
    }

    /// Builds a system from expression strings over the chart coordinates
    /// and the given parameters.
    pub fn from_expressions(
        class: SystemClass,
        chart: ChartSpec,
        hamiltonian: &str,
        parameters: &BTreeMap<String, f64>,
        forces: &ForceSpec,
        fluxes: &FluxSpec,
    ) -> Result<Self> {
        chart.check_class(class)?;
        let vocab = Vocabulary::new(chart.names().to_vec(), parameters.clone());
        let h = BoundExpr::compile(hamiltonian, &vocab)?;
        if let Some(name) = class
            .excluded_from_hamiltonian(&chart)
            .into_iter()
            .find(|name| h.references(name))
        {
            return Err(Error::InvalidSystem(format!(
                "the Hamiltonian of a {class} system must be independent of `{name}`; it may depend on q, p, N and S only"
            )));
        }
        let forces = Forces::compile(forces, chart.n(), class.eta_count(&chart), &vocab)?;
        let fluxes = Fluxes::compile(fluxes, chart.compartments(), chart.subsystems(), &vocab)?;
        SystemInstance::new(class, chart, Arc::new(h), forces, fluxes)
    }

    /// Evaluates forces and fluxes at `map(x)` instead of `x`.
    pub fn with_term_map(mut self, map: Arc<dyn PointMap>) -> Self {
        self.term_map = Some(map);
        self
    }

    pub fn class(&self) -> SystemClass {
        self.class
    }

    pub fn chart(&self) -> &ChartSpec {
        &self.chart
    }

    pub fn two_form(&self) -> &TwoFormMatrix {
        &self.two_form
    }

    pub fn hamiltonian(&self) -> &Arc<dyn ScalarField> {
        &self.hamiltonian
    }

    fn check_dim(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.chart.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.chart.dim(),
                found: x.len(),
            });
        }
        Ok(())
    }

    pub fn forcing(&self, x: &DVector<f64>) -> Result<ForcingValues> {
        self.check_dim(x)?;
        let mapped;
        let point = match &self.term_map {
            Some(map) => {
                mapped = map.map(x.as_slice())?;
                mapped.as_slice()
            }
            None => x.as_slice(),
        };
        ForcingValues::evaluate(
            &self.forces,
            &self.fluxes,
            self.chart.compartments(),
            self.chart.subsystems(),
            point,
        )
    }

    pub fn state_terms(&self, x: &DVector<f64>) -> Result<StateTerms> {
        self.check_dim(x)?;
        let (energy, gradient) = self.hamiltonian.value_and_gradient(x.as_slice())?;
        let data = PointData {
            temperatures: self.chart.s_range().map(|i| gradient[i]).collect(),
            potentials: self.chart.n_range().map(|i| gradient[i]).collect(),
            forcing: self.forcing(x)?,
        };
        Ok(StateTerms {
            energy,
            gradient,
            data,
        })
    }

    pub fn energy(&self, x: &DVector<f64>) -> Result<f64> {
        self.check_dim(x)?;
        self.hamiltonian.value(x.as_slice())
    }

    /// Temperatures `dH/dS_*` in S-block order.
    pub fn temperatures(&self, x: &DVector<f64>) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let (_, g) = self.hamiltonian.value_and_gradient(x.as_slice())?;
        Ok(self.chart.s_range().map(|i| g[i]).collect())
    }

    pub fn build_etas(&self, x: &DVector<f64>) -> Result<Vec<Covector>> {
        let terms = self.state_terms(x)?;
        Ok(kernel::etas(&self.chart, self.class, &terms.data))
    }

    pub fn assemble_rhs(&self, x: &DVector<f64>) -> Result<Covector> {
        let terms = self.state_terms(x)?;
        let etas = kernel::etas(&self.chart, self.class, &terms.data);
        Ok(kernel::rhs(&self.chart, self.class, &terms.gradient, &etas, &terms.data))
    }

    pub fn flat_operator(&self, x: &DVector<f64>) -> Result<FlatOperator> {
        Ok(FlatOperator::new(&self.two_form, &self.build_etas(x)?)?)
    }

    /// The evolution field together with the state terms it was built from.
    pub fn evolution_field_with_terms(&self, x: &DVector<f64>) -> Result<(DVector<f64>, StateTerms)> {
        let terms = self.state_terms(x)?;
        kernel::check_temperatures(&self.chart, &terms.data.temperatures)?;
        let etas = kernel::etas(&self.chart, self.class, &terms.data);
        let rhs = kernel::rhs(&self.chart, self.class, &terms.gradient, &etas, &terms.data);
        let flat = FlatOperator::new(&self.two_form, &etas)?;
        Ok((flat.solve(&rhs)?, terms))
    }

    /// Solves `flat(E) = dH + c sum_k eta_k - F^ext` at `x`.
    pub fn evolution_field(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.evolution_field_with_terms(x)?.0)
    }

    pub fn explicit_rhs_oracle(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.explicit_rhs_oracle_with(x, EntropyDivisor::OwnSubsystem)
    }

    /// The closed-form equations of motion of the class.
    pub fn explicit_rhs_oracle_with(&self, x: &DVector<f64>, divisor: EntropyDivisor) -> Result<DVector<f64>> {
        let StateTerms { gradient: dh, data, .. } = self.state_terms(x)?;
        kernel::check_temperatures(&self.chart, &data.temperatures)?;
        let c = &self.chart;
        let f = &data.forcing;
        let t = &data.temperatures;
        let mu = &data.potentials;
        let mut out = DVector::zeros(c.dim());

        let friction = f.total_friction();
        let mut qdot = DVector::zeros(c.n());
        for (k, (i, j)) in c.q_range().zip(c.p_range()).enumerate() {
            qdot[k] = dh[j];
            out[i] = dh[j];
            out[j] = -dh[i] + friction[k] + f.external[k];
        }
        let power = |fr: &DVector<f64>| qdot.dot(fr);
        let s = c.s_range().start;
        match self.class {
            SystemClass::SimpleClosed | SystemClass::MassTransfer => {
                let mut matter = 0.0;
                for (k, (w, nk)) in c.w_range().zip(c.n_range()).enumerate() {
                    out[w] = mu[k];
                    out[nk] = f.matter[k];
                    matter += f.matter[k] * mu[k];
                }
                out[s] = -(power(&f.friction[0]) + matter) / t[0];
            }
            SystemClass::NonSimple => {
                let p = c.subsystems();
                for k in 0..p {
                    out[c.w_range().start + k] = mu[k];
                    out[c.n_range().start + k] = f.matter[k];
                    out[c.gamma_range().start + k] = t[k];
                    let heat: f64 = (0..p).map(|a| t[a] * f.heat[(k, a)]).sum();
                    let divide_by = match divisor {
                        EntropyDivisor::OwnSubsystem => t[k],
                        EntropyDivisor::Reference(r) => t[r],
                    };
                    let sdot = -(power(&f.friction[k]) + f.matter[k] * mu[k] + heat) / divide_by;
                    out[s + k] = sdot;
                    out[c.sigma_range().start + k] = sdot;
                }
            }
            SystemClass::OpenSimple => {
                let inflow = f.entropy_inflow();
                out[c.w_range().start] = mu[0];
                out[c.n_range().start] = f.port_inflow();
                out[c.gamma_range().start] = t[0];
                let sigma_dot = -(power(&f.friction[0]) + f.port_inflow() * mu[0] + inflow * t[0]
                    - f.exchange_power())
                    / t[0];
                out[c.sigma_range().start] = sigma_dot;
                out[s] = sigma_dot + inflow;
            }
        }
        Ok(out)
    }

    /// Residual of the entropy balance, one entry per eta form.
    pub fn entropy_identity_residual(&self, x: &DVector<f64>, xdot: &DVector<f64>) -> Result<Vec<f64>> {
        let terms = self.state_terms(x)?;
        Ok(kernel::entropy_residuals(&self.chart, self.class, &terms.data, xdot))
    }

    /// `dH(X) - (supplied power)`, zero along the evolution field.
    pub fn energy_rate_residual(&self, x: &DVector<f64>, xdot: &DVector<f64>) -> Result<f64> {
        let terms = self.state_terms(x)?;
        Ok(terms.gradient.dot(xdot) - kernel::supplied_power(&self.chart, self.class, &terms.data, xdot))
    }

    /// Power delivered by external forces and, for open systems, the ports
    /// and heat sources.
    pub fn supplied_power(&self, x: &DVector<f64>, xdot: &DVector<f64>) -> Result<f64> {
        let terms = self.state_terms(x)?;
        Ok(kernel::supplied_power(&self.chart, self.class, &terms.data, xdot))
    }

    /// Per-state diagnostics recorded along trajectories.
    pub fn diagnostics(&self, x: &DVector<f64>, xdot: &DVector<f64>) -> Result<BTreeMap<String, f64>> {
        let terms = self.state_terms(x)?;
        let power = kernel::supplied_power(&self.chart, self.class, &terms.data, xdot);
        let mut d = state_diagnostics(&self.chart, self.class, &terms.data, x, xdot);
        d.insert("energy_rate_residual".into(), terms.gradient.dot(xdot) - power);
        Ok(d)
    }
}

/// Checks that compiled forces and fluxes fit the class and chart.
pub(crate) fn check_terms(class: SystemClass, chart: &ChartSpec, forces: &Forces, fluxes: &Fluxes) -> Result<()> {
    let n = chart.n();
    let etas = class.eta_count(chart);
    if forces.friction.len() != etas || forces.friction.iter().any(|f| f.len() != n) {
        return Err(Error::InvalidSystem(format!(
            "expected {etas} friction force(s) with {n} components each"
        )));
    }
    if forces.external.len() != n {
        return Err(Error::InvalidSystem(format!(
            "external force has {} components, expected {n}",
            forces.external.len()
        )));
    }
    if class != SystemClass::MassTransfer && class != SystemClass::NonSimple && !fluxes.matter.is_empty() {
        return Err(Error::InvalidSystem(format!(
            "matter fluxes between compartments are not part of the {class} class"
        )));
    }
    if fluxes
        .matter
        .iter()
        .any(|(l, k, _)| l >= k || *k >= chart.compartments())
    {
        return Err(Error::InvalidSystem("matter flux index out of range".into()));
    }
    if class != SystemClass::NonSimple && !fluxes.heat.is_empty() {
        return Err(Error::InvalidSystem(format!(
            "heat fluxes between subsystems are not part of the {class} class"
        )));
    }
    if fluxes
        .heat
        .iter()
        .any(|(a, b, _)| a >= b || *b >= chart.subsystems())
    {
        return Err(Error::InvalidSystem("heat flux index out of range".into()));
    }
    if fluxes.ports.len() != chart.ports() || fluxes.sources.len() != chart.sources() {
        return Err(Error::InvalidSystem(format!(
            "chart declares {} port(s) and {} source(s), {} and {} given",
            chart.ports(),
            chart.sources(),
            fluxes.ports.len(),
            fluxes.sources.len()
        )));
    }
    Ok(())
}

fn suffixed(stem: &str, k: usize, count: usize) -> String {
    if count == 1 {
        stem.to_string()
    } else {
        format!("{stem}_{}", k + 1)
    }
}

/// Diagnostics that depend only on the point data and the velocity; the
/// energy-rate residual is added by the caller, which knows the energy.
pub(crate) fn state_diagnostics(
    chart: &ChartSpec,
    class: SystemClass,
    data: &PointData,
    x: &DVector<f64>,
    xdot: &DVector<f64>,
) -> BTreeMap<String, f64> {
    let mut d = BTreeMap::new();
    let residuals = kernel::entropy_residuals(chart, class, data, xdot);
    let count = residuals.len();
    for (k, r) in residuals.into_iter().enumerate() {
        d.insert(suffixed("entropy_residual", k, count), r);
    }
    d.insert("supplied_power".into(), kernel::supplied_power(chart, class, data, xdot));
    d.insert("total_entropy".into(), chart.s_range().map(|i| x[i]).sum());
    d.insert("entropy_rate".into(), chart.s_range().map(|i| xdot[i]).sum());
    d.insert(
        "min_abs_temperature".into(),
        data.temperatures.iter().fold(f64::INFINITY, |m, t| m.min(t.abs())),
    );
    if chart.compartments() > 0 {
        d.insert("total_matter".into(), chart.n_range().map(|i| x[i]).sum());
    }
    let p = chart.subsystems();
    for k in 0..p {
        let gap = x[chart.s_range().start + k] - x[chart.sigma_range().start + k];
        d.insert(suffixed("gauge_gap", k, p), gap);
    }
    if class == SystemClass::OpenSimple {
        let inflow = kernel::entropy_inflow(class, data);
        d.insert("entropy_inflow".into(), inflow);
        let s = xdot[chart.s_range().start] - xdot[chart.sigma_range().start];
        d.insert("entropy_flow_residual".into(), s - inflow);
    }
    d
}
