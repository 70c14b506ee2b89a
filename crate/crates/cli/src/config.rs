//! Scenario files.
//!
//! A scenario is a TOML document with one table per concern:
//!
//! ```toml
//! name = "damped-oscillator"
//! description = "Linear oscillator with viscous friction"
//!
//! [system]
//! class = "simple-closed"      # mass-transfer, non-simple, open-simple
//! n = 1
//! hamiltonian = "p^2/2 + q^2/2 + T0*S"   # or `lagrangian = "..."`
//!
//! [parameters]
//! T0 = 1.0
//! lambda = 0.1
//!
//! [forces]
//! friction = [["-lambda*p"]]   # one list of n components per eta form
//! external = ["0"]             # optional, n components
//!
//! [fluxes]
//! matter = [{ from = 1, to = 2, expr = "0.1*(N1 - N2)" }]
//! heat = [{ from = 1, to = 2, expr = "-kappa" }]
//! ports = [{ flow = "...", potential = "...", temperature = "...", entropy = "..." }]
//! sources = [{ entropy_flow = "...", temperature = "..." }]
//!
//! [initial]
//! state = { q = 1.0, p = 0.0, S = 0.0 }
//! perturbation = 0.0           # uniform noise amplitude, drawn from --seed
//!
//! [integrator]
//! scheme = "rk4"               # or "rk45"
//! dt = 1e-3
//! t_end = 10.0
//!
//! [tolerances]                 # optional overrides of the invariant thresholds
//! energy_balance = 1e-7
//!
//! [output]                     # optional file names, relative to --out
//! csv = "damped-oscillator.csv"
//! report = "damped-oscillator.report.toml"
//! ```
//!
//! Flux indices are 1-based. Only one orientation of each matter or heat
//! pair may be listed; the other is implied by antisymmetry (matter) or
//! symmetry with zero column sums (heat). Lagrangian scenarios use the
//! velocity names `qdot`, `qdot1`, ... in place of the momenta.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use cosym_core::dynamics::{IntegratorConfig, Scheme, Tolerances};
use cosym_core::legendre::LagrangianSystem;
use cosym_core::systems::{FluxSpec, ForceSpec, PairFlux, PortSpec, SourceSpec};
use cosym_core::{ChartSpec, Error, SystemClass, SystemInstance};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: Option<String>,
    #[serde(default)]
    pub description: String,
    pub system: SystemSection,
    #[serde(default)]
    pub parameters: BTreeMap<String, f64>,
    #[serde(default)]
    pub forces: ForcesSection,
    #[serde(default)]
    pub fluxes: FluxesSection,
    pub initial: InitialSection,
    #[serde(default)]
    pub integrator: IntegratorSection,
    #[serde(default)]
    pub tolerances: ToleranceSection,
    #[serde(default)]
    pub legendre: LegendreSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub class: String,
    pub n: usize,
    pub compartments: Option<usize>,
    pub subsystems: Option<usize>,
    #[serde(default)]
    pub ports: usize,
    #[serde(default)]
    pub sources: usize,
    pub hamiltonian: Option<String>,
    pub lagrangian: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcesSection {
    #[serde(default)]
    pub friction: Vec<Vec<String>>,
    #[serde(default)]
    pub external: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSection {
    pub from: usize,
    pub to: usize,
    pub expr: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PortSection {
    pub flow: String,
    pub potential: String,
    pub temperature: String,
    pub entropy: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSection {
    pub entropy_flow: String,
    pub temperature: String,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluxesSection {
    #[serde(default)]
    pub matter: Vec<PairSection>,
    #[serde(default)]
    pub heat: Vec<PairSection>,
    #[serde(default)]
    pub ports: Vec<PortSection>,
    #[serde(default)]
    pub sources: Vec<SourceSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub state: BTreeMap<String, f64>,
    #[serde(default)]
    pub perturbation: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorSection {
    pub scheme: String,
    pub dt: f64,
    pub t_end: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
}

impl Default for IntegratorSection {
    fn default() -> Self {
        let d = IntegratorConfig::default();
        IntegratorSection {
            scheme: d.scheme.to_string(),
            dt: d.dt,
            t_end: d.t_end,
            rel_tol: d.rel_tol,
            abs_tol: d.abs_tol,
            max_steps: d.max_steps,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSection {
    pub entropy_identity: Option<f64>,
    pub energy_rate: Option<f64>,
    pub energy_balance: Option<f64>,
    pub matter: Option<f64>,
    pub gauge: Option<f64>,
    pub entropy_flow: Option<f64>,
    pub entropy_slack: Option<f64>,
    pub lagrangian: Option<f64>,
    pub entropy_monotone: Option<bool>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LegendreSection {
    /// Gap allowed between the mapped Lagrangian trajectory and the
    /// Hamiltonian one; `--tolerance` takes precedence.
    pub tolerance: f64,
    /// Number of sampled states for the pointwise transport check.
    pub samples: usize,
    /// Half-width of the box around the initial state the samples come from.
    pub radius: f64,
}

impl Default for LegendreSection {
    fn default() -> Self {
        LegendreSection {
            tolerance: 1e-6,
            samples: 200,
            radius: 0.5,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub csv: Option<String>,
    pub report: Option<String>,
}

/// One problem found while loading or validating a scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub code: &'static str,
    pub message: String,
}

impl Diagnostic {
    fn new(code: &'static str, message: impl Into<String>) -> Self {
        Diagnostic {
            code,
            message: message.into(),
        }
    }

    fn from_error(code: &'static str, error: &Error) -> Self {
        let code = match error {
            Error::Expr(_) => "expression",
            Error::InvalidSystem(_) => "system",
            Error::Geometry(_) => "chart",
            _ => code,
        };
        Diagnostic::new(code, error.to_string())
    }
}

/// The dynamical model a scenario describes.
#[derive(Clone)]
pub enum Model {
    Hamiltonian(SystemInstance),
    Lagrangian(Arc<LagrangianSystem>),
}

impl Model {
    pub fn chart(&self) -> &ChartSpec {
        match self {
            Model::Hamiltonian(s) => s.chart(),
            Model::Lagrangian(l) => l.chart(),
        }
    }

    pub fn class(&self) -> SystemClass {
        match self {
            Model::Hamiltonian(s) => s.class(),
            Model::Lagrangian(l) => l.class(),
        }
    }

    /// Names of the state coordinates, in chart order.
    pub fn coordinate_names(&self) -> Vec<String> {
        match self {
            Model::Hamiltonian(s) => s.chart().names().to_vec(),
            Model::Lagrangian(l) => l.velocity_names().to_vec(),
        }
    }

    /// Column name of the energy function.
    pub fn energy_label(&self) -> &'static str {
        match self {
            Model::Hamiltonian(_) => "H",
            Model::Lagrangian(_) => "E_L",
        }
    }

    fn probe(&self, x: &DVector<f64>) -> Result<(), Error> {
        match self {
            Model::Hamiltonian(s) => {
                s.energy(x)?;
                s.forcing(x)?;
            }
            Model::Lagrangian(l) => {
                l.lagrangian_energy(x)?;
                l.forcing(x)?;
            }
        }
        Ok(())
    }
}

/// A loaded scenario: configuration plus the file it came from.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub path: PathBuf,
    pub config: ScenarioConfig,
}

/// A scenario that passed validation, ready to run.
pub struct Prepared {
    pub name: String,
    pub model: Model,
    pub initial: DVector<f64>,
    pub integrator: IntegratorConfig,
    pub tolerances: Tolerances,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, Vec<Diagnostic>> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| vec![Diagnostic::new("io", format!("cannot read {}: {e}", path.display()))])?;
        Scenario::parse(path, &text)
    }

    pub fn parse(path: &Path, text: &str) -> Result<Self, Vec<Diagnostic>> {
        let config: ScenarioConfig =
            toml::from_str(text).map_err(|e| vec![Diagnostic::new("config", e.message().to_string())])?;
        Ok(Scenario {
            path: path.to_path_buf(),
            config,
        })
    }

    /// Scenario name: the `name` key, or the file stem.
    pub fn name(&self) -> String {
        self.config.name.clone().unwrap_or_else(|| {
            self.path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "scenario".into())
        })
    }

    pub fn class(&self) -> Result<SystemClass, Diagnostic> {
        self.config
            .system
            .class
            .parse()
            .map_err(|e: Error| Diagnostic::new("class", e.to_string()))
    }

    fn chart(&self, class: SystemClass) -> Result<ChartSpec, Diagnostic> {
        let s = &self.config.system;
        let (compartments, subsystems) = match class {
            SystemClass::SimpleClosed => (s.compartments.unwrap_or(0), s.subsystems.unwrap_or(0)),
            SystemClass::MassTransfer => (s.compartments.unwrap_or(0), s.subsystems.unwrap_or(0)),
            SystemClass::NonSimple => {
                let p = s.subsystems.unwrap_or(0);
                (s.compartments.unwrap_or(p), p)
            }
            SystemClass::OpenSimple => (s.compartments.unwrap_or(1), s.subsystems.unwrap_or(1)),
        };
        if s.n == 0 {
            return Err(Diagnostic::new("chart", "n must be at least 1"));
        }
        ChartSpec::for_class(class, s.n, compartments, subsystems, s.ports, s.sources)
            .map_err(|e| Diagnostic::new("chart", e.to_string()))
    }

    fn force_spec(&self) -> ForceSpec {
        ForceSpec {
            friction: self.config.forces.friction.clone(),
            external: self.config.forces.external.clone(),
        }
    }

    fn flux_spec(&self) -> Result<FluxSpec, Diagnostic> {
        let f = &self.config.fluxes;
        let pairs = |what: &str, list: &[PairSection]| -> Result<Vec<PairFlux>, Diagnostic> {
            list.iter()
                .map(|p| {
                    if p.from == 0 || p.to == 0 {
                        return Err(Diagnostic::new(
                            "flux",
                            format!("{what} flux indices are 1-based, got ({}, {})", p.from, p.to),
                        ));
                    }
                    Ok(PairFlux {
                        from: p.from - 1,
                        to: p.to - 1,
                        expr: p.expr.clone(),
                    })
                })
                .collect()
        };
        Ok(FluxSpec {
            matter: pairs("matter", &f.matter)?,
            heat: pairs("heat", &f.heat)?,
            ports: f
                .ports
                .iter()
                .map(|p| PortSpec {
                    flow: p.flow.clone(),
                    potential: p.potential.clone(),
                    temperature: p.temperature.clone(),
                    entropy: p.entropy.clone(),
                })
                .collect(),
            sources: f
                .sources
                .iter()
                .map(|s| SourceSpec {
                    entropy_flow: s.entropy_flow.clone(),
                    temperature: s.temperature.clone(),
                })
                .collect(),
        })
    }

    fn model(&self) -> Result<Model, Diagnostic> {
        let class = self.class()?;
        let chart = self.chart(class)?;
        let flux = self.flux_spec()?;
        let forces = self.force_spec();
        let params = &self.config.parameters;
        match (&self.config.system.hamiltonian, &self.config.system.lagrangian) {
            (Some(h), None) => SystemInstance::from_expressions(class, chart, h, params, &forces, &flux)
                .map(Model::Hamiltonian)
                .map_err(|e| Diagnostic::from_error("system", &e)),
            (None, Some(l)) => LagrangianSystem::from_expressions(class, chart, l, params, &forces, &flux)
                .map(|l| Model::Lagrangian(Arc::new(l)))
                .map_err(|e| Diagnostic::from_error("system", &e)),
            (Some(_), Some(_)) => Err(Diagnostic::new(
                "model",
                "give exactly one of `hamiltonian` and `lagrangian`, not both",
            )),
            (None, None) => Err(Diagnostic::new("model", "one of `hamiltonian` or `lagrangian` is required")),
        }
    }

    fn initial_state(&self, names: &[String]) -> Result<DVector<f64>, Vec<Diagnostic>> {
        let given = &self.config.initial.state;
        let mut problems = Vec::new();
        for name in given.keys() {
            if !names.contains(name) {
                problems.push(Diagnostic::new(
                    "initial-state",
                    format!("unknown coordinate `{name}` (chart has {})", names.join(", ")),
                ));
            }
        }
        let missing: Vec<&str> = names
            .iter()
            .filter(|n| !given.contains_key(*n))
            .map(String::as_str)
            .collect();
        if !missing.is_empty() {
            problems.push(Diagnostic::new(
                "initial-state",
                format!(
                    "initial state has {} of {} coordinates; missing {}",
                    names.len() - missing.len(),
                    names.len(),
                    missing.join(", ")
                ),
            ));
        }
        for (name, v) in given {
            if !v.is_finite() {
                problems.push(Diagnostic::new("initial-state", format!("`{name}` is not finite")));
            }
        }
        let p = self.config.initial.perturbation;
        if !(p.is_finite() && p >= 0.0) {
            problems.push(Diagnostic::new("initial-state", "perturbation must be finite and nonnegative"));
        }
        if !problems.is_empty() {
            return Err(problems);
        }
        Ok(DVector::from_iterator(names.len(), names.iter().map(|n| given[n])))
    }

    fn integrator(&self) -> Result<IntegratorConfig, Diagnostic> {
        let s = &self.config.integrator;
        let scheme: Scheme = s.scheme.parse().map_err(|e: String| Diagnostic::new("integrator", e))?;
        let cfg = IntegratorConfig {
            scheme,
            dt: s.dt,
            rel_tol: s.rel_tol,
            abs_tol: s.abs_tol,
            t_end: s.t_end,
            max_steps: s.max_steps,
        };
        cfg.validate().map_err(|e| Diagnostic::new("integrator", e))?;
        Ok(cfg)
    }

    fn tolerances(&self) -> Result<Tolerances, Diagnostic> {
        let t = &self.config.tolerances;
        let d = Tolerances::default();
        let pick = |name: &str, v: Option<f64>, default: f64| -> Result<f64, Diagnostic> {
            match v {
                Some(v) if !(v.is_finite() && v > 0.0) => {
                    Err(Diagnostic::new("tolerances", format!("`{name}` must be positive, got {v}")))
                }
                Some(v) => Ok(v),
                None => Ok(default),
            }
        };
        Ok(Tolerances {
            entropy_identity: pick("entropy_identity", t.entropy_identity, d.entropy_identity)?,
            energy_rate: pick("energy_rate", t.energy_rate, d.energy_rate)?,
            energy_balance: pick("energy_balance", t.energy_balance, d.energy_balance)?,
            matter: pick("matter", t.matter, d.matter)?,
            gauge: pick("gauge", t.gauge, d.gauge)?,
            entropy_flow: pick("entropy_flow", t.entropy_flow, d.entropy_flow)?,
            entropy_slack: pick("entropy_slack", t.entropy_slack, d.entropy_slack)?,
            lagrangian: pick("lagrangian", t.lagrangian, d.lagrangian)?,
            entropy_monotone: t.entropy_monotone,
        })
    }

    /// Full static validation. Every independent problem is reported.
    pub fn prepare(&self, seed: u64) -> Result<Prepared, Vec<Diagnostic>> {
        let mut problems = Vec::new();
        let model = self.model().map_err(|d| problems.push(d)).ok();
        let integrator = self.integrator().map_err(|d| problems.push(d)).ok();
        let tolerances = self.tolerances().map_err(|d| problems.push(d)).ok();
        let legendre = &self.config.legendre;
        if !(legendre.tolerance.is_finite() && legendre.tolerance > 0.0 && legendre.radius.is_finite() && legendre.radius >= 0.0) {
            problems.push(Diagnostic::new("legendre", "tolerance must be positive and radius nonnegative"));
        }
        let initial = match &model {
            Some(m) => match self.initial_state(&m.coordinate_names()) {
                Ok(x) => Some(x),
                Err(mut d) => {
                    problems.append(&mut d);
                    None
                }
            },
            None => None,
        };
        if let (Some(m), Some(x)) = (&model, &initial) {
            if let Err(e) = m.probe(x) {
                problems.push(Diagnostic::new("initial-state", format!("cannot evaluate the model at the initial state: {e}")));
            }
        }
        match (model, initial, integrator, tolerances) {
            (Some(model), Some(mut initial), Some(integrator), Some(tolerances)) if problems.is_empty() => {
                let amplitude = self.config.initial.perturbation;
                if amplitude > 0.0 {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    for v in initial.iter_mut() {
                        *v += rng.random_range(-amplitude..=amplitude);
                    }
                }
                Ok(Prepared {
                    name: self.name(),
                    model,
                    initial,
                    integrator,
                    tolerances,
                })
            }
            _ => Err(problems),
        }
    }
}
