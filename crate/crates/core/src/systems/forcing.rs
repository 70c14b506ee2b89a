use std::collections::BTreeSet;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::expr::{BoundExpr, Vocabulary};
use crate::field::{Constant, StateFn};
use crate::{Error, Result};

/// A force coefficient, flux law or port quantity.
pub type Term = Arc<dyn StateFn>;

fn zero() -> Term {
    Arc::new(Constant(0.0))
}

/// Force expressions before compilation.
///
/// `friction` holds one list of `n` coefficients per eta form (one for the
/// simple classes, one per subsystem for the non-simple class). Empty
/// lists mean zero forces.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ForceSpec {
    pub friction: Vec<Vec<String>>,
    pub external: Vec<String>,
}

/// A flux between two distinct indices (0-based). For matter this is the
/// flow `J_{from,to}` into compartment `to`; heat fluxes are symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct PairFlux {
    pub from: usize,
    pub to: usize,
    pub expr: String,
}

/// A matter port: molar inflow, chemical potential, temperature and molar
/// entropy at the port.
#[derive(Debug, Clone, PartialEq)]
pub struct PortSpec {
    pub flow: String,
    pub potential: String,
    pub temperature: String,
    pub entropy: String,
}

/// A heat source: entropy inflow and source temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceSpec {
    pub entropy_flow: String,
    pub temperature: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FluxSpec {
    pub matter: Vec<PairFlux>,
    pub heat: Vec<PairFlux>,
    pub ports: Vec<PortSpec>,
    pub sources: Vec<SourceSpec>,
}

/// Compiled forces.
#[derive(Clone)]
pub struct Forces {
    pub friction: Vec<Vec<Term>>,
    pub external: Vec<Term>,
}

impl Forces {
    pub fn zero(n: usize, etas: usize) -> Self {
        Forces {
            friction: (0..etas).map(|_| (0..n).map(|_| zero()).collect()).collect(),
            external: (0..n).map(|_| zero()).collect(),
        }
    }

    pub fn compile(spec: &ForceSpec, n: usize, etas: usize, vocab: &Vocabulary) -> Result<Self> {
        let list = |exprs: &[String], what: &str| -> Result<Vec<Term>> {
            if exprs.is_empty() {
                return Ok((0..n).map(|_| zero()).collect());
            }
            if exprs.len() != n {
                return Err(Error::InvalidSystem(format!(
                    "{what} has {} components, expected {n}",
                    exprs.len()
                )));
            }
            exprs
                .iter()
                .map(|s| Ok(Arc::new(BoundExpr::compile(s, vocab)?) as Term))
                .collect()
        };
        let friction = match spec.friction.len() {
            0 => (0..etas).map(|_| list(&[], "friction")).collect::<Result<_>>()?,
            k if k == etas => spec
                .friction
                .iter()
                .enumerate()
                .map(|(a, f)| list(f, &format!("friction force {}", a + 1)))
                .collect::<Result<_>>()?,
            k => {
                return Err(Error::InvalidSystem(format!(
                    "{k} friction forces given, the class has {etas} eta forms"
                )))
            }
        };
        Ok(Forces {
            friction,
            external: list(&spec.external, "external force")?,
        })
    }
}

#[derive(Clone)]
pub struct Port {
    pub flow: Term,
    pub potential: Term,
    pub temperature: Term,
    pub entropy: Term,
}

#[derive(Clone)]
pub struct Source {
    pub entropy_flow: Term,
    pub temperature: Term,
}

/// Compiled fluxes. Matter fluxes are stored once per unordered pair as
/// `J_{l,k}` with `l < k`; heat fluxes once per pair `A < B` and read
/// symmetrically, with the diagonal fixed by the zero column sum.
#[derive(Clone, Default)]
pub struct Fluxes {
    pub matter: Vec<(usize, usize, Term)>,
    pub heat: Vec<(usize, usize, Term)>,
    pub ports: Vec<Port>,
    pub sources: Vec<Source>,
}

fn check_pairs(pairs: &[PairFlux], size: usize, what: &str) -> Result<()> {
    let mut seen = BTreeSet::new();
    for p in pairs {
        if p.from >= size || p.to >= size {
            return Err(Error::InvalidSystem(format!(
                "{what} flux ({}, {}) is out of range 1..={size}",
                p.from + 1,
                p.to + 1
            )));
        }
        if p.from == p.to {
            return Err(Error::InvalidSystem(format!(
                "{what} flux ({}, {}) is diagonal; the diagonal is implied",
                p.from + 1,
                p.to + 1
            )));
        }
        let key = (p.from.min(p.to), p.from.max(p.to));
        if !seen.insert(key) {
            return Err(Error::InvalidSystem(format!(
                "{what} flux between {} and {} is given more than once; only one orientation may be supplied",
                key.0 + 1,
                key.1 + 1
            )));
        }
    }
    Ok(())
}

impl Fluxes {
    pub fn compile(spec: &FluxSpec, compartments: usize, subsystems: usize, vocab: &Vocabulary) -> Result<Self> {
        check_pairs(&spec.matter, compartments, "matter")?;
        check_pairs(&spec.heat, subsystems, "heat")?;
        let term = |s: &str| -> Result<Term> { Ok(Arc::new(BoundExpr::compile(s, vocab)?)) };
        let mut matter = Vec::new();
        for p in &spec.matter {
            let t = term(&p.expr)?;
            if p.from < p.to {
                matter.push((p.from, p.to, t));
            } else {
                matter.push((p.to, p.from, Arc::new(Negated(t)) as Term));
            }
        }
        let heat = spec
            .heat
            .iter()
            .map(|p| Ok((p.from.min(p.to), p.from.max(p.to), term(&p.expr)?)))
            .collect::<Result<_>>()?;
        let ports = spec
            .ports
            .iter()
            .map(|p| {
                Ok(Port {
                    flow: term(&p.flow)?,
                    potential: term(&p.potential)?,
                    temperature: term(&p.temperature)?,
                    entropy: term(&p.entropy)?,
                })
            })
            .collect::<Result<_>>()?;
        let sources = spec
            .sources
            .iter()
            .map(|s| {
                Ok(Source {
                    entropy_flow: term(&s.entropy_flow)?,
                    temperature: term(&s.temperature)?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Fluxes {
            matter,
            heat,
            ports,
            sources,
        })
    }
}

struct Negated(Term);

impl StateFn for Negated {
    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(-self.0.value(x)?)
    }
}

/// Port quantities at one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PortValues {
    pub flow: f64,
    pub potential: f64,
    pub temperature: f64,
    pub entropy: f64,
}

impl PortValues {
    /// Entropy inflow `J^a_S = J^a S^a`.
    pub fn entropy_flow(&self) -> f64 {
        self.flow * self.entropy
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceValues {
    pub entropy_flow: f64,
    pub temperature: f64,
}

/// Every force and flux evaluated at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct ForcingValues {
    /// One friction force (q-components) per eta form.
    pub friction: Vec<DVector<f64>>,
    pub external: DVector<f64>,
    /// Net matter inflow `J_k = sum_l J_{l,k}` per compartment.
    pub matter: DVector<f64>,
    /// Heat flux matrix `J_AB` with zero row and column sums.
    pub heat: DMatrix<f64>,
    pub ports: Vec<PortValues>,
    pub sources: Vec<SourceValues>,
}

impl ForcingValues {
    pub fn evaluate(forces: &Forces, fluxes: &Fluxes, compartments: usize, subsystems: usize, x: &[f64]) -> Result<Self> {
        let eval_all = |terms: &[Term]| -> Result<DVector<f64>> {
            let v = terms.iter().map(|t| t.value(x)).collect::<Result<Vec<_>>>()?;
            Ok(DVector::from_vec(v))
        };
        let friction = forces
            .friction
            .iter()
            .map(|f| eval_all(f))
            .collect::<Result<_>>()?;
        let mut matter = DVector::zeros(compartments);
        for (l, k, t) in &fluxes.matter {
            let v = t.value(x)?;
            matter[*k] += v;
            matter[*l] -= v;
        }
        let mut heat = DMatrix::zeros(subsystems, subsystems);
        for (a, b, t) in &fluxes.heat {
            let v = t.value(x)?;
            heat[(*a, *b)] = v;
            heat[(*b, *a)] = v;
        }
        for b in 0..subsystems {
            let off: f64 = (0..subsystems).filter(|a| *a != b).map(|a| heat[(a, b)]).sum();
            heat[(b, b)] = -off;
        }
        let ports = fluxes
            .ports
            .iter()
            .map(|p| {
                Ok(PortValues {
                    flow: p.flow.value(x)?,
                    potential: p.potential.value(x)?,
                    temperature: p.temperature.value(x)?,
                    entropy: p.entropy.value(x)?,
                })
            })
            .collect::<Result<_>>()?;
        let sources = fluxes
            .sources
            .iter()
            .map(|s| {
                Ok(SourceValues {
                    entropy_flow: s.entropy_flow.value(x)?,
                    temperature: s.temperature.value(x)?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(ForcingValues {
            friction,
            external: eval_all(&forces.external)?,
            matter,
            heat,
            ports,
            sources,
        })
    }

    /// Total friction `F^fr = sum_A F^fr_A`.
    pub fn total_friction(&self) -> DVector<f64> {
        let n = self.external.len();
        self.friction.iter().fold(DVector::zeros(n), |acc, f| acc + f)
    }

    /// Net molar inflow through all ports.
    pub fn port_inflow(&self) -> f64 {
        self.ports.iter().map(|p| p.flow).sum()
    }

    /// Entropy entering through ports and heat sources,
    /// `sum_a J^a S^a + sum_b J^b_S`.
    pub fn entropy_inflow(&self) -> f64 {
        self.ports.iter().map(PortValues::entropy_flow).sum::<f64>()
            + self.sources.iter().map(|s| s.entropy_flow).sum::<f64>()
    }

    /// Power carried in by the exchanges,
    /// `sum_a (J^a mu^a + J^a_S T^a) + sum_b J^b_S T^b`.
    pub fn exchange_power(&self) -> f64 {
        self.ports
            .iter()
            .map(|p| p.flow * p.potential + p.entropy_flow() * p.temperature)
            .sum::<f64>()
            + self
                .sources
                .iter()
                .map(|s| s.entropy_flow * s.temperature)
                .sum::<f64>()
    }
}
