#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::Arc;

use cosym_core::legendre::LagrangianSystem;
use cosym_core::systems::{FluxSpec, ForceSpec, PairFlux, PortSpec, SourceSpec};
use cosym_core::{ChartSpec, SystemClass, SystemInstance};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn params(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

fn pair(from: usize, to: usize, expr: &str) -> PairFlux {
    PairFlux {
        from,
        to,
        expr: expr.to_string(),
    }
}

pub fn state(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

/// `H = p^2/2 + q^2/2 + T0 S`, friction `-lambda p`.
pub fn damped_oscillator(lambda: f64, t0: f64) -> SystemInstance {
    SystemInstance::from_expressions(
        SystemClass::SimpleClosed,
        ChartSpec::simple_closed(1),
        "p^2/2 + q^2/2 + T0*S",
        &params(&[("T0", t0), ("lambda", lambda)]),
        &ForceSpec {
            friction: vec![strings(&["-lambda*p"])],
            external: vec![],
        },
        &FluxSpec::default(),
    )
    .unwrap()
}

/// A nonlinear two-degree-of-freedom simple system with state-dependent
/// temperature, friction and an external force.
pub fn simple_random_system() -> SystemInstance {
    SystemInstance::from_expressions(
        SystemClass::SimpleClosed,
        ChartSpec::simple_closed(2),
        "p1^2/2 + p2^2/(2*(1 + q1^2)) + q1^2/2 + q2^4/4 + exp(S/2)*(1 + q1^2/10)",
        &params(&[("c", 0.3)]),
        &ForceSpec {
            friction: vec![strings(&["-c*p1*exp(S/4)", "-0.2*p2*(1 + q2^2)"])],
            external: strings(&["sin(q2)", "0.1*cos(q1)"]),
        },
        &FluxSpec::default(),
    )
    .unwrap()
}

/// Three compartments exchanging matter with fluxes that depend on the
/// chemical potentials.
pub fn mass_transfer_random_system() -> SystemInstance {
    SystemInstance::from_expressions(
        SystemClass::MassTransfer,
        ChartSpec::mass_transfer(1, 3),
        "p^2/2 + q^2/2 + exp(S)*(1 + q^2/5) + N1^2/2 + N2^2 + N3^2/3 + N1*N2/4",
        &params(&[("k", 0.7)]),
        &ForceSpec {
            friction: vec![strings(&["-0.4*p"])],
            external: strings(&["0.2*sin(q)"]),
        },
        &FluxSpec {
            matter: vec![
                pair(0, 1, "k*(N1 + N2/4 - 2*N2 - N1/4)"),
                pair(2, 1, "0.3*(2*N3/3 - 2*N2)*exp(-S/3)"),
                pair(0, 2, "-0.5*tanh(q)"),
            ],
            ..Default::default()
        },
    )
    .unwrap()
}

/// Non-simple system with `subsystems` subsystems, each with its own
/// friction, coupled by matter and heat fluxes.
pub fn non_simple_random_system(subsystems: usize) -> SystemInstance {
    let p = subsystems;
    let chart = ChartSpec::non_simple(1, p);
    let suffix = |a: usize| if p == 1 { String::new() } else { (a + 1).to_string() };
    let mut h = String::from("p^2/2 + q^2/2");
    for a in 0..p {
        let s = suffix(a);
        h += &format!(" + (1 + {a}/3)*exp(S{s}/(1 + N{s}^2/10)) + N{s}^2/2");
    }
    let friction = (0..p)
        .map(|a| vec![format!("-{}*p*(1 + S{}^2/10)", 0.1 * (a + 1) as f64, suffix(a))])
        .collect();
    let mut matter = Vec::new();
    let mut heat = Vec::new();
    for a in 0..p {
        for b in a + 1..p {
            matter.push(pair(a, b, &format!("0.2*(N{} - N{})", suffix(a), suffix(b))));
            heat.push(pair(b, a, &format!("-0.5*(1 + q^2/(1 + S{}^2))", suffix(a))));
        }
    }
    SystemInstance::from_expressions(
        SystemClass::NonSimple,
        chart,
        &h,
        &BTreeMap::new(),
        &ForceSpec {
            friction,
            external: vec!["0.3*cos(q)".into()],
        },
        &FluxSpec {
            matter,
            heat,
            ..Default::default()
        },
    )
    .unwrap()
}

/// Open system with two ports and one heat source.
pub fn open_random_system() -> SystemInstance {
    SystemInstance::from_expressions(
        SystemClass::OpenSimple,
        ChartSpec::open_simple(1, 2, 1),
        "p^2/2 + q^2/2 + exp(S/(1 + N^2/4)) + N^2/2",
        &params(&[("Tb", 1.5)]),
        &ForceSpec {
            friction: vec![strings(&["-0.3*p"])],
            external: strings(&["0.1*sin(q)"]),
        },
        &FluxSpec {
            ports: vec![
                PortSpec {
                    flow: "0.2*(1 - N)".into(),
                    potential: "1.1 + q^2/10".into(),
                    temperature: "1.3".into(),
                    entropy: "0.4 + S/10".into(),
                },
                PortSpec {
                    flow: "-0.1*exp(-q^2)".into(),
                    potential: "0.9".into(),
                    temperature: "1.2 + p^2/20".into(),
                    entropy: "0.2".into(),
                },
            ],
            sources: vec![SourceSpec {
                entropy_flow: "0.05*(Tb - exp(S))".into(),
                temperature: "Tb".into(),
            }],
            ..Default::default()
        },
    )
    .unwrap()
}

pub fn random_system(class: SystemClass) -> SystemInstance {
    match class {
        SystemClass::SimpleClosed => simple_random_system(),
        SystemClass::MassTransfer => mass_transfer_random_system(),
        SystemClass::NonSimple => non_simple_random_system(3),
        SystemClass::OpenSimple => open_random_system(),
    }
}

/// A state with moderate entries for the given chart.
pub fn random_state(chart: &ChartSpec, rng: &mut impl Rng) -> DVector<f64> {
    DVector::from_fn(chart.dim(), |_, _| rng.random_range(-1.5..1.5))
}

pub fn random_vector(dim: usize, rng: &mut impl Rng) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0))
}

/// Two subsystems exchanging heat by a constant conductance `kappa`.
pub fn fourier_two_compartment(kappa: f64) -> SystemInstance {
    SystemInstance::from_expressions(
        SystemClass::NonSimple,
        ChartSpec::non_simple(1, 2),
        "p^2/2 + q^2/2 + exp(S1) + 2*exp(S2/2) + N1^2/2 + N2^2/2",
        &params(&[("kappa", kappa)]),
        &ForceSpec {
            friction: vec![vec!["-0.1*p".into()], vec!["-0.05*p".into()]],
            external: vec![],
        },
        &FluxSpec {
            matter: vec![pair(0, 1, "0.3*(N1/exp(S1) - N2/exp(S2/2))")],
            heat: vec![pair(0, 1, "-kappa")],
            ..Default::default()
        },
    )
    .unwrap()
}

/// Contact-type friction `F_i = -(dH/dS) p_i` on a separable system.
pub fn contact_system() -> SystemInstance {
    SystemInstance::from_expressions(
        SystemClass::SimpleClosed,
        ChartSpec::simple_closed(2),
        "p1^2/2 + p2^2/3 + q1^2/2 + q1*q2/4 + q2^2 + exp(S/3)",
        &BTreeMap::new(),
        &ForceSpec {
            friction: vec![strings(&["-exp(S/3)/3*p1", "-exp(S/3)/3*p2"])],
            external: vec![],
        },
        &FluxSpec::default(),
    )
    .unwrap()
}

/// The three hyperregular Lagrangians used in the Legendre checks.
pub fn lagrangians() -> Vec<(&'static str, Arc<LagrangianSystem>)> {
    let mk = |l: &str, friction: &str| {
        Arc::new(
            LagrangianSystem::from_expressions(
                SystemClass::SimpleClosed,
                ChartSpec::simple_closed(1),
                l,
                &params(&[("T0", 1.0), ("lambda", 0.1)]),
                &ForceSpec {
                    friction: vec![vec![friction.to_string()]],
                    external: vec!["0.05*sin(q)".into()],
                },
                &FluxSpec::default(),
            )
            .unwrap(),
        )
    };
    vec![
        ("quadratic", mk("qdot^2/2 - q^2/2 - T0*S", "-lambda*qdot")),
        (
            "cosh-kinetic",
            mk("(exp(qdot) + exp(-qdot))/2 - q^2/2 - T0*S", "-lambda*qdot"),
        ),
        (
            "position-dependent mass",
            mk("(1 + q^2/2)*qdot^2/2 - q^2/2 - exp(S/2)", "-lambda*(1 + q^2/2)*qdot"),
        ),
    ]
}

/// Sup-norm of the difference.
pub fn max_abs_diff(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).amax()
}
