use std::collections::BTreeMap;

use super::{EvolutionSystem, Trajectory};
use crate::systems::SystemClass;

/// Pass thresholds for [`check_invariants`].
#[derive(Debug, Clone, PartialEq)]
pub struct Tolerances {
    /// Entropy balance of the class, pointwise.
    pub entropy_identity: f64,
    /// `dH(E)` against the supplied power, pointwise.
    pub energy_rate: f64,
    /// `H(t) - H(0)` against the accumulated work.
    pub energy_balance: f64,
    /// Drift of the total mole number (closed classes with compartments).
    pub matter: f64,
    /// Drift of `S_A - Sigma_A` (non-simple class).
    pub gauge: f64,
    /// Open class: `S - Sigma` against the accumulated entropy inflow.
    pub entropy_flow: f64,
    /// Allowed decrease of the total entropy between recorded steps.
    pub entropy_slack: f64,
    /// Lagrangian-side equations of motion, pointwise.
    pub lagrangian: f64,
    /// Whether total entropy must be nondecreasing. `None` means: for the
    /// closed classes only.
    pub entropy_monotone: Option<bool>,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            entropy_identity: 1e-9,
            energy_rate: 1e-9,
            energy_balance: 1e-7,
            matter: 1e-10,
            gauge: 1e-7,
            entropy_flow: 1e-8,
            entropy_slack: 1e-10,
            lagrangian: 1e-6,
            entropy_monotone: None,
        }
    }
}

/// Largest residual of one invariant over a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantEntry {
    pub max_residual: f64,
    pub index: usize,
    pub time: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvariantReport {
    pub class: SystemClass,
    pub steps: usize,
    pub entries: BTreeMap<String, InvariantEntry>,
    /// Diagnostics that are reported but never fail the check.
    pub info: BTreeMap<String, f64>,
    pub failures: Vec<String>,
    /// Reason the trajectory stopped early, if it did.
    pub halted: Option<String>,
    /// Steps at which the field or diagnostics could not be re-evaluated.
    pub evaluation_errors: Vec<(usize, String)>,
}

impl InvariantReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

const LAGRANGIAN_KEYS: [&str; 7] = [
    "euler_lagrange",
    "second_order",
    "displacement_rate",
    "matter_rate",
    "thermal_displacement_rate",
    "gauge_rate",
    "entropy_balance",
];

#[derive(Default)]
struct Max {
    value: f64,
    index: usize,
    seen: bool,
}

impl Max {
    fn update(&mut self, value: f64, index: usize) {
        let v = if value.is_nan() { f64::INFINITY } else { value.abs() };
        if !self.seen || v > self.value {
            self.value = v;
            self.index = index;
        }
        self.seen = true;
    }
}

/// Re-evaluates every invariant of the class at the recorded states.
///
/// Pointwise identities are recomputed from the evolution field at each
/// stored state. Balance laws compare the stored series with their initial
/// values and with the work and entropy integrals accumulated during
/// integration, so a corrupted state shows up at its own index.
pub fn check_invariants<S: EvolutionSystem + ?Sized>(traj: &Trajectory, sys: &S, tol: &Tolerances) -> InvariantReport {
    let chart = sys.chart();
    let class = sys.class();
    let mut maxima: BTreeMap<&'static str, (Max, f64)> = BTreeMap::new();
    let mut put = |name: &'static str, tolerance: f64, value: f64, index: usize| {
        maxima
            .entry(name)
            .or_insert_with(|| (Max::default(), tolerance))
            .0
            .update(value, index);
    };
    let mut evaluation_errors = Vec::new();
    let mut min_temperature = f64::INFINITY;

    let x0 = traj.states.first();
    let total = |x: &nalgebra::DVector<f64>, r: std::ops::Range<usize>| r.map(|i| x[i]).sum::<f64>();
    let e0 = traj.states.first().and_then(|x| sys.energy(x).ok());
    for (i, x) in traj.states.iter().enumerate() {
        let diag = sys.field(x).and_then(|xdot| sys.diagnostics(x, &xdot));
        match diag {
            Ok(d) => {
                for (key, value) in &d {
                    if key.starts_with("entropy_residual") {
                        put("entropy_identity", tol.entropy_identity, *value, i);
                    } else if key == "energy_rate_residual" {
                        put("energy_rate", tol.energy_rate, *value, i);
                    } else if LAGRANGIAN_KEYS.contains(&key.as_str()) {
                        put("lagrangian_equations", tol.lagrangian, *value, i);
                    } else if key == "min_abs_temperature" {
                        min_temperature = min_temperature.min(*value);
                    }
                }
            }
            Err(e) => evaluation_errors.push((i, e.to_string())),
        }
        match (sys.energy(x), e0, traj.work.get(i)) {
            (Ok(e), Some(e0), Some(w)) => put("energy_balance", tol.energy_balance, e - e0 - w, i),
            (Err(e), ..) => evaluation_errors.push((i, e.to_string())),
            _ => {}
        }
        let Some(x0) = x0 else { continue };
        if matches!(class, SystemClass::MassTransfer | SystemClass::NonSimple) {
            let drift = total(x, chart.n_range()) - total(x0, chart.n_range());
            put("matter_conservation", tol.matter, drift, i);
        }
        if class == SystemClass::NonSimple {
            for (s, sg) in chart.s_range().zip(chart.sigma_range()) {
                put("gauge", tol.gauge, (x[s] - x[sg]) - (x0[s] - x0[sg]), i);
            }
        }
        if class == SystemClass::OpenSimple {
            let (s, sg) = (chart.s_range().start, chart.sigma_range().start);
            let supplied = traj.entropy_supplied.get(i).copied().unwrap_or(0.0);
            put(
                "entropy_bookkeeping",
                tol.entropy_flow,
                (x[s] - x[sg]) - (x0[s] - x0[sg]) - supplied,
                i,
            );
        }
    }

    let monotone = tol
        .entropy_monotone
        .unwrap_or(class != SystemClass::OpenSimple);
    if monotone {
        for i in 1..traj.states.len() {
            let drop = total(&traj.states[i - 1], chart.s_range()) - total(&traj.states[i], chart.s_range());
            put("entropy_monotone", tol.entropy_slack, drop.max(0.0), i);
        }
    }

    let mut entries = BTreeMap::new();
    let mut failures = Vec::new();
    for (name, (m, tolerance)) in maxima {
        let passed = m.value <= tolerance;
        if !passed {
            failures.push(name.to_string());
        }
        entries.insert(
            name.to_string(),
            InvariantEntry {
                max_residual: m.value,
                index: m.index,
                time: traj.times.get(m.index).copied().unwrap_or(0.0),
                tolerance,
                passed,
            },
        );
    }
    if !evaluation_errors.is_empty() {
        failures.push("evaluation".to_string());
    }
    let mut info = BTreeMap::new();
    if min_temperature.is_finite() {
        info.insert("min_abs_temperature".to_string(), min_temperature);
    }
    if let (Some(first), Some(last)) = (traj.states.first(), traj.states.last()) {
        info.insert(
            "entropy_change".to_string(),
            total(last, chart.s_range()) - total(first, chart.s_range()),
        );
    }
    InvariantReport {
        class,
        steps: traj.len(),
        entries,
        info,
        failures,
        halted: traj.halt.as_ref().map(|h| format!("t = {}: {}", h.time, h.reason)),
        evaluation_errors,
    }
}
