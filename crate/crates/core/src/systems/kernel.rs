//! Class-dependent assembly shared by the Hamiltonian and Lagrangian sides.
//!
//! Everything here works on numbers already evaluated at a state: the
//! temperatures, the chemical potentials and the forcing values. The two
//! sides differ only in how they obtain those numbers.

use nalgebra::DVector;

use super::{ForcingValues, SystemClass};
use crate::geometry::{ChartSpec, Covector};
use crate::{Error, Result};

/// Thermodynamic data at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct PointData {
    /// Temperature of each entropy coordinate, in S-block order.
    pub temperatures: Vec<f64>,
    /// Chemical potential of each compartment, in N-block order.
    pub potentials: Vec<f64>,
    pub forcing: ForcingValues,
}

pub(crate) fn check_temperatures(chart: &ChartSpec, temperatures: &[f64]) -> Result<()> {
    for (i, t) in chart.s_range().zip(temperatures) {
        if *t == 0.0 || !t.is_finite() {
            return Err(Error::TemperatureDegenerate {
                coordinate: chart.names()[i].clone(),
            });
        }
    }
    Ok(())
}

pub(crate) fn etas(chart: &ChartSpec, class: SystemClass, data: &PointData) -> Vec<Covector> {
    let d = chart.dim();
    let q = chart.q_range();
    let f = &data.forcing;
    let with_friction = |friction: &DVector<f64>| {
        let mut eta = Covector::zeros(d);
        for (i, fi) in q.clone().zip(friction.iter()) {
            eta[i] = -fi;
        }
        eta
    };
    match class {
        SystemClass::SimpleClosed | SystemClass::MassTransfer => {
            let mut eta = with_friction(&f.friction[0]);
            eta[chart.s_range().start] = -data.temperatures[0];
            for (w, jk) in chart.w_range().zip(f.matter.iter()) {
                eta[w] = -jk;
            }
            vec![eta]
        }
        SystemClass::NonSimple => {
            let gamma = chart.gamma_range();
            (0..chart.subsystems())
                .map(|a| {
                    let mut eta = with_friction(&f.friction[a]);
                    eta[chart.sigma_range().start + a] = -data.temperatures[a];
                    eta[chart.w_range().start + a] = -f.matter[a];
                    for (b, g) in gamma.clone().enumerate() {
                        eta[g] = -f.heat[(a, b)];
                    }
                    eta
                })
                .collect()
        }
        SystemClass::OpenSimple => {
            let mut eta = with_friction(&f.friction[0]);
            eta[chart.sigma_range().start] = -data.temperatures[0];
            eta[chart.w_range().start] = -f.port_inflow();
            eta[chart.gamma_range().start] = -f.entropy_inflow();
            vec![eta]
        }
    }
}

/// Weight of the eta forms on the right-hand side: one for the closed
/// classes, `1 - (exchange power)` for the open class.
pub(crate) fn eta_weight(class: SystemClass, data: &PointData) -> f64 {
    match class {
        SystemClass::OpenSimple => 1.0 - data.forcing.exchange_power(),
        _ => 1.0,
    }
}

/// `dH + c sum_k eta_k - F^ext`.
pub(crate) fn rhs(chart: &ChartSpec, class: SystemClass, dh: &DVector<f64>, etas: &[Covector], data: &PointData) -> Covector {
    let mut r = dh.clone();
    for (i, fe) in chart.q_range().zip(data.forcing.external.iter()) {
        r[i] -= fe;
    }
    let c = eta_weight(class, data);
    for eta in etas {
        r.axpy(c, &eta.0, 1.0);
    }
    Covector(r)
}

fn friction_power(chart: &ChartSpec, friction: &DVector<f64>, xdot: &DVector<f64>) -> f64 {
    chart.q_range().zip(friction.iter()).map(|(i, f)| xdot[i] * f).sum()
}

/// Residuals of the entropy balance of the class, one per eta form.
pub(crate) fn entropy_residuals(chart: &ChartSpec, class: SystemClass, data: &PointData, xdot: &DVector<f64>) -> Vec<f64> {
    let f = &data.forcing;
    let t = &data.temperatures;
    let s = chart.s_range().start;
    match class {
        SystemClass::SimpleClosed | SystemClass::MassTransfer => {
            let matter: f64 = f.matter.iter().zip(&data.potentials).map(|(j, mu)| j * mu).sum();
            vec![-t[0] * xdot[s] - friction_power(chart, &f.friction[0], xdot) - matter]
        }
        SystemClass::NonSimple => (0..chart.subsystems())
            .map(|k| {
                let heat: f64 = (0..chart.subsystems()).map(|a| f.heat[(k, a)] * (t[a] - t[k])).sum();
                -t[k] * xdot[s + k]
                    - friction_power(chart, &f.friction[k], xdot)
                    - heat
                    - f.matter[k] * data.potentials[k]
            })
            .collect(),
        SystemClass::OpenSimple => {
            let sigma_dot = xdot[chart.sigma_range().start];
            let w_dot = xdot[chart.w_range().start];
            let gamma_dot = xdot[chart.gamma_range().start];
            vec![
                -t[0] * sigma_dot
                    - (friction_power(chart, &f.friction[0], xdot)
                        + f.port_inflow() * w_dot
                        + f.entropy_inflow() * gamma_dot
                        - f.exchange_power()),
            ]
        }
    }
}

/// Power delivered to the system: external forces plus, for the open
/// class, the exchange power.
pub(crate) fn supplied_power(chart: &ChartSpec, class: SystemClass, data: &PointData, xdot: &DVector<f64>) -> f64 {
    let mechanical = friction_power(chart, &data.forcing.external, xdot);
    match class {
        SystemClass::OpenSimple => mechanical + data.forcing.exchange_power(),
        _ => mechanical,
    }
}

/// Entropy flowing in from outside (zero for the closed classes).
pub(crate) fn entropy_inflow(class: SystemClass, data: &PointData) -> f64 {
    match class {
        SystemClass::OpenSimple => data.forcing.entropy_inflow(),
        _ => 0.0,
    }
}
