use std::fmt;

use nalgebra::DVector;

use super::{EvolutionSystem, Halt, Rates, Trajectory};
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Classical fourth-order Runge-Kutta with fixed step `dt`.
    Rk4,
    /// Dormand-Prince 5(4) with step-size control; `dt` is the first trial step.
    Rk45,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Rk4 => "rk4",
            Scheme::Rk45 => "rk45",
        })
    }
}

impl std::str::FromStr for Scheme {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "rk4" => Ok(Scheme::Rk4),
            "rk45" | "rk45-adaptive" => Ok(Scheme::Rk45),
            other => Err(format!("unknown scheme `{other}` (expected rk4 or rk45)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorConfig {
    pub scheme: Scheme,
    pub dt: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub t_end: f64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            scheme: Scheme::Rk4,
            dt: 1e-3,
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            t_end: 10.0,
            max_steps: 10_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn rk4(dt: f64, t_end: f64) -> Self {
        IntegratorConfig {
            scheme: Scheme::Rk4,
            dt,
            t_end,
            ..Default::default()
        }
    }

    pub fn rk45(rel_tol: f64, abs_tol: f64, t_end: f64) -> Self {
        IntegratorConfig {
            scheme: Scheme::Rk45,
            dt: (t_end * 1e-3).min(1e-2),
            rel_tol,
            abs_tol,
            t_end,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(format!("t_end must be positive and finite, got {}", self.t_end));
        }
        if !(self.dt > 0.0 && self.dt <= self.t_end) {
            return Err(format!("dt must satisfy 0 < dt <= t_end, got dt = {}", self.dt));
        }
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err("rel_tol and abs_tol must be positive".into());
        }
        if self.max_steps == 0 {
            return Err("max_steps must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum IntegrationError {
    InvalidConfig(String),
    /// The evolution field could not be evaluated (degenerate initial
    /// state, domain error in an expression, failed Legendre inversion).
    Field { time: f64, error: Error },
    /// The adaptive step fell below the underflow limit.
    StepFailure { time: f64, step: f64 },
    NonFiniteState { time: f64 },
    MaxStepsExceeded { time: f64, steps: usize },
}

impl fmt::Display for IntegrationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IntegrationError::InvalidConfig(m) => write!(f, "invalid integrator configuration: {m}"),
            IntegrationError::Field { time, error } => write!(f, "evolution field failed at t = {time}: {error}"),
            IntegrationError::StepFailure { time, step } => {
                write!(f, "adaptive step underflow at t = {time} (step {step:e})")
            }
            IntegrationError::NonFiniteState { time } => write!(f, "non-finite state at t = {time}"),
            IntegrationError::MaxStepsExceeded { time, steps } => {
                write!(f, "step limit {steps} reached at t = {time}")
            }
        }
    }
}

/// An integration error together with everything computed before it.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegrationFailure {
    pub error: IntegrationError,
    pub partial: Trajectory,
}

impl fmt::Display for IntegrationFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({} steps recorded)", self.error, self.partial.len())
    }
}

impl std::error::Error for IntegrationFailure {}

/// Smallest admissible adaptive step.
const MIN_STEP: f64 = 1e-14;

/// Extended state: the system state plus the work and entropy quadratures.
type Ext = (DVector<f64>, f64, f64);

struct Recorder<'a, S: EvolutionSystem + ?Sized> {
    sys: &'a S,
    traj: Trajectory,
}

impl<'a, S: EvolutionSystem + ?Sized> Recorder<'a, S> {
    fn push(&mut self, t: f64, z: &Ext, xdot: &DVector<f64>) -> Result<(), Error> {
        let diag = self.sys.diagnostics(&z.0, xdot)?;
        let energy = self.sys.energy(&z.0)?;
        self.traj.times.push(t);
        self.traj.states.push(z.0.clone());
        self.traj.energy.push(energy);
        self.traj.work.push(z.1);
        self.traj.entropy_supplied.push(z.2);
        self.traj.diagnostics.push(diag);
        Ok(())
    }

    fn fail(self, error: IntegrationError) -> IntegrationFailure {
        IntegrationFailure {
            error,
            partial: self.traj,
        }
    }
}

fn eval<S: EvolutionSystem + ?Sized>(sys: &S, x: &DVector<f64>) -> Result<(DVector<f64>, Rates), Error> {
    sys.field_and_rates(x)
}

fn combine(z: &Ext, h: f64, stages: &[(f64, &(DVector<f64>, Rates))]) -> Ext {
    let mut x = z.0.clone();
    let mut w = z.1;
    let mut s = z.2;
    for (c, (k, r)) in stages {
        if *c != 0.0 {
            x.axpy(h * c, k, 1.0);
            w += h * c * r.power;
            s += h * c * r.entropy_inflow;
        }
    }
    (x, w, s)
}

fn finite(z: &Ext) -> bool {
    z.0.iter().all(|v| v.is_finite()) && z.1.is_finite() && z.2.is_finite()
}

/// Integrates `x' = E(x)` from `x0` over `[0, cfg.t_end]`.
///
/// A degenerate structure met after the initial state stops the run early
/// and returns the trajectory so far, flagged through `halt`. Any other
/// failure returns an [`IntegrationFailure`] carrying the partial trajectory.
pub fn integrate<S: EvolutionSystem + ?Sized>(
    sys: &S,
    x0: &DVector<f64>,
    cfg: &IntegratorConfig,
) -> Result<Trajectory, IntegrationFailure> {
    let mut rec = Recorder {
        sys,
        traj: Trajectory {
            class: sys.class(),
            names: sys.coordinate_names(),
            times: Vec::new(),
            states: Vec::new(),
            energy: Vec::new(),
            work: Vec::new(),
            entropy_supplied: Vec::new(),
            diagnostics: Vec::new(),
            halt: None,
        },
    };
    if let Err(m) = cfg.validate() {
        return Err(rec.fail(IntegrationError::InvalidConfig(m)));
    }
    if x0.len() != sys.dim() {
        let error = Error::DimensionMismatch {
            expected: sys.dim(),
            found: x0.len(),
        };
        return Err(rec.fail(IntegrationError::Field { time: 0.0, error }));
    }
    let z0: Ext = (x0.clone(), 0.0, 0.0);
    let k0 = match eval(sys, x0) {
        Ok(k) => k,
        Err(error) => return Err(rec.fail(IntegrationError::Field { time: 0.0, error })),
    };
    if let Err(error) = rec.push(0.0, &z0, &k0.0) {
        return Err(rec.fail(IntegrationError::Field { time: 0.0, error }));
    }
    match cfg.scheme {
        Scheme::Rk4 => run_rk4(rec, z0, k0, cfg),
        Scheme::Rk45 => run_rk45(rec, z0, k0, cfg),
    }
}

/// Outcome of evaluating the field at a trial point.
enum Stage {
    Ok((DVector<f64>, Rates)),
    Halt(Error),
    Fail(Error),
}

fn stage<S: EvolutionSystem + ?Sized>(sys: &S, x: &DVector<f64>) -> Stage {
    match eval(sys, x) {
        Ok(k) => Stage::Ok(k),
        Err(e) if e.is_degeneracy() => Stage::Halt(e),
        Err(e) => Stage::Fail(e),
    }
}

macro_rules! stage_or_stop {
    ($rec:expr, $t:expr, $x:expr) => {
        match stage($rec.sys, $x) {
            Stage::Ok(k) => k,
            Stage::Halt(reason) => {
                $rec.traj.halt = Some(Halt { time: $t, reason });
                return Ok($rec.traj);
            }
            Stage::Fail(error) => {
                return Err($rec.fail(IntegrationError::Field { time: $t, error }));
            }
        }
    };
}

fn accept<S: EvolutionSystem + ?Sized>(
    rec: &mut Recorder<'_, S>,
    t_prev: f64,
    t: f64,
    z: &Ext,
) -> Result<Option<(DVector<f64>, Rates)>, IntegrationError> {
    if !finite(z) {
        return Err(IntegrationError::NonFiniteState { time: t });
    }
    match stage(rec.sys, &z.0) {
        Stage::Ok(k) => {
            rec.push(t, z, &k.0)
                .map_err(|error| IntegrationError::Field { time: t, error })?;
            Ok(Some(k))
        }
        Stage::Halt(reason) => {
            rec.traj.halt = Some(Halt { time: t_prev, reason });
            Ok(None)
        }
        Stage::Fail(error) => Err(IntegrationError::Field { time: t, error }),
    }
}

fn run_rk4<S: EvolutionSystem + ?Sized>(
    mut rec: Recorder<'_, S>,
    mut z: Ext,
    mut k1: (DVector<f64>, Rates),
    cfg: &IntegratorConfig,
) -> Result<Trajectory, IntegrationFailure> {
    let ratio = cfg.t_end / cfg.dt;
    let steps = if (ratio - ratio.round()).abs() < 1e-9 * ratio.max(1.0) {
        ratio.round() as usize
    } else {
        ratio.ceil() as usize
    };
    if steps > cfg.max_steps {
        return Err(rec.fail(IntegrationError::MaxStepsExceeded {
            time: 0.0,
            steps: cfg.max_steps,
        }));
    }
    let mut t = 0.0;
    for n in 1..=steps {
        let t_next = if n == steps { cfg.t_end } else { n as f64 * cfg.dt };
        let h = t_next - t;
        let k2 = stage_or_stop!(rec, t, &combine(&z, h, &[(0.5, &k1)]).0);
        let z2 = combine(&z, h, &[(0.5, &k2)]);
        let k3 = stage_or_stop!(rec, t, &z2.0);
        let z3 = combine(&z, h, &[(1.0, &k3)]);
        let k4 = stage_or_stop!(rec, t, &z3.0);
        let z_next = combine(
            &z,
            h,
            &[(1.0 / 6.0, &k1), (1.0 / 3.0, &k2), (1.0 / 3.0, &k3), (1.0 / 6.0, &k4)],
        );
        match accept(&mut rec, t, t_next, &z_next) {
            Ok(Some(k)) => k1 = k,
            Ok(None) => return Ok(rec.traj),
            Err(e) => return Err(rec.fail(e)),
        }
        z = z_next;
        t = t_next;
    }
    Ok(rec.traj)
}

// Dormand-Prince 5(4) tableau. The field is autonomous, so the nodes are not needed.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order weights (also the last row of `A`, first-same-as-last).
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

fn run_rk45<S: EvolutionSystem + ?Sized>(
    mut rec: Recorder<'_, S>,
    mut z: Ext,
    mut k1: (DVector<f64>, Rates),
    cfg: &IntegratorConfig,
) -> Result<Trajectory, IntegrationFailure> {
    let mut t = 0.0;
    let mut h = cfg.dt;
    let mut accepted = 0usize;
    while t < cfg.t_end {
        if accepted >= cfg.max_steps {
            return Err(rec.fail(IntegrationError::MaxStepsExceeded {
                time: t,
                steps: cfg.max_steps,
            }));
        }
        let last = t + h >= cfg.t_end;
        if last {
            h = cfg.t_end - t;
        }
        let mut k: Vec<(DVector<f64>, Rates)> = Vec::with_capacity(7);
        k.push(k1.clone());
        for (s, row) in A.iter().enumerate().skip(1).take(5) {
            let stages: Vec<(f64, &(DVector<f64>, Rates))> = row[..s].iter().copied().zip(k.iter()).collect();
            let zs = combine(&z, h, &stages);
            let ks = stage_or_stop!(rec, t, &zs.0);
            k.push(ks);
        }
        let stages5: Vec<(f64, &(DVector<f64>, Rates))> = B5[..6].iter().copied().zip(k.iter()).collect();
        let z_new = combine(&z, h, &stages5);
        if !finite(&z_new) {
            h *= 0.25;
            if h < MIN_STEP {
                return Err(rec.fail(IntegrationError::StepFailure { time: t, step: h }));
            }
            continue;
        }
        let k7 = stage_or_stop!(rec, t, &z_new.0);
        k.push(k7);
        let mut err_sq = 0.0;
        for i in 0..z.0.len() {
            let e: f64 = (0..7).map(|s| h * (B5[s] - B4[s]) * k[s].0[i]).sum();
            let scale = cfg.abs_tol + cfg.rel_tol * z.0[i].abs().max(z_new.0[i].abs());
            err_sq += (e / scale).powi(2);
        }
        let err = (err_sq / z.0.len().max(1) as f64).sqrt();
        if err <= 1.0 {
            let t_new = if last { cfg.t_end } else { t + h };
            if let Err(error) = rec.push(t_new, &z_new, &k[6].0) {
                return Err(rec.fail(IntegrationError::Field { time: t_new, error }));
            }
            k1 = k.swap_remove(6);
            z = z_new;
            t = t_new;
            accepted += 1;
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
        if h < MIN_STEP && t < cfg.t_end {
            return Err(rec.fail(IntegrationError::StepFailure { time: t, step: h }));
        }
    }
    Ok(rec.traj)
}
