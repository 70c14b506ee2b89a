//! The Lagrangian picture.
//!
//! States on the velocity side use the same chart as the Hamiltonian side
//! with the momenta replaced by velocities `qdot`. The Legendre map swaps
//! `qdot` for `p = dL/dqdot` and leaves every other coordinate alone.
//!
//! Second derivatives of `L` are never formed symbolically. The velocity
//! Hessian and the Jacobian of the Legendre map come from central finite
//! differences of the exact momenta, and the two-form on the velocity side
//! is the pullback `J^T W J` of the cotangent-side matrix.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::expr::{BoundExpr, Vocabulary};
use crate::field::{PointMap, ScalarField, StateFn};
use crate::geometry::{ChartSpec, FlatOperator, TwoFormMatrix};
use crate::systems::kernel::{self, PointData};
use crate::systems::{check_terms, FluxSpec, ForceSpec, Fluxes, Forces, ForcingValues, SystemClass, SystemInstance};
use crate::{Error, Result};

/// Central-difference step for the velocity Hessian and the Jacobian.
pub const FD_STEP: f64 = 1e-6;
/// Velocity Hessians at least this badly conditioned are singular.
pub const HESSIAN_CONDITION_LIMIT: f64 = 1e8;
pub const NEWTON_MAX_ITERATIONS: usize = 50;
pub const NEWTON_TOLERANCE: f64 = 1e-12;

/// A Lagrangian system of one of the four classes, with forces and fluxes
/// written in velocity-side coordinates.
#[derive(Clone)]
pub struct LagrangianSystem {
    class: SystemClass,
    chart: ChartSpec,
    velocity_names: Vec<String>,
    lagrangian: Arc<dyn ScalarField>,
    forces: Forces,
    fluxes: Fluxes,
    two_form: TwoFormMatrix,
}

impl std::fmt::Debug for LagrangianSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LagrangianSystem")
            .field("class", &self.class)
            .field("coordinates", &self.velocity_names)
            .finish_non_exhaustive()
    }
}

impl LagrangianSystem {
    pub fn new(
        class: SystemClass,
        chart: ChartSpec,
        lagrangian: Arc<dyn ScalarField>,
        forces: Forces,
        fluxes: Fluxes,
    ) -> Result<Self> {
        let two_form = TwoFormMatrix::build(&chart, class)?;
        check_terms(class, &chart, &forces, &fluxes)?;
        Ok(LagrangianSystem {
            class,
            velocity_names: chart.velocity_names(),
            chart,
            lagrangian,
            forces,
            fluxes,
            two_form,
        })
    }

    /// Builds the system from expressions over the velocity-side names
    /// (`q`, `qdot`, `W`, `N`, `Gamma`, `S`, `Sigma` blocks) and parameters.
    pub fn from_expressions(
        class: SystemClass,
        chart: ChartSpec,
        lagrangian: &str,
        parameters: &BTreeMap<String, f64>,
        forces: &ForceSpec,
        fluxes: &FluxSpec,
    ) -> Result<Self> {
        chart.check_class(class)?;
        let vocab = Vocabulary::new(chart.velocity_names(), parameters.clone());
        let l = BoundExpr::compile(lagrangian, &vocab)?;
        if let Some(name) = class
            .excluded_from_hamiltonian(&chart)
            .into_iter()
            .find(|name| l.references(name))
        {
            return Err(Error::InvalidSystem(format!(
                "the Lagrangian of a {class} system must be independent of `{name}`; it may depend on q, qdot, N and S only"
            )));
        }
        let forces = Forces::compile(forces, chart.n(), class.eta_count(&chart), &vocab)?;
        let fluxes = Fluxes::compile(fluxes, chart.compartments(), chart.subsystems(), &vocab)?;
        LagrangianSystem::new(class, chart, Arc::new(l), forces, fluxes)
    }

    pub fn class(&self) -> SystemClass {
        self.class
    }

    /// The cotangent-side chart; block ranges are shared with the velocity side.
    pub fn chart(&self) -> &ChartSpec {
        &self.chart
    }

    pub fn velocity_names(&self) -> &[String] {
        &self.velocity_names
    }

    fn check_dim(&self, v: &DVector<f64>) -> Result<()> {
        if v.len() != self.chart.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.chart.dim(),
                found: v.len(),
            });
        }
        Ok(())
    }

    pub fn lagrangian(&self, v: &DVector<f64>) -> Result<f64> {
        self.check_dim(v)?;
        self.lagrangian.value(v.as_slice())
    }

    fn gradient(&self, v: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        self.check_dim(v)?;
        self.lagrangian.value_and_gradient(v.as_slice())
    }

    /// `dL/dqdot` at a velocity-side state.
    pub fn momenta(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        let (_, g) = self.gradient(v)?;
        Ok(g.rows(self.chart.n(), self.chart.n()).into_owned())
    }

    /// `E_L = qdot . dL/dqdot - L`.
    pub fn lagrangian_energy(&self, v: &DVector<f64>) -> Result<f64> {
        let (l, g) = self.gradient(v)?;
        let qd = self.chart.p_range();
        Ok(qd.map(|i| v[i] * g[i]).sum::<f64>() - l)
    }

    /// Rows of the Legendre-map Jacobian belonging to the momenta: `n x D`.
    fn momentum_jacobian(&self, v: &DVector<f64>, columns: std::ops::Range<usize>) -> Result<DMatrix<f64>> {
        let n = self.chart.n();
        let mut jac = DMatrix::zeros(n, columns.len());
        let mut probe = v.clone();
        for (c, j) in columns.enumerate() {
            let orig = probe[j];
            probe[j] = orig + FD_STEP;
            let plus = self.momenta(&probe)?;
            probe[j] = orig - FD_STEP;
            let minus = self.momenta(&probe)?;
            probe[j] = orig;
            jac.set_column(c, &((plus - minus) / (2.0 * FD_STEP)));
        }
        Ok(jac)
    }

    /// Finite-difference estimate of `d^2 L / dqdot dqdot`.
    pub fn velocity_hessian(&self, v: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.momentum_jacobian(v, self.chart.p_range())
    }

    /// Fails with `SingularLegendre` when the velocity Hessian is too badly
    /// conditioned. Condition here is `max(1, s_max) / s_min`, so a Hessian
    /// that is uniformly tiny also counts as singular.
    pub fn check_regular(&self, v: &DVector<f64>) -> Result<()> {
        let hess = self.velocity_hessian(v)?;
        let sv = hess.singular_values();
        let smax = sv.max();
        let smin = sv.min();
        let condition = if smin > 0.0 { smax.max(1.0) / smin } else { f64::INFINITY };
        if !(condition < HESSIAN_CONDITION_LIMIT) {
            return Err(Error::SingularLegendre {
                state: v.as_slice().to_vec(),
                condition,
            });
        }
        Ok(())
    }

    /// `Leg(q, qdot, z) = (q, dL/dqdot, z)`.
    pub fn legendre_forward(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_regular(v)?;
        let p = self.momenta(v)?;
        let mut y = v.clone();
        y.rows_mut(self.chart.n(), self.chart.n()).copy_from(&p);
        Ok(y)
    }

    /// Solves `dL/dqdot (q, qdot, z) = p` for `qdot` by damped Newton
    /// iteration started at `qdot = p`.
    pub fn legendre_inverse(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim(y)?;
        let n = self.chart.n();
        let target = y.rows(n, n).into_owned();
        let tolerance = NEWTON_TOLERANCE * (1.0 + target.amax());
        let mut v = y.clone();
        let residual_at = |v: &DVector<f64>| -> Result<DVector<f64>> { Ok(self.momenta(v)? - &target) };
        let mut r = residual_at(&v)?;
        let mut iterations = 0;
        while r.amax() > tolerance {
            if iterations == NEWTON_MAX_ITERATIONS {
                return Err(self.divergence(&v, r.amax()));
            }
            iterations += 1;
            let hess = self.velocity_hessian(&v)?;
            let step = match hess.lu().solve(&r) {
                Some(s) if s.iter().all(|x| x.is_finite()) => -s,
                _ => return Err(self.divergence(&v, r.amax())),
            };
            let mut alpha = 1.0;
            loop {
                let mut trial = v.clone();
                for k in 0..n {
                    trial[n + k] += alpha * step[k];
                }
                if let Ok(rt) = residual_at(&trial) {
                    if rt.amax() < r.amax() || rt.amax() <= tolerance {
                        v = trial;
                        r = rt;
                        break;
                    }
                }
                alpha *= 0.5;
                if alpha < 1e-10 {
                    return Err(self.divergence(&v, r.amax()));
                }
            }
        }
        self.check_regular(&v)?;
        Ok(v)
    }

    fn divergence(&self, v: &DVector<f64>, residual: f64) -> Error {
        let n = self.chart.n();
        Error::NewtonDivergence {
            last_iterate: v.rows(n, n).iter().copied().collect(),
            residual,
        }
    }

    /// Jacobian of the Legendre map: the identity except on the momentum rows.
    pub fn jacobian(&self, v: &DVector<f64>) -> Result<DMatrix<f64>> {
        let d = self.chart.dim();
        let mut jac = DMatrix::identity(d, d);
        let rows = self.momentum_jacobian(v, 0..d)?;
        jac.rows_mut(self.chart.n(), self.chart.n()).copy_from(&rows);
        Ok(jac)
    }

    /// `Omega_L = Leg^* omega`, evaluated as `J^T W J`.
    pub fn pulled_back_two_form(&self, v: &DVector<f64>) -> Result<TwoFormMatrix> {
        let jac = self.jacobian(v)?;
        Ok(pullback(&self.two_form, &jac)?)
    }

    /// `dE_L`, assembled from the exact gradient of `L` and the Jacobian.
    pub fn energy_gradient(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        let jac = self.jacobian(v)?;
        self.energy_gradient_with(v, &jac)
    }

    fn energy_gradient_with(&self, v: &DVector<f64>, jac: &DMatrix<f64>) -> Result<DVector<f64>> {
        let (_, g) = self.gradient(v)?;
        let n = self.chart.n();
        let qdot = v.rows(n, n);
        let mut de = jac.rows(n, n).tr_mul(&qdot) - &g;
        for i in self.chart.p_range() {
            de[i] += g[i];
        }
        Ok(de)
    }

    pub fn forcing(&self, v: &DVector<f64>) -> Result<ForcingValues> {
        self.check_dim(v)?;
        ForcingValues::evaluate(
            &self.forces,
            &self.fluxes,
            self.chart.compartments(),
            self.chart.subsystems(),
            v.as_slice(),
        )
    }

    /// Temperatures `-dL/dS_*`, potentials `-dL/dN_k` and forcing values.
    pub fn point_data(&self, v: &DVector<f64>) -> Result<PointData> {
        let (_, g) = self.gradient(v)?;
        Ok(PointData {
            temperatures: self.chart.s_range().map(|i| -g[i]).collect(),
            potentials: self.chart.n_range().map(|i| -g[i]).collect(),
            forcing: self.forcing(v)?,
        })
    }

    /// Evolution field of `E_L` on the velocity side together with the
    /// point data used to build it.
    pub fn evolution_field_with_data(&self, v: &DVector<f64>) -> Result<(DVector<f64>, PointData)> {
        self.check_regular(v)?;
        let data = self.point_data(v)?;
        kernel::check_temperatures(&self.chart, &data.temperatures)?;
        let jac = self.jacobian(v)?;
        let omega = pullback(&self.two_form, &jac)?;
        let etas = kernel::etas(&self.chart, self.class, &data);
        let de = self.energy_gradient_with(v, &jac)?;
        let rhs = kernel::rhs(&self.chart, self.class, &de, &etas, &data);
        let flat = FlatOperator::new(&omega, &etas)?;
        Ok((flat.solve(&rhs)?, data))
    }

    pub fn lagrangian_evolution_field(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.evolution_field_with_data(v)?.0)
    }

    /// Residuals of the Lagrangian-side equations of motion along `xdot`:
    /// forced Euler-Lagrange equations, `dq/dt = qdot`, the displacement,
    /// matter and gauge rates, and the entropy balance.
    pub fn corollary_residuals(&self, v: &DVector<f64>, xdot: &DVector<f64>) -> Result<BTreeMap<String, f64>> {
        let (_, g) = self.gradient(v)?;
        let data = self.point_data(v)?;
        let c = &self.chart;
        let n = c.n();
        let f = &data.forcing;
        let mut out = BTreeMap::new();

        let jp = self.momentum_jacobian(v, 0..c.dim())?;
        let dp_dt = &jp * xdot;
        let friction = f.total_friction();
        let el = (0..n)
            .map(|i| (dp_dt[i] - g[i] - friction[i] - f.external[i]).abs())
            .fold(0.0, f64::max);
        out.insert("euler_lagrange".into(), el);
        let second = c
            .q_range()
            .zip(c.p_range())
            .map(|(q, qd)| (xdot[q] - v[qd]).abs())
            .fold(0.0, f64::max);
        out.insert("second_order".into(), second);
        if c.compartments() > 0 {
            let w = c
                .w_range()
                .zip(c.n_range())
                .map(|(w, nk)| (xdot[w] + g[nk]).abs())
                .fold(0.0, f64::max);
            out.insert("displacement_rate".into(), w);
            let inflow: Vec<f64> = match self.class {
                SystemClass::OpenSimple => vec![f.port_inflow()],
                _ => f.matter.iter().copied().collect(),
            };
            let m = c
                .n_range()
                .zip(inflow)
                .map(|(nk, j)| (xdot[nk] - j).abs())
                .fold(0.0, f64::max);
            out.insert("matter_rate".into(), m);
        }
        if c.subsystems() > 0 {
            let gamma = c
                .gamma_range()
                .zip(c.s_range())
                .map(|(gm, s)| (xdot[gm] + g[s]).abs())
                .fold(0.0, f64::max);
            out.insert("thermal_displacement_rate".into(), gamma);
            let inflow = kernel::entropy_inflow(self.class, &data);
            let gauge = c
                .s_range()
                .zip(c.sigma_range())
                .map(|(s, sg)| (xdot[s] - xdot[sg] - inflow).abs())
                .fold(0.0, f64::max);
            out.insert("gauge_rate".into(), gauge);
        }
        let entropy = kernel::entropy_residuals(c, self.class, &data, xdot)
            .into_iter()
            .map(f64::abs)
            .fold(0.0, f64::max);
        out.insert("entropy_balance".into(), entropy);
        Ok(out)
    }

    /// The Hamiltonian system `H = E_L o Leg^{-1}` with the same forces and
    /// fluxes, evaluated through the inverse Legendre map.
    pub fn hamiltonian_system(self: &Arc<Self>) -> Result<SystemInstance> {
        let h = LegendreHamiltonian(Arc::clone(self));
        let sys = SystemInstance::new(
            self.class,
            self.chart.clone(),
            Arc::new(h),
            self.forces.clone(),
            self.fluxes.clone(),
        )?;
        Ok(sys.with_term_map(Arc::new(InverseLegendre(Arc::clone(self)))))
    }
}

/// `J^T W J`, antisymmetrised.
pub fn pullback(omega: &TwoFormMatrix, jacobian: &DMatrix<f64>) -> Result<TwoFormMatrix> {
    let m = jacobian.transpose() * omega.matrix() * jacobian;
    Ok(TwoFormMatrix::from_matrix(m, 1e-8)?)
}

/// `H = E_L o Leg^{-1}` with gradient `dH/dp = qdot`, `dH/dz = -dL/dz`.
pub struct LegendreHamiltonian(pub Arc<LagrangianSystem>);

impl StateFn for LegendreHamiltonian {
    fn value(&self, x: &[f64]) -> Result<f64> {
        let v = self.0.legendre_inverse(&DVector::from_column_slice(x))?;
        self.0.lagrangian_energy(&v)
    }
}

impl ScalarField for LegendreHamiltonian {
    fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, DVector<f64>)> {
        let sys = &self.0;
        let v = sys.legendre_inverse(&DVector::from_column_slice(x))?;
        let (l, g) = sys.gradient(&v)?;
        let mut grad = -g;
        let mut energy = -l;
        for i in sys.chart.p_range() {
            // here -g[i] = -p_i, since dL/dqdot = p at the inverse image
            energy += v[i] * x[i];
            grad[i] = v[i];
        }
        Ok((energy, grad))
    }
}

/// The inverse Legendre map as a [`PointMap`].
pub struct InverseLegendre(pub Arc<LagrangianSystem>);

impl PointMap for InverseLegendre {
    fn map(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self
            .0
            .legendre_inverse(&DVector::from_column_slice(x))?
            .as_slice()
            .to_vec())
    }
}
