//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

mod common;

use std::collections::BTreeMap;
use std::process::ExitCode;

use common::*;
use cosym_core::dynamics::{integrate, IntegratorConfig, Trajectory};
use cosym_core::expr::{eval_with_grad, BinaryOp, Expr, UnaryOp};
use cosym_core::geometry::PartiallyCosymplectic;
use cosym_core::systems::{FluxSpec, ForceSpec};
use cosym_core::{ChartSpec, Covector, SystemClass, SystemInstance, TwoFormMatrix};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn check(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn oracle_equivalence() -> Outcome {
    let mut worst = BTreeMap::new();
    let mut r = rng(101);
    for class in SystemClass::ALL {
        let sys = random_system(class);
        let mut m: f64 = 0.0;
        for _ in 0..1000 {
            let x = random_state(sys.chart(), &mut r);
            let field = sys.evolution_field(&x).unwrap();
            m = m.max(max_abs_diff(&field, &sys.explicit_rhs_oracle(&x).unwrap()));
        }
        worst.insert(class.name(), m);
    }
    let max = worst.values().copied().fold(0.0, f64::max);
    let per_class: Vec<String> = worst.iter().map(|(k, v)| format!("{k} {v:.2e}")).collect();
    check(max <= 1e-9, format!("max |E - oracle| = {max:.2e}; {}", per_class.join(", ")))
}

fn entropy_identities() -> Outcome {
    let mut r = rng(101);
    let mut max: f64 = 0.0;
    for class in SystemClass::ALL {
        let sys = random_system(class);
        for _ in 0..1000 {
            let x = random_state(sys.chart(), &mut r);
            let xdot = sys.evolution_field(&x).unwrap();
            for res in sys.entropy_identity_residual(&x, &xdot).unwrap() {
                max = max.max(res.abs());
            }
        }
    }
    check(max <= 1e-9, format!("max residual = {max:.2e}"))
}

fn reeb_duality() -> Outcome {
    let mut r = rng(103);
    let mut max: f64 = 0.0;
    for p in 1..=3 {
        // structures coming from non-simple systems with p subsystems
        let sys = non_simple_random_system(p);
        for _ in 0..300 {
            let x = random_state(sys.chart(), &mut r);
            let s = PartiallyCosymplectic::new(sys.two_form().clone(), sys.build_etas(&x).unwrap());
            max = max.max(reeb_defect(&s));
        }
        // and generic ones: eta_A has a nonzero dSigma_A coefficient
        let chart = ChartSpec::non_simple(2, p);
        let omega = TwoFormMatrix::build(&chart, SystemClass::NonSimple).unwrap();
        for _ in 0..300 {
            let etas = (0..p)
                .map(|a| {
                    let mut e = Covector(random_vector(chart.dim(), &mut r));
                    for b in 0..p {
                        e[chart.s_range().start + b] = 0.0;
                        e[chart.sigma_range().start + b] = 0.0;
                    }
                    e[chart.sigma_range().start + a] = r.random_range(0.5..2.0);
                    e
                })
                .collect();
            max = max.max(reeb_defect(&PartiallyCosymplectic::new(omega.clone(), etas)));
        }
    }
    check(max <= 1e-10, format!("max |eta_j(R_k) - delta_jk|, |i_R omega| = {max:.2e}"))
}

fn reeb_defect(s: &PartiallyCosymplectic) -> f64 {
    let reeb = s.reeb_fields().unwrap();
    let p = reeb.len();
    let pairing = (s.pairing_matrix(&reeb) - DMatrix::identity(p, p)).amax();
    reeb.iter().map(|rk| s.omega.interior(rk).0.amax()).fold(pairing, f64::max)
}

fn legendre_transport() -> Outcome {
    let mut r = rng(104);
    let mut transport: f64 = 0.0;
    let mut gaps = Vec::new();
    for (name, lag) in lagrangians() {
        let ham = lag.hamiltonian_system().unwrap();
        for _ in 0..200 {
            let v = random_state(lag.chart(), &mut r);
            let pushed = lag.jacobian(&v).unwrap() * lag.lagrangian_evolution_field(&v).unwrap();
            let eh = ham.evolution_field(&lag.legendre_forward(&v).unwrap()).unwrap();
            transport = transport.max(max_abs_diff(&pushed, &eh));
        }
        let cfg = IntegratorConfig::rk4(1e-3, 5.0);
        let v0 = state(&[0.8, -0.4, 0.1]);
        let lt = integrate(lag.as_ref(), &v0, &cfg).unwrap();
        let ht = integrate(&ham, &lag.legendre_forward(&v0).unwrap(), &cfg).unwrap();
        let gap = lt
            .states
            .iter()
            .zip(&ht.states)
            .map(|(v, y)| max_abs_diff(&lag.legendre_forward(v).unwrap(), y))
            .fold(0.0, f64::max);
        gaps.push(format!("{name} {gap:.2e}"));
        if gap > 1e-6 || lt.len() != ht.len() {
            return check(false, format!("trajectory gap too large: {}", gaps.join(", ")));
        }
    }
    check(
        transport <= 1e-8,
        format!("transport {transport:.2e}; trajectory gaps {}", gaps.join(", ")),
    )
}

fn series_gap(a: &Trajectory, b: &Trajectory, name: &str) -> f64 {
    let (a, b) = (a.series(name).unwrap(), b.series(name).unwrap());
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn conservation_laws() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;

    let osc = damped_oscillator(0.1, 1.0);
    let traj = integrate(&osc, &state(&[1.0, 0.0, 0.0]), &IntegratorConfig::rk4(1e-3, 10.0)).unwrap();
    let drift = traj.energy.iter().map(|h| (h - traj.energy[0]).abs()).fold(0.0, f64::max);
    let s = traj.series("S").unwrap();
    let s_drop = s.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max);
    ok &= drift <= 1e-7 && s_drop <= 1e-10;
    notes.push(format!("oscillator H drift {drift:.2e}, S drop {s_drop:.2e}"));

    let fourier = fourier_two_compartment(0.8);
    let c = fourier.chart().clone();
    let mut x0 = DVector::zeros(c.dim());
    for (name, v) in [("q", 1.0), ("S1", 0.5), ("S2", -0.5), ("N1", 1.0), ("N2", 0.2)] {
        x0[c.index_of(name).unwrap()] = v;
    }
    let traj = integrate(&fourier, &x0, &IntegratorConfig::rk4(1e-3, 5.0)).unwrap();
    let sum = |x: &DVector<f64>, r: std::ops::Range<usize>| r.map(|i| x[i]).sum::<f64>();
    let n_drift = traj
        .states
        .iter()
        .map(|x| (sum(x, c.n_range()) - sum(&x0, c.n_range())).abs())
        .fold(0.0, f64::max);
    let s_drop = traj
        .states
        .windows(2)
        .map(|w| sum(&w[0], c.s_range()) - sum(&w[1], c.s_range()))
        .fold(0.0, f64::max);
    let x0 = &x0;
    let gauge = traj
        .states
        .iter()
        .flat_map(|x| {
            c.s_range()
                .zip(c.sigma_range())
                .map(move |(s, g)| ((x[s] - x[g]) - (x0[s] - x0[g])).abs())
        })
        .fold(0.0, f64::max);
    ok &= n_drift <= 1e-10 && s_drop <= 1e-10 && gauge <= 1e-7;
    notes.push(format!(
        "Fourier N drift {n_drift:.2e}, S drop {s_drop:.2e}, gauge {gauge:.2e}"
    ));

    let forces = ForceSpec {
        friction: vec![vec!["-0.2*p".into()]],
        external: vec![],
    };
    let h = "p^2/2 + q^2/2 + exp(S/2)";
    let build = |class, chart| {
        SystemInstance::from_expressions(class, chart, h, &params(&[]), &forces, &FluxSpec::default()).unwrap()
    };
    let closed = build(SystemClass::SimpleClosed, ChartSpec::simple_closed(1));
    let open = build(SystemClass::OpenSimple, ChartSpec::open_simple(1, 0, 0));
    let cfg = IntegratorConfig::rk4(1e-3, 5.0);
    let tc = integrate(&closed, &state(&[1.0, 0.5, 0.0]), &cfg).unwrap();
    let mut xo = DVector::zeros(open.chart().dim());
    for (name, v) in [("q", 1.0), ("p", 0.5), ("S", 0.0), ("N", 1.0)] {
        xo[open.chart().index_of(name).unwrap()] = v;
    }
    let to = integrate(&open, &xo, &cfg).unwrap();
    let gap = ["q", "p", "S"].iter().map(|n| series_gap(&tc, &to, n)).fold(0.0, f64::max);
    ok &= gap <= 1e-8;
    notes.push(format!("open vs closed gap {gap:.2e}"));

    check(ok, notes.join("; "))
}

fn contact_regression() -> Outcome {
    let sys = contact_system();
    let c = sys.chart().clone();
    let mut r = rng(106);
    let mut max: f64 = 0.0;
    for _ in 0..200 {
        let x = random_state(&c, &mut r);
        let xdot = sys.evolution_field(&x).unwrap();
        let grad = sys.state_terms(&x).unwrap().gradient;
        let expected: f64 = c.p_range().map(|i| x[i] * grad[i]).sum();
        max = max.max((xdot[c.s_range().start] - expected).abs());
    }
    check(max <= 1e-10, format!("max |dS/dt - p dH/dp| = {max:.2e}"))
}

const VARS: [&str; 3] = ["x", "y", "z"];

/// Random expression of depth at most `depth`, built from operations that
/// are smooth on the sampling box.
fn random_expr(depth: usize, r: &mut impl Rng) -> Expr {
    if depth == 0 || r.random_bool(0.25) {
        return if r.random_bool(0.4) {
            Expr::Const(r.random_range(0u32..40) as f64 / 8.0)
        } else {
            Expr::var(VARS[r.random_range(0..3)])
        };
    }
    let mut sub = || random_expr(depth - 1, r);
    let a = sub();
    let b = sub();
    let plus = |c: f64, e: Expr| Expr::binary(BinaryOp::Add, Expr::Const(c), e);
    match r.random_range(0..11) {
        0 => Expr::unary(UnaryOp::Neg, a),
        1 => Expr::unary(UnaryOp::Sin, a),
        2 => Expr::unary(UnaryOp::Cos, a),
        3 => Expr::unary(UnaryOp::Tanh, a),
        4 => Expr::unary(UnaryOp::Exp, Expr::unary(UnaryOp::Tanh, a)),
        5 => Expr::unary(UnaryOp::Log, plus(2.0, Expr::unary(UnaryOp::Sin, a))),
        6 => Expr::unary(UnaryOp::Sqrt, plus(1.5, Expr::unary(UnaryOp::Cos, a))),
        7 => Expr::binary(BinaryOp::Add, a, b),
        8 => Expr::binary(BinaryOp::Mul, a, b),
        9 => Expr::binary(BinaryOp::Div, a, plus(2.0, Expr::unary(UnaryOp::Cos, b))),
        _ => Expr::binary(BinaryOp::Pow, a, Expr::Const(r.random_range(0u32..4) as f64)),
    }
}

fn ad_correctness() -> Outcome {
    let mut r = rng(107);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let e = random_expr(6, &mut r);
        let at: BTreeMap<String, f64> = VARS.iter().map(|v| (v.to_string(), r.random_range(-1.0..1.0))).collect();
        let (_, grad) = eval_with_grad(&e, &at).unwrap();
        for v in VARS {
            let shifted = |d: f64| {
                let mut p = at.clone();
                *p.get_mut(v).unwrap() += d;
                eval_with_grad(&e, &p).unwrap().0
            };
            let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
            worst = worst.max((grad[v] - fd).abs() / (1.0 + grad[v].abs()));
        }
    }
    check(worst <= 1e-6, format!("max relative |AD - FD| = {worst:.2e} over 1000 expressions"))
}

fn integrator_order() -> Outcome {
    let sys = damped_oscillator(0.1, 1.0);
    let x0 = state(&[1.0, 0.0, 0.0]);
    let end = |dt| {
        integrate(&sys, &x0, &IntegratorConfig::rk4(dt, 1.0))
            .unwrap()
            .final_state()
            .unwrap()
            .clone()
    };
    let reference = end(1e-5);
    let ratio = max_abs_diff(&end(0.1), &reference) / max_abs_diff(&end(0.05), &reference);
    check((12.0..=20.0).contains(&ratio), format!("error ratio = {ratio:.3}"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("oracle equivalence", oracle_equivalence),
        ("entropy identities", entropy_identities),
        ("Reeb duality", reeb_duality),
        ("Legendre transport", legendre_transport),
        ("conservation and production laws", conservation_laws),
        ("contact regression", contact_regression),
        ("AD correctness", ad_correctness),
        ("RK4 order", integrator_order),
    ];
    let mut all = true;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = run();
        all &= outcome.passed;
        let verdict = if outcome.passed { "PASS" } else { "FAIL" };
        println!("criterion {} {verdict}: {name} ({})", i + 1, outcome.detail);
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
