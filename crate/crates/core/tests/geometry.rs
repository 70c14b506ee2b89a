mod common;

use common::{random_state, random_system, random_vector, rng};
use cosym_core::geometry::lu::Lu;
use cosym_core::geometry::{reeb_family, GeometryError, PartiallyCosymplectic};
use cosym_core::{ChartSpec, Covector, FlatOperator, SystemClass, TwoFormMatrix};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

fn numeric_rank(m: &DMatrix<f64>) -> usize {
    let sv = m.clone().singular_values();
    let tol = 1e-10 * sv.max().max(1.0);
    sv.iter().filter(|s| **s > tol).count()
}

#[test]
fn two_form_ranks_match_svd() {
    // one subsystem with one compartment and one mechanical pair: 7x7, rank 6
    let w = TwoFormMatrix::build(&ChartSpec::non_simple(1, 1), SystemClass::NonSimple).unwrap();
    assert_eq!(w.dim(), 7);
    assert_eq!(numeric_rank(w.matrix()), 6);
    // the 9x9 case has two mechanical pairs
    let w = TwoFormMatrix::build(&ChartSpec::non_simple(2, 1), SystemClass::NonSimple).unwrap();
    assert_eq!(w.dim(), 9);
    assert_eq!(numeric_rank(w.matrix()), 8);
    // rank is D minus the number of eta forms for every class
    for class in SystemClass::ALL {
        let sys = random_system(class);
        let p = class.eta_count(sys.chart());
        assert_eq!(numeric_rank(sys.two_form().matrix()), sys.chart().dim() - p, "{class}");
    }
}

#[test]
fn flat_round_trip_on_random_vectors() {
    let mut r = rng(11);
    for class in SystemClass::ALL {
        let sys = random_system(class);
        let x = random_state(sys.chart(), &mut r);
        let flat = sys.flat_operator(&x).unwrap();
        for _ in 0..1000 {
            let v = random_vector(flat.dim(), &mut r);
            let back = flat.solve(&flat.apply(&v)).unwrap();
            assert!((back - &v).amax() <= 1e-10, "{class}");
        }
    }
}

#[test]
fn lu_matches_dense_inverse() {
    let mut r = rng(12);
    for _ in 0..200 {
        let d = r.random_range(2..12);
        let m = DMatrix::from_fn(d, d, |i, j| r.random_range(-1.0..1.0) + if i == j { 3.0 } else { 0.0 });
        let b = random_vector(d, &mut r);
        let lu = Lu::factor(&m).unwrap();
        let oracle = m.clone().try_inverse().unwrap() * &b;
        assert!((lu.solve(&b) - oracle).amax() <= 1e-10);
        assert!((lu.determinant() - m.determinant()).abs() <= 1e-9 * m.determinant().abs().max(1.0));
    }
}

#[test]
fn flat_solve_matches_explicit_inverse() {
    let mut r = rng(13);
    for class in SystemClass::ALL {
        let sys = random_system(class);
        for _ in 0..50 {
            let x = random_state(sys.chart(), &mut r);
            let flat = sys.flat_operator(&x).unwrap();
            let rhs = Covector(random_vector(flat.dim(), &mut r));
            let oracle = flat.matrix().clone().try_inverse().unwrap() * &rhs.0;
            assert!((flat.solve(&rhs).unwrap() - oracle).amax() <= 1e-10);
        }
    }
}

/// Random order-p structure on a non-simple chart: eta_A has a nonzero
/// Sigma_A component, no other entropy components, and arbitrary entries
/// elsewhere.
fn random_structure(p: usize, r: &mut impl Rng) -> PartiallyCosymplectic {
    let chart = ChartSpec::non_simple(2, p);
    let omega = TwoFormMatrix::build(&chart, SystemClass::NonSimple).unwrap();
    let etas = (0..p)
        .map(|a| {
            let mut eta = Covector(random_vector(chart.dim(), r));
            // the kernel of omega is spanned by S_B + Sigma_B; keep the
            // pairing with it diagonal so the structure is nondegenerate
            for b in 0..p {
                eta[chart.sigma_range().start + b] = 0.0;
                eta[chart.s_range().start + b] = 0.0;
            }
            eta[chart.sigma_range().start + a] = r.random_range(0.5..2.0) * if r.random_bool(0.5) { 1.0 } else { -1.0 };
            eta
        })
        .collect();
    PartiallyCosymplectic::new(omega, etas)
}

#[test]
fn reeb_duality_for_orders_one_to_three() {
    let mut r = rng(14);
    for p in 1..=3 {
        for _ in 0..200 {
            let s = random_structure(p, &mut r);
            let reeb = s.reeb_fields().unwrap();
            let pairing = s.pairing_matrix(&reeb);
            assert!((pairing - DMatrix::identity(p, p)).amax() <= 1e-10);
            for rk in &reeb {
                assert!(s.omega.interior(rk).0.amax() <= 1e-10);
            }
        }
    }
}

#[test]
fn orthonormal_etas_give_identity_duality() {
    let chart = ChartSpec::non_simple(1, 2);
    let omega = TwoFormMatrix::build(&chart, SystemClass::NonSimple).unwrap();
    let mut e1 = Covector::zeros(chart.dim());
    let mut e2 = Covector::zeros(chart.dim());
    e1[chart.sigma_range().start] = 1.0;
    e2[chart.sigma_range().start + 1] = 1.0;
    let s = PartiallyCosymplectic::new(omega, vec![e1, e2]);
    let reeb = s.reeb_fields().unwrap();
    assert!((s.pairing_matrix(&reeb) - DMatrix::identity(2, 2)).amax() <= 1e-10);
}

#[test]
fn whitney_decomposition_of_flat() {
    let mut r = rng(15);
    for class in SystemClass::ALL {
        let sys = random_system(class);
        let x = random_state(sys.chart(), &mut r);
        let etas = sys.build_etas(&x).unwrap();
        let flat = FlatOperator::new(sys.two_form(), &etas).unwrap();
        let b = flat.matrix();
        let m = sys.two_form().matrix().transpose();
        assert!(((b - b.transpose()) - (&m - m.transpose())).amax() <= 1e-14);
        let sym = etas
            .iter()
            .fold(DMatrix::zeros(b.nrows(), b.ncols()), |acc, e| acc + &e.0 * e.0.transpose());
        assert!(((b + b.transpose()) - sym * 2.0).amax() <= 1e-13);
    }
}

#[test]
fn determinant_is_product_of_squared_temperatures() {
    let mut r = rng(16);
    for class in SystemClass::ALL {
        let sys = random_system(class);
        for _ in 0..50 {
            let x = random_state(sys.chart(), &mut r);
            let t = sys.temperatures(&x).unwrap();
            let expected: f64 = t.iter().map(|t| t * t).product();
            let det = sys.flat_operator(&x).unwrap().determinant();
            assert!((det - expected).abs() <= 1e-9 * expected.max(1.0), "{class}: {det} vs {expected}");
        }
    }
}

#[test]
fn determinant_and_pairing_checks_agree() {
    let mut r = rng(17);
    let chart = ChartSpec::simple_closed(1);
    let omega = TwoFormMatrix::build(&chart, SystemClass::SimpleClosed).unwrap();
    for i in 0..500 {
        // every fifth sample has a vanishing temperature
        let t = if i % 5 == 0 { 0.0 } else { r.random_range(-2.0..2.0) };
        let eta = Covector(DVector::from_vec(vec![r.random_range(-1.0..1.0), 0.0, -t]));
        let s = PartiallyCosymplectic::new(omega.clone(), vec![eta.clone()]);
        let flat = s.flat().unwrap();
        let det_ok = flat.determinant().abs() > 1e-12;
        let pairing_ok = match reeb_family(&flat, &[eta]) {
            Ok(reeb) => (s.pairing_matrix(&reeb)[(0, 0)] - 1.0).abs() <= 1e-10,
            Err(GeometryError::DegenerateStructure { .. }) => false,
            Err(e) => panic!("{e}"),
        };
        assert_eq!(det_ok, pairing_ok);
        assert_eq!(det_ok, t != 0.0);
    }
}

#[test]
fn degenerate_structure_at_zero_temperature() {
    let sys = common::damped_oscillator(0.1, 0.0);
    let x = DVector::from_vec(vec![0.5, 0.5, 0.0]);
    let flat = sys.flat_operator(&x).unwrap();
    assert!(matches!(
        flat.solve(&Covector::zeros(3)),
        Err(GeometryError::DegenerateStructure { .. })
    ));
}

#[test]
fn kernel_of_flat_is_trivial() {
    let mut r = rng(18);
    let sys = random_system(SystemClass::NonSimple);
    let x = random_state(sys.chart(), &mut r);
    let flat = sys.flat_operator(&x).unwrap();
    assert_eq!(flat.solve(&Covector::zeros(flat.dim())).unwrap().amax(), 0.0);
}
