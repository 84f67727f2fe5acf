use super::*;
use crate::mesh::{build_box_mesh, BoxDomain};
use crate::pde::{direct_solve, TimeProfile};
use crate::spaces::{interpolate, FieldKind};
use proptest::prelude::*;

fn setup(n: usize, steps: usize) -> (SimplicialMesh, TimeGrid) {
    let m = build_box_mesh(BoxDomain::unit(2), &[n, n]).unwrap();
    (m, TimeGrid::new(1.0, steps).unwrap())
}

fn pulse() -> NeumannData {
    NeumannData::SidePulse {
        side: 2,
        direction: [0.0, 1.0, 0.0],
        amplitude: 1.0,
        profile: TimeProfile::Ricker {
            f0: 3.0,
            delay: 0.3,
        },
    }
}

fn bump(m: &SimplicialMesh, q: usize, height: f64) -> ScalarField {
    let collar = collar_nodes(m, q);
    let f = interpolate(m, q, |x| {
        1.0 + height * (-((x[0] - 0.5).powi(2) + (x[1] - 0.45).powi(2)) / 0.02).exp()
    })
    .unwrap();
    project_admissible(&f, 15.0, &collar).unwrap().into_field()
}

fn reg(m: &SimplicialMesh, q: usize, alpha: f64) -> RegularizationConfig {
    RegularizationConfig::new(alpha, PermittivityField::one(m, q, 15.0).unwrap()).unwrap()
}

#[test]
fn projection_examples() {
    let m = build_box_mesh(BoxDomain::unit(2), &[4, 4]).unwrap();
    let collar = collar_nodes(&m, 1);
    let interior = collar.iter().position(|c| !c).unwrap();
    let boundary = collar.iter().position(|&c| c).unwrap();
    let mut v = vec![1.0; collar.len()];
    v[interior] = 20.0;
    v[boundary] = 5.0;
    let f = ScalarField::new(&m, 1, v).unwrap();
    let p = project_admissible(&f, 15.0, &collar).unwrap();
    assert_eq!(p.values()[interior], 15.0);
    assert_eq!(p.values()[boundary], 1.0);
    let again = project_admissible(&p, 15.0, &collar).unwrap();
    assert_eq!(again, p);
    assert!(matches!(
        project_admissible(&f, 0.5, &collar),
        Err(Error::Config(_))
    ));
    assert!(PermittivityField::new(&m, f, 15.0).is_err());
}

#[test]
fn collar_covers_boundary_cells_only() {
    let m = build_box_mesh(BoxDomain::unit(2), &[4, 4]).unwrap();
    let collar = collar_nodes(&m, 1);
    // on a 4x4 grid the vertices at distance >= 2 spacings from the boundary
    // are the only free ones
    let free: Vec<_> = (0..m.n_vertices()).filter(|&v| !collar[v]).collect();
    assert_eq!(free.len(), 1);
    assert_eq!(m.vertex(free[0])[..2], [0.5, 0.5]);
    assert_eq!(collar_nodes(&m, 2).len(), m.n_vertices() + m.n_edges());
}

#[test]
fn regularization_alone_matches_integral() {
    // eps - eps0 = 3 x (exact in P1); int 9 x^2 over the unit square = 3
    let (m, g) = setup(3, 4);
    let r = reg(&m, 1, 0.2);
    let eps = interpolate(&m, 1, |x| 1.0 + 3.0 * x[0]).unwrap();
    let e = direct_solve(&m, &g, &eps, &pulse()).unwrap();
    let data = ObservationData::trace_of(&m, &e).unwrap();
    let z = CutoffFunction::new(1.0, 0.1).unwrap();
    let parts = tikhonov_parts(&m, &g, &eps, &e, &data, &r, &z).unwrap();
    assert_eq!(parts.misfit, 0.0);
    assert!((parts.regularization - 0.5 * 0.2 * 3.0).abs() < 1e-13);
    let r2 = reg(&m, 1, 0.4);
    let doubled = tikhonov_parts(&m, &g, &eps, &e, &data, &r2, &z).unwrap();
    assert!((doubled.regularization - 2.0 * parts.regularization).abs() < 1e-14);
    assert_eq!(doubled.misfit, parts.misfit);
    let at_ref = tikhonov_value(&m, &g, &r.eps0, &e, &data, &r, &z).unwrap();
    assert_eq!(at_ref, 0.0);
}

#[test]
fn regularization_is_exact_for_p2() {
    // eps - eps0 = x y, int x^2 y^2 = 1/9
    let m = build_box_mesh(BoxDomain::unit(2), &[2, 3]).unwrap();
    let r = reg(&m, 2, 1.0);
    let eps = interpolate(&m, 2, |x| 1.0 + x[0] * x[1]).unwrap();
    let v = regularization_value(&m, &eps, &r).unwrap();
    assert!((v - 0.5 / 9.0).abs() < 1e-14);
}

#[test]
fn lagrangian_reduces_to_functional() {
    let (m, g) = setup(3, 8);
    let r = reg(&m, 1, 0.1);
    let eps = bump(&m, 1, 2.0);
    let z = CutoffFunction::new(1.0, 0.1).unwrap();
    let e = direct_solve(&m, &g, &eps, &pulse()).unwrap();
    let data = ObservationData::from_fn(&m, &g, |x, t| [x[0] * t, 0.0, 0.0]);
    let f = tikhonov_value(&m, &g, &eps, &e, &data, &r, &z).unwrap();
    let zero = SpaceTimeField::zeros(&m, &g, FieldKind::Adjoint);
    let l = lagrangian_value(&m, &g, &eps, &e, &zero, &data, &pulse(), &r, &z).unwrap();
    assert_eq!(l, f);
    let lam = crate::pde::adjoint_solve(&m, &g, &eps, &e, &data, &z).unwrap();
    let l = lagrangian_value(&m, &g, &eps, &e, &lam, &data, &pulse(), &r, &z).unwrap();
    assert!((l - f).abs() <= 1e-8 * f.abs().max(1e-3));

    let ez = SpaceTimeField::zeros(&m, &g, FieldKind::Direct);
    let l = lagrangian_value(
        &m,
        &g,
        &r.eps0,
        &ez,
        &zero,
        &ObservationData::zeros(&m, &g),
        &NeumannData::Zero,
        &r,
        &z,
    )
    .unwrap();
    assert_eq!(l, 0.0);
}

#[test]
fn gradient_without_fields_is_pure_regularization() {
    let (m, g) = setup(3, 4);
    let r = reg(&m, 2, 0.3);
    let e = SpaceTimeField::zeros(&m, &g, FieldKind::Direct);
    let lam = SpaceTimeField::zeros(&m, &g, FieldKind::Adjoint);
    let grad = grad_eps(&m, &r.eps0, &e, &lam, &r).unwrap();
    assert!(grad.iter().all(|&v| v == 0.0));
    let eps = bump(&m, 2, 1.0);
    let grad = grad_eps(&m, &eps, &e, &lam, &r).unwrap();
    let mass = scalar_mass(&m, 2);
    let diff: Vec<f64> = eps.values().iter().map(|v| v - 1.0).collect();
    let mut expect = vec![0.0; diff.len()];
    mass.mul_vec(&diff, &mut expect);
    for (a, b) in grad.iter().zip(&expect) {
        assert!((a - 0.3 * b).abs() < 1e-15);
    }
}

fn fd_check(q: usize) -> f64 {
    let (m, g) = setup(4, 20);
    let r = reg(&m, q, 0.05);
    let z = CutoffFunction::new(1.0, 0.1).unwrap();
    let truth = bump(&m, q, 3.0);
    let e_true = direct_solve(&m, &g, &truth, &pulse()).unwrap();
    let data = ObservationData::trace_of(&m, &e_true).unwrap();
    let problem = InverseProblem {
        mesh: &m,
        grid: g,
        data: &data,
        source: &pulse(),
        reg: &r,
        cutoff: z,
    };
    let eps = bump(&m, q, 1.5);
    let st = problem.solve(&eps).unwrap();
    let collar = collar_nodes(&m, q);
    let dir: Vec<f64> = collar
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            if c {
                0.0
            } else {
                ((i * 7919) % 13) as f64 / 13.0 - 0.4
            }
        })
        .collect();
    let s = 1e-4;
    let shifted = |sign: f64| {
        let v: Vec<f64> = eps
            .values()
            .iter()
            .zip(&dir)
            .map(|(a, d)| a + sign * s * d)
            .collect();
        problem.functional(&eps.with_values(v)).unwrap().0.total()
    };
    let fd = (shifted(1.0) - shifted(-1.0)) / (2.0 * s);
    let ad = dot(&st.gradient, &dir);
    assert!(fd.abs() > 1e-6, "degenerate direction");
    (ad - fd).abs() / fd.abs()
}

#[test]
fn gradient_matches_finite_differences() {
    for q in [1, 2] {
        let rel = fd_check(q);
        assert!(rel < 1e-6, "q={q}: {rel}");
    }
}

#[cfg(debug_assertions)]
#[test]
#[should_panic(expected = "different permittivity")]
fn stale_fields_are_flagged() {
    let (m, g) = setup(2, 4);
    let r = reg(&m, 1, 0.1);
    let e = direct_solve(&m, &g, &r.eps0, &pulse()).unwrap();
    let lam = SpaceTimeField::zeros(&m, &g, FieldKind::Adjoint);
    let other = ScalarField::constant(&m, 1, 2.0).unwrap();
    let _ = grad_eps(&m, &other, &e, &lam, &r);
}

#[test]
fn minimizer_stops_at_exact_reference() {
    let (m, g) = setup(4, 16);
    let r = reg(&m, 1, 0.01);
    let e = direct_solve(&m, &g, &r.eps0, &pulse()).unwrap();
    let data = ObservationData::trace_of(&m, &e).unwrap();
    let problem = InverseProblem {
        mesh: &m,
        grid: g,
        data: &data,
        source: &pulse(),
        reg: &r,
        cutoff: CutoffFunction::new(1.0, 0.1).unwrap(),
    };
    let out = minimize(&problem, &r.eps0, 15.0, &MinimizeOptions::default()).unwrap();
    assert_eq!(out.status, MinimizeStatus::Converged);
    assert_eq!(out.log.len(), 1);
    assert_eq!(out.log[0].f, 0.0);
}

#[test]
fn minimizer_decreases_functional() {
    let (m, g) = setup(6, 24);
    let r = reg(&m, 1, 0.001);
    let truth = bump(&m, 1, 2.0);
    let e = direct_solve(&m, &g, &truth, &pulse()).unwrap();
    let data = ObservationData::trace_of(&m, &e).unwrap();
    let problem = InverseProblem {
        mesh: &m,
        grid: g,
        data: &data,
        source: &pulse(),
        reg: &r,
        cutoff: CutoffFunction::new(1.0, 0.1).unwrap(),
    };
    let opts = MinimizeOptions {
        max_iterations: 8,
        ..Default::default()
    };
    let out = minimize(&problem, &r.eps0, 15.0, &opts).unwrap();
    assert!(out.log.len() > 2);
    for w in out.log.windows(2) {
        assert!(w[1].f <= w[0].f);
    }
    assert!(out.log.last().unwrap().f < 0.5 * out.log[0].f);
    assert!(out.eps.values().iter().all(|&v| (1.0..=15.0).contains(&v)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projection_is_nonexpansive(
        a in proptest::collection::vec(-5.0f64..25.0, 25),
        b in proptest::collection::vec(-5.0f64..25.0, 25),
    ) {
        let m = build_box_mesh(BoxDomain::unit(2), &[4, 4]).unwrap();
        let collar = collar_nodes(&m, 1);
        let fa = ScalarField::new(&m, 1, a.clone()).unwrap();
        let fb = ScalarField::new(&m, 1, b.clone()).unwrap();
        let pa = project_admissible(&fa, 15.0, &collar).unwrap();
        let pb = project_admissible(&fb, 15.0, &collar).unwrap();
        let before = a.iter().zip(&b).fold(0.0_f64, |s, (x, y)| s.max((x - y).abs()));
        let after = pa.values().iter().zip(pb.values()).fold(0.0_f64, |s, (x, y)| s.max((x - y).abs()));
        prop_assert!(after <= before);
        prop_assert!(PermittivityField::new(&m, pa.field().clone(), 15.0).is_ok());
    }

    #[test]
    fn functional_is_nonnegative(
        vals in proptest::collection::vec(1.0f64..4.0, 16),
        gscale in -1.0f64..1.0,
    ) {
        let m = build_box_mesh(BoxDomain::unit(2), &[3, 3]).unwrap();
        let g = TimeGrid::new(1.0, 6).unwrap();
        let r = reg(&m, 1, 0.1);
        let eps = ScalarField::new(&m, 1, vals).unwrap();
        let e = direct_solve(&m, &g, &eps, &pulse()).unwrap();
        let data = ObservationData::from_fn(&m, &g, |x, t| [gscale * x[1] * t, gscale, 0.0]);
        let z = CutoffFunction::new(1.0, 0.2).unwrap();
        let parts = tikhonov_parts(&m, &g, &eps, &e, &data, &r, &z).unwrap();
        prop_assert!(parts.misfit >= 0.0 && parts.regularization >= 0.0);
        prop_assert_eq!(parts.total() == 0.0, parts.misfit == 0.0 && parts.regularization == 0.0);
    }
}
