use super::*;
use crate::mesh::{build_box_mesh, BoxDomain, SimplicialMesh, TimeGrid};
use crate::objective::CutoffFunction;
use crate::spaces::{interpolate, interpolate_space_time, FieldKind, ScalarField, SpaceTimeField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn setup(n: usize, steps: usize) -> (SimplicialMesh, TimeGrid) {
    let m = build_box_mesh(BoxDomain::unit(2), &[n, n]).unwrap();
    (m, TimeGrid::new(1.0, steps).unwrap())
}

fn pulse() -> NeumannData {
    NeumannData::SidePulse {
        side: 3,
        direction: [1.0, 0.5, 0.0],
        amplitude: 1.0,
        profile: TimeProfile::Ricker {
            f0: 3.0,
            delay: 0.3,
        },
    }
}

fn bumpy_eps(m: &SimplicialMesh, q: usize) -> ScalarField {
    interpolate(m, q, |x| 1.0 + 2.0 * x[0] * x[1] + 0.5 * x[0] * x[0]).unwrap()
}

fn random_field(
    m: &SimplicialMesh,
    g: &TimeGrid,
    kind: FieldKind,
    rng: &mut ChaCha8Rng,
) -> SpaceTimeField {
    let mut u = SpaceTimeField::zeros(m, g, FieldKind::Free);
    let skip = if kind == FieldKind::Direct { 0 } else { g.n };
    for k in 0..=g.n {
        if k == skip {
            continue;
        }
        for v in u.slice_mut(k) {
            *v = rng.random_range(-1.0..1.0);
        }
    }
    u.with_kind(kind).unwrap()
}

#[test]
fn zero_source_gives_zero_field() {
    let (m, g) = setup(3, 6);
    let eps = bumpy_eps(&m, 1);
    let e = direct_solve(&m, &g, &eps, &NeumannData::Zero).unwrap();
    assert!(e.data().iter().all(|&v| v == 0.0));
}

#[test]
fn direct_solution_is_galerkin_orthogonal() {
    for q in [1, 2] {
        let (m, g) = setup(4, 12);
        let eps = bumpy_eps(&m, q);
        let e = direct_solve(&m, &g, &eps, &pulse()).unwrap();
        assert!(e.max_abs() > 1e-3);
        let r = residual_d(&m, &g, &eps, &e, &pulse()).unwrap();
        assert!(r.relative() <= 1e-8, "q={q}: {}", r.relative());
        // the adjoint-space solution itself is a valid test function
        let lam = adjoint_solve(
            &m,
            &g,
            &eps,
            &e,
            &ObservationData::zeros(&m, &g),
            &CutoffFunction::new(1.0, 0.1).unwrap(),
        )
        .unwrap();
        let dl = weak_form_d(&m, &g, &eps, &e, &lam, &pulse()).unwrap();
        assert!(dl.abs() <= 1e-8 * r.scale * lam.max_abs() * 100.0);
    }
}

#[test]
fn adjoint_solution_is_galerkin_orthogonal() {
    let (m, g) = setup(4, 12);
    let eps = bumpy_eps(&m, 2);
    let e = direct_solve(&m, &g, &eps, &pulse()).unwrap();
    let data = ObservationData::from_fn(&m, &g, |x, t| [0.1 * x[0] * t, -0.05 * t, 0.0]);
    let z = CutoffFunction::new(1.0, 0.2).unwrap();
    let lam = adjoint_solve(&m, &g, &eps, &e, &data, &z).unwrap();
    assert!(lam.max_abs() > 1e-6);
    let r = residual_a(&m, &g, &eps, &lam, &e, &data, &z).unwrap();
    assert!(r.relative() <= 1e-8, "{}", r.relative());
}

#[test]
fn scalar_and_vector_loops_agree() {
    let (m, g) = setup(3, 5);
    let eps = bumpy_eps(&m, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let e = random_field(&m, &g, FieldKind::Direct, &mut rng);
    let phi = random_field(&m, &g, FieldKind::Adjoint, &mut rng);
    let r = residual_d(&m, &g, &eps, &e, &pulse()).unwrap();
    let pairing: f64 = (0..g.n)
        .map(|j| crate::linalg::dot(phi.slice(j), &r.values[j]))
        .sum();
    let direct = weak_form_d(&m, &g, &eps, &e, &phi, &pulse()).unwrap();
    assert!((pairing - direct).abs() <= 1e-12 * r.scale.max(1.0) * 100.0);

    let lam = random_field(&m, &g, FieldKind::Adjoint, &mut rng);
    let psi = random_field(&m, &g, FieldKind::Direct, &mut rng);
    let data = ObservationData::from_fn(&m, &g, |x, t| [x[1] * t, 0.3, 0.0]);
    let z = CutoffFunction::new(1.0, 0.3).unwrap();
    let ra = residual_a(&m, &g, &eps, &lam, &e, &data, &z).unwrap();
    let pairing: f64 = (1..=g.n)
        .map(|j| crate::linalg::dot(psi.slice(j), &ra.values[j - 1]))
        .sum();
    let direct = weak_form_a(&m, &g, &eps, &lam, &psi, &e, &data, &z).unwrap();
    assert!((pairing - direct).abs() <= 1e-11 * ra.scale.max(1.0) * 100.0);
}

#[test]
fn weak_forms_vanish_trivially() {
    let (m, g) = setup(2, 4);
    let eps = bumpy_eps(&m, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let e = random_field(&m, &g, FieldKind::Direct, &mut rng);
    let zero_adj = SpaceTimeField::zeros(&m, &g, FieldKind::Adjoint);
    let zero_dir = SpaceTimeField::zeros(&m, &g, FieldKind::Direct);
    assert_eq!(
        weak_form_d(&m, &g, &eps, &e, &zero_adj, &pulse()).unwrap(),
        0.0
    );
    let phi = random_field(&m, &g, FieldKind::Adjoint, &mut rng);
    let v = weak_form_d(&m, &g, &eps, &zero_dir, &phi, &NeumannData::Zero).unwrap();
    assert_eq!(v, 0.0);
    let z = CutoffFunction::new(1.0, 0.1).unwrap();
    let data = ObservationData::trace_of(&m, &e).unwrap();
    let v = weak_form_a(&m, &g, &eps, &zero_adj, &e, &e, &data, &z).unwrap();
    assert!(v.abs() < 1e-15);
}

#[test]
fn constant_in_space_time_term_matches_hand_value() {
    // E = c t, phi = d (T - t), eps constant: D = -eps |Omega| T (c . (-d))
    let (m, g) = setup(1, 3);
    let eps = ScalarField::constant(&m, 1, 2.5).unwrap();
    let (c, d) = ([0.7, -1.1], [0.3, 0.9]);
    let e = interpolate_space_time(&m, &g, FieldKind::Direct, |_, t| [c[0] * t, c[1] * t, 0.0])
        .unwrap();
    let phi = interpolate_space_time(&m, &g, FieldKind::Adjoint, |_, t| {
        [d[0] * (1.0 - t), d[1] * (1.0 - t), 0.0]
    })
    .unwrap();
    let v = weak_form_d(&m, &g, &eps, &e, &phi, &NeumannData::Zero).unwrap();
    let hand = 2.5 * (c[0] * d[0] + c[1] * d[1]);
    assert!((v - hand).abs() < 1e-12);
}

#[test]
fn boundary_term_matches_independent_quadrature() {
    // with lambda = 0 the adjoint form reduces to the boundary term; the time
    // grid resolves the cut-off ramp so the Gauss rule is accurate
    let (m, g) = setup(2, 80);
    let eps = ScalarField::constant(&m, 1, 1.7).unwrap();
    let e = interpolate_space_time(&m, &g, FieldKind::Direct, |x, t| [t * x[0], t, 0.0]).unwrap();
    let phi = interpolate_space_time(&m, &g, FieldKind::Direct, |_, t| [t, 2.0 * t, 0.0]).unwrap();
    let data = ObservationData::zeros(&m, &g);
    let z = CutoffFunction::new(1.0, 0.2).unwrap();
    let lam = SpaceTimeField::zeros(&m, &g, FieldKind::Adjoint);
    let v = weak_form_a(&m, &g, &eps, &lam, &phi, &e, &data, &z).unwrap();
    // oracle: int_0^1 z(t)^2 t^2 dt * int_Gamma (x + 2) ds, by composite
    // Simpson in time and exact perimeter integral
    let n = 20000;
    let mut s = 0.0;
    for i in 0..=n {
        let t = i as f64 / n as f64;
        let w = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        s += w * z.value(t).unwrap().powi(2) * t * t;
    }
    s /= 3.0 * n as f64;
    // sides: x=0 (x+2 -> 2), x=1 (3), y=0 and y=1 (int_0^1 x + 2 = 2.5 each)
    let space = 2.0 + 3.0 + 2.5 + 2.5;
    // the time rule is not exact for z^2 t^2, so compare to quadrature accuracy
    assert!(
        (v - s * space).abs() < 1e-4 * s * space,
        "{v} vs {}",
        s * space
    );
}

#[test]
fn adjoint_vanishes_without_mismatch() {
    let (m, g) = setup(3, 8);
    let eps = bumpy_eps(&m, 1);
    let e = direct_solve(&m, &g, &eps, &pulse()).unwrap();
    let data = ObservationData::trace_of(&m, &e).unwrap();
    let z = CutoffFunction::new(1.0, 0.1).unwrap();
    let lam = adjoint_solve(&m, &g, &eps, &e, &data, &z).unwrap();
    assert!(lam.data().iter().all(|&v| v == 0.0));
    let wide = CutoffFunction::new(1.0, 2.0).unwrap();
    let lam = adjoint_solve(&m, &g, &eps, &e, &ObservationData::zeros(&m, &g), &wide).unwrap();
    assert!(lam.data().iter().all(|&v| v == 0.0));
}

#[test]
fn direct_solution_self_converges() {
    let eps_of = |m: &SimplicialMesh| ScalarField::constant(m, 1, 1.0).unwrap();
    let solve = |n: usize, steps: usize| {
        let (m, g) = setup(n, steps);
        let e = direct_solve(&m, &g, &eps_of(&m), &pulse()).unwrap();
        (m, e)
    };
    let (mr, er) = solve(32, 128);
    let diff = |n: usize, steps: usize| {
        let (m, e) = solve(n, steps);
        let gr = er.grid();
        let (mut num, mut den) = (0.0, 0.0);
        for k in 0..=gr.n {
            let t = gr.node(k);
            for (v, x) in mr.vertices().iter().enumerate() {
                let (c, b) = m.locate(x).unwrap();
                let u = e.eval(&m, c, &b, t);
                let r = er.value(k, v);
                num += (u[0] - r[0]).powi(2) + (u[1] - r[1]).powi(2);
                den += r[0] * r[0] + r[1] * r[1];
            }
        }
        (num / den).sqrt()
    };
    let e4 = diff(4, 16);
    let e8 = diff(8, 32);
    let e16 = diff(16, 64);
    assert!(e8 < e4 && e16 < e8, "{e4} {e8} {e16}");
}
