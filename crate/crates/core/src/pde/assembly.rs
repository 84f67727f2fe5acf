//! Spatial matrices and space-time boundary loads.

use super::data::{NeumannData, ObservationData};
use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;
use crate::mesh::{Face, SimplicialMesh, TimeGrid};
use crate::objective::CutoffFunction;
use crate::quadrature::{time_rule, SimplexRule, CELL_DEGREE, FACE_DEGREE};
use crate::spaces::{ScalarField, SpaceTimeField};

/// Permittivity data at one cell quadrature point.
#[derive(Debug, Clone, Copy)]
pub(crate) struct QPoint {
    /// Physical weight (rule weight times cell volume).
    pub w: f64,
    pub b: [f64; 4],
    pub eps: f64,
    pub grad_eps: [f64; 3],
}

/// Cell quadrature points with the permittivity evaluated, per cell.
pub(crate) fn eps_quadrature(mesh: &SimplicialMesh, eps: &ScalarField) -> Vec<Vec<QPoint>> {
    let rule = SimplexRule::new(mesh.dim(), CELL_DEGREE);
    (0..mesh.n_cells())
        .map(|c| {
            let vol = mesh.geometry(c).volume;
            rule.points
                .iter()
                .zip(&rule.weights)
                .map(|(b, &w)| QPoint {
                    w: w * vol,
                    b: *b,
                    eps: eps.eval(mesh, c, b),
                    grad_eps: eps.grad(mesh, c, b),
                })
                .collect()
        })
        .collect()
}

/// Checks that `eps` lives on `mesh` and is positive at every node.
pub(crate) fn check_eps(mesh: &SimplicialMesh, eps: &ScalarField) -> Result<()> {
    eps.check_mesh(mesh)?;
    let min = eps.min_value();
    if !(min > 0.0) || eps.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::Usage(format!(
            "permittivity must be positive and finite, minimum nodal value is {min}"
        )));
    }
    Ok(())
}

/// The spatial operators of the weak form, for unknowns ordered
/// `vertex * d + component`.
#[derive(Debug, Clone)]
pub struct AssembledSystem {
    pub ncomp: usize,
    /// `<eps u, v>`
    pub mass: CsrMatrix,
    /// `<grad u, grad v>`
    pub stiffness: CsrMatrix,
    /// `<(grad eps . u) / eps, div v>` with rows indexed by `v`.
    pub coupling: CsrMatrix,
}

impl AssembledSystem {
    pub fn ndof(&self) -> usize {
        self.mass.n
    }
}

pub fn assemble(mesh: &SimplicialMesh, eps: &ScalarField) -> Result<AssembledSystem> {
    check_eps(mesh, eps)?;
    let d = mesh.dim();
    let ndof = mesh.n_vertices() * d;
    let qp = eps_quadrature(mesh, eps);
    let mut mass = Vec::new();
    let mut stiff = Vec::new();
    let mut coup = Vec::new();
    for c in 0..mesh.n_cells() {
        let verts = mesh.cell(c);
        let g = mesh.geometry(c);
        let gb = &g.grad_bary;
        for i in 0..=d {
            for j in 0..=d {
                let m: f64 = qp[c].iter().map(|q| q.w * q.eps * q.b[i] * q.b[j]).sum();
                let k: f64 = g.volume * (0..d).map(|a| gb[i][a] * gb[j][a]).sum::<f64>();
                for a in 0..d {
                    mass.push((verts[i] * d + a, verts[j] * d + a, m));
                    stiff.push((verts[i] * d + a, verts[j] * d + a, k));
                }
                // row (i, a): test psi_i e_a; column (j, b): trial psi_j e_b
                for a in 0..d {
                    for bc in 0..d {
                        let v: f64 = qp[c]
                            .iter()
                            .map(|q| q.w * q.grad_eps[bc] / q.eps * q.b[j] * gb[i][a])
                            .sum();
                        coup.push((verts[i] * d + a, verts[j] * d + bc, v));
                    }
                }
            }
        }
    }
    Ok(AssembledSystem {
        ncomp: d,
        mass: CsrMatrix::from_triplets(ndof, mass),
        stiffness: CsrMatrix::from_triplets(ndof, stiff),
        coupling: CsrMatrix::from_triplets(ndof, coup),
    })
}

/// One boundary space-time quadrature point.
pub(crate) struct BoundaryPoint<'a> {
    pub face_id: usize,
    pub face: &'a Face,
    /// Face barycentric coordinates in `face.vertices` order.
    pub fb: [f64; 4],
    /// Interval index and local time coordinate.
    pub k: usize,
    pub theta: f64,
    pub t: f64,
    /// Physical space-time weight.
    pub w: f64,
}

/// Visits the boundary quadrature points (face rule times the Gauss rule on
/// each time interval).
pub(crate) fn for_each_boundary_point(
    mesh: &SimplicialMesh,
    grid: &TimeGrid,
    mut f: impl FnMut(&BoundaryPoint<'_>),
) {
    let rule = SimplexRule::new(mesh.dim() - 1, FACE_DEGREE);
    let (tq, tw) = time_rule();
    for (face_id, face) in mesh.boundary_faces() {
        let area = mesh.face_measure(face.inner.0, face.inner.1);
        for k in 0..grid.n {
            for (&theta, &wt) in tq.iter().zip(&tw) {
                let t = (k as f64 + theta) * grid.tau;
                for (fb, &wx) in rule.points.iter().zip(&rule.weights) {
                    f(&BoundaryPoint {
                        face_id,
                        face,
                        fb: *fb,
                        k,
                        theta,
                        t,
                        w: wx * area * wt * grid.tau,
                    });
                }
            }
        }
    }
}

/// `b_j = <P, psi_j(t) phi_i e_a>` over the lateral boundary, for every time
/// node `j`.
pub(crate) fn boundary_loads(
    mesh: &SimplicialMesh,
    grid: &TimeGrid,
    p: &NeumannData,
) -> Vec<Vec<f64>> {
    let d = mesh.dim();
    let ndof = mesh.n_vertices() * d;
    let mut loads = vec![vec![0.0; ndof]; grid.n + 1];
    if p.is_zero() {
        return loads;
    }
    for_each_boundary_point(mesh, grid, |bp| {
        let val = p.eval(bp.face_id, bp.face.side, &bp.fb, bp.k, bp.theta, bp.t);
        for (j, hat) in [(bp.k, 1.0 - bp.theta), (bp.k + 1, bp.theta)] {
            for (m, &v) in bp.face.vertices[..d].iter().enumerate() {
                for a in 0..d {
                    loads[j][v * d + a] += bp.w * val[a] * bp.fb[m] * hat;
                }
            }
        }
    });
    loads
}

/// Value of a direct-space field's trace at a boundary point.
pub(crate) fn trace_value(e: &SpaceTimeField, bp: &BoundaryPoint<'_>, d: usize) -> [f64; 3] {
    let mut v = [0.0; 3];
    for (m, &node) in bp.face.vertices[..d].iter().enumerate() {
        let a0 = e.value(bp.k, node);
        let a1 = e.value(bp.k + 1, node);
        for a in 0..d {
            v[a] += bp.fb[m] * ((1.0 - bp.theta) * a0[a] + bp.theta * a1[a]);
        }
    }
    v
}

/// `g_j = <(E - G) z^2, psi_j(t) phi_i e_a>` over the lateral boundary.
pub(crate) fn adjoint_sources(
    mesh: &SimplicialMesh,
    grid: &TimeGrid,
    e: &SpaceTimeField,
    g: &ObservationData,
    z: &CutoffFunction,
) -> Vec<Vec<f64>> {
    let d = mesh.dim();
    let ndof = mesh.n_vertices() * d;
    let mut src = vec![vec![0.0; ndof]; grid.n + 1];
    for_each_boundary_point(mesh, grid, |bp| {
        let zz = z.value_unchecked(bp.t).powi(2);
        if zz == 0.0 {
            return;
        }
        let ev = trace_value(e, bp, d);
        let gv = g.eval_face(bp.face_id, &bp.fb, bp.k, bp.theta);
        for (j, hat) in [(bp.k, 1.0 - bp.theta), (bp.k + 1, bp.theta)] {
            for (m, &v) in bp.face.vertices[..d].iter().enumerate() {
                for a in 0..d {
                    src[j][v * d + a] += bp.w * (ev[a] - gv[a]) * zz * bp.fb[m] * hat;
                }
            }
        }
    });
    src
}

/// `1/2 int int |E - G|^2 z^2` over the lateral boundary, with the same rule
/// as [`adjoint_sources`].
pub(crate) fn boundary_misfit(
    mesh: &SimplicialMesh,
    grid: &TimeGrid,
    e: &SpaceTimeField,
    g: &ObservationData,
    z: &CutoffFunction,
) -> f64 {
    let d = mesh.dim();
    let mut total = 0.0;
    for_each_boundary_point(mesh, grid, |bp| {
        let zz = z.value_unchecked(bp.t).powi(2);
        if zz == 0.0 {
            return;
        }
        let ev = trace_value(e, bp, d);
        let gv = g.eval_face(bp.face_id, &bp.fb, bp.k, bp.theta);
        let r2: f64 = (0..d).map(|a| (ev[a] - gv[a]).powi(2)).sum();
        total += 0.5 * bp.w * r2 * zz;
    });
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_box_mesh, BoxDomain};
    use crate::spaces::interpolate;

    #[test]
    fn mass_scales_with_eps_and_sums_to_volume() {
        let m = build_box_mesh(BoxDomain::unit(2), &[3, 2]).unwrap();
        let one = ScalarField::constant(&m, 1, 1.0).unwrap();
        let three = ScalarField::constant(&m, 1, 3.0).unwrap();
        let s1 = assemble(&m, &one).unwrap();
        let s3 = assemble(&m, &three).unwrap();
        for (a, b) in s1.mass.vals.iter().zip(&s3.mass.vals) {
            assert!((3.0 * a - b).abs() < 1e-15);
        }
        // sum over one component block = |Omega|
        let total: f64 = (0..s1.ndof())
            .step_by(2)
            .flat_map(|i| s1.mass.row(i).map(|(_, v)| v).collect::<Vec<_>>())
            .sum();
        assert!((total - 1.0).abs() < 1e-14);
        assert!(s1.mass.is_symmetric(1e-15));
        assert!(s1.stiffness.is_symmetric(1e-15));
    }

    #[test]
    fn coupling_vanishes_for_constant_eps() {
        let m = build_box_mesh(BoxDomain::unit(2), &[2, 2]).unwrap();
        let eps = ScalarField::constant(&m, 2, 2.5).unwrap();
        let s = assemble(&m, &eps).unwrap();
        assert!(s.coupling.vals.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn stiffness_annihilates_constants() {
        let m = build_box_mesh(BoxDomain::unit(3), &[2, 1, 1]).unwrap();
        let eps = interpolate(&m, 1, |x| 1.0 + x[0]).unwrap();
        let s = assemble(&m, &eps).unwrap();
        let ones = vec![1.0; s.ndof()];
        let mut y = vec![0.0; s.ndof()];
        s.stiffness.mul_vec(&ones, &mut y);
        assert!(y.iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn nonpositive_eps_is_rejected() {
        let m = build_box_mesh(BoxDomain::unit(2), &[1, 1]).unwrap();
        let eps = ScalarField::constant(&m, 1, 0.0).unwrap();
        assert!(matches!(assemble(&m, &eps), Err(Error::Usage(_))));
    }
}
