//! Spatial and temporal jump operators and their maximal liftings.

use super::{ScalarField, SpaceTimeField};
use crate::mesh::{Point, SimplicialMesh, TimeGrid};

/// Nonnegative maximal jumps, `ncomp` values per (slice, entity).
///
/// Spatial jumps have one slice and one entity per cell. Temporal jumps have
/// one slice per time interval and one entity per node or cell of the jumped
/// quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpField {
    pub ncomp: usize,
    pub n_slices: usize,
    pub n_entities: usize,
    pub values: Vec<f64>,
}

impl JumpField {
    pub fn zeros(ncomp: usize, n_slices: usize, n_entities: usize) -> Self {
        JumpField {
            ncomp,
            n_slices,
            n_entities,
            values: vec![0.0; ncomp * n_slices * n_entities],
        }
    }

    pub fn get(&self, slice: usize, entity: usize) -> &[f64] {
        let i = (slice * self.n_entities + entity) * self.ncomp;
        &self.values[i..i + self.ncomp]
    }

    fn get_mut(&mut self, slice: usize, entity: usize) -> &mut [f64] {
        let i = (slice * self.n_entities + entity) * self.ncomp;
        &mut self.values[i..i + self.ncomp]
    }

    /// Largest entry.
    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

/// Points where a face jump is sampled: the face vertices and the face
/// centroid, as barycentric coordinates of the cell owning local face `lf`.
fn face_sample_points(dim: usize, lf: usize) -> Vec<[f64; 4]> {
    let mut pts = Vec::with_capacity(dim + 1);
    let mut centroid = [0.0; 4];
    for m in 0..=dim {
        if m != lf {
            let mut b = [0.0; 4];
            b[m] = 1.0;
            pts.push(b);
            centroid[m] = 1.0 / dim as f64;
        }
    }
    pts.push(centroid);
    pts
}

/// Per-cell maximal spatial jump `max over faces of K of |g|_K1 + g|_K2|`.
///
/// `one_sided(cell, bary, outward_normal, out)` writes the one-sided limit of
/// the jumped quantity (already multiplied by the normal where the quantity
/// is of the form `w nu`). Boundary faces contribute zero. Vector jumps are
/// maximised componentwise.
pub fn spatial_max_jump<F>(mesh: &SimplicialMesh, ncomp: usize, mut one_sided: F) -> JumpField
where
    F: FnMut(usize, &[f64; 4], &Point, &mut [f64]),
{
    let dim = mesh.dim();
    let mut out = JumpField::zeros(ncomp, 1, mesh.n_cells());
    let mut a = vec![0.0; ncomp];
    let mut b = vec![0.0; ncomp];
    let mut face_max = vec![0.0; ncomp];
    for face in mesh.faces() {
        let Some((c2, lf2)) = face.outer else {
            continue;
        };
        let (c1, lf1) = face.inner;
        let n1 = mesh.outward_normal(c1, lf1);
        let n2 = mesh.outward_normal(c2, lf2);
        face_max.iter_mut().for_each(|v| *v = 0.0);
        for b1 in face_sample_points(dim, lf1) {
            let x = mesh.point(c1, &b1);
            let mut b2 = mesh.barycentric(c2, &x);
            b2[lf2] = 0.0;
            one_sided(c1, &b1, &n1, &mut a);
            one_sided(c2, &b2, &n2, &mut b);
            for i in 0..ncomp {
                face_max[i] = f64::max(face_max[i], (a[i] + b[i]).abs());
            }
        }
        for c in [c1, c2] {
            for (o, &f) in out.get_mut(0, c).iter_mut().zip(&face_max) {
                *o = o.max(f);
            }
        }
    }
    out
}

/// `[d eps / d nu]` lifted to cells.
pub fn normal_derivative_jump_scalar(mesh: &SimplicialMesh, eps: &ScalarField) -> JumpField {
    spatial_max_jump(mesh, 1, |c, b, n, out| {
        let g = eps.grad(mesh, c, b);
        out[0] = g[0] * n[0] + g[1] * n[1] + g[2] * n[2];
    })
}

/// `[d u / d nu]` lifted to cells at time `t_k + theta tau`.
pub fn normal_derivative_jump_vector(
    mesh: &SimplicialMesh,
    u: &SpaceTimeField,
    k: usize,
    theta: f64,
) -> JumpField {
    let d = u.ncomp();
    let jac: Vec<[[f64; 3]; 3]> = (0..mesh.n_cells())
        .map(|c| {
            let j0 = u.jacobian(mesh, c, k);
            if theta == 0.0 {
                return j0;
            }
            let j1 = u.jacobian(mesh, c, k + 1);
            let mut j = [[0.0; 3]; 3];
            for a in 0..3 {
                for b in 0..3 {
                    j[a][b] = (1.0 - theta) * j0[a][b] + theta * j1[a][b];
                }
            }
            j
        })
        .collect();
    spatial_max_jump(mesh, d, |c, _, n, out| {
        for (a, o) in out.iter_mut().enumerate() {
            *o = (0..3).map(|b| jac[c][a][b] * n[b]).sum();
        }
    })
}

/// Maximal temporal jumps of a quantity that is constant on each interval.
///
/// `slopes` holds `ncomp` values per (interval, entity). The jump at node
/// `t_k` is `slope_k - slope_{k-1}` for interior nodes and zero at `t_0` and
/// `t_N`; interval `k` reports the componentwise maximum of the absolute
/// jumps at its two end nodes.
pub fn temporal_max_jump(
    slopes: &[f64],
    grid: &TimeGrid,
    n_entities: usize,
    ncomp: usize,
) -> JumpField {
    let n = grid.n;
    assert_eq!(slopes.len(), n * n_entities * ncomp);
    let stride = n_entities * ncomp;
    let node_jump = |k: usize, i: usize| -> f64 {
        if k == 0 || k == n {
            0.0
        } else {
            (slopes[k * stride + i] - slopes[(k - 1) * stride + i]).abs()
        }
    };
    let mut out = JumpField::zeros(ncomp, n, n_entities);
    for k in 0..n {
        for i in 0..stride {
            out.values[k * stride + i] = node_jump(k, i).max(node_jump(k + 1, i));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_box_mesh, BoxDomain};
    use crate::spaces::{interpolate, interpolate_space_time, FieldKind};

    fn two_triangles() -> SimplicialMesh {
        build_box_mesh(BoxDomain::unit(2), &[1, 1]).unwrap()
    }

    #[test]
    fn continuous_vector_has_no_jump() {
        let m = two_triangles();
        let j = spatial_max_jump(&m, 2, |_, _, _, out| {
            out[0] = 1.5;
            out[1] = -0.5;
        });
        // a constant vector (not multiplied by the normal) doubles, so use w nu
        // with continuous w instead
        assert!(j.max() > 0.0);
        let j = spatial_max_jump(&m, 2, |_, _, n, out| {
            out[0] = 1.5 * n[0];
            out[1] = 1.5 * n[1];
        });
        assert!(j.max() < 1e-15);
    }

    #[test]
    fn piecewise_constant_scalar_times_normal() {
        let m = two_triangles();
        let (a, b) = (3.0, 1.25);
        let j = spatial_max_jump(&m, 2, |c, _, n, out| {
            let w = if c == 0 { a } else { b };
            out[0] = w * n[0];
            out[1] = w * n[1];
        });
        // interior face is the diagonal, nu = (1, -1)/sqrt2 up to sign
        let expect = (a - b).abs() / 2f64.sqrt();
        for c in 0..2 {
            for &v in j.get(0, c) {
                assert!((v - expect).abs() < 1e-14);
            }
            let norm = j.get(0, c).iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - (a - b).abs()).abs() < 1e-14);
        }
    }

    #[test]
    fn cell_with_only_boundary_faces_has_zero_jump() {
        use crate::mesh::BisectionInfo;
        let m = SimplicialMesh::from_parts(
            BoxDomain::unit(2),
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            vec![BisectionInfo {
                order: [0, 1, 2, usize::MAX],
                tag: 2,
            }],
            vec![None],
            vec![0],
        );
        let j = spatial_max_jump(&m, 2, |_, b, _, out| {
            out[0] = 5.0 + b[0];
            out[1] = -3.0;
        });
        assert_eq!(j.values, vec![0.0, 0.0]);
    }

    #[test]
    fn p1_normal_derivative_jump_of_linear_is_zero() {
        let m = build_box_mesh(BoxDomain::unit(2), &[3, 3]).unwrap();
        let eps = interpolate(&m, 1, |x| 1.0 + 2.0 * x[0] - x[1]).unwrap();
        assert!(normal_derivative_jump_scalar(&m, &eps).max() < 1e-12);
        let g = TimeGrid::new(1.0, 2).unwrap();
        let u = interpolate_space_time(&m, &g, FieldKind::Direct, |x, t| {
            [t * x[0], t * (x[0] + x[1]), 0.0]
        })
        .unwrap();
        assert!(normal_derivative_jump_vector(&m, &u, 1, 0.3).max() < 1e-12);
    }

    #[test]
    fn temporal_two_slopes() {
        let g = TimeGrid::new(2.0, 2).unwrap();
        let (s1, s2) = (0.5, -1.0);
        let j = temporal_max_jump(&[s1, s2], &g, 1, 1);
        assert_eq!(j.values, vec![(s2 - s1).abs(); 2]);
    }

    #[test]
    fn temporal_single_interval_is_zero() {
        let g = TimeGrid::new(1.0, 1).unwrap();
        let j = temporal_max_jump(&[4.0, -3.0], &g, 1, 2);
        assert_eq!(j.values, vec![0.0, 0.0]);
    }

    #[test]
    fn temporal_linear_field_has_no_jump() {
        let g = TimeGrid::new(1.0, 5).unwrap();
        let j = temporal_max_jump(&[2.0; 10], &g, 2, 1);
        assert!(j.values.iter().all(|&v| v == 0.0));
    }
}
