use super::{BisectionInfo, BoxDomain, Point, SimplicialMesh};
use crate::error::{Error, Result};

fn permutations(dim: usize) -> Vec<Vec<usize>> {
    match dim {
        2 => vec![vec![0, 1], vec![1, 0]],
        3 => vec![
            vec![0, 1, 2],
            vec![0, 2, 1],
            vec![1, 0, 2],
            vec![1, 2, 0],
            vec![2, 0, 1],
            vec![2, 1, 0],
        ],
        _ => unreachable!(),
    }
}

/// Kuhn subdivision of a box: every grid cell is split into `dim!` simplices
/// along paths from its lower to its upper corner. All simplices carry the
/// bisection tag `dim`, which makes the mesh compatible with newest-vertex
/// bisection.
pub fn build_box_mesh(domain: BoxDomain, resolution: &[usize]) -> Result<SimplicialMesh> {
    let dim = domain.dim;
    if resolution.len() != dim {
        return Err(Error::Config(format!(
            "resolution needs {dim} entries, got {}",
            resolution.len()
        )));
    }
    if resolution.contains(&0) {
        return Err(Error::Config(format!(
            "resolution must be at least 1 per axis, got {resolution:?}"
        )));
    }
    let mut n = [1usize; 3];
    n[..dim].copy_from_slice(resolution);
    let stride = [1, n[0] + 1, (n[0] + 1) * (n[1] + 1)];
    let mut vertices: Vec<Point> = Vec::new();
    let nz = if dim == 3 { n[2] + 1 } else { 1 };
    for k in 0..nz {
        for j in 0..=n[1] {
            for i in 0..=n[0] {
                let idx = [i, j, k];
                let mut p = [0.0; 3];
                for a in 0..dim {
                    p[a] = if idx[a] == n[a] {
                        domain.hi[a]
                    } else {
                        domain.lo[a] + domain.extent(a) * idx[a] as f64 / n[a] as f64
                    };
                }
                vertices.push(p);
            }
        }
    }
    let perms = permutations(dim);
    let mut cells = Vec::new();
    let cz = if dim == 3 { n[2] } else { 1 };
    for k in 0..cz {
        for j in 0..n[1] {
            for i in 0..n[0] {
                for perm in &perms {
                    let mut corner = [i, j, k];
                    let id =
                        |c: &[usize; 3]| c[0] * stride[0] + c[1] * stride[1] + c[2] * stride[2];
                    let mut order = [usize::MAX; 4];
                    order[0] = id(&corner);
                    for (step, &axis) in perm.iter().enumerate() {
                        corner[axis] += 1;
                        order[step + 1] = id(&corner);
                    }
                    cells.push(BisectionInfo {
                        order,
                        tag: dim as u8,
                    });
                }
            }
        }
    }
    let ncells = cells.len();
    Ok(SimplicialMesh::from_parts(
        domain,
        vertices,
        cells,
        vec![None; ncells],
        vec![0; ncells],
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::mesh_size_field;

    #[test]
    fn unit_square_single_cell() {
        let m = build_box_mesh(BoxDomain::unit(2), &[1, 1]).unwrap();
        assert_eq!(m.n_cells(), 2);
        let interior = m.faces().iter().filter(|f| !f.is_boundary()).count();
        let boundary = m.faces().iter().filter(|f| f.is_boundary()).count();
        assert_eq!((interior, boundary), (1, 4));
        m.check_invariants().unwrap();
    }

    #[test]
    fn face_count_matches_enumeration() {
        // count distinct vertex pairs over all triangles independently
        let m = build_box_mesh(BoxDomain::unit(2), &[2, 2]).unwrap();
        assert_eq!(m.n_cells(), 8);
        let mut pairs = std::collections::BTreeSet::new();
        for c in 0..m.n_cells() {
            let v = m.cell(c);
            for i in 0..3 {
                for j in (i + 1)..3 {
                    pairs.insert((v[i].min(v[j]), v[i].max(v[j])));
                }
            }
        }
        assert_eq!(pairs.len(), 16);
        assert_eq!(m.n_faces(), 16);
    }

    #[test]
    fn unit_cube_kuhn_volumes() {
        let m = build_box_mesh(BoxDomain::unit(3), &[1, 1, 1]).unwrap();
        assert_eq!(m.n_cells(), 6);
        for c in 0..6 {
            // volume oracle: |det| / 6 computed from the raw points
            let p = m.cell_points(c);
            let e = |i: usize, a: usize| p[i][a] - p[0][a];
            let det = e(1, 0) * (e(2, 1) * e(3, 2) - e(2, 2) * e(3, 1))
                - e(1, 1) * (e(2, 0) * e(3, 2) - e(2, 2) * e(3, 0))
                + e(1, 2) * (e(2, 0) * e(3, 1) - e(2, 1) * e(3, 0));
            assert!((det.abs() / 6.0 - 1.0 / 6.0).abs() < 1e-15);
            assert!((m.geometry(c).volume - 1.0 / 6.0).abs() < 1e-15);
        }
        m.check_invariants().unwrap();
    }

    #[test]
    fn uniform_mesh_has_equal_diameters() {
        let m = build_box_mesh(BoxDomain::unit(2), &[2, 2]).unwrap();
        let h = mesh_size_field(&m);
        assert!(h.0.iter().all(|&x| (x - h.0[0]).abs() < 1e-15));
    }

    #[test]
    fn zero_resolution_is_a_config_error() {
        assert!(matches!(
            build_box_mesh(BoxDomain::unit(2), &[0, 3]),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn boundary_sides_are_tagged() {
        let m = build_box_mesh(BoxDomain::unit(2), &[3, 2]).unwrap();
        let mut per_side = [0usize; 4];
        for (_, f) in m.boundary_faces() {
            per_side[f.side.unwrap() as usize] += 1;
        }
        assert_eq!(per_side, [2, 2, 3, 3]);
    }
}
