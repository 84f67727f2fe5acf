//! Newest-vertex bisection (Maubach ordering) with conformity closure.

use std::collections::{BTreeMap, BTreeSet};

use super::{local_edges, BisectionInfo, Point, SimplicialMesh};

struct Work {
    dim: usize,
    vertices: Vec<Point>,
    cells: Vec<BisectionInfo>,
    root: Vec<usize>,
    generation: Vec<u32>,
    alive: Vec<bool>,
    midpoints: BTreeMap<[usize; 2], usize>,
}

fn edge_key(a: usize, b: usize) -> [usize; 2] {
    [a.min(b), a.max(b)]
}

impl Work {
    fn has_hanging_edge(&self, c: usize) -> bool {
        let o = &self.cells[c].order;
        local_edges(self.dim)
            .iter()
            .any(|&(i, j)| self.midpoints.contains_key(&edge_key(o[i], o[j])))
    }

    /// Bisects cell `c`, returning the two children.
    fn bisect(&mut self, c: usize) -> [usize; 2] {
        let BisectionInfo { order, tag } = self.cells[c];
        let k = tag as usize;
        let d = self.dim;
        let key = edge_key(order[0], order[k]);
        let z = match self.midpoints.get(&key) {
            Some(&z) => z,
            None => {
                let (a, b) = (self.vertices[order[0]], self.vertices[order[k]]);
                self.vertices.push([
                    0.5 * (a[0] + b[0]),
                    0.5 * (a[1] + b[1]),
                    0.5 * (a[2] + b[2]),
                ]);
                let z = self.vertices.len() - 1;
                self.midpoints.insert(key, z);
                z
            }
        };
        let new_tag = if k > 1 { k - 1 } else { d } as u8;
        let mut first = [usize::MAX; 4];
        let mut second = [usize::MAX; 4];
        // (x0, ..., x_{k-1}, z, x_{k+1}, ..., x_d)
        first[..k].copy_from_slice(&order[..k]);
        first[k] = z;
        // (x1, ..., x_k, z, x_{k+1}, ..., x_d)
        second[..k].copy_from_slice(&order[1..=k]);
        second[k] = z;
        first[k + 1..=d].copy_from_slice(&order[k + 1..=d]);
        second[k + 1..=d].copy_from_slice(&order[k + 1..=d]);
        self.alive[c] = false;
        let mut out = [0; 2];
        for (n, o) in [first, second].into_iter().enumerate() {
            self.cells.push(BisectionInfo {
                order: o,
                tag: new_tag,
            });
            self.root.push(self.root[c]);
            self.generation.push(self.generation[c] + 1);
            self.alive.push(true);
            out[n] = self.cells.len() - 1;
        }
        out
    }
}

/// Bisects every marked cell once and closes the mesh to a conforming one.
/// Returns a clone of the input when nothing is marked.
pub fn refine_marked(mesh: &SimplicialMesh, marked: &BTreeSet<usize>) -> SimplicialMesh {
    if marked.is_empty() {
        return mesh.clone();
    }
    let n = mesh.n_cells();
    let mut w = Work {
        dim: mesh.dim(),
        vertices: mesh.vertices().to_vec(),
        cells: (0..n).map(|c| *mesh.bisection_info(c)).collect(),
        root: (0..n).collect(),
        generation: (0..n).map(|c| mesh.generation(c)).collect(),
        alive: vec![true; n],
        midpoints: BTreeMap::new(),
    };
    let mut stack: Vec<usize> = marked.iter().rev().copied().filter(|&c| c < n).collect();
    loop {
        while let Some(c) = stack.pop() {
            if !w.alive[c] {
                continue;
            }
            for child in w.bisect(c) {
                if w.has_hanging_edge(child) {
                    stack.push(child);
                }
            }
        }
        let hanging: Vec<usize> = (0..w.cells.len())
            .filter(|&c| w.alive[c] && w.has_hanging_edge(c))
            .collect();
        if hanging.is_empty() {
            break;
        }
        stack.extend(hanging.into_iter().rev());
    }
    let keep: Vec<usize> = (0..w.cells.len()).filter(|&c| w.alive[c]).collect();
    SimplicialMesh::from_parts(
        *mesh.domain(),
        w.vertices,
        keep.iter().map(|&c| w.cells[c]).collect(),
        keep.iter().map(|&c| Some(w.root[c])).collect(),
        keep.iter().map(|&c| w.generation[c]).collect(),
    )
}

/// `dim` sweeps of bisecting every cell, which halves the mesh size.
pub fn refine_uniform(mesh: &SimplicialMesh) -> SimplicialMesh {
    let mut m = mesh.clone();
    let mut origin: Vec<usize> = (0..mesh.n_cells()).collect();
    for _ in 0..mesh.dim() {
        let all: BTreeSet<usize> = (0..m.n_cells()).collect();
        let next = refine_marked(&m, &all);
        origin = (0..next.n_cells())
            .map(|c| origin[next.parent(c).expect("refined cell has parent")])
            .collect();
        m = next;
    }
    let cells = (0..m.n_cells()).map(|c| *m.bisection_info(c)).collect();
    let gens = (0..m.n_cells()).map(|c| m.generation(c)).collect();
    SimplicialMesh::from_parts(
        *m.domain(),
        m.vertices().to_vec(),
        cells,
        origin.into_iter().map(Some).collect(),
        gens,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_box_mesh, mesh_size_field, BoxDomain};

    fn square(n: usize) -> SimplicialMesh {
        build_box_mesh(BoxDomain::unit(2), &[n, n]).unwrap()
    }

    #[test]
    fn empty_marking_is_identity() {
        let m = square(2);
        let r = refine_marked(&m, &BTreeSet::new());
        assert_eq!(r.vertices(), m.vertices());
        assert_eq!(r.n_cells(), m.n_cells());
        for c in 0..m.n_cells() {
            assert_eq!(r.cell(c), m.cell(c));
        }
    }

    #[test]
    fn marking_both_triangles_gives_four() {
        let m = square(1);
        let r = refine_marked(&m, &[0, 1].into_iter().collect());
        assert_eq!(r.n_cells(), 4);
        assert_eq!(r.n_vertices(), 5);
        // the new vertex is the square's centre
        assert_eq!(r.vertex(4), &[0.5, 0.5, 0.0]);
        r.check_invariants().unwrap();
    }

    #[test]
    fn marking_one_triangle_closes_neighbour() {
        let m = square(1);
        let r = refine_marked(&m, &[0].into_iter().collect());
        // the shared hypotenuse forces the neighbour to split too
        assert_eq!(r.n_cells(), 4);
        r.check_invariants().unwrap();
    }

    #[test]
    fn bisection_of_right_triangle_halves_diameter_to_one() {
        // single triangle with legs 2 -> after the bisection children have h = sqrt(2)
        // scaled: legs 1,1 triangle children have legs 1/sqrt(2) and hypotenuse 1
        let m = square(1);
        let r = refine_marked(&m, &[0, 1].into_iter().collect());
        let h = mesh_size_field(&r);
        assert!(h.0.iter().all(|&x| (x - 1.0).abs() < 1e-15));
    }

    #[test]
    fn local_refinement_stays_conforming() {
        let mut m = square(4);
        for step in 0..6 {
            let marked: BTreeSet<usize> = (0..m.n_cells()).filter(|c| c % 5 == step % 5).collect();
            let before = mesh_size_field(&m);
            let r = refine_marked(&m, &marked);
            r.check_invariants().unwrap();
            let after = mesh_size_field(&r);
            for c in 0..r.n_cells() {
                let p = r.parent(c).unwrap();
                assert!(after.0[c] <= before.0[p] * (1.0 + 1e-12));
            }
            m = r;
        }
    }

    #[test]
    fn tetrahedral_refinement_is_conforming() {
        let mut m = build_box_mesh(BoxDomain::unit(3), &[2, 2, 2]).unwrap();
        for step in 0..4 {
            let marked: BTreeSet<usize> = (0..m.n_cells()).filter(|c| c % 7 == step).collect();
            m = refine_marked(&m, &marked);
            m.check_invariants().unwrap();
        }
    }

    #[test]
    fn uniform_refinement_halves_h() {
        for dim in [2, 3] {
            let m = build_box_mesh(BoxDomain::unit(dim), &vec![2; dim]).unwrap();
            let h0 = m.h_max();
            let mut r = m.clone();
            for _ in 0..2 {
                r = refine_uniform(&r);
                r.check_invariants().unwrap();
            }
            assert!(r.h_max() <= 0.5 * h0 * (1.0 + 1e-12), "dim {dim}");
            assert_eq!(r.n_cells(), m.n_cells() * (1 << (2 * dim)));
        }
    }
}
