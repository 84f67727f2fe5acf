//! Simplicial meshes of box domains in two and three dimensions.

mod build;
mod refine;
mod time;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};

pub use build::build_box_mesh;
pub use refine::{refine_marked, refine_uniform};
pub use time::{make_time_grid, time_step_guard_violated, TimeGrid};

use crate::error::{Error, Result};

/// Physical point; the third coordinate is zero in two dimensions.
pub type Point = [f64; 3];

static NEXT_MESH_ID: AtomicU64 = AtomicU64::new(1);

fn fresh_id() -> u64 {
    NEXT_MESH_ID.fetch_add(1, Ordering::Relaxed)
}

/// Axis-aligned box `[lo, hi]` in `dim` dimensions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxDomain {
    pub dim: usize,
    pub lo: Point,
    pub hi: Point,
}

impl BoxDomain {
    pub fn new(dim: usize, lo: &[f64], hi: &[f64]) -> Result<Self> {
        if !(dim == 2 || dim == 3) {
            return Err(Error::Config(format!(
                "dimension must be 2 or 3, got {dim}"
            )));
        }
        if lo.len() != dim || hi.len() != dim {
            return Err(Error::Config(format!(
                "box bounds need {dim} coordinates each"
            )));
        }
        let mut b = BoxDomain {
            dim,
            lo: [0.0; 3],
            hi: [0.0; 3],
        };
        for a in 0..dim {
            if !(hi[a] > lo[a]) || !lo[a].is_finite() || !hi[a].is_finite() {
                return Err(Error::Config(format!(
                    "degenerate box along axis {a}: [{}, {}]",
                    lo[a], hi[a]
                )));
            }
            b.lo[a] = lo[a];
            b.hi[a] = hi[a];
        }
        Ok(b)
    }

    pub fn unit(dim: usize) -> Self {
        BoxDomain::new(dim, &vec![0.0; dim], &vec![1.0; dim]).expect("unit box")
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim).map(|a| self.hi[a] - self.lo[a]).product()
    }

    pub fn extent(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    /// Which box side (`2 * axis + {0: lo, 1: hi}`) all points lie on.
    fn side_of(&self, pts: &[Point]) -> Option<u8> {
        for a in 0..self.dim {
            let tol = 1e-10 * self.extent(a);
            if pts.iter().all(|p| (p[a] - self.lo[a]).abs() <= tol) {
                return Some(2 * a as u8);
            }
            if pts.iter().all(|p| (p[a] - self.hi[a]).abs() <= tol) {
                return Some(2 * a as u8 + 1);
            }
        }
        None
    }

    pub fn contains_point_on_boundary(&self, p: &Point) -> bool {
        self.side_of(std::slice::from_ref(p)).is_some()
    }
}

/// Per-cell geometric data.
#[derive(Debug, Clone, Copy)]
pub struct CellGeometry {
    pub volume: f64,
    /// Gradients of the barycentric coordinates, one per local vertex.
    pub grad_bary: [[f64; 3]; 4],
    /// Largest vertex-to-vertex distance.
    pub diameter: f64,
}

/// Newest-vertex bisection data: vertices in refinement order plus the tag
/// selecting the refinement edge `(order[0], order[tag])`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BisectionInfo {
    pub order: [usize; 4],
    pub tag: u8,
}

/// A `(dim-1)`-dimensional face with its incident cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Face {
    /// Sorted vertex ids (`dim` entries used).
    pub vertices: [usize; 3],
    /// `(cell, local face)` of the first incident cell.
    pub inner: (usize, usize),
    /// Second incident cell for interior faces.
    pub outer: Option<(usize, usize)>,
    /// Box side for boundary faces.
    pub side: Option<u8>,
}

impl Face {
    pub fn is_boundary(&self) -> bool {
        self.outer.is_none()
    }
}

/// Conforming simplicial mesh of a box.
#[derive(Debug, Clone)]
pub struct SimplicialMesh {
    id: u64,
    domain: BoxDomain,
    vertices: Vec<Point>,
    /// Positively oriented cells, flat with stride `dim + 1`.
    cells: Vec<usize>,
    bisection: Vec<BisectionInfo>,
    parent: Vec<Option<usize>>,
    generation: Vec<u32>,
    faces: Vec<Face>,
    cell_faces: Vec<usize>,
    edges: Vec<[usize; 2]>,
    cell_edges: Vec<usize>,
    geometry: Vec<CellGeometry>,
    boundary_vertex: Vec<bool>,
}

/// Per-cell diameters `h(K)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshSizeField(pub Vec<f64>);

impl MeshSizeField {
    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }
    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(0.0, f64::max)
    }
}

pub fn mesh_size_field(mesh: &SimplicialMesh) -> MeshSizeField {
    MeshSizeField(mesh.geometry.iter().map(|g| g.diameter).collect())
}

pub(crate) fn local_edges(dim: usize) -> &'static [(usize, usize)] {
    match dim {
        2 => &[(0, 1), (0, 2), (1, 2)],
        3 => &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)],
        _ => &[],
    }
}

fn signed_volume(dim: usize, p: &[Point]) -> f64 {
    let e = |i: usize, a: usize| p[i][a] - p[0][a];
    match dim {
        2 => 0.5 * (e(1, 0) * e(2, 1) - e(1, 1) * e(2, 0)),
        3 => {
            let det = e(1, 0) * (e(2, 1) * e(3, 2) - e(2, 2) * e(3, 1))
                - e(1, 1) * (e(2, 0) * e(3, 2) - e(2, 2) * e(3, 0))
                + e(1, 2) * (e(2, 0) * e(3, 1) - e(2, 1) * e(3, 0));
            det / 6.0
        }
        _ => unreachable!(),
    }
}

fn cell_geometry(dim: usize, p: &[Point]) -> CellGeometry {
    let volume = signed_volume(dim, p);
    let mut grad = [[0.0; 3]; 4];
    // rows of the inverse of B = [p1 - p0, ..., pd - p0]
    match dim {
        2 => {
            let (a, b) = (p[1][0] - p[0][0], p[2][0] - p[0][0]);
            let (c, d) = (p[1][1] - p[0][1], p[2][1] - p[0][1]);
            let det = a * d - b * c;
            grad[1] = [d / det, -b / det, 0.0];
            grad[2] = [-c / det, a / det, 0.0];
        }
        3 => {
            let mut m = [[0.0; 3]; 3];
            for r in 0..3 {
                for c in 0..3 {
                    m[r][c] = p[c + 1][r] - p[0][r];
                }
            }
            let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
            let inv = [
                [
                    (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / det,
                    (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / det,
                    (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / det,
                ],
                [
                    (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / det,
                    (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / det,
                    (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / det,
                ],
                [
                    (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / det,
                    (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / det,
                    (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det,
                ],
            ];
            grad[1..4].copy_from_slice(&inv);
        }
        _ => unreachable!(),
    }
    for a in 0..3 {
        grad[0][a] = -(1..=dim).map(|i| grad[i][a]).sum::<f64>();
    }
    let mut diameter: f64 = 0.0;
    for i in 0..=dim {
        for j in (i + 1)..=dim {
            diameter = diameter.max(distance(&p[i], &p[j]));
        }
    }
    CellGeometry {
        volume,
        grad_bary: grad,
        diameter,
    }
}

pub fn distance(a: &Point, b: &Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

impl SimplicialMesh {
    /// Assembles topology and geometry from bisection-ordered cells.
    pub(crate) fn from_parts(
        domain: BoxDomain,
        vertices: Vec<Point>,
        bisection: Vec<BisectionInfo>,
        parent: Vec<Option<usize>>,
        generation: Vec<u32>,
    ) -> Self {
        let dim = domain.dim;
        let nv = dim + 1;
        let ncells = bisection.len();
        let mut cells = Vec::with_capacity(ncells * nv);
        let mut geometry = Vec::with_capacity(ncells);
        for info in &bisection {
            let mut local: Vec<usize> = info.order[..nv].to_vec();
            let pts: Vec<Point> = local.iter().map(|&v| vertices[v]).collect();
            if signed_volume(dim, &pts) < 0.0 {
                local.swap(0, 1);
            }
            let pts: Vec<Point> = local.iter().map(|&v| vertices[v]).collect();
            geometry.push(cell_geometry(dim, &pts));
            cells.extend_from_slice(&local);
        }

        let mut face_map: BTreeMap<[usize; 3], usize> = BTreeMap::new();
        let mut faces: Vec<Face> = Vec::new();
        let mut cell_faces = vec![usize::MAX; ncells * nv];
        for c in 0..ncells {
            for lf in 0..nv {
                let mut key = [usize::MAX; 3];
                let mut n = 0;
                for lv in 0..nv {
                    if lv != lf {
                        key[n] = cells[c * nv + lv];
                        n += 1;
                    }
                }
                key[..dim].sort_unstable();
                match face_map.get(&key) {
                    Some(&f) => {
                        faces[f].outer = Some((c, lf));
                        cell_faces[c * nv + lf] = f;
                    }
                    None => {
                        face_map.insert(key, faces.len());
                        cell_faces[c * nv + lf] = faces.len();
                        faces.push(Face {
                            vertices: key,
                            inner: (c, lf),
                            outer: None,
                            side: None,
                        });
                    }
                }
            }
        }
        let mut boundary_vertex = vec![false; vertices.len()];
        for f in faces.iter_mut() {
            if f.outer.is_none() {
                let pts: Vec<Point> = f.vertices[..dim].iter().map(|&v| vertices[v]).collect();
                f.side = domain.side_of(&pts);
                for &v in &f.vertices[..dim] {
                    boundary_vertex[v] = true;
                }
            }
        }

        let le = local_edges(dim);
        let mut edge_map: BTreeMap<[usize; 2], usize> = BTreeMap::new();
        let mut edges = Vec::new();
        let mut cell_edges = Vec::with_capacity(ncells * le.len());
        for c in 0..ncells {
            for &(i, j) in le {
                let (a, b) = (cells[c * nv + i], cells[c * nv + j]);
                let key = [a.min(b), a.max(b)];
                let id = *edge_map.entry(key).or_insert_with(|| {
                    edges.push(key);
                    edges.len() - 1
                });
                cell_edges.push(id);
            }
        }

        SimplicialMesh {
            id: fresh_id(),
            domain,
            vertices,
            cells,
            bisection,
            parent,
            generation,
            faces,
            cell_faces,
            edges,
            cell_edges,
            geometry,
            boundary_vertex,
        }
    }

    /// Identity used to detect fields living on different meshes.
    pub fn id(&self) -> u64 {
        self.id
    }
    pub fn dim(&self) -> usize {
        self.domain.dim
    }
    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }
    pub fn n_cells(&self) -> usize {
        self.bisection.len()
    }
    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }
    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }
    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }
    pub fn vertex(&self, v: usize) -> &Point {
        &self.vertices[v]
    }
    /// Vertex ids of a positively oriented cell.
    pub fn cell(&self, c: usize) -> &[usize] {
        let nv = self.dim() + 1;
        &self.cells[c * nv..(c + 1) * nv]
    }
    pub fn cell_points(&self, c: usize) -> Vec<Point> {
        self.cell(c).iter().map(|&v| self.vertices[v]).collect()
    }
    pub fn geometry(&self, c: usize) -> &CellGeometry {
        &self.geometry[c]
    }
    pub fn faces(&self) -> &[Face] {
        &self.faces
    }
    pub fn face(&self, f: usize) -> &Face {
        &self.faces[f]
    }
    /// Face id of local face `lf` (opposite local vertex `lf`).
    pub fn cell_face(&self, c: usize, lf: usize) -> usize {
        self.cell_faces[c * (self.dim() + 1) + lf]
    }
    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }
    pub fn cell_edges(&self, c: usize) -> &[usize] {
        let ne = local_edges(self.dim()).len();
        &self.cell_edges[c * ne..(c + 1) * ne]
    }
    pub fn bisection_info(&self, c: usize) -> &BisectionInfo {
        &self.bisection[c]
    }
    /// Cell of the previous mesh this cell descends from.
    pub fn parent(&self, c: usize) -> Option<usize> {
        self.parent[c]
    }
    pub fn generation(&self, c: usize) -> u32 {
        self.generation[c]
    }
    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_vertex[v]
    }

    /// The other cell across local face `lf`, with its local face index.
    pub fn neighbor(&self, c: usize, lf: usize) -> Option<(usize, usize)> {
        let f = &self.faces[self.cell_face(c, lf)];
        if f.inner == (c, lf) {
            f.outer
        } else {
            Some(f.inner)
        }
    }

    /// Outward unit normal of cell `c` on local face `lf`.
    pub fn outward_normal(&self, c: usize, lf: usize) -> Point {
        let g = self.geometry[c].grad_bary[lf];
        let n = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
        [-g[0] / n, -g[1] / n, -g[2] / n]
    }

    /// Measure of local face `lf` of cell `c`.
    pub fn face_measure(&self, c: usize, lf: usize) -> f64 {
        let g = self.geometry[c].grad_bary[lf];
        let n = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
        self.dim() as f64 * self.geometry[c].volume * n
    }

    /// Physical point from barycentric coordinates in cell `c`.
    pub fn point(&self, c: usize, bary: &[f64; 4]) -> Point {
        let mut x = [0.0; 3];
        for (i, &v) in self.cell(c).iter().enumerate() {
            for a in 0..3 {
                x[a] += bary[i] * self.vertices[v][a];
            }
        }
        x
    }

    /// Barycentric coordinates of `x` with respect to cell `c`.
    pub fn barycentric(&self, c: usize, x: &Point) -> [f64; 4] {
        let g = &self.geometry[c];
        let p0 = self.vertices[self.cell(c)[0]];
        let mut b = [0.0; 4];
        let mut s = 0.0;
        for i in 1..=self.dim() {
            b[i] = (0..3).map(|a| g.grad_bary[i][a] * (x[a] - p0[a])).sum();
            s += b[i];
        }
        b[0] = 1.0 - s;
        b
    }

    /// Finds a cell containing `x` (first match in cell order).
    pub fn locate(&self, x: &Point) -> Option<(usize, [f64; 4])> {
        let tol = 1e-10;
        let nv = self.dim() + 1;
        let mut best: Option<(usize, [f64; 4], f64)> = None;
        for c in 0..self.n_cells() {
            let b = self.barycentric(c, x);
            let worst = b[..nv].iter().copied().fold(f64::INFINITY, f64::min);
            if worst >= -tol {
                return Some((c, b));
            }
            if best.as_ref().is_none_or(|(_, _, w)| worst > *w) {
                best = Some((c, b, worst));
            }
        }
        best.filter(|(_, _, w)| *w >= -1e-8).map(|(c, b, _)| (c, b))
    }

    /// Cell containing `x`, searching the boundary faces' cells only.
    pub fn locate_on_boundary(&self, x: &Point) -> Option<(usize, usize)> {
        let tol = 1e-9;
        let nv = self.dim() + 1;
        for (fid, f) in self.faces.iter().enumerate() {
            if !f.is_boundary() {
                continue;
            }
            let (c, lf) = f.inner;
            let b = self.barycentric(c, x);
            if b[lf].abs() <= tol && (0..nv).all(|i| b[i] >= -tol) {
                return Some((fid, c));
            }
        }
        None
    }

    pub fn total_volume(&self) -> f64 {
        self.geometry.iter().map(|g| g.volume).sum()
    }

    pub fn h_min(&self) -> f64 {
        mesh_size_field(self).min()
    }

    pub fn h_max(&self) -> f64 {
        mesh_size_field(self).max()
    }

    pub fn boundary_faces(&self) -> impl Iterator<Item = (usize, &Face)> {
        self.faces
            .iter()
            .enumerate()
            .filter(|(_, f)| f.is_boundary())
    }

    /// Cells touching the boundary with at least one vertex.
    pub fn collar_cells(&self) -> Vec<bool> {
        (0..self.n_cells())
            .map(|c| self.cell(c).iter().any(|&v| self.boundary_vertex[v]))
            .collect()
    }

    /// Checks the structural invariants: face incidence, orientation,
    /// conformity, and coverage of the box.
    pub fn check_invariants(&self) -> Result<()> {
        for (c, g) in self.geometry.iter().enumerate() {
            if !(g.volume > 0.0) {
                return Err(Error::Usage(format!("cell {c} has volume {}", g.volume)));
            }
        }
        for (fid, f) in self.faces.iter().enumerate() {
            if f.is_boundary() && f.side.is_none() {
                return Err(Error::Usage(format!(
                    "face {fid} has a single incident cell but is not on the box boundary \
                     (hanging vertex)"
                )));
            }
            if let Some((c2, _)) = f.outer {
                let (c1, lf1) = f.inner;
                if self.neighbor(c1, lf1).map(|n| n.0) != Some(c2) {
                    return Err(Error::Usage(format!("asymmetric adjacency at face {fid}")));
                }
            }
        }
        let vol = self.total_volume();
        let target = self.domain.volume();
        if ((vol - target) / target).abs() > 1e-12 {
            return Err(Error::Usage(format!(
                "cells cover volume {vol}, box volume is {target}"
            )));
        }
        Ok(())
    }
}
