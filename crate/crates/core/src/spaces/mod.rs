//! Finite element fields: scalar Lagrange fields of degree 1 or 2, vector
//! fields that are piecewise linear in space and time, derivative
//! evaluation, and the maximal jump operators.

mod jumps;

pub use jumps::{
    normal_derivative_jump_scalar, normal_derivative_jump_vector, spatial_max_jump,
    temporal_max_jump, JumpField,
};

use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;
use crate::mesh::{local_edges, Point, SimplicialMesh, TimeGrid};
use crate::quadrature::{SimplexRule, CELL_DEGREE};
use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

/// Number of Lagrange nodes of degree `q` on `mesh`.
pub fn n_lagrange_nodes(mesh: &SimplicialMesh, q: usize) -> usize {
    match q {
        1 => mesh.n_vertices(),
        2 => mesh.n_vertices() + mesh.n_edges(),
        _ => panic!("unsupported Lagrange degree {q}"),
    }
}

/// Coordinates of the degree-`q` Lagrange nodes (vertices, then edge midpoints).
pub fn lagrange_nodes(mesh: &SimplicialMesh, q: usize) -> Vec<Point> {
    let mut pts = mesh.vertices().to_vec();
    if q == 2 {
        for e in mesh.edges() {
            let (a, b) = (mesh.vertex(e[0]), mesh.vertex(e[1]));
            pts.push([
                0.5 * (a[0] + b[0]),
                0.5 * (a[1] + b[1]),
                0.5 * (a[2] + b[2]),
            ]);
        }
    }
    pts
}

/// Global node ids of cell `c`: local vertices, then local edges.
pub fn cell_dofs(mesh: &SimplicialMesh, q: usize, c: usize) -> Vec<usize> {
    let mut dofs = mesh.cell(c).to_vec();
    if q == 2 {
        dofs.extend(mesh.cell_edges(c).iter().map(|&e| mesh.n_vertices() + e));
    }
    dofs
}

/// Number of local basis functions of degree `q` in dimension `dim`.
pub fn n_local(q: usize, dim: usize) -> usize {
    match q {
        1 => dim + 1,
        2 => (dim + 1) * (dim + 2) / 2,
        _ => panic!("unsupported Lagrange degree {q}"),
    }
}

/// Local basis values at barycentric point `b`.
pub fn basis_values(q: usize, dim: usize, b: &[f64; 4], out: &mut Vec<f64>) {
    out.clear();
    match q {
        1 => out.extend_from_slice(&b[..=dim]),
        2 => {
            for &bi in &b[..=dim] {
                out.push(bi * (2.0 * bi - 1.0));
            }
            for &(i, j) in local_edges(dim) {
                out.push(4.0 * b[i] * b[j]);
            }
        }
        _ => panic!("unsupported Lagrange degree {q}"),
    }
}

/// Local basis gradients at barycentric point `b`.
pub fn basis_grads(
    q: usize,
    dim: usize,
    b: &[f64; 4],
    gb: &[[f64; 3]; 4],
    out: &mut Vec<[f64; 3]>,
) {
    out.clear();
    match q {
        1 => out.extend_from_slice(&gb[..=dim]),
        2 => {
            for i in 0..=dim {
                let s = 4.0 * b[i] - 1.0;
                out.push([s * gb[i][0], s * gb[i][1], s * gb[i][2]]);
            }
            for &(i, j) in local_edges(dim) {
                let mut g = [0.0; 3];
                for a in 0..3 {
                    g[a] = 4.0 * (b[j] * gb[i][a] + b[i] * gb[j][a]);
                }
                out.push(g);
            }
        }
        _ => panic!("unsupported Lagrange degree {q}"),
    }
}

/// Scalar Lagrange field of degree 1 or 2.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    degree: usize,
    values: Vec<f64>,
    mesh_id: u64,
}

impl ScalarField {
    pub fn new(mesh: &SimplicialMesh, degree: usize, values: Vec<f64>) -> Result<Self> {
        if !(degree == 1 || degree == 2) {
            return Err(Error::Config(format!(
                "permittivity degree must be 1 or 2, got {degree}"
            )));
        }
        let n = n_lagrange_nodes(mesh, degree);
        if values.len() != n {
            return Err(Error::Usage(format!(
                "degree-{degree} field needs {n} values, got {}",
                values.len()
            )));
        }
        Ok(ScalarField {
            degree,
            values,
            mesh_id: mesh.id(),
        })
    }

    pub fn constant(mesh: &SimplicialMesh, degree: usize, c: f64) -> Result<Self> {
        ScalarField::new(mesh, degree, vec![c; n_lagrange_nodes(mesh, degree)])
    }

    pub fn degree(&self) -> usize {
        self.degree
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
    pub fn mesh_id(&self) -> u64 {
        self.mesh_id
    }

    pub fn check_mesh(&self, mesh: &SimplicialMesh) -> Result<()> {
        if self.mesh_id != mesh.id() {
            return Err(Error::Usage(format!(
                "scalar field belongs to mesh {}, not mesh {}",
                self.mesh_id,
                mesh.id()
            )));
        }
        Ok(())
    }

    /// Same layout, different values.
    pub fn with_values(&self, values: Vec<f64>) -> ScalarField {
        assert_eq!(values.len(), self.values.len());
        ScalarField {
            degree: self.degree,
            values,
            mesh_id: self.mesh_id,
        }
    }

    pub fn eval(&self, mesh: &SimplicialMesh, c: usize, b: &[f64; 4]) -> f64 {
        let mut phi = Vec::with_capacity(10);
        basis_values(self.degree, mesh.dim(), b, &mut phi);
        cell_dofs(mesh, self.degree, c)
            .iter()
            .zip(&phi)
            .map(|(&n, p)| self.values[n] * p)
            .sum()
    }

    pub fn grad(&self, mesh: &SimplicialMesh, c: usize, b: &[f64; 4]) -> [f64; 3] {
        let mut g = Vec::with_capacity(10);
        basis_grads(
            self.degree,
            mesh.dim(),
            b,
            &mesh.geometry(c).grad_bary,
            &mut g,
        );
        let mut out = [0.0; 3];
        for (&n, gi) in cell_dofs(mesh, self.degree, c).iter().zip(&g) {
            for a in 0..3 {
                out[a] += self.values[n] * gi[a];
            }
        }
        out
    }

    /// Cellwise-constant Hessian; zero for degree 1.
    pub fn hessian(&self, mesh: &SimplicialMesh, c: usize) -> [[f64; 3]; 3] {
        let mut h = [[0.0; 3]; 3];
        if self.degree == 1 {
            return h;
        }
        let dim = mesh.dim();
        let gb = &mesh.geometry(c).grad_bary;
        let dofs = cell_dofs(mesh, 2, c);
        for i in 0..=dim {
            let v = self.values[dofs[i]];
            for r in 0..3 {
                for s in 0..3 {
                    h[r][s] += v * 4.0 * gb[i][r] * gb[i][s];
                }
            }
        }
        for (e, &(i, j)) in local_edges(dim).iter().enumerate() {
            let v = self.values[dofs[dim + 1 + e]];
            for r in 0..3 {
                for s in 0..3 {
                    h[r][s] += v * 4.0 * (gb[i][r] * gb[j][s] + gb[j][r] * gb[i][s]);
                }
            }
        }
        h
    }

    /// Value at a physical point.
    pub fn eval_at(&self, mesh: &SimplicialMesh, x: &Point) -> Option<f64> {
        mesh.locate(x).map(|(c, b)| self.eval(mesh, c, &b))
    }

    /// Minimum nodal value.
    /// Hash of degree, mesh and nodal values, used to detect fields solved
    /// for a different coefficient.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.degree.hash(&mut h);
        self.mesh_id.hash(&mut h);
        for v in &self.values {
            v.to_bits().hash(&mut h);
        }
        h.finish()
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Nodal interpolant of `f` in the degree-`q` Lagrange space.
pub fn interpolate(
    mesh: &SimplicialMesh,
    q: usize,
    f: impl Fn(&Point) -> f64,
) -> Result<ScalarField> {
    let values = lagrange_nodes(mesh, q).iter().map(f).collect();
    ScalarField::new(mesh, q, values)
}

/// Nodal interpolation of `field` (on `coarse`) onto `fine`. Cells of a
/// mesh produced by refining `coarse` are evaluated on their parent cell;
/// other meshes fall back to point location.
pub fn transfer(
    coarse: &SimplicialMesh,
    field: &ScalarField,
    fine: &SimplicialMesh,
) -> Result<ScalarField> {
    field.check_mesh(coarse)?;
    let q = field.degree();
    let nodes = lagrange_nodes(fine, q);
    let mut values = vec![f64::NAN; nodes.len()];
    for c in 0..fine.n_cells() {
        let parent = fine.parent(c).filter(|&p| p < coarse.n_cells());
        for n in cell_dofs(fine, q, c) {
            if !values[n].is_nan() {
                continue;
            }
            let x = &nodes[n];
            let v = match parent {
                Some(p) => {
                    let b = coarse.barycentric(p, x);
                    if b.iter().all(|&v| v >= -1e-10) {
                        Some(field.eval(coarse, p, &b))
                    } else {
                        None
                    }
                }
                None => None,
            };
            values[n] = match v {
                Some(v) => v,
                None => field.eval_at(coarse, x).ok_or_else(|| {
                    Error::Usage(format!("node {x:?} lies outside the source mesh"))
                })?,
            };
        }
    }
    ScalarField::new(fine, q, values)
}

/// Consistent mass matrix `<psi_j, psi_i>` of the degree-`q` scalar space.
pub fn scalar_mass(mesh: &SimplicialMesh, q: usize) -> CsrMatrix {
    let d = mesh.dim();
    let rule = SimplexRule::new(d, CELL_DEGREE);
    let mut trip = Vec::new();
    let mut phi = Vec::new();
    for c in 0..mesh.n_cells() {
        let dofs = cell_dofs(mesh, q, c);
        let vol = mesh.geometry(c).volume;
        for (b, &w) in rule.points.iter().zip(&rule.weights) {
            basis_values(q, d, b, &mut phi);
            for (i, &gi) in dofs.iter().enumerate() {
                for (j, &gj) in dofs.iter().enumerate() {
                    trip.push((gi, gj, w * vol * phi[i] * phi[j]));
                }
            }
        }
    }
    CsrMatrix::from_triplets(n_lagrange_nodes(mesh, q), trip)
}

/// Which boundary condition in time a space-time field satisfies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    /// Vanishes at `t = 0` (trial space of the direct problem).
    Direct,
    /// Vanishes at `t = T` (trial space of the adjoint problem).
    Adjoint,
    /// No condition.
    Free,
}

/// Vector field with `ncomp` components, piecewise linear in space (mesh
/// vertices) and in time (grid nodes).
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField {
    kind: FieldKind,
    ncomp: usize,
    n_nodes: usize,
    grid: TimeGrid,
    mesh_id: u64,
    data: Vec<f64>,
    coefficient: Option<u64>,
}

impl SpaceTimeField {
    pub fn zeros(mesh: &SimplicialMesh, grid: &TimeGrid, kind: FieldKind) -> Self {
        let ncomp = mesh.dim();
        let n_nodes = mesh.n_vertices();
        SpaceTimeField {
            kind,
            ncomp,
            n_nodes,
            grid: *grid,
            mesh_id: mesh.id(),
            data: vec![0.0; (grid.n + 1) * n_nodes * ncomp],
            coefficient: None,
        }
    }

    pub fn from_data(
        mesh: &SimplicialMesh,
        grid: &TimeGrid,
        kind: FieldKind,
        data: Vec<f64>,
    ) -> Result<Self> {
        let mut f = SpaceTimeField::zeros(mesh, grid, kind);
        if data.len() != f.data.len() {
            return Err(Error::Usage(format!(
                "space-time field needs {} values, got {}",
                f.data.len(),
                data.len()
            )));
        }
        f.data = data;
        f.check_space()?;
        Ok(f)
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }
    pub fn ncomp(&self) -> usize {
        self.ncomp
    }
    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }
    pub fn mesh_id(&self) -> u64 {
        self.mesh_id
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }
    /// Unknowns per time node.
    pub fn slice_len(&self) -> usize {
        self.n_nodes * self.ncomp
    }
    pub fn slice(&self, k: usize) -> &[f64] {
        let n = self.slice_len();
        &self.data[k * n..(k + 1) * n]
    }
    pub fn slice_mut(&mut self, k: usize) -> &mut [f64] {
        let n = self.slice_len();
        &mut self.data[k * n..(k + 1) * n]
    }

    pub fn value(&self, k: usize, node: usize) -> [f64; 3] {
        let mut v = [0.0; 3];
        let s = self.slice(k);
        v[..self.ncomp].copy_from_slice(&s[node * self.ncomp..(node + 1) * self.ncomp]);
        v
    }

    pub fn set_value(&mut self, k: usize, node: usize, v: &[f64]) {
        let nc = self.ncomp;
        self.slice_mut(k)[node * nc..(node + 1) * nc].copy_from_slice(&v[..nc]);
    }

    /// Relabels the field; fails if the time condition of `kind` is violated.
    /// Fingerprint of the permittivity this field was solved for, if it
    /// came out of a solver.
    pub fn coefficient(&self) -> Option<u64> {
        self.coefficient
    }

    pub(crate) fn set_coefficient(&mut self, fingerprint: u64) {
        self.coefficient = Some(fingerprint);
    }

    pub fn with_kind(mut self, kind: FieldKind) -> Result<Self> {
        self.kind = kind;
        self.check_space()?;
        Ok(self)
    }

    /// Checks the time condition of the field's space.
    pub fn check_space(&self) -> Result<()> {
        let bad = |k: usize| self.slice(k).iter().any(|&v| v != 0.0);
        match self.kind {
            FieldKind::Direct if bad(0) => Err(Error::Usage(
                "direct-space field must vanish at t = 0".into(),
            )),
            FieldKind::Adjoint if bad(self.grid.n) => Err(Error::Usage(
                "adjoint-space field must vanish at t = T".into(),
            )),
            _ => Ok(()),
        }
    }

    pub fn check_compatible(&self, mesh: &SimplicialMesh, grid: &TimeGrid) -> Result<()> {
        if self.mesh_id != mesh.id() {
            return Err(Error::Usage(format!(
                "space-time field belongs to mesh {}, not mesh {}",
                self.mesh_id,
                mesh.id()
            )));
        }
        if self.grid != *grid {
            return Err(Error::Usage(format!(
                "space-time field lives on time grid ({}, {}), expected ({}, {})",
                self.grid.t_final, self.grid.n, grid.t_final, grid.n
            )));
        }
        Ok(())
    }

    /// Value in cell `c` at time node `k`.
    pub fn eval_node(&self, mesh: &SimplicialMesh, c: usize, b: &[f64; 4], k: usize) -> [f64; 3] {
        let mut v = [0.0; 3];
        for (i, &n) in mesh.cell(c).iter().enumerate() {
            let u = self.value(k, n);
            for a in 0..self.ncomp {
                v[a] += b[i] * u[a];
            }
        }
        v
    }

    /// Value at `(x, t)` with `x` given in cell `c`.
    pub fn eval(&self, mesh: &SimplicialMesh, c: usize, b: &[f64; 4], t: f64) -> [f64; 3] {
        let (k, theta) = self.locate_time(t);
        if theta == 0.0 {
            return self.eval_node(mesh, c, b, k);
        }
        let u0 = self.eval_node(mesh, c, b, k);
        let u1 = self.eval_node(mesh, c, b, k + 1);
        let mut v = [0.0; 3];
        for a in 0..3 {
            v[a] = (1.0 - theta) * u0[a] + theta * u1[a];
        }
        v
    }

    /// Interval index and local coordinate in `[0, 1)`; the final node maps
    /// to `(n, 0)`.
    fn locate_time(&self, t: f64) -> (usize, f64) {
        let s = t / self.grid.tau;
        let k = (s.floor().max(0.0) as usize).min(self.grid.n);
        let theta = (s - k as f64).clamp(0.0, 1.0);
        if k == self.grid.n {
            (k, 0.0)
        } else {
            (k, theta)
        }
    }

    /// `J[a][b] = d u_a / d x_b` in cell `c` at time node `k`.
    pub fn jacobian(&self, mesh: &SimplicialMesh, c: usize, k: usize) -> [[f64; 3]; 3] {
        let gb = &mesh.geometry(c).grad_bary;
        let mut j = [[0.0; 3]; 3];
        for (i, &n) in mesh.cell(c).iter().enumerate() {
            let u = self.value(k, n);
            for a in 0..self.ncomp {
                for b in 0..3 {
                    j[a][b] += u[a] * gb[i][b];
                }
            }
        }
        j
    }

    pub fn div(&self, mesh: &SimplicialMesh, c: usize, k: usize) -> f64 {
        let j = self.jacobian(mesh, c, k);
        (0..self.ncomp).map(|a| j[a][a]).sum()
    }

    /// Time derivative on interval `(t_k, t_{k+1})` at vertex `node`.
    pub fn dt_value(&self, k: usize, node: usize) -> [f64; 3] {
        let (u0, u1) = (self.value(k, node), self.value(k + 1, node));
        let mut v = [0.0; 3];
        for a in 0..self.ncomp {
            v[a] = (u1[a] - u0[a]) / self.grid.tau;
        }
        v
    }

    /// Time derivative on interval `k` in cell `c` at barycentric point `b`.
    pub fn dt_eval(&self, mesh: &SimplicialMesh, c: usize, b: &[f64; 4], k: usize) -> [f64; 3] {
        let mut v = [0.0; 3];
        for (i, &n) in mesh.cell(c).iter().enumerate() {
            let d = self.dt_value(k, n);
            for a in 0..3 {
                v[a] += b[i] * d[a];
            }
        }
        v
    }

    /// Largest absolute nodal value.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Nodal interpolant of `f(x, t)` in the space `kind`. Fails if the
/// interpolant violates the space's time condition.
pub fn interpolate_space_time(
    mesh: &SimplicialMesh,
    grid: &TimeGrid,
    kind: FieldKind,
    f: impl Fn(&Point, f64) -> [f64; 3],
) -> Result<SpaceTimeField> {
    let mut u = SpaceTimeField::zeros(mesh, grid, FieldKind::Free);
    for k in 0..=grid.n {
        let t = grid.node(k);
        for (n, x) in mesh.vertices().iter().enumerate() {
            u.set_value(k, n, &f(x, t));
        }
    }
    u.with_kind(kind)
}

/// Derivative requested from [`eval_derivatives`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Derivative {
    Grad,
    Div,
    Dt,
}

/// Where derivative values live.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeLayout {
    /// One entry per (cell, local vertex); the derivative is linear per cell.
    CellVertex,
    /// One entry per (time node, cell); constant per cell.
    TimeNodeCell,
    /// One entry per (time interval, mesh vertex); linear in space.
    IntervalNode,
}

/// Flattened exact elementwise derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeData {
    pub what: Derivative,
    pub layout: DerivativeLayout,
    /// Values per entry (3 for a scalar gradient, `d * d` for a Jacobian in
    /// row-major `d u_a / d x_b`, 1 for a divergence, `d` for a time
    /// derivative).
    pub ncomp: usize,
    pub slices: usize,
    pub entities: usize,
    pub values: Vec<f64>,
}

impl DerivativeData {
    pub fn get(&self, slice: usize, entity: usize) -> &[f64] {
        let i = (slice * self.entities + entity) * self.ncomp;
        &self.values[i..i + self.ncomp]
    }
}

/// Field argument accepted by [`eval_derivatives`].
#[derive(Debug, Clone, Copy)]
pub enum FieldRef<'a> {
    Scalar(&'a ScalarField),
    SpaceTime(&'a SpaceTimeField),
}

/// Exact elementwise derivatives of a finite element field.
pub fn eval_derivatives(
    mesh: &SimplicialMesh,
    u: FieldRef<'_>,
    what: Derivative,
) -> Result<DerivativeData> {
    let dim = mesh.dim();
    match (u, what) {
        (FieldRef::Scalar(f), Derivative::Grad) => {
            f.check_mesh(mesh)?;
            let mut values = Vec::with_capacity(mesh.n_cells() * (dim + 1) * 3);
            for c in 0..mesh.n_cells() {
                for i in 0..=dim {
                    let mut b = [0.0; 4];
                    b[i] = 1.0;
                    values.extend_from_slice(&f.grad(mesh, c, &b));
                }
            }
            Ok(DerivativeData {
                what,
                layout: DerivativeLayout::CellVertex,
                ncomp: 3,
                slices: mesh.n_cells(),
                entities: dim + 1,
                values,
            })
        }
        (FieldRef::Scalar(_), _) => Err(Error::Usage(format!(
            "{what:?} is not defined for a scalar field in space"
        ))),
        (FieldRef::SpaceTime(f), Derivative::Grad | Derivative::Div) => {
            if f.mesh_id() != mesh.id() {
                return Err(Error::Usage("space-time field on a different mesh".into()));
            }
            let ncomp = if what == Derivative::Grad {
                dim * dim
            } else {
                1
            };
            let mut values = Vec::with_capacity((f.grid.n + 1) * mesh.n_cells() * ncomp);
            for k in 0..=f.grid.n {
                for c in 0..mesh.n_cells() {
                    let j = f.jacobian(mesh, c, k);
                    if what == Derivative::Grad {
                        for row in j.iter().take(dim) {
                            values.extend_from_slice(&row[..dim]);
                        }
                    } else {
                        values.push((0..dim).map(|a| j[a][a]).sum());
                    }
                }
            }
            Ok(DerivativeData {
                what,
                layout: DerivativeLayout::TimeNodeCell,
                ncomp,
                slices: f.grid.n + 1,
                entities: mesh.n_cells(),
                values,
            })
        }
        (FieldRef::SpaceTime(f), Derivative::Dt) => {
            if f.mesh_id() != mesh.id() {
                return Err(Error::Usage("space-time field on a different mesh".into()));
            }
            let mut values = Vec::with_capacity(f.grid.n * f.slice_len());
            for k in 0..f.grid.n {
                for n in 0..f.n_nodes {
                    values.extend_from_slice(&f.dt_value(k, n)[..dim]);
                }
            }
            Ok(DerivativeData {
                what,
                layout: DerivativeLayout::IntervalNode,
                ncomp: dim,
                slices: f.grid.n,
                entities: f.n_nodes,
                values,
            })
        }
    }
}
