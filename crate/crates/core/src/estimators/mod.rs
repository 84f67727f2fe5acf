//! Residual fields, maximal-jump liftings and a posteriori error indicators
//! for the Lagrangian, the coefficient and the Tikhonov functional.
//!
//! All bounds are evaluated with unit constants and are therefore
//! constant-free indicators, meaningful for comparison and marking.

mod bounds;

pub use bounds::{
    c_eps, coefficient_error_bound, error_bounds, estimate, lagrangian_error_estimate, mark_cells,
    stability_eta, tikhonov_error_bound, ErrorBounds, Estimate, IndicatorField,
};

use crate::error::{Error, Result};
use crate::mesh::{mesh_size_field, SimplicialMesh, TimeGrid};
use crate::objective::CutoffFunction;
use crate::pde::{check_eps, NeumannData, ObservationData};
use crate::quadrature::{time_rule, SimplexRule, CELL_DEGREE, FACE_DEGREE};
use crate::spaces::{spatial_max_jump, temporal_max_jump, JumpField, ScalarField, SpaceTimeField};

/// The discrete triple together with the problem data it was computed for.
#[derive(Debug, Clone, Copy)]
pub struct EstimatorInput<'a> {
    pub mesh: &'a SimplicialMesh,
    pub eps: &'a ScalarField,
    pub eps0: &'a ScalarField,
    pub alpha: f64,
    pub e: &'a SpaceTimeField,
    pub lambda: &'a SpaceTimeField,
    pub data: &'a ObservationData,
    pub source: &'a NeumannData,
    pub cutoff: CutoffFunction,
}

impl EstimatorInput<'_> {
    pub fn grid(&self) -> &TimeGrid {
        self.e.grid()
    }

    /// Checks that every member lives on the same mesh and time grid.
    pub fn check(&self) -> Result<()> {
        check_eps(self.mesh, self.eps)?;
        self.eps0.check_mesh(self.mesh)?;
        if self.eps0.degree() != self.eps.degree() {
            return Err(Error::Usage(
                "permittivity and reference have different degrees".into(),
            ));
        }
        let grid = *self.grid();
        self.e.check_compatible(self.mesh, &grid)?;
        self.lambda.check_compatible(self.mesh, &grid)?;
        self.data.check_compatible(self.mesh, &grid)?;
        self.source.check(self.mesh, &grid)
    }
}

/// Quadrature used by every estimator integral: the cell rule or the
/// boundary-face rule in space times the Gauss rule on each interval.
#[derive(Debug, Clone)]
pub struct EstimatorQuadrature {
    pub cell: SimplexRule,
    pub time_points: Vec<f64>,
    pub time_weights: Vec<f64>,
    pub boundary: Vec<BoundaryFaceQuadrature>,
}

/// Face rule on one boundary face, with the points also expressed in the
/// barycentric coordinates of the owning cell.
#[derive(Debug, Clone)]
pub struct BoundaryFaceQuadrature {
    pub face: usize,
    pub cell: usize,
    /// Outward unit normal.
    pub normal: [f64; 3],
    /// Face barycentric coordinates in face-vertex order.
    pub face_bary: Vec<[f64; 4]>,
    pub cell_bary: Vec<[f64; 4]>,
    /// Physical weights (rule weight times face measure).
    pub weights: Vec<f64>,
}

impl EstimatorQuadrature {
    pub fn new(mesh: &SimplicialMesh) -> Self {
        let d = mesh.dim();
        let face_rule = SimplexRule::new(d - 1, FACE_DEGREE);
        let (time_points, time_weights) = time_rule();
        let boundary = mesh
            .boundary_faces()
            .map(|(fid, face)| {
                let (c, lf) = face.inner;
                let area = mesh.face_measure(c, lf);
                let n = mesh.outward_normal(c, lf);
                let cell_bary = face_rule
                    .points
                    .iter()
                    .map(|fb| {
                        let mut x = [0.0; 3];
                        for (m, &v) in face.vertices[..d].iter().enumerate() {
                            let p = mesh.vertex(v);
                            for a in 0..d {
                                x[a] += fb[m] * p[a];
                            }
                        }
                        let mut b = mesh.barycentric(c, &x);
                        b[lf] = 0.0;
                        b
                    })
                    .collect();
                BoundaryFaceQuadrature {
                    face: fid,
                    cell: c,
                    normal: [n[0], n[1], n[2]],
                    face_bary: face_rule.points.clone(),
                    cell_bary,
                    weights: face_rule.weights.iter().map(|w| w * area).collect(),
                }
            })
            .collect();
        EstimatorQuadrature {
            cell: SimplexRule::new(d, CELL_DEGREE),
            time_points,
            time_weights,
            boundary,
        }
    }

    pub fn n_time(&self) -> usize {
        self.time_points.len()
    }
}

/// All maximal jumps entering the residuals and the indicators.
///
/// Spatial jumps of time-dependent quantities are stored per interval and
/// time quadrature point, at index `k * n_time + it`.
#[derive(Debug, Clone)]
pub struct FieldJumps {
    /// `[d eps / d nu]`, per cell.
    pub eps_normal: JumpField,
    /// `[dE/dt]`, per interval and vertex.
    pub e_dt: JumpField,
    /// `[d lambda/dt]`, per interval and vertex.
    pub lambda_dt: JumpField,
    /// `[d (div lambda)/dt]`, per interval and cell.
    pub div_lambda_dt: JumpField,
    /// `[dE/d nu]`, per cell.
    pub e_normal: Vec<JumpField>,
    /// `[d lambda/d nu]`, per cell.
    pub lambda_normal: Vec<JumpField>,
    /// `[(nu . E) div lambda]`, per cell.
    pub flux_div: Vec<JumpField>,
    /// `[(grad eps . E) nu]`, per cell.
    pub grad_eps_e_normal: Vec<JumpField>,
}

/// Linear interpolation in time of a per-(time node) cell Jacobian.
fn lerp_mat(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3], theta: f64) -> [[f64; 3]; 3] {
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = (1.0 - theta) * a[i][j] + theta * b[i][j];
        }
    }
    m
}

fn lerp(a: &[f64; 3], b: &[f64; 3], theta: f64) -> [f64; 3] {
    [
        (1.0 - theta) * a[0] + theta * b[0],
        (1.0 - theta) * a[1] + theta * b[1],
        (1.0 - theta) * a[2] + theta * b[2],
    ]
}

fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Per-(time node, cell) Jacobians and divergences of a space-time field.
struct CellDerivatives {
    n_cells: usize,
    jac: Vec<[[f64; 3]; 3]>,
    div: Vec<f64>,
}

impl CellDerivatives {
    fn new(mesh: &SimplicialMesh, u: &SpaceTimeField) -> Self {
        let n = u.grid().n;
        let nc = mesh.n_cells();
        let mut jac = Vec::with_capacity((n + 1) * nc);
        let mut div = Vec::with_capacity((n + 1) * nc);
        for k in 0..=n {
            for c in 0..nc {
                let j = u.jacobian(mesh, c, k);
                div.push(j[0][0] + j[1][1] + j[2][2]);
                jac.push(j);
            }
        }
        CellDerivatives {
            n_cells: nc,
            jac,
            div,
        }
    }

    fn jac_at(&self, c: usize, k: usize, theta: f64) -> [[f64; 3]; 3] {
        let nc = self.n_cells;
        lerp_mat(&self.jac[k * nc + c], &self.jac[(k + 1) * nc + c], theta)
    }

    fn div_at(&self, c: usize, k: usize, theta: f64) -> f64 {
        let nc = self.n_cells;
        (1.0 - theta) * self.div[k * nc + c] + theta * self.div[(k + 1) * nc + c]
    }
}

/// Value of a space-time field at `(c, b, t_k + theta tau)`.
fn field_at(
    mesh: &SimplicialMesh,
    u: &SpaceTimeField,
    c: usize,
    b: &[f64; 4],
    k: usize,
    theta: f64,
) -> [f64; 3] {
    lerp(
        &u.eval_node(mesh, c, b, k),
        &u.eval_node(mesh, c, b, k + 1),
        theta,
    )
}

/// Nodal temporal jump interpolated linearly inside cell `c`.
fn nodal_jump_at(
    mesh: &SimplicialMesh,
    j: &JumpField,
    c: usize,
    b: &[f64; 4],
    k: usize,
) -> [f64; 3] {
    let mut v = [0.0; 3];
    for (i, &node) in mesh.cell(c).iter().enumerate() {
        for (a, x) in j.get(k, node).iter().enumerate() {
            v[a] += b[i] * x;
        }
    }
    v
}

fn cell_jump(j: &JumpField, c: usize) -> [f64; 3] {
    let mut v = [0.0; 3];
    for (a, x) in j.get(0, c).iter().enumerate() {
        v[a] = *x;
    }
    v
}

fn time_slopes(u: &SpaceTimeField) -> Vec<f64> {
    let n = u.grid().n;
    let tau = u.grid().tau;
    let len = u.slice_len();
    let mut s = Vec::with_capacity(n * len);
    for k in 0..n {
        s.extend(
            u.slice(k + 1)
                .iter()
                .zip(u.slice(k))
                .map(|(a, b)| (a - b) / tau),
        );
    }
    s
}

impl FieldJumps {
    pub fn new(input: &EstimatorInput<'_>) -> Result<Self> {
        input.check()?;
        let mesh = input.mesh;
        let grid = *input.grid();
        let d = mesh.dim();
        let nc = mesh.n_cells();
        let (tq, _) = time_rule();
        let de = CellDerivatives::new(mesh, input.e);
        let dl = CellDerivatives::new(mesh, input.lambda);

        let div_slopes: Vec<f64> = (0..grid.n)
            .flat_map(|k| {
                let dl = &dl;
                (0..nc).map(move |c| (dl.div[(k + 1) * nc + c] - dl.div[k * nc + c]) / grid.tau)
            })
            .collect();

        let mut e_normal = Vec::new();
        let mut lambda_normal = Vec::new();
        let mut flux_div = Vec::new();
        let mut grad_eps_e_normal = Vec::new();
        for k in 0..grid.n {
            for &theta in &tq {
                for (derivs, out) in [(&de, &mut e_normal), (&dl, &mut lambda_normal)] {
                    let jac: Vec<[[f64; 3]; 3]> =
                        (0..nc).map(|c| derivs.jac_at(c, k, theta)).collect();
                    out.push(spatial_max_jump(mesh, d, |c, _, n, o| {
                        for (a, v) in o.iter_mut().enumerate() {
                            *v = dot3(&jac[c][a], &[n[0], n[1], n[2]]);
                        }
                    }));
                }
                flux_div.push(spatial_max_jump(mesh, 1, |c, b, n, o| {
                    let ev = field_at(mesh, input.e, c, b, k, theta);
                    o[0] = dot3(&ev, &[n[0], n[1], n[2]]) * dl.div_at(c, k, theta);
                }));
                grad_eps_e_normal.push(spatial_max_jump(mesh, d, |c, b, n, o| {
                    let ev = field_at(mesh, input.e, c, b, k, theta);
                    let s = dot3(&input.eps.grad(mesh, c, b), &ev);
                    for (a, v) in o.iter_mut().enumerate() {
                        *v = s * n[a];
                    }
                }));
            }
        }
        Ok(FieldJumps {
            eps_normal: crate::spaces::normal_derivative_jump_scalar(mesh, input.eps),
            e_dt: temporal_max_jump(&time_slopes(input.e), &grid, mesh.n_vertices(), d),
            lambda_dt: temporal_max_jump(&time_slopes(input.lambda), &grid, mesh.n_vertices(), d),
            div_lambda_dt: temporal_max_jump(&div_slopes, &grid, nc, 1),
            e_normal,
            lambda_normal,
            flux_div,
            grad_eps_e_normal,
        })
    }
}

/// `R_eps` at the cell quadrature points.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsResidual {
    /// Values per cell and quadrature point.
    pub values: Vec<Vec<f64>>,
    /// Physical quadrature weights, same layout.
    pub weights: Vec<Vec<f64>>,
}

impl EpsResidual {
    /// `||R_eps||` in `L2(Omega)`.
    pub fn norm(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.weights)
            .flat_map(|(v, w)| v.iter().zip(w).map(|(v, w)| w * v * v))
            .sum::<f64>()
            .sqrt()
    }

    /// Per-cell `L2` norms.
    pub fn cell_norms(&self) -> Vec<f64> {
        self.values
            .iter()
            .zip(&self.weights)
            .map(|(v, w)| v.iter().zip(w).map(|(v, w)| w * v * v).sum::<f64>().sqrt())
            .collect()
    }
}

/// A vector residual on cells times intervals, at the space-time quadrature
/// points, indexed `(((c * N + k) * n_time + it) * n_space + is) * ncomp + a`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeResidual {
    pub ncomp: usize,
    pub n_cells: usize,
    pub n_intervals: usize,
    pub n_time: usize,
    pub n_space: usize,
    pub values: Vec<f64>,
}

impl SpaceTimeResidual {
    fn zeros(
        ncomp: usize,
        n_cells: usize,
        n_intervals: usize,
        n_time: usize,
        n_space: usize,
    ) -> Self {
        SpaceTimeResidual {
            ncomp,
            n_cells,
            n_intervals,
            n_time,
            n_space,
            values: vec![0.0; ncomp * n_cells * n_intervals * n_time * n_space],
        }
    }

    pub fn index(&self, c: usize, k: usize, it: usize, is: usize) -> usize {
        (((c * self.n_intervals + k) * self.n_time + it) * self.n_space + is) * self.ncomp
    }

    pub fn get(&self, c: usize, k: usize, it: usize, is: usize) -> &[f64] {
        let i = self.index(c, k, it, is);
        &self.values[i..i + self.ncomp]
    }

    fn set(&mut self, c: usize, k: usize, it: usize, is: usize, v: &[f64; 3]) {
        let i = self.index(c, k, it, is);
        self.values[i..i + self.ncomp].copy_from_slice(&v[..self.ncomp]);
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// All residual fields of the discrete triple. Boundary residuals use
/// entity index `i` into [`EstimatorQuadrature::boundary`] in place of the
/// cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualFields {
    pub eps: EpsResidual,
    pub lambda_omega: SpaceTimeResidual,
    pub lambda_gamma: SpaceTimeResidual,
    pub e_omega: SpaceTimeResidual,
    pub e_gamma: SpaceTimeResidual,
}

/// `R_eps = alpha (eps - eps0) - int dE/dt . dlambda/dt - int div E div lambda / eps
///  + int [(nu . E) div lambda] / (h eps)`.
pub fn residual_eps(
    input: &EstimatorInput<'_>,
    jumps: &FieldJumps,
    quad: &EstimatorQuadrature,
) -> EpsResidual {
    let mesh = input.mesh;
    let grid = input.grid();
    let tau = grid.tau;
    let d = mesh.dim();
    let h = mesh_size_field(mesh).0;
    let de = CellDerivatives::new(mesh, input.e);
    let dl = CellDerivatives::new(mesh, input.lambda);
    let nt = quad.n_time();
    let mut values = Vec::with_capacity(mesh.n_cells());
    let mut weights = Vec::with_capacity(mesh.n_cells());
    for c in 0..mesh.n_cells() {
        let verts = mesh.cell(c);
        let nv = d + 1;
        // time integrals that do not depend on the point inside the cell
        let mut divdiv = 0.0;
        let mut jump = 0.0;
        let mut tt = vec![0.0; nv * nv];
        for k in 0..grid.n {
            let (e0, e1) = (de.div_at(c, k, 0.0), de.div_at(c, k, 1.0));
            let (l0, l1) = (dl.div_at(c, k, 0.0), dl.div_at(c, k, 1.0));
            divdiv += tau * (e0 * l0 / 3.0 + (e0 * l1 + e1 * l0) / 6.0 + e1 * l1 / 3.0);
            for it in 0..nt {
                jump += tau * quad.time_weights[it] * jumps.flux_div[k * nt + it].get(0, c)[0];
            }
            for (a, &va) in verts.iter().enumerate() {
                let dea = input.e.dt_value(k, va);
                for (b, &vb) in verts.iter().enumerate() {
                    tt[a * nv + b] += tau * dot3(&dea, &input.lambda.dt_value(k, vb));
                }
            }
        }
        let vol = mesh.geometry(c).volume;
        let mut vals = Vec::with_capacity(quad.cell.len());
        let mut ws = Vec::with_capacity(quad.cell.len());
        for (b, &w) in quad.cell.points.iter().zip(&quad.cell.weights) {
            let eps = input.eps.eval(mesh, c, b);
            let eps0 = input.eps0.eval(mesh, c, b);
            let mut dtdt = 0.0;
            for i in 0..nv {
                for j in 0..nv {
                    dtdt += b[i] * b[j] * tt[i * nv + j];
                }
            }
            vals.push(input.alpha * (eps - eps0) - dtdt - divdiv / eps + jump / (h[c] * eps));
            ws.push(w * vol);
        }
        values.push(vals);
        weights.push(ws);
    }
    EpsResidual { values, weights }
}

/// `R_{lambda,Omega} = -eps [d lambda/dt] / tau + [d lambda/d nu] / (2h) + (div lambda / eps) grad eps`
/// and `R_{lambda,Gamma} = d lambda/d nu + (E - G) z^2`.
pub fn residual_adjoint_pair(
    input: &EstimatorInput<'_>,
    jumps: &FieldJumps,
    quad: &EstimatorQuadrature,
) -> (SpaceTimeResidual, SpaceTimeResidual) {
    let mesh = input.mesh;
    let grid = input.grid();
    let d = mesh.dim();
    let nt = quad.n_time();
    let h = mesh_size_field(mesh).0;
    let dl = CellDerivatives::new(mesh, input.lambda);
    let mut omega = SpaceTimeResidual::zeros(d, mesh.n_cells(), grid.n, nt, quad.cell.len());
    for c in 0..mesh.n_cells() {
        for k in 0..grid.n {
            for (it, &theta) in quad.time_points.iter().enumerate() {
                let js = cell_jump(&jumps.lambda_normal[k * nt + it], c);
                let div = dl.div_at(c, k, theta);
                for (is, b) in quad.cell.points.iter().enumerate() {
                    let eps = input.eps.eval(mesh, c, b);
                    let ge = input.eps.grad(mesh, c, b);
                    let jt = nodal_jump_at(mesh, &jumps.lambda_dt, c, b, k);
                    let mut r = [0.0; 3];
                    for a in 0..d {
                        r[a] = -eps * jt[a] / grid.tau + js[a] / (2.0 * h[c]) + div / eps * ge[a];
                    }
                    omega.set(c, k, it, is, &r);
                }
            }
        }
    }
    let nfq = quad.boundary.first().map_or(0, |f| f.weights.len());
    let mut gamma = SpaceTimeResidual::zeros(d, quad.boundary.len(), grid.n, nt, nfq);
    for (i, bf) in quad.boundary.iter().enumerate() {
        for k in 0..grid.n {
            for (it, &theta) in quad.time_points.iter().enumerate() {
                let t = (k as f64 + theta) * grid.tau;
                let zz = input.cutoff.value_unchecked(t).powi(2);
                let jac = dl.jac_at(bf.cell, k, theta);
                for (is, (b, fb)) in bf.cell_bary.iter().zip(&bf.face_bary).enumerate() {
                    let ev = field_at(mesh, input.e, bf.cell, b, k, theta);
                    let gv = input.data.eval_face(bf.face, fb, k, theta);
                    let mut r = [0.0; 3];
                    for a in 0..d {
                        r[a] = dot3(&jac[a], &bf.normal) + (ev[a] - gv[a]) * zz;
                    }
                    gamma.set(i, k, it, is, &r);
                }
            }
        }
    }
    (omega, gamma)
}

/// `R_{E,Omega}` and `R_{E,Gamma} = dE/d nu - P`.
pub fn residual_direct_pair(
    input: &EstimatorInput<'_>,
    jumps: &FieldJumps,
    quad: &EstimatorQuadrature,
) -> (SpaceTimeResidual, SpaceTimeResidual) {
    let mesh = input.mesh;
    let grid = input.grid();
    let d = mesh.dim();
    let nt = quad.n_time();
    let h = mesh_size_field(mesh).0;
    let de = CellDerivatives::new(mesh, input.e);
    let mut omega = SpaceTimeResidual::zeros(d, mesh.n_cells(), grid.n, nt, quad.cell.len());
    for c in 0..mesh.n_cells() {
        let hess = input.eps.hessian(mesh, c);
        for k in 0..grid.n {
            for (it, &theta) in quad.time_points.iter().enumerate() {
                let js = cell_jump(&jumps.e_normal[k * nt + it], c);
                let jf = cell_jump(&jumps.grad_eps_e_normal[k * nt + it], c);
                let je = de.jac_at(c, k, theta);
                for (is, b) in quad.cell.points.iter().enumerate() {
                    let eps = input.eps.eval(mesh, c, b);
                    let ge = input.eps.grad(mesh, c, b);
                    let ev = field_at(mesh, input.e, c, b, k, theta);
                    let jt = nodal_jump_at(mesh, &jumps.e_dt, c, b, k);
                    let ge_e = dot3(&ge, &ev);
                    let mut r = [0.0; 3];
                    for a in 0..d {
                        // (J_{grad eps}^T E)_a and (J_E^T grad eps)_a
                        let hess_e: f64 = (0..d).map(|i| hess[i][a] * ev[i]).sum();
                        let je_ge: f64 = (0..d).map(|i| je[i][a] * ge[i]).sum();
                        r[a] = -eps * jt[a] / grid.tau
                            + js[a] / (2.0 * h[c])
                            + ge_e / (eps * eps) * ge[a]
                            - (hess_e + je_ge) / eps
                            + jf[a] / (2.0 * h[c] * eps);
                    }
                    omega.set(c, k, it, is, &r);
                }
            }
        }
    }
    let nfq = quad.boundary.first().map_or(0, |f| f.weights.len());
    let mut gamma = SpaceTimeResidual::zeros(d, quad.boundary.len(), grid.n, nt, nfq);
    for (i, bf) in quad.boundary.iter().enumerate() {
        let side = mesh.face(bf.face).side;
        for k in 0..grid.n {
            for (it, &theta) in quad.time_points.iter().enumerate() {
                let t = (k as f64 + theta) * grid.tau;
                let jac = de.jac_at(bf.cell, k, theta);
                for (is, fb) in bf.face_bary.iter().enumerate() {
                    let p = input.source.eval(bf.face, side, fb, k, theta, t);
                    let mut r = [0.0; 3];
                    for a in 0..d {
                        r[a] = dot3(&jac[a], &bf.normal) - p[a];
                    }
                    gamma.set(i, k, it, is, &r);
                }
            }
        }
    }
    (omega, gamma)
}

/// Computes every residual field.
pub fn residual_fields(
    input: &EstimatorInput<'_>,
    jumps: &FieldJumps,
    quad: &EstimatorQuadrature,
) -> ResidualFields {
    let eps = residual_eps(input, jumps, quad);
    let (lambda_omega, lambda_gamma) = residual_adjoint_pair(input, jumps, quad);
    let (e_omega, e_gamma) = residual_direct_pair(input, jumps, quad);
    ResidualFields {
        eps,
        lambda_omega,
        lambda_gamma,
        e_omega,
        e_gamma,
    }
}
