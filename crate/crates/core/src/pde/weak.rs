//! Weak forms evaluated by direct space-time quadrature, independently of
//! the assembled matrices used by the solvers.

use super::assembly::{check_eps, eps_quadrature, for_each_boundary_point, trace_value, QPoint};
use super::data::{NeumannData, ObservationData};
use crate::error::{Error, Result};
use crate::mesh::{SimplicialMesh, TimeGrid};
use crate::objective::CutoffFunction;
use crate::quadrature::time_rule;
use crate::spaces::SpaceTimeField;

fn require_zero_slice(u: &SpaceTimeField, k: usize, what: &str) -> Result<()> {
    if u.slice(k).iter().any(|&v| v != 0.0) {
        return Err(Error::Usage(format!("{what} must vanish at time node {k}")));
    }
    Ok(())
}

/// Values of a space-time field at one space-time quadrature point.
#[derive(Debug, Clone, Copy, Default)]
struct Sample {
    u: [f64; 3],
    dt: [f64; 3],
    jac: [[f64; 3]; 3],
    div: f64,
}

/// Per-cell, per-interval interpolation data of a field.
struct CellInterval {
    jac0: [[f64; 3]; 3],
    jac1: [[f64; 3]; 3],
}

fn cell_interval(mesh: &SimplicialMesh, u: &SpaceTimeField, c: usize, k: usize) -> CellInterval {
    CellInterval {
        jac0: u.jacobian(mesh, c, k),
        jac1: u.jacobian(mesh, c, k + 1),
    }
}

fn sample(
    mesh: &SimplicialMesh,
    u: &SpaceTimeField,
    ci: &CellInterval,
    c: usize,
    b: &[f64; 4],
    k: usize,
    theta: f64,
) -> Sample {
    let d = u.ncomp();
    let u0 = u.eval_node(mesh, c, b, k);
    let u1 = u.eval_node(mesh, c, b, k + 1);
    let tau = u.grid().tau;
    let mut s = Sample::default();
    for a in 0..d {
        s.u[a] = (1.0 - theta) * u0[a] + theta * u1[a];
        s.dt[a] = (u1[a] - u0[a]) / tau;
        for bb in 0..d {
            s.jac[a][bb] = (1.0 - theta) * ci.jac0[a][bb] + theta * ci.jac1[a][bb];
        }
        s.div += s.jac[a][a];
    }
    s
}

/// Visits every cell quadrature point on every time interval.
fn for_each_volume_point(
    mesh: &SimplicialMesh,
    grid: &TimeGrid,
    qp: &[Vec<QPoint>],
    mut f: impl FnMut(usize, usize, &QPoint, f64, f64),
) {
    let (tq, tw) = time_rule();
    for c in 0..mesh.n_cells() {
        for k in 0..grid.n {
            for q in &qp[c] {
                for (&theta, &wt) in tq.iter().zip(&tw) {
                    f(c, k, q, theta, q.w * wt * grid.tau);
                }
            }
        }
    }
}

fn check_common(
    mesh: &SimplicialMesh,
    grid: &TimeGrid,
    eps: &crate::spaces::ScalarField,
    fields: &[&SpaceTimeField],
) -> Result<()> {
    check_eps(mesh, eps)?;
    for f in fields {
        f.check_compatible(mesh, grid)?;
    }
    Ok(())
}

/// `D(eps, E, phi) = -<eps E_t, phi_t> + <grad E, grad phi>
///   + <(grad eps . E) / eps, div phi> - <P, phi>_Gamma`.
pub fn weak_form_d(
    mesh: &SimplicialMesh,
    grid: &TimeGrid,
    eps: &crate::spaces::ScalarField,
    e: &SpaceTimeField,
    phi: &SpaceTimeField,
    p: &NeumannData,
) -> Result<f64> {
    check_common(mesh, grid, eps, &[e, phi])?;
    p.check(mesh, grid)?;
    require_zero_slice(e, 0, "direct field")?;
    require_zero_slice(phi, grid.n, "adjoint-space test function")?;
    let d = mesh.dim();
    let qp = eps_quadrature(mesh, eps);
    let mut total = 0.0;
    let mut cache: Option<(usize, usize, CellInterval, CellInterval)> = None;
    for_each_volume_point(mesh, grid, &qp, |c, k, q, theta, w| {
        if cache
            .as_ref()
            .is_none_or(|(cc, kk, _, _)| (*cc, *kk) != (c, k))
        {
            cache = Some((
                c,
                k,
                cell_interval(mesh, e, c, k),
                cell_interval(mesh, phi, c, k),
            ));
        }
        let (_, _, ce, cp) = cache.as_ref().unwrap();
        let se = sample(mesh, e, ce, c, &q.b, k, theta);
        let sp = sample(mesh, phi, cp, c, &q.b, k, theta);
        let mut v = 0.0;
        let mut ge = 0.0;
        for a in 0..d {
            v -= q.eps * se.dt[a] * sp.dt[a];
            for bb in 0..d {
                v += se.jac[a][bb] * sp.jac[a][bb];
            }
            ge += q.grad_eps[a] * se.u[a];
        }
        v += ge / q.eps * sp.div;
        total += w * v;
    });
    for_each_boundary_point(mesh, grid, |bp| {
        let pv = p.eval(bp.face_id, bp.face.side, &bp.fb, bp.k, bp.theta, bp.t);
        let fv = trace_value(phi, bp, d);
        total -= bp.w * (0..d).map(|a| pv[a] * fv[a]).sum::<f64>();
    });
    Ok(total)
}

/// `A(eps, lambda, phi) = <(E - G) z^2, phi>_Gamma - <eps lambda_t, phi_t>
///   + <grad lambda, grad phi> + <(div lambda / eps) grad eps, phi>`.
#[allow(clippy::too_many_arguments)]
pub fn weak_form_a(
    mesh: &SimplicialMesh,
    grid: &TimeGrid,
    eps: &crate::spaces::ScalarField,
    lambda: &SpaceTimeField,
    phi: &SpaceTimeField,
    e: &SpaceTimeField,
    g: &ObservationData,
    z: &CutoffFunction,
) -> Result<f64> {
    check_common(mesh, grid, eps, &[lambda, phi, e])?;
    g.check_compatible(mesh, grid)?;
    require_zero_slice(lambda, grid.n, "adjoint field")?;
    require_zero_slice(phi, 0, "direct-space test function")?;
    let d = mesh.dim();
    let qp = eps_quadrature(mesh, eps);
    let mut total = 0.0;
    let mut cache: Option<(usize, usize, CellInterval, CellInterval)> = None;
    for_each_volume_point(mesh, grid, &qp, |c, k, q, theta, w| {
        if cache
            .as_ref()
            .is_none_or(|(cc, kk, _, _)| (*cc, *kk) != (c, k))
        {
            cache = Some((
                c,
                k,
                cell_interval(mesh, lambda, c, k),
                cell_interval(mesh, phi, c, k),
            ));
        }
        let (_, _, cl, cp) = cache.as_ref().unwrap();
        let sl = sample(mesh, lambda, cl, c, &q.b, k, theta);
        let sp = sample(mesh, phi, cp, c, &q.b, k, theta);
        let mut v = 0.0;
        for a in 0..d {
            v -= q.eps * sl.dt[a] * sp.dt[a];
            for bb in 0..d {
                v += sl.jac[a][bb] * sp.jac[a][bb];
            }
            v += sl.div / q.eps * q.grad_eps[a] * sp.u[a];
        }
        total += w * v;
    });
    for_each_boundary_point(mesh, grid, |bp| {
        let zz = z.value_unchecked(bp.t).powi(2);
        let ev = trace_value(e, bp, d);
        let gv = g.eval_face(bp.face_id, &bp.fb, bp.k, bp.theta);
        let fv = trace_value(phi, bp, d);
        total += bp.w * zz * (0..d).map(|a| (ev[a] - gv[a]) * fv[a]).sum::<f64>();
    });
    Ok(total)
}

/// Weak-form values against every basis function `psi_j(t) phi_i(x) e_a` of
/// a discrete test space.
#[derive(Debug, Clone)]
pub struct WeakResidual {
    /// First time index of the test space.
    pub first: usize,
    /// `values[j - first][node * d + a]`
    pub values: Vec<Vec<f64>>,
    /// Per test function, the sum over the form's terms of the absolute
    /// term values; `scale` is its maximum.
    pub scale: f64,
}

impl WeakResidual {
    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .flatten()
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// `max |residual| / scale`, zero when everything vanishes.
    pub fn relative(&self) -> f64 {
        let m = self.max_abs();
        if self.scale > 0.0 {
            m / self.scale
        } else {
            m
        }
    }
}

struct TermAccumulator {
    d: usize,
    terms: Vec<Vec<Vec<f64>>>,
}

impl TermAccumulator {
    fn new(n_terms: usize, n_time: usize, ndof: usize, d: usize) -> Self {
        TermAccumulator {
            d,
            terms: vec![vec![vec![0.0; ndof]; n_time]; n_terms],
        }
    }

    fn add(&mut self, term: usize, j: usize, node: usize, a: usize, v: f64) {
        self.terms[term][j][node * self.d + a] += v;
    }

    fn finish(self, first: usize, last: usize) -> WeakResidual {
        let ndof = self.terms[0][0].len();
        let mut values = Vec::new();
        let mut scale = 0.0f64;
        for j in first..=last {
            let mut row = vec![0.0; ndof];
            for i in 0..ndof {
                let mut s = 0.0;
                for t in &self.terms {
                    row[i] += t[j][i];
                    s += t[j][i].abs();
                }
                scale = scale.max(s);
            }
            values.push(row);
        }
        WeakResidual {
            first,
            values,
            scale,
        }
    }
}

/// Time-hat values and derivatives on interval `k` at local time `theta`.
fn hats(k: usize, theta: f64, tau: f64) -> [(usize, f64, f64); 2] {
    [(k, 1.0 - theta, -1.0 / tau), (k + 1, theta, 1.0 / tau)]
}

/// `D(eps, E, psi_j phi_i e_a)` for `j = 0..N-1`.
pub fn residual_d(
    mesh: &SimplicialMesh,
    grid: &TimeGrid,
    eps: &crate::spaces::ScalarField,
    e: &SpaceTimeField,
    p: &NeumannData,
) -> Result<WeakResidual> {
    check_common(mesh, grid, eps, &[e])?;
    p.check(mesh, grid)?;
    require_zero_slice(e, 0, "direct field")?;
    let d = mesh.dim();
    let qp = eps_quadrature(mesh, eps);
    let mut acc = TermAccumulator::new(4, grid.n + 1, mesh.n_vertices() * d, d);
    let mut cache: Option<(usize, usize, CellInterval)> = None;
    for_each_volume_point(mesh, grid, &qp, |c, k, q, theta, w| {
        if cache
            .as_ref()
            .is_none_or(|(cc, kk, _)| (*cc, *kk) != (c, k))
        {
            cache = Some((c, k, cell_interval(mesh, e, c, k)));
        }
        let (_, _, ce) = cache.as_ref().unwrap();
        let se = sample(mesh, e, ce, c, &q.b, k, theta);
        let gb = &mesh.geometry(c).grad_bary;
        let ge: f64 = (0..d).map(|a| q.grad_eps[a] * se.u[a]).sum::<f64>() / q.eps;
        for (j, h, dh) in hats(k, theta, grid.tau) {
            for (i, &node) in mesh.cell(c).iter().enumerate() {
                for a in 0..d {
                    acc.add(0, j, node, a, -w * q.eps * se.dt[a] * dh * q.b[i]);
                    let g: f64 = (0..d).map(|bb| se.jac[a][bb] * gb[i][bb]).sum();
                    acc.add(1, j, node, a, w * g * h);
                    acc.add(2, j, node, a, w * ge * gb[i][a] * h);
                }
            }
        }
    });
    for_each_boundary_point(mesh, grid, |bp| {
        let pv = p.eval(bp.face_id, bp.face.side, &bp.fb, bp.k, bp.theta, bp.t);
        for (j, h, _) in hats(bp.k, bp.theta, grid.tau) {
            for (m, &node) in bp.face.vertices[..d].iter().enumerate() {
                for a in 0..d {
                    acc.add(3, j, node, a, -bp.w * pv[a] * bp.fb[m] * h);
                }
            }
        }
    });
    Ok(acc.finish(0, grid.n - 1))
}

/// `A(eps, lambda, psi_j phi_i e_a)` for `j = 1..N`.
#[allow(clippy::too_many_arguments)]
pub fn residual_a(
    mesh: &SimplicialMesh,
    grid: &TimeGrid,
    eps: &crate::spaces::ScalarField,
    lambda: &SpaceTimeField,
    e: &SpaceTimeField,
    g: &ObservationData,
    z: &CutoffFunction,
) -> Result<WeakResidual> {
    check_common(mesh, grid, eps, &[lambda, e])?;
    g.check_compatible(mesh, grid)?;
    require_zero_slice(lambda, grid.n, "adjoint field")?;
    let d = mesh.dim();
    let qp = eps_quadrature(mesh, eps);
    let mut acc = TermAccumulator::new(4, grid.n + 1, mesh.n_vertices() * d, d);
    let mut cache: Option<(usize, usize, CellInterval)> = None;
    for_each_volume_point(mesh, grid, &qp, |c, k, q, theta, w| {
        if cache
            .as_ref()
            .is_none_or(|(cc, kk, _)| (*cc, *kk) != (c, k))
        {
            cache = Some((c, k, cell_interval(mesh, lambda, c, k)));
        }
        let (_, _, cl) = cache.as_ref().unwrap();
        let sl = sample(mesh, lambda, cl, c, &q.b, k, theta);
        let gb = &mesh.geometry(c).grad_bary;
        for (j, h, dh) in hats(k, theta, grid.tau) {
            for (i, &node) in mesh.cell(c).iter().enumerate() {
                for a in 0..d {
                    acc.add(1, j, node, a, -w * q.eps * sl.dt[a] * dh * q.b[i]);
                    let gr: f64 = (0..d).map(|bb| sl.jac[a][bb] * gb[i][bb]).sum();
                    acc.add(2, j, node, a, w * gr * h);
                    acc.add(
                        3,
                        j,
                        node,
                        a,
                        w * sl.div / q.eps * q.grad_eps[a] * q.b[i] * h,
                    );
                }
            }
        }
    });
    for_each_boundary_point(mesh, grid, |bp| {
        let zz = z.value_unchecked(bp.t).powi(2);
        if zz == 0.0 {
            return;
        }
        let ev = trace_value(e, bp, d);
        let gv = g.eval_face(bp.face_id, &bp.fb, bp.k, bp.theta);
        for (j, h, _) in hats(bp.k, bp.theta, grid.tau) {
            for (m, &node) in bp.face.vertices[..d].iter().enumerate() {
                for a in 0..d {
                    acc.add(0, j, node, a, bp.w * zz * (ev[a] - gv[a]) * bp.fb[m] * h);
                }
            }
        }
    });
    Ok(acc.finish(1, grid.n))
}
