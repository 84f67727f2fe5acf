//! The Tikhonov functional, its Lagrangian, the gradient with respect to the
//! permittivity, the admissible set and the minimisation loop.

mod cutoff;
mod minimize;

pub use cutoff::CutoffFunction;
pub use minimize::{minimize, IterationRecord, MinimizeOptions, MinimizeOutcome, MinimizeStatus};

use crate::error::{Error, Result};
use crate::linalg::{dot, CsrMatrix};
use crate::mesh::{SimplicialMesh, TimeGrid};
use crate::pde::{
    boundary_misfit, eps_quadrature, weak_form_d, NeumannData, ObservationData, WaveSolver,
};
use crate::spaces::{
    basis_grads, basis_values, cell_dofs, n_lagrange_nodes, scalar_mass, ScalarField,
    SpaceTimeField,
};
use std::ops::Deref;

/// Marks the Lagrange nodes of every cell touching the boundary. The
/// permittivity is fixed to one there, which enforces both trace conditions
/// of the admissible set on the discrete level.
pub fn collar_nodes(mesh: &SimplicialMesh, q: usize) -> Vec<bool> {
    let mut collar = vec![false; n_lagrange_nodes(mesh, q)];
    for (c, touches) in mesh.collar_cells().into_iter().enumerate() {
        if touches {
            for n in cell_dofs(mesh, q, c) {
                collar[n] = true;
            }
        }
    }
    collar
}

/// An admissible permittivity: nodal values in `[1, eps_max]` and equal to
/// one on the boundary collar.
#[derive(Debug, Clone, PartialEq)]
pub struct PermittivityField {
    field: ScalarField,
    eps_max: f64,
    collar: Vec<bool>,
}

impl Deref for PermittivityField {
    type Target = ScalarField;
    fn deref(&self) -> &ScalarField {
        &self.field
    }
}

fn check_eps_max(eps_max: f64) -> Result<()> {
    if !(eps_max >= 1.0) || !eps_max.is_finite() {
        return Err(Error::Config(format!(
            "eps_max must be a finite value of at least 1, got {eps_max}"
        )));
    }
    Ok(())
}

impl PermittivityField {
    /// Wraps `field` after checking admissibility.
    pub fn new(mesh: &SimplicialMesh, field: ScalarField, eps_max: f64) -> Result<Self> {
        check_eps_max(eps_max)?;
        field.check_mesh(mesh)?;
        let collar = collar_nodes(mesh, field.degree());
        for (i, (&v, &c)) in field.values().iter().zip(&collar).enumerate() {
            if c && v != 1.0 {
                return Err(Error::Config(format!(
                    "permittivity at collar node {i} is {v}, must be 1"
                )));
            }
            if !(1.0..=eps_max).contains(&v) {
                return Err(Error::Config(format!(
                    "permittivity at node {i} is {v}, outside [1, {eps_max}]"
                )));
            }
        }
        Ok(PermittivityField {
            field,
            eps_max,
            collar,
        })
    }

    /// The constant admissible field `1`.
    pub fn one(mesh: &SimplicialMesh, q: usize, eps_max: f64) -> Result<Self> {
        PermittivityField::new(mesh, ScalarField::constant(mesh, q, 1.0)?, eps_max)
    }

    pub fn eps_max(&self) -> f64 {
        self.eps_max
    }

    pub fn collar(&self) -> &[bool] {
        &self.collar
    }

    pub fn field(&self) -> &ScalarField {
        &self.field
    }

    pub fn into_field(self) -> ScalarField {
        self.field
    }
}

/// Nodal projection onto the admissible set: clamp to `[1, eps_max]` and set
/// collar nodes to one. Idempotent and nonexpansive in the max norm.
pub fn project_admissible(
    eps: &ScalarField,
    eps_max: f64,
    collar: &[bool],
) -> Result<PermittivityField> {
    check_eps_max(eps_max)?;
    if collar.len() != eps.values().len() {
        return Err(Error::Usage(format!(
            "collar marks {} nodes, field has {}",
            collar.len(),
            eps.values().len()
        )));
    }
    let values = eps
        .values()
        .iter()
        .zip(collar)
        .map(|(&v, &c)| if c { 1.0 } else { v.clamp(1.0, eps_max) })
        .collect();
    Ok(PermittivityField {
        field: eps.with_values(values),
        eps_max,
        collar: collar.to_vec(),
    })
}

/// Regularisation weight and reference permittivity.
#[derive(Debug, Clone)]
pub struct RegularizationConfig {
    pub alpha: f64,
    pub eps0: PermittivityField,
}

impl RegularizationConfig {
    pub fn new(alpha: f64, eps0: PermittivityField) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::Config(format!(
                "alpha must be positive, got {alpha}"
            )));
        }
        Ok(RegularizationConfig { alpha, eps0 })
    }
}

/// The two terms of the Tikhonov functional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TikhonovParts {
    /// `1/2 ||(E - G) z||^2` over the lateral boundary.
    pub misfit: f64,
    /// `alpha/2 ||eps - eps0||^2` over the domain.
    pub regularization: f64,
}

impl TikhonovParts {
    pub fn total(&self) -> f64 {
        self.misfit + self.regularization
    }
}

fn check_same_space(eps: &ScalarField, eps0: &ScalarField) -> Result<()> {
    if eps.degree() != eps0.degree() || eps.mesh_id() != eps0.mesh_id() {
        return Err(Error::Usage(
            "permittivity and reference live in different spaces".into(),
        ));
    }
    Ok(())
}

/// `alpha/2 (eps - eps0)^T M (eps - eps0)` with the exact mass matrix.
pub fn regularization_value(
    mesh: &SimplicialMesh,
    eps: &ScalarField,
    reg: &RegularizationConfig,
) -> Result<f64> {
    eps.check_mesh(mesh)?;
    check_same_space(eps, &reg.eps0)?;
    let m = scalar_mass(mesh, eps.degree());
    Ok(0.5 * reg.alpha * mass_norm_sq(&m, eps.values(), reg.eps0.values()))
}

fn mass_norm_sq(m: &CsrMatrix, a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mut md = vec![0.0; diff.len()];
    m.mul_vec(&diff, &mut md);
    dot(&diff, &md)
}

/// Both terms of the Tikhonov functional for a given direct field.
pub fn tikhonov_parts(
    mesh: &SimplicialMesh,
    grid: &TimeGrid,
    eps: &ScalarField,
    e: &SpaceTimeField,
    g: &ObservationData,
    reg: &RegularizationConfig,
    z: &CutoffFunction,
) -> Result<TikhonovParts> {
    e.check_compatible(mesh, grid)?;
    g.check_compatible(mesh, grid)?;
    Ok(TikhonovParts {
        misfit: boundary_misfit(mesh, grid, e, g, z),
        regularization: regularization_value(mesh, eps, reg)?,
    })
}

pub fn tikhonov_value(
    mesh: &SimplicialMesh,
    grid: &TimeGrid,
    eps: &ScalarField,
    e: &SpaceTimeField,
    g: &ObservationData,
    reg: &RegularizationConfig,
    z: &CutoffFunction,
) -> Result<f64> {
    Ok(tikhonov_parts(mesh, grid, eps, e, g, reg, z)?.total())
}

/// `L(eps, E, lambda) = F(eps, E) + D(eps, E, lambda)`.
#[allow(clippy::too_many_arguments)]
pub fn lagrangian_value(
    mesh: &SimplicialMesh,
    grid: &TimeGrid,
    eps: &ScalarField,
    e: &SpaceTimeField,
    lambda: &SpaceTimeField,
    g: &ObservationData,
    p: &NeumannData,
    reg: &RegularizationConfig,
    z: &CutoffFunction,
) -> Result<f64> {
    let f = tikhonov_value(mesh, grid, eps, e, g, reg, z)?;
    Ok(f + weak_form_d(mesh, grid, eps, e, lambda, p)?)
}

/// Derivative of the Lagrangian with respect to the nodal values of the
/// permittivity:
///
/// ```text
/// g_i = alpha <eps - eps0, psi_i> - <dE/dt . dlambda/dt, psi_i> + <(div lambda) E, grad(psi_i / eps)>
/// ```
///
/// Time integrals are exact and the spatial rule is the one used to assemble
/// the solver matrices, so with `E` and `lambda` solved for `eps` this is the
/// exact derivative of the discrete reduced functional.
pub fn grad_eps(
    mesh: &SimplicialMesh,
    eps: &ScalarField,
    e: &SpaceTimeField,
    lambda: &SpaceTimeField,
    reg: &RegularizationConfig,
) -> Result<Vec<f64>> {
    crate::pde::check_eps(mesh, eps)?;
    check_same_space(eps, &reg.eps0)?;
    let grid = *e.grid();
    e.check_compatible(mesh, &grid)?;
    lambda.check_compatible(mesh, &grid)?;
    debug_assert!(
        [e.coefficient(), lambda.coefficient()]
            .iter()
            .flatten()
            .all(|&f| f == eps.fingerprint()),
        "direct or adjoint field was solved for a different permittivity"
    );
    let d = mesh.dim();
    let q = eps.degree();
    let nv = d + 1;
    let tau = grid.tau;
    let m = scalar_mass(mesh, q);
    let diff: Vec<f64> = eps
        .values()
        .iter()
        .zip(reg.eps0.values())
        .map(|(a, b)| a - b)
        .collect();
    let mut grad = vec![0.0; diff.len()];
    m.mul_vec(&diff, &mut grad);
    for v in grad.iter_mut() {
        *v *= reg.alpha;
    }
    let qp = eps_quadrature(mesh, eps);
    let (mut phi, mut dphi) = (Vec::new(), Vec::new());
    let mut tt = vec![0.0; nv * nv];
    let mut w = vec![[0.0; 3]; nv];
    for c in 0..mesh.n_cells() {
        let verts = mesh.cell(c);
        // tt[v][u] = int dE/dt(v) . dlambda/dt(u) dt, w[v] = int div(lambda) E(v) dt
        tt.iter_mut().for_each(|x| *x = 0.0);
        w.iter_mut().for_each(|x| *x = [0.0; 3]);
        let divs: Vec<f64> = (0..=grid.n).map(|k| lambda.div(mesh, c, k)).collect();
        for k in 0..grid.n {
            for (a, &va) in verts.iter().enumerate() {
                let de = e.dt_value(k, va);
                let e0 = e.value(k, va);
                let e1 = e.value(k + 1, va);
                for (b, &vb) in verts.iter().enumerate() {
                    let dl = lambda.dt_value(k, vb);
                    tt[a * nv + b] += tau * (0..d).map(|i| de[i] * dl[i]).sum::<f64>();
                }
                let (l0, l1) = (divs[k], divs[k + 1]);
                for i in 0..d {
                    w[a][i] += tau
                        * (l0 * e0[i] / 3.0 + (l0 * e1[i] + l1 * e0[i]) / 6.0 + l1 * e1[i] / 3.0);
                }
            }
        }
        let dofs = cell_dofs(mesh, q, c);
        let gb = &mesh.geometry(c).grad_bary;
        for p in &qp[c] {
            basis_values(q, d, &p.b, &mut phi);
            basis_grads(q, d, &p.b, gb, &mut dphi);
            let mut a_val = 0.0;
            let mut wv = [0.0; 3];
            for a in 0..nv {
                for b in 0..nv {
                    a_val += p.b[a] * p.b[b] * tt[a * nv + b];
                }
                for i in 0..d {
                    wv[i] += p.b[a] * w[a][i];
                }
            }
            let w_dot_grad_eps: f64 = (0..d).map(|i| wv[i] * p.grad_eps[i]).sum();
            for (j, &node) in dofs.iter().enumerate() {
                let w_dot_dphi: f64 = (0..d).map(|i| wv[i] * dphi[j][i]).sum();
                grad[node] += p.w
                    * (-a_val * phi[j] + w_dot_dphi / p.eps
                        - phi[j] * w_dot_grad_eps / (p.eps * p.eps));
            }
        }
    }
    Ok(grad)
}

/// A fixed inverse problem: mesh, time grid, data, source, regularisation
/// and cut-off.
#[derive(Debug, Clone, Copy)]
pub struct InverseProblem<'a> {
    pub mesh: &'a SimplicialMesh,
    pub grid: TimeGrid,
    pub data: &'a ObservationData,
    pub source: &'a NeumannData,
    pub reg: &'a RegularizationConfig,
    pub cutoff: CutoffFunction,
}

/// Direct and adjoint solutions, functional value and gradient at one
/// permittivity.
#[derive(Debug, Clone)]
pub struct SolvedState {
    pub e: SpaceTimeField,
    pub lambda: SpaceTimeField,
    pub parts: TikhonovParts,
    pub gradient: Vec<f64>,
}

impl InverseProblem<'_> {
    /// `F(eps)` with `E` solved for `eps`, and that `E`.
    pub fn functional(&self, eps: &ScalarField) -> Result<(TikhonovParts, SpaceTimeField)> {
        let e = WaveSolver::new(self.mesh, &self.grid, eps)?.direct(self.source)?;
        let parts = tikhonov_parts(
            self.mesh,
            &self.grid,
            eps,
            &e,
            self.data,
            self.reg,
            &self.cutoff,
        )?;
        Ok((parts, e))
    }

    /// Solves both problems at `eps` and assembles the gradient.
    pub fn solve(&self, eps: &ScalarField) -> Result<SolvedState> {
        let solver = WaveSolver::new(self.mesh, &self.grid, eps)?;
        let e = solver.direct(self.source)?;
        let lambda = solver.adjoint(&e, self.data, &self.cutoff)?;
        let parts = tikhonov_parts(
            self.mesh,
            &self.grid,
            eps,
            &e,
            self.data,
            self.reg,
            &self.cutoff,
        )?;
        let gradient = grad_eps(self.mesh, eps, &e, &lambda, self.reg)?;
        Ok(SolvedState {
            e,
            lambda,
            parts,
            gradient,
        })
    }
}

#[cfg(test)]
mod tests;
