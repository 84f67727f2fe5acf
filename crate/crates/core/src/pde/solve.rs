//! Direct and adjoint time marching.
//!
//! With hat functions `psi_k` in time, the Galerkin system for a field that
//! is linear on every interval reduces to the three-level recursion
//!
//! ```text
//! (M/tau + tau S/6) E_{k+1} = b_k + M (2 E_k - E_{k-1}) / tau - tau S (4 E_k + E_{k-1}) / 6
//! ```
//!
//! with `S = K + C`, `E_0 = 0` and the first step `(M/tau + tau S/6) E_1 = b_0`.
//! The adjoint recursion runs backwards with `S` transposed.

use super::assembly::{adjoint_sources, assemble, boundary_loads, AssembledSystem};
use super::data::{NeumannData, ObservationData};
use crate::error::{Error, Result};
use crate::linalg::{BandedLu, CsrMatrix};
use crate::mesh::{SimplicialMesh, TimeGrid};
use crate::objective::CutoffFunction;
use crate::spaces::{FieldKind, ScalarField, SpaceTimeField};

/// Factorised time-step operators for one mesh, grid and permittivity.
pub struct WaveSolver<'a> {
    mesh: &'a SimplicialMesh,
    grid: TimeGrid,
    system: AssembledSystem,
    s: CsrMatrix,
    st: CsrMatrix,
    lu_direct: BandedLu,
    lu_adjoint: BandedLu,
    fingerprint: u64,
}

impl<'a> WaveSolver<'a> {
    pub fn new(mesh: &'a SimplicialMesh, grid: &TimeGrid, eps: &ScalarField) -> Result<Self> {
        let system = assemble(mesh, eps)?;
        let s = system.stiffness.combine(1.0, &system.coupling, 1.0);
        let st = s.transpose();
        let tau = grid.tau;
        let a_direct = system.mass.combine(1.0 / tau, &s, tau / 6.0);
        let a_adjoint = system.mass.combine(1.0 / tau, &st, tau / 6.0);
        let lu_direct = BandedLu::factor(&a_direct)
            .map_err(|e| Error::Solver(format!("direct time-step operator: {e}")))?;
        let lu_adjoint = BandedLu::factor(&a_adjoint)
            .map_err(|e| Error::Solver(format!("adjoint time-step operator: {e}")))?;
        Ok(WaveSolver {
            mesh,
            grid: *grid,
            system,
            s,
            st,
            lu_direct,
            lu_adjoint,
            fingerprint: eps.fingerprint(),
        })
    }

    pub fn system(&self) -> &AssembledSystem {
        &self.system
    }

    fn finite(u: &[f64], what: &str, k: usize) -> Result<()> {
        if u.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Solver(format!(
                "{what} solution not finite at time node {k}"
            )))
        }
    }

    /// Solves the direct problem for Neumann data `p`.
    pub fn direct(&self, p: &NeumannData) -> Result<SpaceTimeField> {
        p.check(self.mesh, &self.grid)?;
        let n = self.grid.n;
        let tau = self.grid.tau;
        let loads = boundary_loads(self.mesh, &self.grid, p);
        let mut e = SpaceTimeField::zeros(self.mesh, &self.grid, FieldKind::Direct);
        let ndof = self.system.ndof();
        let mut rhs = loads[0].clone();
        self.lu_direct.solve(&mut rhs);
        Self::finite(&rhs, "direct", 1)?;
        e.slice_mut(1).copy_from_slice(&rhs);
        let mut tmp = vec![0.0; ndof];
        for k in 1..n {
            let (ek, ekm) = (e.slice(k), e.slice(k - 1));
            rhs.copy_from_slice(&loads[k]);
            for i in 0..ndof {
                tmp[i] = (2.0 * ek[i] - ekm[i]) / tau;
            }
            self.system.mass.mul_vec_add(1.0, &tmp, &mut rhs);
            for i in 0..ndof {
                tmp[i] = 4.0 * ek[i] + ekm[i];
            }
            self.s.mul_vec_add(-tau / 6.0, &tmp, &mut rhs);
            self.lu_direct.solve(&mut rhs);
            Self::finite(&rhs, "direct", k + 1)?;
            e.slice_mut(k + 1).copy_from_slice(&rhs);
        }
        e.set_coefficient(self.fingerprint);
        Ok(e)
    }

    /// Solves the adjoint problem driven by the boundary misfit of `e`.
    pub fn adjoint(
        &self,
        e: &SpaceTimeField,
        g: &ObservationData,
        z: &CutoffFunction,
    ) -> Result<SpaceTimeField> {
        e.check_compatible(self.mesh, &self.grid)?;
        g.check_compatible(self.mesh, &self.grid)?;
        let n = self.grid.n;
        let tau = self.grid.tau;
        let src = adjoint_sources(self.mesh, &self.grid, e, g, z);
        let mut lam = SpaceTimeField::zeros(self.mesh, &self.grid, FieldKind::Adjoint);
        let ndof = self.system.ndof();
        let mut rhs: Vec<f64> = src[n].iter().map(|v| -v).collect();
        self.lu_adjoint.solve(&mut rhs);
        Self::finite(&rhs, "adjoint", n - 1)?;
        lam.slice_mut(n - 1).copy_from_slice(&rhs);
        let mut tmp = vec![0.0; ndof];
        for j in (1..n).rev() {
            let (lj, ljp) = (lam.slice(j), lam.slice(j + 1));
            for i in 0..ndof {
                rhs[i] = -src[j][i];
                tmp[i] = -(ljp[i] - 2.0 * lj[i]) / tau;
            }
            self.system.mass.mul_vec_add(1.0, &tmp, &mut rhs);
            for i in 0..ndof {
                tmp[i] = ljp[i] + 4.0 * lj[i];
            }
            self.st.mul_vec_add(-tau / 6.0, &tmp, &mut rhs);
            self.lu_adjoint.solve(&mut rhs);
            Self::finite(&rhs, "adjoint", j - 1)?;
            lam.slice_mut(j - 1).copy_from_slice(&rhs);
        }
        lam.set_coefficient(self.fingerprint);
        Ok(lam)
    }
}

/// Discrete direct problem: `E_h` in the direct space with the weak form
/// vanishing against every discrete adjoint-space test function.
pub fn direct_solve(
    mesh: &SimplicialMesh,
    grid: &TimeGrid,
    eps: &ScalarField,
    p: &NeumannData,
) -> Result<SpaceTimeField> {
    WaveSolver::new(mesh, grid, eps)?.direct(p)
}

/// Discrete adjoint problem, marched backwards from `t = T`.
pub fn adjoint_solve(
    mesh: &SimplicialMesh,
    grid: &TimeGrid,
    eps: &ScalarField,
    e: &SpaceTimeField,
    g: &ObservationData,
    z: &CutoffFunction,
) -> Result<SpaceTimeField> {
    WaveSolver::new(mesh, grid, eps)?.adjoint(e, g, z)
}
