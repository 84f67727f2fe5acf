//! Projected Polak-Ribiere conjugate gradients with Armijo backtracking.

use super::{project_admissible, InverseProblem, PermittivityField, SolvedState};
use crate::error::{Error, Result};
use crate::spaces::{scalar_mass, ScalarField};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimizeOptions {
    pub max_iterations: usize,
    /// Stop when the projected gradient norm falls below `tol` times its
    /// initial value.
    pub tol: f64,
    /// Sufficient-decrease constant of the Armijo rule.
    pub armijo: f64,
    pub max_backtracks: usize,
    /// Largest nodal change of the very first trial step.
    pub initial_change: f64,
    /// Restart with steepest descent every this many iterations (0: never).
    pub restart_every: usize,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        MinimizeOptions {
            max_iterations: 50,
            tol: 1e-6,
            armijo: 1e-4,
            max_backtracks: 20,
            initial_change: 0.5,
            restart_every: 10,
        }
    }
}

impl MinimizeOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol >= 0.0) {
            return Err(Error::Config(format!(
                "tolerance must be nonnegative, got {}",
                self.tol
            )));
        }
        if !(self.armijo > 0.0 && self.armijo < 1.0) {
            return Err(Error::Config(format!(
                "Armijo constant must lie in (0, 1), got {}",
                self.armijo
            )));
        }
        if !(self.initial_change > 0.0) {
            return Err(Error::Config(format!(
                "initial change must be positive, got {}",
                self.initial_change
            )));
        }
        Ok(())
    }
}

/// One line of the optimiser log. Iteration 0 is the starting point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub f: f64,
    pub misfit: f64,
    pub regularization: f64,
    pub grad_norm: f64,
    pub step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MinimizeStatus {
    Converged,
    MaxIterations,
    LineSearchFailed,
}

#[derive(Debug, Clone)]
pub struct MinimizeOutcome {
    pub eps: PermittivityField,
    pub state: SolvedState,
    pub log: Vec<IterationRecord>,
    pub status: MinimizeStatus,
}

/// Weighted norm `sqrt(sum m_i v_i^2)`.
fn mnorm(m: &[f64], v: &[f64]) -> f64 {
    m.iter().zip(v).map(|(a, b)| a * b * b).sum::<f64>().sqrt()
}

fn mdot(m: &[f64], a: &[f64], b: &[f64]) -> f64 {
    m.iter().zip(a).zip(b).map(|((w, x), y)| w * x * y).sum()
}

/// Riesz representative of the gradient under the lumped-diagonal metric,
/// zeroed on fixed nodes and on bound-active nodes whose descent direction
/// points out of the box.
fn projected_gradient(eps: &PermittivityField, grad: &[f64], mdiag: &[f64]) -> Vec<f64> {
    let vals = eps.values();
    let hi = eps.eps_max();
    grad.iter()
        .enumerate()
        .map(|(i, &g)| {
            if eps.collar()[i] {
                return 0.0;
            }
            let r = g / mdiag[i];
            let blocked = (vals[i] <= 1.0 && r > 0.0) || (vals[i] >= hi && r < 0.0);
            if blocked {
                0.0
            } else {
                r
            }
        })
        .collect()
}

fn record(iteration: usize, st: &SolvedState, grad_norm: f64, step: f64) -> IterationRecord {
    IterationRecord {
        iteration,
        f: st.parts.total(),
        misfit: st.parts.misfit,
        regularization: st.parts.regularization,
        grad_norm,
        step,
    }
}

/// Minimises the Tikhonov functional over admissible permittivities,
/// starting from the projection of `start`. Every accepted step does not
/// increase the functional; a failed line search returns the current
/// iterate with [`MinimizeStatus::LineSearchFailed`].
pub fn minimize(
    problem: &InverseProblem<'_>,
    start: &ScalarField,
    eps_max: f64,
    opts: &MinimizeOptions,
) -> Result<MinimizeOutcome> {
    opts.validate()?;
    let collar = super::collar_nodes(problem.mesh, start.degree());
    let mut eps = project_admissible(start, eps_max, &collar)?;
    let mass = scalar_mass(problem.mesh, eps.degree());
    let mdiag: Vec<f64> = (0..mass.n).map(|i| mass.get(i, i)).collect();
    let mut st = problem.solve(&eps)?;
    let mut pg = projected_gradient(&eps, &st.gradient, &mdiag);
    let g0 = mnorm(&mdiag, &pg);
    let mut log = vec![record(0, &st, g0, 0.0)];
    log::info!(
        "iteration 0: F = {:.6e}, |g| = {:.3e}",
        st.parts.total(),
        g0
    );
    if g0 == 0.0 {
        return Ok(MinimizeOutcome {
            eps,
            state: st,
            log,
            status: MinimizeStatus::Converged,
        });
    }
    let mut dir: Vec<f64> = pg.iter().map(|v| -v).collect();
    let max_dir = dir.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let mut step = opts.initial_change / max_dir;
    let mut status = MinimizeStatus::MaxIterations;
    for it in 1..=opts.max_iterations {
        let f0 = st.parts.total();
        let mut accepted = None;
        let mut s = step;
        for _ in 0..=opts.max_backtracks {
            let trial: Vec<f64> = eps
                .values()
                .iter()
                .zip(&dir)
                .map(|(e, d)| e + s * d)
                .collect();
            let cand = project_admissible(&eps.with_values(trial), eps_max, &collar)?;
            let slope: f64 = cand
                .values()
                .iter()
                .zip(eps.values())
                .zip(&st.gradient)
                .map(|((a, b), g)| (a - b) * g)
                .sum();
            if cand.values() == eps.values() {
                break;
            }
            let (parts, _) = problem.functional(&cand)?;
            if parts.total() <= f0 + opts.armijo * slope.min(0.0) {
                accepted = Some(cand);
                break;
            }
            s *= 0.5;
        }
        let Some(cand) = accepted else {
            log::warn!("line search failed at iteration {it}");
            status = MinimizeStatus::LineSearchFailed;
            break;
        };
        eps = cand;
        st = problem.solve(&eps)?;
        let pg_new = projected_gradient(&eps, &st.gradient, &mdiag);
        let gn = mnorm(&mdiag, &pg_new);
        log.push(record(it, &st, gn, s));
        log::info!(
            "iteration {it}: F = {:.6e}, |g| = {:.3e}, step = {:.3e}",
            st.parts.total(),
            gn,
            s
        );
        if gn <= opts.tol * g0 {
            status = MinimizeStatus::Converged;
            break;
        }
        let restart = opts.restart_every > 0 && it % opts.restart_every == 0;
        let num: f64 = mdot(&mdiag, &pg_new, &pg_new) - mdot(&mdiag, &pg_new, &pg);
        let beta = if restart {
            0.0
        } else {
            (num / mdot(&mdiag, &pg, &pg)).max(0.0)
        };
        for i in 0..dir.len() {
            dir[i] = if eps.collar()[i] {
                0.0
            } else {
                -pg_new[i] + beta * dir[i]
            };
        }
        // the conjugate direction must still descend
        if mdot(&mdiag, &dir, &pg_new) >= 0.0 {
            dir = pg_new.iter().map(|v| -v).collect();
        }
        pg = pg_new;
        step = 2.0 * s;
    }
    Ok(MinimizeOutcome {
        eps,
        state: st,
        log,
        status,
    })
}
