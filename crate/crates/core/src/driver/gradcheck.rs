//! Adjoint gradient versus central finite differences of the functional.

use super::adaptive::initial_discretization;
use super::config::ExperimentConfig;
use super::synth::{generate_synthetic_data, target_permittivity};
use crate::error::{Error, Result};
use crate::objective::{collar_nodes, InverseProblem, PermittivityField, RegularizationConfig};
use crate::pde::ObservationData;
use crate::spaces::ScalarField;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Comparison along one direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionCheck {
    pub adjoint: f64,
    pub finite_difference: f64,
    pub rel_error: f64,
    /// The directional derivative is below what the step can resolve
    /// against the curvature, so the relative error is meaningless.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub step: f64,
    pub functional: f64,
    pub checks: Vec<DirectionCheck>,
}

impl GradCheckReport {
    /// Largest relative error over nondegenerate directions.
    pub fn max_rel_error(&self) -> f64 {
        self.checks
            .iter()
            .filter(|c| !c.degenerate)
            .fold(0.0, |a, c| a.max(c.rel_error))
    }

    pub fn n_degenerate(&self) -> usize {
        self.checks.iter().filter(|c| c.degenerate).count()
    }
}

/// Random directions with entries uniform in `[-1, 1]` on nodes off the
/// boundary collar and zero on it.
pub fn random_interior_directions(collar: &[bool], count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            collar
                .iter()
                .map(|&c| {
                    let v: f64 = rng.random_range(-1.0..=1.0);
                    if c {
                        0.0
                    } else {
                        v
                    }
                })
                .collect()
        })
        .collect()
}

/// Compares `g . d` with `(F(eps + s d) - F(eps - s d)) / (2 s)` for each
/// direction. A direction is flagged degenerate when both derivatives are
/// at most `s |F(+) - 2 F(0) + F(-)| / s^2`.
pub fn gradient_check(
    problem: &InverseProblem<'_>,
    eps: &ScalarField,
    directions: &[Vec<f64>],
    step: f64,
) -> Result<GradCheckReport> {
    if !(step > 0.0) {
        return Err(Error::Usage(format!(
            "finite-difference step must be positive, got {step}"
        )));
    }
    let st = problem.solve(eps)?;
    let f0 = st.parts.total();
    let mut checks = Vec::with_capacity(directions.len());
    for d in directions {
        if d.len() != eps.values().len() {
            return Err(Error::Usage(format!(
                "direction has {} entries, field has {}",
                d.len(),
                eps.values().len()
            )));
        }
        let shifted = |sign: f64| -> Result<f64> {
            let v: Vec<f64> = eps
                .values()
                .iter()
                .zip(d)
                .map(|(e, di)| e + sign * step * di)
                .collect();
            Ok(problem.functional(&eps.with_values(v))?.0.total())
        };
        let (fp, fm) = (shifted(1.0)?, shifted(-1.0)?);
        let fd = (fp - fm) / (2.0 * step);
        let ad: f64 = st.gradient.iter().zip(d).map(|(g, di)| g * di).sum();
        let curvature = (fp - 2.0 * f0 + fm).abs() / (step * step);
        let degenerate = ad.abs().max(fd.abs()) <= step * curvature;
        let rel_error = if fd != 0.0 {
            (ad - fd).abs() / fd.abs()
        } else if ad == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        checks.push(DirectionCheck {
            adjoint: ad,
            finite_difference: fd,
            rel_error,
            degenerate,
        });
    }
    Ok(GradCheckReport {
        step,
        functional: f0,
        checks,
    })
}

/// Where the configured gradient check is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckPoint {
    /// The reference permittivity, identically one.
    Reference,
    /// Halfway between the reference and the configured target.
    Midpoint,
}

/// Gradient check on the initial discretisation of a configuration, with
/// synthetic data.
pub fn gradient_check_cmd(
    cfg: &ExperimentConfig,
    at: CheckPoint,
    n_directions: usize,
    step: f64,
) -> Result<GradCheckReport> {
    let (mesh, grid) = initial_discretization(cfg)?;
    let data: ObservationData = match &cfg.data.observations {
        Some(path) => ObservationData::read_csv(path, &mesh, &grid)?,
        None => generate_synthetic_data(cfg, &mesh, &grid)?,
    };
    let q = cfg.regularization.degree;
    let eps_max = cfg.regularization.eps_max;
    let reg = RegularizationConfig::new(
        cfg.regularization.alpha,
        PermittivityField::one(&mesh, q, eps_max)?,
    )?;
    let source = cfg.neumann();
    let problem = InverseProblem {
        mesh: &mesh,
        grid,
        data: &data,
        source: &source,
        reg: &reg,
        cutoff: cfg.cutoff()?,
    };
    let eps = match at {
        CheckPoint::Reference => ScalarField::constant(&mesh, q, 1.0)?,
        CheckPoint::Midpoint => {
            let t = target_permittivity(cfg, &mesh)?;
            t.with_values(t.values().iter().map(|v| 0.5 * (1.0 + v)).collect())
        }
    };
    let dirs = random_interior_directions(&collar_nodes(&mesh, q), n_directions, cfg.data.seed);
    gradient_check(&problem, &eps, &dirs, step)
}
