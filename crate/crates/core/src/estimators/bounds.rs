//! Indicator totals, composite bounds and bulk marking.

use super::{
    cell_jump, field_at, nodal_jump_at, residual_fields, CellDerivatives, EstimatorInput,
    EstimatorQuadrature, FieldJumps, ResidualFields,
};
use crate::error::{Error, Result};
use crate::mesh::{mesh_size_field, SimplicialMesh};
use crate::spaces::ScalarField;
use std::collections::BTreeSet;

/// Nonnegative per-cell contributions to the Lagrangian estimate, summed
/// over time intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorField {
    pub values: Vec<f64>,
}

impl IndicatorField {
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Constant-free error indicators and their components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorBounds {
    pub lagrangian: f64,
    pub coefficient: f64,
    pub tikhonov: f64,
    pub c_eps: f64,
    pub eta: f64,
    pub r_eps_norm: f64,
    /// Always true: every bound is evaluated with unit constants.
    pub constant_free: bool,
}

/// `sum_a |r_a| w_a`.
fn pair(r: &[f64], w: &[f64; 3]) -> f64 {
    r.iter().zip(w).map(|(r, w)| r.abs() * w).sum()
}

fn norm3(v: &[f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Per-cell weights `tau |[du/dt]| + h |[du/d nu]|` at one space-time point.
#[allow(clippy::too_many_arguments)]
fn jump_weight(
    mesh: &SimplicialMesh,
    dt: &crate::spaces::JumpField,
    normal: &crate::spaces::JumpField,
    c: usize,
    b: &[f64; 4],
    k: usize,
    tau: f64,
    h: f64,
) -> [f64; 3] {
    let jt = nodal_jump_at(mesh, dt, c, b, k);
    let js = cell_jump(normal, c);
    [
        tau * jt[0] + h * js[0],
        tau * jt[1] + h * js[1],
        tau * jt[2] + h * js[2],
    ]
}

/// Total of the Lagrangian estimate and its per-cell indicators. Boundary
/// terms are attributed to the cell owning the boundary face.
pub fn lagrangian_error_estimate(
    input: &EstimatorInput<'_>,
    jumps: &FieldJumps,
    residuals: &ResidualFields,
    quad: &EstimatorQuadrature,
) -> (f64, IndicatorField) {
    let mesh = input.mesh;
    let grid = input.grid();
    let tau = grid.tau;
    let nt = quad.n_time();
    let h = mesh_size_field(mesh).0;
    let mut ind = vec![0.0; mesh.n_cells()];
    for (c, v) in ind.iter_mut().enumerate() {
        let r: f64 = residuals.eps.values[c]
            .iter()
            .zip(&residuals.eps.weights[c])
            .map(|(r, w)| w * r.abs())
            .sum();
        *v += h[c] * jumps.eps_normal.get(0, c)[0] * r;
    }
    let vol: Vec<f64> = (0..mesh.n_cells())
        .map(|c| mesh.geometry(c).volume)
        .collect();
    for c in 0..mesh.n_cells() {
        for k in 0..grid.n {
            for it in 0..nt {
                let wt = tau * quad.time_weights[it];
                let (en, ln) = (
                    &jumps.e_normal[k * nt + it],
                    &jumps.lambda_normal[k * nt + it],
                );
                for (is, (b, ws)) in quad.cell.points.iter().zip(&quad.cell.weights).enumerate() {
                    let w = wt * ws * vol[c];
                    let we = jump_weight(mesh, &jumps.e_dt, en, c, b, k, tau, h[c]);
                    let wl = jump_weight(mesh, &jumps.lambda_dt, ln, c, b, k, tau, h[c]);
                    ind[c] += w * pair(residuals.lambda_omega.get(c, k, it, is), &we);
                    ind[c] += w * pair(residuals.e_omega.get(c, k, it, is), &wl);
                }
            }
        }
    }
    for (i, bf) in quad.boundary.iter().enumerate() {
        let c = bf.cell;
        for k in 0..grid.n {
            for it in 0..nt {
                let wt = tau * quad.time_weights[it];
                let (en, ln) = (
                    &jumps.e_normal[k * nt + it],
                    &jumps.lambda_normal[k * nt + it],
                );
                for (is, (b, ws)) in bf.cell_bary.iter().zip(&bf.weights).enumerate() {
                    let w = wt * ws;
                    let we = jump_weight(mesh, &jumps.e_dt, en, c, b, k, tau, h[c]);
                    let wl = jump_weight(mesh, &jumps.lambda_dt, ln, c, b, k, tau, h[c]);
                    ind[c] += w * pair(residuals.lambda_gamma.get(i, k, it, is), &we);
                    ind[c] += w * pair(residuals.e_gamma.get(i, k, it, is), &wl);
                }
            }
        }
    }
    let field = IndicatorField { values: ind };
    (field.total(), field)
}

/// The stability quantity `eta` of the coefficient estimate.
pub fn stability_eta(
    input: &EstimatorInput<'_>,
    jumps: &FieldJumps,
    quad: &EstimatorQuadrature,
) -> f64 {
    let mesh = input.mesh;
    let grid = input.grid();
    let tau = grid.tau;
    let nt = quad.n_time();
    let h = mesh_size_field(mesh).0;
    let dl = CellDerivatives::new(mesh, input.lambda);
    let mut eta = 0.0;
    for c in 0..mesh.n_cells() {
        let vol = mesh.geometry(c).volume;
        for k in 0..grid.n {
            let jt_div = jumps.div_lambda_dt.get(k, c)[0];
            for (it, &theta) in quad.time_points.iter().enumerate() {
                let wt = tau * quad.time_weights[it];
                let (en, ln) = (
                    &jumps.e_normal[k * nt + it],
                    &jumps.lambda_normal[k * nt + it],
                );
                let div = dl.div_at(c, k, theta).abs();
                let jsl = cell_jump(ln, c);
                for (b, ws) in quad.cell.points.iter().zip(&quad.cell.weights) {
                    let w = wt * ws * vol;
                    let jte = nodal_jump_at(mesh, &jumps.e_dt, c, b, k);
                    let jtl = nodal_jump_at(mesh, &jumps.lambda_dt, c, b, k);
                    let we = jump_weight(mesh, &jumps.e_dt, en, c, b, k, tau, h[c]);
                    let wl = jump_weight(mesh, &jumps.lambda_dt, ln, c, b, k, tau, h[c]);
                    let ev = field_at(mesh, input.e, c, b, k, theta);
                    let abs_e = [ev[0].abs(), ev[1].abs(), ev[2].abs()];
                    let first =
                        (0..3).map(|a| jtl[a] / tau * we[a]).sum::<f64>() + div * norm3(&we);
                    let second: f64 = (0..3).map(|a| jte[a] / tau * wl[a]).sum();
                    let third = (0..3).map(|a| abs_e[a] * jsl[a]).sum::<f64>()
                        + norm3(&abs_e) * tau * jt_div;
                    eta += w * (first + second + third);
                }
            }
        }
    }
    eta
}

/// `max(1, max |grad eps|)`: cellwise for degree 1, sampled at the cell
/// vertices for degree 2.
pub fn c_eps(mesh: &SimplicialMesh, eps: &ScalarField) -> f64 {
    let d = mesh.dim();
    let mut m: f64 = 1.0;
    for c in 0..mesh.n_cells() {
        let samples = if eps.degree() == 1 { 1 } else { d + 1 };
        for v in 0..samples {
            let mut b = [0.0; 4];
            if eps.degree() == 1 {
                b[..=d].iter_mut().for_each(|x| *x = 1.0 / (d + 1) as f64);
            } else {
                b[v] = 1.0;
            }
            m = m.max(norm3(&eps.grad(mesh, c, &b)));
        }
    }
    m
}

/// `c_eps eta + ||R_eps||`.
pub fn coefficient_error_bound(c_eps: f64, eta: f64, r_eps_norm: f64) -> f64 {
    c_eps * eta + r_eps_norm
}

/// `c_eps^2 eta^2 + ||R_eps||^2`.
pub fn tikhonov_error_bound(c_eps: f64, eta: f64, r_eps_norm: f64) -> f64 {
    (c_eps * eta).powi(2) + r_eps_norm.powi(2)
}

/// Assembles all bounds from precomputed parts.
pub fn error_bounds(
    input: &EstimatorInput<'_>,
    jumps: &FieldJumps,
    residuals: &ResidualFields,
    quad: &EstimatorQuadrature,
    lagrangian: f64,
) -> ErrorBounds {
    let ce = c_eps(input.mesh, input.eps);
    let eta = stability_eta(input, jumps, quad);
    let rn = residuals.eps.norm();
    ErrorBounds {
        lagrangian,
        coefficient: coefficient_error_bound(ce, eta, rn),
        tikhonov: tikhonov_error_bound(ce, eta, rn),
        c_eps: ce,
        eta,
        r_eps_norm: rn,
        constant_free: true,
    }
}

/// Everything the estimator module computes for one discrete triple.
#[derive(Debug, Clone)]
pub struct Estimate {
    pub jumps: FieldJumps,
    pub residuals: ResidualFields,
    pub indicators: IndicatorField,
    pub bounds: ErrorBounds,
}

pub fn estimate(input: &EstimatorInput<'_>) -> Result<Estimate> {
    let jumps = FieldJumps::new(input)?;
    let quad = EstimatorQuadrature::new(input.mesh);
    let residuals = residual_fields(input, &jumps, &quad);
    let (total, indicators) = lagrangian_error_estimate(input, &jumps, &residuals, &quad);
    let bounds = error_bounds(input, &jumps, &residuals, &quad, total);
    Ok(Estimate {
        jumps,
        residuals,
        indicators,
        bounds,
    })
}

/// Bulk marking: the smallest set of cells, taken in descending indicator
/// order with ties broken by cell index, whose indicator sum reaches
/// `fraction` of the total. Cells with zero indicator are never marked.
pub fn mark_cells(indicators: &IndicatorField, fraction: f64) -> Result<BTreeSet<usize>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Config(format!(
            "marking fraction must lie in (0, 1], got {fraction}"
        )));
    }
    if indicators
        .values
        .iter()
        .any(|v| !(*v >= 0.0) || !v.is_finite())
    {
        return Err(Error::Usage(
            "indicators must be finite and nonnegative".into(),
        ));
    }
    let mut order: Vec<usize> = (0..indicators.values.len())
        .filter(|&c| indicators.values[c] > 0.0)
        .collect();
    order.sort_by(|&a, &b| {
        indicators.values[b]
            .total_cmp(&indicators.values[a])
            .then(a.cmp(&b))
    });
    if fraction == 1.0 {
        return Ok(order.into_iter().collect());
    }
    let target = fraction * indicators.total();
    let mut acc = 0.0;
    let mut marked = BTreeSet::new();
    for c in order {
        if acc >= target {
            break;
        }
        acc += indicators.values[c];
        marked.insert(c);
    }
    Ok(marked)
}
