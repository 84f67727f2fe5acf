//! The adaptive reconstruction loop: minimise, estimate, mark, refine.

use super::config::ExperimentConfig;
use super::synth::DataSource;
use crate::error::Result;
use crate::estimators::{estimate, mark_cells, ErrorBounds, Estimate, EstimatorInput};
use crate::mesh::{build_box_mesh, make_time_grid, refine_marked, SimplicialMesh, TimeGrid};
use crate::objective::{
    minimize, InverseProblem, IterationRecord, MinimizeStatus, PermittivityField,
    RegularizationConfig,
};
use crate::pde::ObservationData;
use crate::quadrature::{SimplexRule, CELL_DEGREE};
use crate::spaces::{transfer, ScalarField, SpaceTimeField};

/// One line of the per-cycle history.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleSummary {
    pub cycle: usize,
    pub n_cells: usize,
    pub n_vertices: usize,
    pub n_steps: usize,
    pub iterations: usize,
    pub status: MinimizeStatus,
    pub functional: f64,
    pub bounds: ErrorBounds,
    /// Cells marked for refinement after this cycle.
    pub marked: usize,
}

/// Everything known at the end of one adaptive cycle, on one mesh and grid.
#[derive(Debug, Clone)]
pub struct ReconstructionState {
    pub cycle: usize,
    pub mesh: SimplicialMesh,
    pub grid: TimeGrid,
    pub data: ObservationData,
    pub eps: PermittivityField,
    pub e: SpaceTimeField,
    pub lambda: SpaceTimeField,
    pub estimate: Estimate,
    pub optimizer_log: Vec<IterationRecord>,
    pub status: MinimizeStatus,
    pub history: Vec<CycleSummary>,
}

/// Time grid for a refined mesh: the step count grows so that
/// `tau <= cfl * h_min`, and never shrinks.
pub fn adapted_time_grid(
    cfg: &ExperimentConfig,
    grid: &TimeGrid,
    mesh: &SimplicialMesh,
) -> Result<TimeGrid> {
    let cfl = cfg.time.cfl;
    let mut n = grid.n;
    if cfl > 0.0 {
        let needed = (grid.t_final / (cfl * mesh.h_min())).ceil() as usize;
        n = n.max(needed);
    }
    make_time_grid(grid.t_final, n, mesh.h_min(), cfg.regularization.eps_max)
}

/// `||eps - eps_true|| / ||eps_true||` in L2 over the domain, with the
/// configured target evaluated exactly at quadrature points.
pub fn relative_l2_error(
    cfg: &ExperimentConfig,
    mesh: &SimplicialMesh,
    eps: &ScalarField,
) -> Result<f64> {
    eps.check_mesh(mesh)?;
    let rule = SimplexRule::new(mesh.dim(), CELL_DEGREE + 2);
    let (mut num, mut den) = (0.0, 0.0);
    for c in 0..mesh.n_cells() {
        let vol = mesh.geometry(c).volume;
        for (b, w) in rule.points.iter().zip(&rule.weights) {
            let t = cfg.target_value(&mesh.point(c, b));
            let e = eps.eval(mesh, c, b);
            num += w * vol * (e - t).powi(2);
            den += w * vol * t * t;
        }
    }
    Ok((num / den).sqrt())
}

/// The initial mesh and time grid of a configuration.
pub fn initial_discretization(cfg: &ExperimentConfig) -> Result<(SimplicialMesh, TimeGrid)> {
    let mesh = build_box_mesh(cfg.box_domain()?, &cfg.domain.resolution)?;
    let grid = make_time_grid(
        cfg.time.t_final,
        cfg.time.steps,
        mesh.h_min(),
        cfg.regularization.eps_max,
    )?;
    Ok((mesh, grid))
}

/// Runs up to `adaptivity.max_cycles` cycles and returns the final state.
/// `on_cycle` sees every intermediate state (for export). The loop stops
/// early when the indicator total drops below `adaptivity.indicator_tol`,
/// nothing is marked, or the line search fails.
pub fn reconstruct_adaptive(
    cfg: &ExperimentConfig,
    mut on_cycle: impl FnMut(&ReconstructionState) -> Result<()>,
) -> Result<ReconstructionState> {
    let (mut mesh, mut grid) = initial_discretization(cfg)?;
    let source = DataSource::new(cfg, &mesh, &grid)?;
    let q = cfg.regularization.degree;
    let eps_max = cfg.regularization.eps_max;
    let neumann = cfg.neumann();
    let cutoff = cfg.cutoff()?;
    let opts = cfg.minimize_options();
    let mut start = PermittivityField::one(&mesh, q, eps_max)?.into_field();
    let mut history = Vec::new();
    let mut cycle = 0;
    loop {
        let data = source.observations(&mesh, &grid)?;
        let reg = RegularizationConfig::new(
            cfg.regularization.alpha,
            PermittivityField::one(&mesh, q, eps_max)?,
        )?;
        let problem = InverseProblem {
            mesh: &mesh,
            grid,
            data: &data,
            source: &neumann,
            reg: &reg,
            cutoff,
        };
        let out = minimize(&problem, &start, eps_max, &opts)?;
        let est = estimate(&EstimatorInput {
            mesh: &mesh,
            eps: &out.eps,
            eps0: &reg.eps0,
            alpha: reg.alpha,
            e: &out.state.e,
            lambda: &out.state.lambda,
            data: &data,
            source: &neumann,
            cutoff,
        })?;
        let last = cycle + 1 >= cfg.adaptivity.max_cycles
            || est.bounds.lagrangian < cfg.adaptivity.indicator_tol
            || out.status == MinimizeStatus::LineSearchFailed;
        let marked = if last {
            Default::default()
        } else {
            mark_cells(&est.indicators, cfg.adaptivity.fraction)?
        };
        history.push(CycleSummary {
            cycle,
            n_cells: mesh.n_cells(),
            n_vertices: mesh.n_vertices(),
            n_steps: grid.n,
            iterations: out.log.len() - 1,
            status: out.status,
            functional: out.state.parts.total(),
            bounds: est.bounds,
            marked: marked.len(),
        });
        log::info!(
            "cycle {cycle}: {} cells, {} steps, F = {:.6e}, indicator total = {:.6e}",
            mesh.n_cells(),
            grid.n,
            out.state.parts.total(),
            est.bounds.lagrangian
        );
        let state = ReconstructionState {
            cycle,
            mesh,
            grid,
            data,
            eps: out.eps,
            e: out.state.e,
            lambda: out.state.lambda,
            estimate: est,
            optimizer_log: out.log,
            status: out.status,
            history: history.clone(),
        };
        on_cycle(&state)?;
        if last || marked.is_empty() {
            return Ok(state);
        }
        let fine = refine_marked(&state.mesh, &marked);
        start = transfer(&state.mesh, &state.eps, &fine)?;
        grid = adapted_time_grid(cfg, &state.grid, &fine)?;
        mesh = fine;
        cycle += 1;
    }
}
