//! Synthetic observations on a finer discretisation, and the data source of
//! a reconstruction.

use super::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::mesh::{build_box_mesh, SimplicialMesh, TimeGrid};
use crate::objective::{collar_nodes, PermittivityField};
use crate::pde::{direct_solve, ObservationData};
use crate::spaces::interpolate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Largest deviation from one tolerated at collar nodes before the target is
/// rejected as inadmissible.
pub const COLLAR_TOLERANCE: f64 = 1e-3;

/// The configured true permittivity on `mesh`. The target must already be
/// (numerically) one on the boundary collar; it is then set exactly to one
/// there.
pub fn target_permittivity(
    cfg: &ExperimentConfig,
    mesh: &SimplicialMesh,
) -> Result<PermittivityField> {
    let q = cfg.regularization.degree;
    let mut field = interpolate(mesh, q, |x| cfg.target_value(x))?;
    let collar = collar_nodes(mesh, q);
    for (v, &c) in field.values_mut().iter_mut().zip(&collar) {
        if c {
            if (*v - 1.0).abs() > COLLAR_TOLERANCE {
                return Err(Error::Config(format!(
                    "target permittivity is {v} on the boundary collar, must be 1"
                )));
            }
            *v = 1.0;
        }
    }
    PermittivityField::new(mesh, field, cfg.regularization.eps_max)
}

/// The clean boundary trace of the direct solution for the target, computed
/// on the synthesis mesh and grid.
#[derive(Debug, Clone)]
pub struct FineTrace {
    pub mesh: SimplicialMesh,
    pub grid: TimeGrid,
    pub trace: ObservationData,
}

/// Solves the direct problem for the target on a mesh and grid refined by
/// `data.fine_factor`. The target is also checked on the reconstruction
/// mesh, whose collar is wider.
pub fn synthesize_fine_trace(cfg: &ExperimentConfig) -> Result<FineTrace> {
    let dom = cfg.box_domain()?;
    let coarse = build_box_mesh(dom, &cfg.domain.resolution)?;
    target_permittivity(cfg, &coarse)?;
    let f = cfg.data.fine_factor;
    let res: Vec<usize> = cfg.domain.resolution.iter().map(|r| r * f).collect();
    let mesh = build_box_mesh(dom, &res)?;
    let grid = TimeGrid::new(cfg.time.t_final, cfg.time.steps * f)?;
    let eps = target_permittivity(cfg, &mesh)?;
    let e = direct_solve(&mesh, &grid, &eps, &cfg.neumann())?;
    let trace = ObservationData::trace_of(&mesh, &e)?;
    Ok(FineTrace { mesh, grid, trace })
}

/// Adds `sigma * rms(G) * N(0, 1)` to every value, from a seeded stream.
pub fn add_noise(g: &mut ObservationData, sigma: f64, seed: u64) {
    if sigma == 0.0 {
        return;
    }
    let scale = sigma * g.rms();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in g.values_mut() {
        let n: f64 = StandardNormal.sample(&mut rng);
        *v += scale * n;
    }
}

/// The fine trace transferred to the boundary layout of `mesh` and `grid`,
/// with noise.
pub fn observations_on(
    fine: &FineTrace,
    mesh: &SimplicialMesh,
    grid: &TimeGrid,
    sigma: f64,
    seed: u64,
) -> Result<ObservationData> {
    let mut g = fine.trace.resample(mesh, grid)?;
    add_noise(&mut g, sigma, seed);
    Ok(g)
}

/// Synthetic observations for the reconstruction discretisation.
pub fn generate_synthetic_data(
    cfg: &ExperimentConfig,
    mesh: &SimplicialMesh,
    grid: &TimeGrid,
) -> Result<ObservationData> {
    let fine = synthesize_fine_trace(cfg)?;
    observations_on(&fine, mesh, grid, cfg.data.noise, cfg.data.seed)
}

/// Where a reconstruction takes its data from.
#[derive(Debug, Clone)]
pub enum DataSource {
    Synthetic {
        fine: Box<FineTrace>,
        noise: f64,
        seed: u64,
    },
    /// A table read for the initial mesh and grid.
    Table(ObservationData),
}

impl DataSource {
    pub fn new(cfg: &ExperimentConfig, mesh: &SimplicialMesh, grid: &TimeGrid) -> Result<Self> {
        match &cfg.data.observations {
            Some(path) => Ok(DataSource::Table(ObservationData::read_csv(
                path, mesh, grid,
            )?)),
            None => Ok(DataSource::Synthetic {
                fine: Box::new(synthesize_fine_trace(cfg)?),
                noise: cfg.data.noise,
                seed: cfg.data.seed,
            }),
        }
    }

    /// Observations on `mesh` and `grid`. Synthetic noise is regenerated
    /// from the same seed for every discretisation.
    pub fn observations(&self, mesh: &SimplicialMesh, grid: &TimeGrid) -> Result<ObservationData> {
        match self {
            DataSource::Synthetic { fine, noise, seed } => {
                observations_on(fine, mesh, grid, *noise, *seed)
            }
            DataSource::Table(t) => {
                if t.check_compatible(mesh, grid).is_ok() {
                    Ok(t.clone())
                } else {
                    t.resample(mesh, grid)
                }
            }
        }
    }
}
