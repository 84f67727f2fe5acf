//! VTK and CSV output of a reconstruction state.

use super::adaptive::{CycleSummary, ReconstructionState};
use super::vtk::{num, VtkDataset};
use crate::error::{Error, Result};
use crate::estimators::{EstimatorQuadrature, SpaceTimeResidual};
use crate::mesh::{SimplicialMesh, TimeGrid};
use crate::objective::{IterationRecord, MinimizeStatus};
use crate::spaces::SpaceTimeField;
use std::path::{Path, PathBuf};

/// One manifest row: a file and the quantities it holds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub file: String,
    pub format: &'static str,
    pub quantities: String,
}

/// Files written by [`export_state`], relative to the export directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub dir: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

pub const MANIFEST_FILE: &str = "manifest.csv";

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::Usage(format!("writing {}: {e}", path.display()))
}

fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(header).map_err(csv_err(path))?;
    for r in rows {
        w.write_record(r).map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn status_name(s: MinimizeStatus) -> &'static str {
    match s {
        MinimizeStatus::Converged => "converged",
        MinimizeStatus::MaxIterations => "max_iterations",
        MinimizeStatus::LineSearchFailed => "line_search_failed",
    }
}

pub const OPTIMIZER_HEADER: [&str; 6] = [
    "iteration",
    "F",
    "misfit",
    "regularization",
    "gradient_norm",
    "step",
];

pub fn write_optimizer_log(path: &Path, log: &[IterationRecord]) -> Result<()> {
    let rows: Vec<Vec<String>> = log
        .iter()
        .map(|r| {
            vec![
                r.iteration.to_string(),
                num(r.f),
                num(r.misfit),
                num(r.regularization),
                num(r.grad_norm),
                num(r.step),
            ]
        })
        .collect();
    write_table(path, &OPTIMIZER_HEADER, &rows)
}

pub const ESTIMATES_HEADER: [&str; 14] = [
    "cycle",
    "cells",
    "vertices",
    "steps",
    "iterations",
    "status",
    "F",
    "lagrangian_estimate",
    "coefficient_bound",
    "tikhonov_bound",
    "c_eps",
    "eta",
    "r_eps_norm",
    "marked",
];

pub fn write_estimates_log(path: &Path, history: &[CycleSummary]) -> Result<()> {
    let rows: Vec<Vec<String>> = history
        .iter()
        .map(|h| {
            let b = &h.bounds;
            vec![
                h.cycle.to_string(),
                h.n_cells.to_string(),
                h.n_vertices.to_string(),
                h.n_steps.to_string(),
                h.iterations.to_string(),
                status_name(h.status).into(),
                num(h.functional),
                num(b.lagrangian),
                num(b.coefficient),
                num(b.tikhonov),
                num(b.c_eps),
                num(b.eta),
                num(b.r_eps_norm),
                h.marked.to_string(),
            ]
        })
        .collect();
    write_table(path, &ESTIMATES_HEADER, &rows)
}

/// Time nodes of `frames` snapshots spread evenly over `0..=n`.
pub fn frame_nodes(n: usize, frames: usize) -> Vec<usize> {
    match frames {
        0 => vec![],
        1 => vec![n],
        _ => {
            let mut ks: Vec<usize> = (0..frames)
                .map(|j| ((j * n) as f64 / (frames - 1) as f64).round() as usize)
                .collect();
            ks.dedup();
            ks
        }
    }
}

fn vertex_vectors(u: &SpaceTimeField, k: usize, nv: usize) -> Vec<[f64; 3]> {
    (0..nv).map(|v| u.value(k, v)).collect()
}

/// Largest Euclidean residual magnitude per mesh cell, with boundary
/// entities mapped to their owner cells through `owner`.
fn residual_magnitudes(
    r: &SpaceTimeResidual,
    n_cells: usize,
    owner: impl Fn(usize) -> usize,
) -> Vec<f64> {
    let mut out = vec![0.0_f64; n_cells];
    for e in 0..r.n_cells {
        let c = owner(e);
        for k in 0..r.n_intervals {
            for it in 0..r.n_time {
                for is in 0..r.n_space {
                    let m = r
                        .get(e, k, it, is)
                        .iter()
                        .map(|x| x * x)
                        .sum::<f64>()
                        .sqrt();
                    out[c] = out[c].max(m);
                }
            }
        }
    }
    out
}

/// Writes `prefix_KKKKK.vtk` snapshots of vector fields at the time nodes
/// of [`frame_nodes`] and returns the file names with their time nodes.
pub fn write_frames(
    dir: &Path,
    prefix: &str,
    mesh: &SimplicialMesh,
    grid: &TimeGrid,
    fields: &[(&str, &SpaceTimeField)],
    frames: usize,
) -> Result<Vec<(String, usize)>> {
    let nv = mesh.n_vertices();
    let mut out = Vec::new();
    for k in frame_nodes(grid.n, frames) {
        let name = format!("{prefix}_{k:05}.vtk");
        let mut ds = VtkDataset::default();
        for (field, u) in fields {
            u.check_compatible(mesh, grid)?;
            ds = ds.point_vector(field, vertex_vectors(u, k, nv));
        }
        ds.write(&dir.join(&name), mesh, &format!("t={}", num(grid.node(k))))?;
        out.push((name, k));
    }
    Ok(out)
}

/// Writes the permittivity, state frames, indicators, residual magnitudes,
/// logs and a manifest into `dir`. Identical states give identical bytes.
pub fn export_state(state: &ReconstructionState, dir: &Path, frames: usize) -> Result<Manifest> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mesh = &state.mesh;
    let nv = mesh.n_vertices();
    let nc = mesh.n_cells();
    let mut entries = Vec::new();
    let mut add = |file: String, format: &'static str, quantities: &str| {
        entries.push(ManifestEntry {
            file,
            format,
            quantities: quantities.into(),
        })
    };
    let title = format!("cycle {}", state.cycle);

    VtkDataset::default()
        .point_scalar("eps", state.eps.values()[..nv].to_vec())
        .write(&dir.join("eps.vtk"), mesh, &title)?;
    add("eps.vtk".into(), "vtk", "mesh; eps (point, vertex values)");

    let est = &state.estimate;
    let quad = EstimatorQuadrature::new(mesh);
    let owner = |i: usize| quad.boundary[i].cell;
    let res = &est.residuals;
    VtkDataset::default()
        .cell_scalar("indicator", est.indicators.values.clone())
        .cell_scalar("eps_residual", res.eps.cell_norms())
        .cell_scalar(
            "eps_normal_jump",
            (0..nc).map(|c| est.jumps.eps_normal.get(0, c)[0]).collect(),
        )
        .cell_scalar(
            "adjoint_residual_interior",
            residual_magnitudes(&res.lambda_omega, nc, |c| c),
        )
        .cell_scalar(
            "adjoint_residual_boundary",
            residual_magnitudes(&res.lambda_gamma, nc, owner),
        )
        .cell_scalar(
            "direct_residual_interior",
            residual_magnitudes(&res.e_omega, nc, |c| c),
        )
        .cell_scalar(
            "direct_residual_boundary",
            residual_magnitudes(&res.e_gamma, nc, owner),
        )
        .write(&dir.join("estimate.vtk"), mesh, &title)?;
    add(
        "estimate.vtk".into(),
        "vtk",
        "indicator; eps_residual; eps_normal_jump; adjoint_residual_interior; \
         adjoint_residual_boundary; direct_residual_interior; direct_residual_boundary (cell)",
    );

    for (name, k) in write_frames(
        dir,
        "state",
        mesh,
        &state.grid,
        &[("E", &state.e), ("lambda", &state.lambda)],
        frames,
    )? {
        add(name, "vtk", &format!("E; lambda (point) at time node {k}"));
    }

    write_optimizer_log(&dir.join("optimizer.csv"), &state.optimizer_log)?;
    add("optimizer.csv".into(), "csv", &OPTIMIZER_HEADER.join("; "));
    write_estimates_log(&dir.join("estimates.csv"), &state.history)?;
    add("estimates.csv".into(), "csv", &ESTIMATES_HEADER.join("; "));
    state.data.write_csv(&dir.join("observations.csv"))?;
    add(
        "observations.csv".into(),
        "csv",
        "face; node; k; t; components of the observed trace",
    );

    let manifest = Manifest {
        dir: dir.to_path_buf(),
        entries,
    };
    let rows: Vec<Vec<String>> = manifest
        .entries
        .iter()
        .map(|e| vec![e.file.clone(), e.format.into(), e.quantities.clone()])
        .collect();
    write_table(
        &dir.join(MANIFEST_FILE),
        &["file", "format", "quantities"],
        &rows,
    )?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_selection() {
        assert_eq!(frame_nodes(10, 3), vec![0, 5, 10]);
        assert_eq!(frame_nodes(2, 5), vec![0, 1, 2]);
        assert_eq!(frame_nodes(7, 1), vec![7]);
        assert!(frame_nodes(7, 0).is_empty());
    }
}
