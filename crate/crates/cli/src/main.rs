use anyhow::{bail, Context, Result};
use cip_core::driver::adaptive::initial_discretization;
use cip_core::driver::config::ExperimentConfig;
use cip_core::driver::export::{export_state, status_name, write_frames};
use cip_core::driver::gradcheck::{gradient_check_cmd, CheckPoint};
use cip_core::driver::synth::{generate_synthetic_data, target_permittivity};
use cip_core::driver::vtk::VtkDataset;
use cip_core::driver::{reconstruct_adaptive, ReconstructionState};
use cip_core::objective::{
    tikhonov_parts, MinimizeStatus, PermittivityField, RegularizationConfig,
};
use cip_core::pde::{ObservationData, WaveSolver};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::{Path, PathBuf};

/// Permittivity reconstruction from boundary observations of a wave field.
#[derive(Parser)]
#[command(name = "cip", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override one key, e.g. `--set regularization.alpha=0.02`.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::from_file(&self.config, &self.overrides)
            .with_context(|| format!("loading {}", self.config.display()))?;
        cfg.apply_env();
        Ok(cfg)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum At {
    Reference,
    Midpoint,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the direct problem for the configured target permittivity.
    Forward(Common),
    /// Solve the direct and adjoint problems at the reference permittivity.
    Adjoint(Common),
    /// Compare the adjoint gradient with central finite differences.
    GradCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10)]
        directions: usize,
        #[arg(long, default_value_t = 1e-5)]
        step: f64,
        #[arg(long, value_enum, default_value_t = At::Midpoint)]
        at: At,
        /// Largest accepted relative error.
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
    },
    /// One reconstruction on the initial mesh, with error estimates.
    Estimate(Common),
    /// The adaptive reconstruction loop.
    Reconstruct(Common),
    /// Write synthetic observations for the initial discretisation.
    Synthesize {
        #[command(flatten)]
        common: Common,
        /// Output file (default: `<output.dir>/observations.csv`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn prepare_output(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let dir = cfg.output.dir.clone();
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    std::fs::write(dir.join("resolved_config.toml"), cfg.resolved())
        .with_context(|| format!("writing resolved config into {}", dir.display()))?;
    Ok(dir)
}

fn forward(cfg: &ExperimentConfig) -> Result<()> {
    let dir = prepare_output(cfg)?;
    let (mesh, grid) = initial_discretization(cfg)?;
    let eps = target_permittivity(cfg, &mesh)?;
    let e = WaveSolver::new(&mesh, &grid, &eps)?.direct(&cfg.neumann())?;
    VtkDataset::default()
        .point_scalar("eps", eps.values()[..mesh.n_vertices()].to_vec())
        .write(&dir.join("target.vtk"), &mesh, "target permittivity")?;
    let frames = write_frames(
        &dir,
        "direct",
        &mesh,
        &grid,
        &[("E", &e)],
        cfg.output.frames,
    )?;
    ObservationData::trace_of(&mesh, &e)?.write_csv(&dir.join("trace.csv"))?;
    println!(
        "direct solution: {} cells, {} steps, {} frames and trace.csv in {}",
        mesh.n_cells(),
        grid.n,
        frames.len(),
        dir.display()
    );
    Ok(())
}

fn adjoint(cfg: &ExperimentConfig) -> Result<()> {
    let dir = prepare_output(cfg)?;
    let (mesh, grid) = initial_discretization(cfg)?;
    let data = match &cfg.data.observations {
        Some(p) => ObservationData::read_csv(p, &mesh, &grid)?,
        None => generate_synthetic_data(cfg, &mesh, &grid)?,
    };
    let q = cfg.regularization.degree;
    let eps = PermittivityField::one(&mesh, q, cfg.regularization.eps_max)?;
    let cutoff = cfg.cutoff()?;
    let solver = WaveSolver::new(&mesh, &grid, &eps)?;
    let e = solver.direct(&cfg.neumann())?;
    let lambda = solver.adjoint(&e, &data, &cutoff)?;
    let reg = RegularizationConfig::new(cfg.regularization.alpha, eps.clone())?;
    let parts = tikhonov_parts(&mesh, &grid, &eps, &e, &data, &reg, &cutoff)?;
    let frames = write_frames(
        &dir,
        "adjoint",
        &mesh,
        &grid,
        &[("E", &e), ("lambda", &lambda)],
        cfg.output.frames,
    )?;
    println!(
        "reference permittivity: misfit {:e}, {} frames in {}",
        parts.misfit,
        frames.len(),
        dir.display()
    );
    Ok(())
}

fn print_history(state: &ReconstructionState) {
    println!("cycle cells steps iterations status F lagrangian coefficient tikhonov");
    for h in &state.history {
        println!(
            "{} {} {} {} {} {:e} {:e} {:e} {:e}",
            h.cycle,
            h.n_cells,
            h.n_steps,
            h.iterations,
            status_name(h.status),
            h.functional,
            h.bounds.lagrangian,
            h.bounds.coefficient,
            h.bounds.tikhonov
        );
    }
}

fn reconstruct(mut cfg: ExperimentConfig, single: bool) -> Result<()> {
    if single {
        cfg.adaptivity.max_cycles = 1;
    }
    let dir = prepare_output(&cfg)?;
    let frames = cfg.output.frames;
    let export =
        |s: &ReconstructionState| export_state(s, &cycle_dir(&dir, s.cycle), frames).map(|_| ());
    let state = reconstruct_adaptive(&cfg, export)?;
    print_history(&state);
    println!("output in {}", dir.display());
    if state.status == MinimizeStatus::LineSearchFailed {
        bail!(
            "line search failed in cycle {}; best state exported",
            state.cycle
        );
    }
    Ok(())
}

fn cycle_dir(dir: &Path, cycle: usize) -> PathBuf {
    dir.join(format!("cycle_{cycle:02}"))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Forward(c) => forward(&c.load()?),
        Command::Adjoint(c) => adjoint(&c.load()?),
        Command::GradCheck {
            common,
            directions,
            step,
            at,
            tol,
        } => {
            let cfg = common.load()?;
            let at = match at {
                At::Reference => CheckPoint::Reference,
                At::Midpoint => CheckPoint::Midpoint,
            };
            let report = gradient_check_cmd(&cfg, at, directions, step)?;
            println!("F = {:e}, step = {:e}", report.functional, report.step);
            println!("direction adjoint finite_difference rel_error");
            for (i, c) in report.checks.iter().enumerate() {
                let tag = if c.degenerate { " degenerate" } else { "" };
                println!(
                    "{i} {:e} {:e} {:e}{tag}",
                    c.adjoint, c.finite_difference, c.rel_error
                );
            }
            let worst = report.max_rel_error();
            if report.n_degenerate() == report.checks.len() {
                println!("degenerate pass: every directional derivative is below resolution");
            }
            if worst > tol {
                bail!("largest relative error {worst:e} exceeds {tol:e}");
            }
            println!("pass: largest relative error {worst:e}");
            Ok(())
        }
        Command::Estimate(c) => reconstruct(c.load()?, true),
        Command::Reconstruct(c) => reconstruct(c.load()?, false),
        Command::Synthesize { common, out } => {
            let cfg = common.load()?;
            let (mesh, grid) = initial_discretization(&cfg)?;
            let g = generate_synthetic_data(&cfg, &mesh, &grid)?;
            let path = match out {
                Some(p) => p,
                None => prepare_output(&cfg)?.join("observations.csv"),
            };
            g.write_csv(&path)?;
            println!(
                "{} trace values written to {}",
                g.values().len(),
                path.display()
            );
            Ok(())
        }
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
