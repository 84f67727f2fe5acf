//! Experiment configuration: a TOML document with fixed sections, strict
//! key checking and documented defaults.

use crate::error::{Error, Result};
use crate::mesh::{BoxDomain, Point};
use crate::objective::{CutoffFunction, MinimizeOptions};
use crate::pde::{NeumannData, TimeProfile};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Environment variable that overrides `output.dir`.
pub const OUTPUT_DIR_ENV: &str = "CIP_OUTPUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub domain: DomainConfig,
    pub time: TimeConfig,
    #[serde(default)]
    pub source: SourceConfig,
    #[serde(default)]
    pub target: TargetConfig,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub regularization: RegularizationSection,
    #[serde(default)]
    pub optimizer: OptimizerSection,
    #[serde(default)]
    pub adaptivity: AdaptivitySection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    #[serde(default = "default_dim")]
    pub dim: usize,
    /// Lower corner; the origin when omitted.
    #[serde(default)]
    pub lo: Option<Vec<f64>>,
    /// Upper corner; all ones when omitted.
    #[serde(default)]
    pub hi: Option<Vec<f64>>,
    /// Boxes per axis of the initial mesh.
    pub resolution: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub t_final: f64,
    pub steps: usize,
    /// After refinement the number of steps grows so that
    /// `tau <= cfl * h_min` (diameter); 0 keeps the grid fixed.
    #[serde(default = "default_cfl")]
    pub cfl: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileKind {
    Ricker,
    Sine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    /// Box side `2 * axis + {0: lower, 1: upper}`.
    pub side: u8,
    pub direction: Vec<f64>,
    pub amplitude: f64,
    pub profile: ProfileKind,
    pub frequency: f64,
    /// Peak time of the Ricker wavelet (ignored for the sine pulse).
    pub delay: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inclusion {
    pub center: Vec<f64>,
    /// Standard deviation of the Gaussian bump.
    pub width: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    pub background: f64,
    #[serde(default)]
    pub inclusions: Vec<Inclusion>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// Observation CSV; when absent data are synthesised from `target`.
    #[serde(default)]
    pub observations: Option<PathBuf>,
    /// Refinement factor of the synthesis mesh and time grid.
    pub fine_factor: usize,
    /// Relative noise level.
    pub noise: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularizationSection {
    pub alpha: f64,
    pub eps_max: f64,
    /// Polynomial degree of the permittivity (1 or 2).
    pub degree: usize,
    /// Cut-off width; `0.1 * t_final` when omitted.
    #[serde(default)]
    pub cutoff_width: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSection {
    pub max_iterations: usize,
    pub tol: f64,
    pub armijo: f64,
    pub max_backtracks: usize,
    pub initial_change: f64,
    pub restart_every: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptivitySection {
    /// Bulk marking fraction in `(0, 1]`.
    pub fraction: f64,
    pub max_cycles: usize,
    /// Stop when the indicator total falls below this value.
    pub indicator_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// Number of time frames written per space-time field.
    pub frames: usize,
}

fn default_dim() -> usize {
    2
}

fn default_cfl() -> f64 {
    0.4
}

impl Default for SourceConfig {
    fn default() -> Self {
        SourceConfig {
            side: 3,
            direction: vec![1.0, 0.0],
            amplitude: 1.0,
            profile: ProfileKind::Ricker,
            frequency: 2.0,
            delay: 0.6,
        }
    }
}

impl Default for TargetConfig {
    fn default() -> Self {
        TargetConfig {
            background: 1.0,
            inclusions: Vec::new(),
        }
    }
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            observations: None,
            fine_factor: 2,
            noise: 0.0,
            seed: 0,
        }
    }
}

impl Default for RegularizationSection {
    fn default() -> Self {
        RegularizationSection {
            alpha: 0.01,
            eps_max: 15.0,
            degree: 1,
            cutoff_width: None,
        }
    }
}

impl Default for OptimizerSection {
    fn default() -> Self {
        let o = MinimizeOptions::default();
        OptimizerSection {
            max_iterations: o.max_iterations,
            tol: o.tol,
            armijo: o.armijo,
            max_backtracks: o.max_backtracks,
            initial_change: o.initial_change,
            restart_every: o.restart_every,
        }
    }
}

impl Default for AdaptivitySection {
    fn default() -> Self {
        AdaptivitySection {
            fraction: 0.3,
            max_cycles: 1,
            indicator_tol: 0.0,
        }
    }
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: PathBuf::from("out"),
            frames: 11,
        }
    }
}

// Serde fills whole sections through `Default`; these make individual keys
// optional inside a present section.
macro_rules! partial_defaults {
    ($($ty:ty),*) => {$(
        impl $ty {
            fn fill(table: &mut toml::Table) -> Result<()> {
                let defaults = toml::Table::try_from(<$ty>::default())
                    .map_err(|e| Error::Config(e.to_string()))?;
                for (k, v) in defaults {
                    table.entry(k).or_insert(v);
                }
                Ok(())
            }
        }
    )*};
}

partial_defaults!(
    SourceConfig,
    TargetConfig,
    DataConfig,
    RegularizationSection,
    OptimizerSection,
    AdaptivitySection,
    OutputSection
);

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of `key` inside `[section]`, for constraint errors.
fn line_of_key(text: &str, section: &str, key: &str) -> usize {
    let mut current = String::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if let Some(name) = t.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            current = name.trim_matches(['[', ']']).trim().to_string();
            continue;
        }
        if current == section {
            if let Some((k, _)) = t.split_once('=') {
                if k.trim() == key {
                    return i + 1;
                }
            }
        }
    }
    0
}

/// Line of the first key quoted in a deserialisation message such as
/// "unknown field `stepz`", or 0 when it cannot be found.
fn line_of_named_key(text: &str, msg: &str) -> usize {
    let Some(key) = msg.split('`').nth(1) else {
        return 0;
    };
    text.lines()
        .position(|l| {
            l.trim_start()
                .strip_prefix(key)
                .is_some_and(|rest| rest.trim_start().starts_with('='))
        })
        .map_or(0, |i| i + 1)
}

/// Parses a `section.key=value` override. The value is read as TOML and
/// falls back to a string.
fn parse_override(spec: &str) -> Result<(Vec<String>, toml::Value)> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Usage(format!("override '{spec}' is not of the form key=value")))?;
    let path: Vec<String> = key.trim().split('.').map(str::to_string).collect();
    if path.len() != 2 || path.iter().any(String::is_empty) {
        return Err(Error::Usage(format!(
            "override key '{key}' must be section.key"
        )));
    }
    let value = toml::from_str::<toml::Table>(&format!("v = {}", raw.trim()))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));
    Ok((path, value))
}

impl ExperimentConfig {
    /// Parses, applies `section.key=value` overrides, fills defaults and
    /// validates.
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| Error::Parse {
            line: e.span().map_or(0, |s| line_of_offset(text, s.start)),
            msg: e.message().to_string(),
        })?;
        for spec in overrides {
            let (path, value) = parse_override(spec)?;
            let section = table
                .entry(path[0].clone())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            let toml::Value::Table(section) = section else {
                return Err(Error::Usage(format!("'{}' is not a section", path[0])));
            };
            section.insert(path[1].clone(), value);
        }
        for (name, fill) in [
            (
                "source",
                SourceConfig::fill as fn(&mut toml::Table) -> Result<()>,
            ),
            ("target", TargetConfig::fill),
            ("data", DataConfig::fill),
            ("regularization", RegularizationSection::fill),
            ("optimizer", OptimizerSection::fill),
            ("adaptivity", AdaptivitySection::fill),
            ("output", OutputSection::fill),
        ] {
            if let Some(toml::Value::Table(section)) = table.get_mut(name) {
                fill(section)?;
            }
        }
        let cfg: ExperimentConfig =
            toml::Value::Table(table)
                .try_into()
                .map_err(|e: toml::de::Error| Error::Parse {
                    line: line_of_named_key(text, e.message()),
                    msg: e.message().to_string(),
                })?;
        cfg.validate().map_err(|(section, key, msg)| Error::Parse {
            line: line_of_key(text, section, key),
            msg,
        })?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ExperimentConfig::parse(&text, overrides)
    }

    /// Replaces the output directory from the environment, if set.
    pub fn apply_env(&mut self) {
        if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV) {
            self.output.dir = PathBuf::from(dir);
        }
    }

    /// The fully resolved configuration as TOML.
    pub fn resolved(&self) -> String {
        toml::to_string_pretty(self).expect("configuration serialises")
    }

    fn validate(&self) -> std::result::Result<(), (&'static str, &'static str, String)> {
        let d = self.domain.dim;
        let err = |s, k, m: String| Err((s, k, m));
        if !(d == 2 || d == 3) {
            return err("domain", "dim", format!("dim must be 2 or 3, got {d}"));
        }
        if self.domain.resolution.len() != d || self.domain.resolution.contains(&0) {
            return err(
                "domain",
                "resolution",
                format!("resolution needs {d} positive entries"),
            );
        }
        if let Err(e) = self.box_domain() {
            return err("domain", "hi", e.to_string());
        }
        let t = &self.time;
        if !(t.t_final > 0.0 && t.t_final.is_finite()) {
            return err(
                "time",
                "t_final",
                format!("t_final must be positive, got {}", t.t_final),
            );
        }
        if t.steps == 0 {
            return err("time", "steps", "steps must be positive".into());
        }
        if !(t.cfl >= 0.0) {
            return err(
                "time",
                "cfl",
                format!("cfl must be nonnegative, got {}", t.cfl),
            );
        }
        let s = &self.source;
        if s.side as usize >= 2 * d {
            return err(
                "source",
                "side",
                format!("side must be below {}, got {}", 2 * d, s.side),
            );
        }
        if s.direction.len() != d {
            return err(
                "source",
                "direction",
                format!("direction needs {d} entries"),
            );
        }
        if !(s.frequency > 0.0) {
            return err(
                "source",
                "frequency",
                format!("frequency must be positive, got {}", s.frequency),
            );
        }
        let tg = &self.target;
        if !(tg.background >= 1.0) {
            return err(
                "target",
                "background",
                format!("background must be at least 1, got {}", tg.background),
            );
        }
        for inc in &tg.inclusions {
            if inc.center.len() != d || !(inc.width > 0.0) || !(inc.amplitude >= 0.0) {
                return err(
                    "target",
                    "inclusions",
                    format!("inclusions need a {d}-entry center, positive width and nonnegative amplitude"),
                );
            }
        }
        if self.data.fine_factor == 0 {
            return err("data", "fine_factor", "fine_factor must be positive".into());
        }
        if !(self.data.noise >= 0.0) {
            return err(
                "data",
                "noise",
                format!("noise must be nonnegative, got {}", self.data.noise),
            );
        }
        let r = &self.regularization;
        if !(r.alpha > 0.0 && r.alpha.is_finite()) {
            return err(
                "regularization",
                "alpha",
                format!("alpha must be > 0, got {}", r.alpha),
            );
        }
        if !(r.eps_max >= 1.0) {
            return err(
                "regularization",
                "eps_max",
                format!("eps_max must be at least 1, got {}", r.eps_max),
            );
        }
        if !(r.degree == 1 || r.degree == 2) {
            return err(
                "regularization",
                "degree",
                format!("degree must be 1 or 2, got {}", r.degree),
            );
        }
        if let Err(e) = self.cutoff() {
            return err("regularization", "cutoff_width", e.to_string());
        }
        if let Err(e) = self.minimize_options().validate() {
            return err("optimizer", "tol", e.to_string());
        }
        let a = &self.adaptivity;
        if !(a.fraction > 0.0 && a.fraction <= 1.0) {
            return err(
                "adaptivity",
                "fraction",
                format!("fraction must lie in (0, 1], got {}", a.fraction),
            );
        }
        if a.max_cycles == 0 {
            return err(
                "adaptivity",
                "max_cycles",
                "max_cycles must be positive".into(),
            );
        }
        if self.output.frames < 2 {
            return err("output", "frames", "frames must be at least 2".into());
        }
        Ok(())
    }

    pub fn box_domain(&self) -> Result<BoxDomain> {
        let d = self.domain.dim;
        let lo = self.domain.lo.clone().unwrap_or_else(|| vec![0.0; d]);
        let hi = self.domain.hi.clone().unwrap_or_else(|| vec![1.0; d]);
        BoxDomain::new(d, &lo, &hi)
    }

    pub fn cutoff(&self) -> Result<CutoffFunction> {
        let delta = self
            .regularization
            .cutoff_width
            .unwrap_or(0.1 * self.time.t_final);
        CutoffFunction::new(self.time.t_final, delta)
    }

    pub fn minimize_options(&self) -> MinimizeOptions {
        let o = &self.optimizer;
        MinimizeOptions {
            max_iterations: o.max_iterations,
            tol: o.tol,
            armijo: o.armijo,
            max_backtracks: o.max_backtracks,
            initial_change: o.initial_change,
            restart_every: o.restart_every,
        }
    }

    pub fn neumann(&self) -> NeumannData {
        let s = &self.source;
        let mut direction = [0.0; 3];
        direction[..s.direction.len()].copy_from_slice(&s.direction);
        let profile = match s.profile {
            ProfileKind::Ricker => TimeProfile::Ricker {
                f0: s.frequency,
                delay: s.delay,
            },
            ProfileKind::Sine => TimeProfile::SinePulse { freq: s.frequency },
        };
        NeumannData::SidePulse {
            side: s.side,
            direction,
            amplitude: s.amplitude,
            profile,
        }
    }

    /// The true permittivity as a function of position.
    pub fn target_value(&self, x: &Point) -> f64 {
        let d = self.domain.dim;
        self.target.background
            + self
                .target
                .inclusions
                .iter()
                .map(|inc| {
                    let r2: f64 = (0..d).map(|a| (x[a] - inc.center[a]).powi(2)).sum();
                    inc.amplitude * (-r2 / (2.0 * inc.width * inc.width)).exp()
                })
                .sum::<f64>()
    }

    /// Bounding box `center +- 2 width` of every inclusion, clipped to the
    /// domain.
    pub fn inclusion_boxes(&self) -> Vec<(Point, Point)> {
        let d = self.domain.dim;
        let dom = self.box_domain().expect("validated");
        self.target
            .inclusions
            .iter()
            .map(|inc| {
                let (mut lo, mut hi) = ([0.0; 3], [0.0; 3]);
                for a in 0..d {
                    lo[a] = (inc.center[a] - 2.0 * inc.width).max(dom.lo[a]);
                    hi[a] = (inc.center[a] + 2.0 * inc.width).min(dom.hi[a]);
                }
                (lo, hi)
            })
            .collect()
    }
}
