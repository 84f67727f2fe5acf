//! Boundary data: the Neumann source and tabulated boundary traces.

use std::f64::consts::PI;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::{Point, SimplicialMesh, TimeGrid};
use crate::spaces::SpaceTimeField;

/// Temporal profile of a source pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeProfile {
    /// Ricker wavelet with peak frequency `f0` centred at `delay`.
    Ricker { f0: f64, delay: f64 },
    /// One period of `sin(2 pi freq t)`, zero afterwards.
    SinePulse { freq: f64 },
}

impl TimeProfile {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            TimeProfile::Ricker { f0, delay } => {
                let a = (PI * f0 * (t - delay)).powi(2);
                (1.0 - 2.0 * a) * (-a).exp()
            }
            TimeProfile::SinePulse { freq } => {
                if t >= 0.0 && t * freq <= 1.0 {
                    (2.0 * PI * freq * t).sin()
                } else {
                    0.0
                }
            }
        }
    }
}

/// Neumann data `P` on the lateral boundary.
#[derive(Debug, Clone, PartialEq)]
pub enum NeumannData {
    Zero,
    /// `P = amplitude f(t) direction` on one box side, zero elsewhere.
    SidePulse {
        side: u8,
        direction: [f64; 3],
        amplitude: f64,
        profile: TimeProfile,
    },
    /// Tabulated values on a boundary trace layout of the solver's mesh.
    Table(ObservationData),
}

impl NeumannData {
    /// Value on boundary face `face` (box side `side`) at face barycentric
    /// `fb` and time `t = t_k + theta tau`.
    pub fn eval(
        &self,
        face: usize,
        side: Option<u8>,
        fb: &[f64; 4],
        k: usize,
        theta: f64,
        t: f64,
    ) -> [f64; 3] {
        match self {
            NeumannData::Zero => [0.0; 3],
            NeumannData::SidePulse {
                side: s,
                direction,
                amplitude,
                profile,
            } => {
                if side != Some(*s) {
                    return [0.0; 3];
                }
                let f = amplitude * profile.value(t);
                [f * direction[0], f * direction[1], f * direction[2]]
            }
            NeumannData::Table(table) => table.eval_face(face, fb, k, theta),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, NeumannData::Zero)
    }

    pub fn check(&self, mesh: &SimplicialMesh, grid: &TimeGrid) -> Result<()> {
        match self {
            NeumannData::Table(t) => t.check_compatible(mesh, grid),
            NeumannData::SidePulse {
                side,
                direction,
                amplitude,
                ..
            } => {
                if *side as usize >= 2 * mesh.dim() {
                    return Err(Error::Config(format!(
                        "source side {side} does not exist in dimension {}",
                        mesh.dim()
                    )));
                }
                if direction.iter().chain([amplitude]).any(|v| !v.is_finite()) {
                    return Err(Error::Config("source values must be finite".into()));
                }
                Ok(())
            }
            NeumannData::Zero => Ok(()),
        }
    }
}

/// Boundary faces of a mesh with their vertices, in mesh face order.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceLayout {
    dim: usize,
    mesh_id: u64,
    /// Mesh face ids.
    faces: Vec<usize>,
    /// Box side of each face.
    sides: Vec<u8>,
    /// Vertex ids per face (`dim` used).
    nodes: Vec<[usize; 3]>,
    points: Vec<[Point; 3]>,
    /// Layout index per mesh face, `usize::MAX` for interior faces.
    index: Vec<usize>,
}

impl TraceLayout {
    pub fn from_mesh(mesh: &SimplicialMesh) -> Self {
        let mut layout = TraceLayout {
            dim: mesh.dim(),
            mesh_id: mesh.id(),
            faces: Vec::new(),
            sides: Vec::new(),
            nodes: Vec::new(),
            points: Vec::new(),
            index: vec![usize::MAX; mesh.n_faces()],
        };
        for (fid, f) in mesh.boundary_faces() {
            layout.index[fid] = layout.faces.len();
            layout.faces.push(fid);
            layout.sides.push(f.side.unwrap_or(u8::MAX));
            layout.nodes.push(f.vertices);
            let mut pts = [[0.0; 3]; 3];
            for (p, &v) in pts.iter_mut().zip(&f.vertices[..mesh.dim()]) {
                *p = *mesh.vertex(v);
            }
            layout.points.push(pts);
        }
        layout
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn mesh_face(&self, i: usize) -> usize {
        self.faces[i]
    }
    pub fn nodes(&self, i: usize) -> &[usize] {
        &self.nodes[i][..self.dim]
    }
    pub fn side(&self, i: usize) -> u8 {
        self.sides[i]
    }
    pub fn points(&self, i: usize) -> &[Point] {
        &self.points[i][..self.dim]
    }
    pub fn index_of_face(&self, mesh_face: usize) -> Option<usize> {
        self.index
            .get(mesh_face)
            .copied()
            .filter(|&i| i != usize::MAX)
    }

    /// Face barycentric coordinates of `x` in layout face `i`, if `x` lies
    /// on it. Uses the box side to drop the normal coordinate.
    fn face_barycentric(&self, i: usize, x: &Point) -> Option<[f64; 4]> {
        let axis = (self.sides[i] / 2) as usize;
        let p = &self.points[i];
        let tol = 1e-9;
        if (x[axis] - p[0][axis]).abs() > tol * (1.0 + p[0][axis].abs()) {
            return None;
        }
        let others: Vec<usize> = (0..self.dim).filter(|&a| a != axis).collect();
        let mut b = [0.0; 4];
        match self.dim {
            2 => {
                let a = others[0];
                let len = p[1][a] - p[0][a];
                let s = (x[a] - p[0][a]) / len;
                b[0] = 1.0 - s;
                b[1] = s;
            }
            3 => {
                let (u, v) = (others[0], others[1]);
                let (e1u, e1v) = (p[1][u] - p[0][u], p[1][v] - p[0][v]);
                let (e2u, e2v) = (p[2][u] - p[0][u], p[2][v] - p[0][v]);
                let det = e1u * e2v - e1v * e2u;
                let (ru, rv) = (x[u] - p[0][u], x[v] - p[0][v]);
                let s = (ru * e2v - rv * e2u) / det;
                let r = (e1u * rv - e1v * ru) / det;
                b[0] = 1.0 - s - r;
                b[1] = s;
                b[2] = r;
            }
            _ => unreachable!(),
        }
        if b[..self.dim].iter().all(|&v| v >= -tol) {
            Some(b)
        } else {
            None
        }
    }
}

/// Vector-valued boundary trace table: one value per (time node, boundary
/// face, face vertex), linear on each face and in time between nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationData {
    layout: TraceLayout,
    grid: TimeGrid,
    values: Vec<f64>,
}

impl ObservationData {
    pub fn zeros(mesh: &SimplicialMesh, grid: &TimeGrid) -> Self {
        let layout = TraceLayout::from_mesh(mesh);
        let n = (grid.n + 1) * layout.n_faces() * mesh.dim() * mesh.dim();
        ObservationData {
            layout,
            grid: *grid,
            values: vec![0.0; n],
        }
    }

    /// Samples `g(x, t)` at every face vertex and time node.
    pub fn from_fn(
        mesh: &SimplicialMesh,
        grid: &TimeGrid,
        g: impl Fn(&Point, f64) -> [f64; 3],
    ) -> Self {
        let mut out = ObservationData::zeros(mesh, grid);
        let d = mesh.dim();
        for k in 0..=grid.n {
            let t = grid.node(k);
            for f in 0..out.layout.n_faces() {
                for lv in 0..d {
                    let v = g(&out.layout.points[f][lv], t);
                    out.set(k, f, lv, &v);
                }
            }
        }
        out
    }

    /// Boundary trace of a space-time field.
    pub fn trace_of(mesh: &SimplicialMesh, u: &SpaceTimeField) -> Result<Self> {
        u.check_compatible(mesh, u.grid())?;
        let grid = *u.grid();
        let mut out = ObservationData::zeros(mesh, &grid);
        let d = mesh.dim();
        for k in 0..=grid.n {
            for f in 0..out.layout.n_faces() {
                for lv in 0..d {
                    let v = u.value(k, out.layout.nodes[f][lv]);
                    out.set(k, f, lv, &v);
                }
            }
        }
        Ok(out)
    }

    pub fn layout(&self) -> &TraceLayout {
        &self.layout
    }
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
    fn ncomp(&self) -> usize {
        self.layout.dim
    }

    fn offset(&self, k: usize, f: usize, lv: usize) -> usize {
        let d = self.layout.dim;
        ((k * self.layout.n_faces() + f) * d + lv) * self.ncomp()
    }

    pub fn get(&self, k: usize, f: usize, lv: usize) -> [f64; 3] {
        let o = self.offset(k, f, lv);
        let mut v = [0.0; 3];
        v[..self.ncomp()].copy_from_slice(&self.values[o..o + self.ncomp()]);
        v
    }

    pub fn set(&mut self, k: usize, f: usize, lv: usize, v: &[f64]) {
        let o = self.offset(k, f, lv);
        let nc = self.ncomp();
        self.values[o..o + nc].copy_from_slice(&v[..nc]);
    }

    /// Value on mesh face `face` at face barycentric `fb` and time
    /// `t_k + theta tau`.
    pub fn eval_face(&self, face: usize, fb: &[f64; 4], k: usize, theta: f64) -> [f64; 3] {
        let Some(f) = self.layout.index_of_face(face) else {
            return [0.0; 3];
        };
        let d = self.layout.dim;
        let mut v = [0.0; 3];
        for lv in 0..d {
            let a = self.get(k, f, lv);
            let b = if theta > 0.0 {
                self.get(k + 1, f, lv)
            } else {
                a
            };
            for c in 0..d {
                v[c] += fb[lv] * ((1.0 - theta) * a[c] + theta * b[c]);
            }
        }
        v
    }

    pub fn check_compatible(&self, mesh: &SimplicialMesh, grid: &TimeGrid) -> Result<()> {
        if self.layout.mesh_id != mesh.id() {
            return Err(Error::Usage(
                "observation data belongs to a different mesh; resample it first".into(),
            ));
        }
        if self.grid != *grid {
            return Err(Error::Usage(format!(
                "observation data lives on time grid ({}, {}), expected ({}, {})",
                self.grid.t_final, self.grid.n, grid.t_final, grid.n
            )));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Usage(
                "observation data contains non-finite values".into(),
            ));
        }
        Ok(())
    }

    /// Euclidean norm of the table.
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Root mean square of the entries.
    pub fn rms(&self) -> f64 {
        if self.values.is_empty() {
            0.0
        } else {
            self.norm() / (self.values.len() as f64).sqrt()
        }
    }

    /// Transfers the table to the boundary layout of `mesh` and the time grid
    /// `grid` by linear interpolation on faces and in time.
    pub fn resample(&self, mesh: &SimplicialMesh, grid: &TimeGrid) -> Result<ObservationData> {
        if (grid.t_final - self.grid.t_final).abs() > 1e-12 * self.grid.t_final {
            return Err(Error::Usage(format!(
                "cannot resample data on [0, {}] to [0, {}]",
                self.grid.t_final, grid.t_final
            )));
        }
        let mut out = ObservationData::zeros(mesh, grid);
        let d = mesh.dim();
        if d != self.layout.dim {
            return Err(Error::Usage("dimension mismatch in resample".into()));
        }
        // locate each target face vertex once
        let mut loc: Vec<(usize, [f64; 4])> = Vec::with_capacity(out.layout.n_faces() * d);
        for f in 0..out.layout.n_faces() {
            let side = out.layout.sides[f];
            for lv in 0..d {
                let x = out.layout.points[f][lv];
                let found = (0..self.layout.n_faces())
                    .filter(|&g| self.layout.sides[g] == side)
                    .find_map(|g| self.layout.face_barycentric(g, &x).map(|b| (g, b)));
                match found {
                    Some(hit) => loc.push(hit),
                    None => {
                        return Err(Error::Usage(format!(
                            "boundary point {x:?} not covered by the source trace layout"
                        )))
                    }
                }
            }
        }
        for k in 0..=grid.n {
            let s = grid.node(k) / self.grid.tau;
            let ks = (s.floor().max(0.0) as usize).min(self.grid.n);
            let (ks, theta) = if ks == self.grid.n {
                (ks, 0.0)
            } else {
                let th = s - ks as f64;
                if th < 1e-12 {
                    (ks, 0.0)
                } else if th > 1.0 - 1e-12 {
                    (ks + 1, 0.0)
                } else {
                    (ks, th)
                }
            };
            for f in 0..out.layout.n_faces() {
                for lv in 0..d {
                    let (g, b) = loc[f * d + lv];
                    let v = self.eval_face(self.layout.faces[g], &b, ks, theta);
                    out.set(k, f, lv, &v);
                }
            }
        }
        Ok(out)
    }

    /// Writes `face,node,k,t,c0,c1[,c2]` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
        let d = self.layout.dim;
        let mut header = vec!["face".to_string(), "node".into(), "k".into(), "t".into()];
        header.extend((0..d).map(|a| format!("c{a}")));
        let csv_err = |e: csv::Error| Error::Usage(format!("writing {}: {e}", path.display()));
        w.write_record(&header).map_err(csv_err)?;
        for k in 0..=self.grid.n {
            for f in 0..self.layout.n_faces() {
                for lv in 0..d {
                    let v = self.get(k, f, lv);
                    let mut rec = vec![
                        self.layout.faces[f].to_string(),
                        self.layout.nodes[f][lv].to_string(),
                        k.to_string(),
                        self.grid.node(k).to_string(),
                    ];
                    rec.extend(v[..d].iter().map(|x| x.to_string()));
                    w.write_record(&rec).map_err(csv_err)?;
                }
            }
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    /// Reads a table written by [`write_csv`](Self::write_csv) for the
    /// boundary layout of `mesh`. Every (face, node, k) entry must be present
    /// exactly once.
    pub fn read_csv(path: &Path, mesh: &SimplicialMesh, grid: &TimeGrid) -> Result<Self> {
        let mut out = ObservationData::zeros(mesh, grid);
        let d = mesh.dim();
        let mut seen = vec![false; out.values.len() / d];
        let mut r = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Usage(format!("{}: {other:?}", path.display())),
        })?;
        let headers = r
            .headers()
            .map_err(|e| Error::Parse {
                line: 1,
                msg: e.to_string(),
            })?
            .clone();
        let expected: Vec<String> = ["face", "node", "k"]
            .iter()
            .map(|s| s.to_string())
            .chain((0..d).map(|a| format!("c{a}")))
            .collect();
        let col = |name: &str| headers.iter().position(|h| h.trim() == name);
        let cols: Vec<usize> = expected
            .iter()
            .map(|n| {
                col(n).ok_or_else(|| Error::Parse {
                    line: 1,
                    msg: format!("missing column `{n}`"),
                })
            })
            .collect::<Result<_>>()?;
        for (row, rec) in r.records().enumerate() {
            let line = row + 2;
            let rec = rec.map_err(|e| Error::Parse {
                line,
                msg: e.to_string(),
            })?;
            let field = |i: usize| -> Result<&str> {
                rec.get(cols[i]).ok_or_else(|| Error::Parse {
                    line,
                    msg: "short row".into(),
                })
            };
            let int = |i: usize| -> Result<usize> {
                field(i)?.trim().parse().map_err(|e| Error::Parse {
                    line,
                    msg: format!("`{}`: {e}", expected[i]),
                })
            };
            let (face, node, k) = (int(0)?, int(1)?, int(2)?);
            let f = out.layout.index_of_face(face).ok_or_else(|| Error::Parse {
                line,
                msg: format!("face {face} is not a boundary face of the mesh"),
            })?;
            let lv = out
                .layout
                .nodes(f)
                .iter()
                .position(|&n| n == node)
                .ok_or_else(|| Error::Parse {
                    line,
                    msg: format!("node {node} is not a vertex of face {face}"),
                })?;
            if k > grid.n {
                return Err(Error::Parse {
                    line,
                    msg: format!("time index {k} exceeds {}", grid.n),
                });
            }
            let mut v = [0.0; 3];
            for a in 0..d {
                v[a] = field(3 + a)?.trim().parse().map_err(|e| Error::Parse {
                    line,
                    msg: format!("`c{a}`: {e}"),
                })?;
            }
            let slot = out.offset(k, f, lv) / d;
            if seen[slot] {
                return Err(Error::Parse {
                    line,
                    msg: format!("duplicate entry for face {face}, node {node}, k {k}"),
                });
            }
            seen[slot] = true;
            out.set(k, f, lv, &v);
        }
        if let Some(missing) = seen.iter().position(|&s| !s) {
            return Err(Error::Usage(format!(
                "{}: {} of {} trace entries missing (first at slot {missing})",
                path.display(),
                seen.iter().filter(|&&s| !s).count(),
                seen.len()
            )));
        }
        out.check_compatible(mesh, grid)?;
        Ok(out)
    }
}
