//! Legacy ASCII VTK unstructured-grid writer.

use crate::error::{Error, Result};
use crate::mesh::SimplicialMesh;
use std::fmt::Write as _;
use std::path::Path;

pub const VTK_TRIANGLE: u8 = 5;
pub const VTK_TETRA: u8 = 10;

/// Named point and cell arrays to attach to a mesh.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VtkDataset {
    pub point_scalars: Vec<(String, Vec<f64>)>,
    /// Vectors with up to three components per vertex, padded with zeros.
    pub point_vectors: Vec<(String, Vec<[f64; 3]>)>,
    pub cell_scalars: Vec<(String, Vec<f64>)>,
}

impl VtkDataset {
    pub fn point_scalar(mut self, name: &str, values: Vec<f64>) -> Self {
        self.point_scalars.push((name.into(), values));
        self
    }

    pub fn point_vector(mut self, name: &str, values: Vec<[f64; 3]>) -> Self {
        self.point_vectors.push((name.into(), values));
        self
    }

    pub fn cell_scalar(mut self, name: &str, values: Vec<f64>) -> Self {
        self.cell_scalars.push((name.into(), values));
        self
    }

    /// The file contents. Floats use the shortest round-trip formatting, so
    /// identical data give identical bytes.
    pub fn render(&self, mesh: &SimplicialMesh, title: &str) -> Result<String> {
        let nv = mesh.n_vertices();
        let nc = mesh.n_cells();
        for (name, v) in &self.point_scalars {
            check_len(name, v.len(), nv)?;
        }
        for (name, v) in &self.point_vectors {
            check_len(name, v.len(), nv)?;
        }
        for (name, v) in &self.cell_scalars {
            check_len(name, v.len(), nc)?;
        }
        let d = mesh.dim();
        let mut s = String::new();
        let title = title.replace('\n', " ");
        let _ = writeln!(
            s,
            "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET UNSTRUCTURED_GRID"
        );
        let _ = writeln!(s, "POINTS {nv} double");
        for p in mesh.vertices() {
            let _ = writeln!(s, "{} {} {}", num(p[0]), num(p[1]), num(p[2]));
        }
        let _ = writeln!(s, "CELLS {nc} {}", nc * (d + 2));
        for c in 0..nc {
            let _ = write!(s, "{}", d + 1);
            for v in mesh.cell(c) {
                let _ = write!(s, " {v}");
            }
            s.push('\n');
        }
        let _ = writeln!(s, "CELL_TYPES {nc}");
        let ty = if d == 2 { VTK_TRIANGLE } else { VTK_TETRA };
        for _ in 0..nc {
            let _ = writeln!(s, "{ty}");
        }
        if !self.point_scalars.is_empty() || !self.point_vectors.is_empty() {
            let _ = writeln!(s, "POINT_DATA {nv}");
            for (name, v) in &self.point_scalars {
                scalars(&mut s, name, v);
            }
            for (name, v) in &self.point_vectors {
                let _ = writeln!(s, "VECTORS {} double", sanitize(name));
                for x in v {
                    let _ = writeln!(s, "{} {} {}", num(x[0]), num(x[1]), num(x[2]));
                }
            }
        }
        if !self.cell_scalars.is_empty() {
            let _ = writeln!(s, "CELL_DATA {nc}");
            for (name, v) in &self.cell_scalars {
                scalars(&mut s, name, v);
            }
        }
        Ok(s)
    }

    pub fn write(&self, path: &Path, mesh: &SimplicialMesh, title: &str) -> Result<()> {
        std::fs::write(path, self.render(mesh, title)?).map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

fn check_len(name: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::Usage(format!(
            "array {name} has {got} entries, expected {want}"
        )));
    }
    Ok(())
}

/// VTK array names may not contain whitespace.
fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_whitespace() { '_' } else { c })
        .collect()
}

/// Shortest round-trip formatting (scientific for very small or large
/// magnitudes), with `-0` normalised and non-finite values written in a
/// form readers accept.
pub(crate) fn num(x: f64) -> String {
    if x == 0.0 {
        "0".into()
    } else if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else if (1e-5..1e16).contains(&x.abs()) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn scalars(s: &mut String, name: &str, v: &[f64]) {
    let _ = writeln!(
        s,
        "SCALARS {} double 1\nLOOKUP_TABLE default",
        sanitize(name)
    );
    for x in v {
        let _ = writeln!(s, "{}", num(*x));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_box_mesh, BoxDomain};

    #[test]
    fn two_triangle_file() {
        let m = build_box_mesh(BoxDomain::unit(2), &[1, 1]).unwrap();
        let s = VtkDataset::default()
            .point_scalar("eps", vec![1.0, 2.0, -0.0, 0.5])
            .cell_scalar("indicator", vec![0.25, 1e-20])
            .render(&m, "t")
            .unwrap();
        assert!(s.starts_with(
            "# vtk DataFile Version 3.0\nt\nASCII\nDATASET UNSTRUCTURED_GRID\nPOINTS 4 double\n"
        ));
        assert!(s.contains("CELLS 2 8\n3 "));
        assert!(s.contains("CELL_TYPES 2\n5\n5\n"));
        assert!(
            s.contains("POINT_DATA 4\nSCALARS eps double 1\nLOOKUP_TABLE default\n1\n2\n0\n0.5\n")
        );
        assert!(s.ends_with(
            "CELL_DATA 2\nSCALARS indicator double 1\nLOOKUP_TABLE default\n0.25\n1e-20\n"
        ));
    }

    #[test]
    fn tetra_type_and_length_check() {
        let m = build_box_mesh(BoxDomain::unit(3), &[1, 1, 1]).unwrap();
        let s = VtkDataset::default().render(&m, "x").unwrap();
        assert!(s.contains(&format!("CELL_TYPES {}\n10\n", m.n_cells())));
        assert!(VtkDataset::default()
            .cell_scalar("bad", vec![0.0])
            .render(&m, "x")
            .is_err());
    }
}
