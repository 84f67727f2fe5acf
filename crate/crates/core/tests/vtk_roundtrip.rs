use cip_core::driver::config::ExperimentConfig;
use cip_core::driver::export::MANIFEST_FILE;
use cip_core::driver::{export_state, reconstruct_adaptive, ReconstructionState};
use std::collections::HashMap;
use std::path::Path;

const CFG: &str = r#"
[domain]
resolution = [4, 4]
[time]
t_final = 1.0
steps = 10
[[target.inclusions]]
center = [0.5, 0.5]
width = 0.06
amplitude = 1.0
[optimizer]
max_iterations = 2
[adaptivity]
max_cycles = 1
[output]
frames = 3
"#;

/// Minimal reader for the legacy ASCII unstructured-grid files we write.
#[derive(Debug, Default)]
struct Vtk {
    points: Vec<[f64; 3]>,
    cells: Vec<Vec<usize>>,
    types: Vec<u8>,
    point_scalars: HashMap<String, Vec<f64>>,
    point_vectors: HashMap<String, Vec<[f64; 3]>>,
    cell_scalars: HashMap<String, Vec<f64>>,
}

fn parse_vtk(text: &str) -> Vtk {
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# vtk DataFile Version 3.0"));
    lines.next();
    assert_eq!(lines.next(), Some("ASCII"));
    assert_eq!(lines.next(), Some("DATASET UNSTRUCTURED_GRID"));
    let f = |s: &str| s.parse::<f64>().unwrap();
    let mut out = Vtk::default();
    let mut on_cells = false;
    while let Some(line) = lines.next() {
        let w: Vec<&str> = line.split_whitespace().collect();
        match w[0] {
            "POINTS" => {
                for _ in 0..w[1].parse().unwrap() {
                    let p: Vec<f64> = lines.next().unwrap().split_whitespace().map(f).collect();
                    out.points.push([p[0], p[1], p[2]]);
                }
            }
            "CELLS" => {
                for _ in 0..w[1].parse().unwrap() {
                    let c: Vec<usize> = lines
                        .next()
                        .unwrap()
                        .split_whitespace()
                        .map(|x| x.parse().unwrap())
                        .collect();
                    assert_eq!(c[0] + 1, c.len());
                    out.cells.push(c[1..].to_vec());
                }
            }
            "CELL_TYPES" => {
                for _ in 0..w[1].parse().unwrap() {
                    out.types.push(lines.next().unwrap().parse().unwrap());
                }
            }
            "POINT_DATA" => on_cells = false,
            "CELL_DATA" => on_cells = true,
            "SCALARS" => {
                assert_eq!(lines.next(), Some("LOOKUP_TABLE default"));
                let n = if on_cells {
                    out.cells.len()
                } else {
                    out.points.len()
                };
                let v: Vec<f64> = (0..n).map(|_| f(lines.next().unwrap())).collect();
                let map = if on_cells {
                    &mut out.cell_scalars
                } else {
                    &mut out.point_scalars
                };
                map.insert(w[1].to_string(), v);
            }
            "VECTORS" => {
                let v = (0..out.points.len())
                    .map(|_| {
                        let p: Vec<f64> = lines.next().unwrap().split_whitespace().map(f).collect();
                        [p[0], p[1], p[2]]
                    })
                    .collect();
                out.point_vectors.insert(w[1].to_string(), v);
            }
            other => panic!("unexpected line {other}"),
        }
    }
    out
}

fn one_cycle() -> ReconstructionState {
    let cfg = ExperimentConfig::parse(CFG, &[]).unwrap();
    reconstruct_adaptive(&cfg, |_| Ok(())).unwrap()
}

fn read(dir: &Path, file: &str) -> String {
    std::fs::read_to_string(dir.join(file)).unwrap()
}

#[test]
fn exported_fields_read_back() {
    let state = one_cycle();
    let tmp = tempfile::tempdir().unwrap();
    let manifest = export_state(&state, tmp.path(), 3).unwrap();
    let mesh = &state.mesh;
    let nv = mesh.n_vertices();

    let eps = parse_vtk(&read(tmp.path(), "eps.vtk"));
    assert_eq!(eps.points.len(), nv);
    assert_eq!(eps.cells.len(), mesh.n_cells());
    assert!(eps.types.iter().all(|&t| t == 5));
    for (c, cell) in eps.cells.iter().enumerate() {
        assert_eq!(cell.as_slice(), mesh.cell(c));
    }
    for (p, q) in eps.points.iter().zip(mesh.vertices()) {
        assert_eq!(p, q);
    }
    assert_eq!(eps.point_scalars["eps"], state.eps.values()[..nv]);

    let est = parse_vtk(&read(tmp.path(), "estimate.vtk"));
    assert_eq!(
        est.cell_scalars["indicator"],
        state.estimate.indicators.values
    );
    assert_eq!(est.cell_scalars.len(), 7);

    let frames: Vec<_> = manifest
        .entries
        .iter()
        .filter(|e| e.file.starts_with("state_"))
        .collect();
    assert_eq!(frames.len(), 3);
    let last = parse_vtk(&read(tmp.path(), &format!("state_{:05}.vtk", state.grid.n)));
    for v in 0..nv {
        assert_eq!(last.point_vectors["E"][v], state.e.value(state.grid.n, v));
        assert_eq!(
            last.point_vectors["lambda"][v],
            state.lambda.value(state.grid.n, v)
        );
    }
}

#[test]
fn manifest_lists_every_file_and_reexport_is_identical() {
    let state = one_cycle();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let manifest = export_state(&state, a.path(), 2).unwrap();
    export_state(&state, b.path(), 2).unwrap();
    assert!(manifest.entries.len() >= 4);

    let mut rdr = csv::Reader::from_path(a.path().join(MANIFEST_FILE)).unwrap();
    let listed: Vec<String> = rdr.records().map(|r| r.unwrap()[0].to_string()).collect();
    let files: Vec<String> = manifest.entries.iter().map(|e| e.file.clone()).collect();
    assert_eq!(listed, files);

    let mut on_disk: Vec<String> = std::fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|f| f != MANIFEST_FILE)
        .collect();
    on_disk.sort();
    let mut sorted = files.clone();
    sorted.sort();
    assert_eq!(on_disk, sorted);

    for f in files
        .iter()
        .chain(std::iter::once(&MANIFEST_FILE.to_string()))
    {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
            "{f} differs"
        );
    }
}
