use cip_core::driver::adaptive::initial_discretization;
use cip_core::driver::config::ExperimentConfig;
use cip_core::driver::synth::{generate_synthetic_data, synthesize_fine_trace, DataSource};
use cip_core::error::Error;

const BASE: &str = r#"
[domain]
resolution = [6, 6]
[time]
t_final = 1.0
steps = 20
[[target.inclusions]]
center = [0.5, 0.5]
width = 0.08
amplitude = 1.0
[data]
fine_factor = 2
seed = 3
"#;

fn config(overrides: &[&str]) -> ExperimentConfig {
    let o: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
    ExperimentConfig::parse(BASE, &o).unwrap()
}

#[test]
fn noise_level_matches_sigma() {
    let clean_cfg = config(&[]);
    let noisy_cfg = config(&["data.noise=0.03"]);
    let (mesh, grid) = initial_discretization(&clean_cfg).unwrap();
    let clean = generate_synthetic_data(&clean_cfg, &mesh, &grid).unwrap();
    let noisy = generate_synthetic_data(&noisy_cfg, &mesh, &grid).unwrap();
    let diff: f64 = clean
        .values()
        .iter()
        .zip(noisy.values())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let rel = diff / clean.norm();
    assert!((rel - 0.03).abs() <= 0.2 * 0.03, "relative noise {rel}");
}

#[test]
fn same_seed_is_bitwise_identical() {
    let cfg = config(&["data.noise=0.05"]);
    let (mesh, grid) = initial_discretization(&cfg).unwrap();
    let a = generate_synthetic_data(&cfg, &mesh, &grid).unwrap();
    let b = generate_synthetic_data(&cfg, &mesh, &grid).unwrap();
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(a.values()), bits(b.values()));
    let other = generate_synthetic_data(&config(&["data.noise=0.05", "data.seed=4"]), &mesh, &grid)
        .unwrap();
    assert_ne!(bits(a.values()), bits(other.values()));
}

#[test]
fn noiseless_data_is_the_resampled_fine_trace() {
    let cfg = config(&[]);
    let (mesh, grid) = initial_discretization(&cfg).unwrap();
    let fine = synthesize_fine_trace(&cfg).unwrap();
    assert_eq!(fine.mesh.n_cells(), 4 * mesh.n_cells());
    assert_eq!(fine.grid.n, 2 * grid.n);
    let expected = fine.trace.resample(&mesh, &grid).unwrap();
    let got = generate_synthetic_data(&cfg, &mesh, &grid).unwrap();
    assert_eq!(expected.values(), got.values());
    let source = DataSource::new(&cfg, &mesh, &grid).unwrap();
    assert_eq!(
        source.observations(&mesh, &grid).unwrap().values(),
        got.values()
    );
}

#[test]
fn target_reaching_the_collar_is_rejected() {
    let cfg = config(&["target.inclusions=[{center=[0.1,0.5],width=0.2,amplitude=1.0}]"]);
    let (mesh, grid) = initial_discretization(&cfg).unwrap();
    match generate_synthetic_data(&cfg, &mesh, &grid) {
        Err(Error::Config(msg)) => assert!(msg.contains("collar"), "{msg}"),
        other => panic!("expected a configuration error, got {other:?}"),
    }
}
