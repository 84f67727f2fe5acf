//! Experiment configuration, synthetic data, the adaptive loop and output.

pub mod adaptive;
pub mod config;
pub mod export;
pub mod gradcheck;
pub mod synth;
pub mod vtk;

pub use adaptive::{reconstruct_adaptive, CycleSummary, ReconstructionState};
pub use config::ExperimentConfig;
pub use export::{export_state, Manifest};
pub use gradcheck::{gradient_check, gradient_check_cmd, CheckPoint, GradCheckReport};
pub use synth::{generate_synthetic_data, target_permittivity};
