//! Discrete direct and adjoint wave solvers and the weak forms they satisfy.

mod assembly;
mod data;
mod solve;
mod weak;

pub use assembly::{assemble, AssembledSystem};
pub(crate) use assembly::{boundary_misfit, check_eps, eps_quadrature};
pub use data::{NeumannData, ObservationData, TimeProfile, TraceLayout};
pub use solve::{adjoint_solve, direct_solve, WaveSolver};
pub use weak::{residual_a, residual_d, weak_form_a, weak_form_d, WeakResidual};

#[cfg(test)]
mod tests;
