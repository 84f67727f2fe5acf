//! Permittivity reconstruction from time-resolved boundary observations of a
//! vector wave field, with residual-based a posteriori error indicators and
//! adaptive mesh refinement.

// `!(x > 0.0)` rejects NaN on purpose; index loops mirror the formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod driver;
pub mod error;
pub mod estimators;
pub mod linalg;
pub mod mesh;
pub mod objective;
pub mod pde;
pub mod quadrature;
pub mod spaces;

pub use error::{Error, Result};
