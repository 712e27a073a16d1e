//! Measurable Finsler structures on boxes in `R^n`: evaluation, dual norms,
//! intrinsic distances on grids, metric derivatives, and numerical checks of
//! the pointwise Lipschitz constant against `F(x, du(x))`.

pub mod axioms;
pub mod catalog;
pub mod distance;
pub mod dual;
pub mod error;
pub mod geom;
pub mod grid;
pub mod harness;
pub mod linalg;
pub mod structure;
pub mod tolerances;

pub use error::{Error, Result};
pub use geom::{BoxDomain, Point, Vector};
pub use structure::{eval_finsler, FinslerStructure, NormField, Regularity};
