//! Computational machinery for integrable hierarchies: exact hierarchy
//! recursion over jet variables, Lax-pair assembly and residual checks,
//! simple-pole dressing, truncated loop factorization with the characteristic
//! initial value solver, finite-type harmonic maps, and geometric extractors.

pub mod algebra;
pub mod birkhoff;
pub mod dressing;
pub mod elliptic;
pub mod error;
pub mod geometry;
pub mod gaussrat;
pub mod grid;
pub mod io;
pub mod jetcalc;
pub mod laurent;
pub mod laxflow;
pub mod tolerances;
pub mod matrix;

pub use error::{Error, Result};
