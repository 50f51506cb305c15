//! Numerical laboratory for Picard-iterated BSDEs with jumps on finite
//! scenario trees, with the path and measure metrics needed to study their
//! convergence under discretisation.

pub mod constants;
pub mod drivers;
pub mod error;
pub mod harness;
pub mod limits;
pub mod measures;
pub mod paths;
pub mod solver;

pub use error::{Error, Result};
