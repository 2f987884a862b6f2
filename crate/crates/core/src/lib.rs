//! Entropic bridges on grid and Gaussian backends, with numerical checks of
//! the moment, coupling and decay inequalities that govern them.

pub mod bounds;
pub mod cli;
pub mod error;
pub mod linalg;
pub mod measures;
pub mod metrics;
pub mod model;
pub mod moments;
pub mod quadratic;
pub mod sinkhorn;
pub mod suites;

pub use error::{Error, Result};
