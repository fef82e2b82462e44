//! Numerical laboratory for iterated and subordinated fractional Brownian
//! motions and Cauchy processes: densities, samplers, governing-equation
//! residual checks and distributional identity tests.

pub mod analytics;
pub mod densities;
pub mod error;
pub mod identities;
pub mod model;
pub mod numerics;
pub mod parallel;
pub mod pdecheck;
pub mod report;
pub mod sampling;
pub mod specfun;

pub use error::{Error, Result};
pub use model::{Hurst, ProcessModel};
