//! Numerical verification of the governing equations.
//!
//! Each registry entry names one equation together with the density it
//! governs, a default grid and a tolerance. Strong-form residuals are
//! assembled term by term: spatial derivatives come from the density module
//! (closed form or differentiated under the integral sign), time derivatives
//! from Richardson-extrapolated finite differences. Delta-forced equations are
//! additionally checked in weak form against a smooth test function.

mod registry;
mod strong;
mod weak;

pub use registry::{equation_registry, lookup, DeltaForcing, EquationSpec, EquationTag, Forcing, SingularLocus};
pub use strong::{
    cauchy_wave_second_derivatives, fractional_residual, run_registry, scaling_solution_check, strong_residual,
    FractionalMethod, FractionalReport, GridSummary, PdeResidualReport, PointResidual, Term, TermMagnitude, Verdict,
};
pub use weak::{weak_delta_residual, TestFunction, WeakReport};

use crate::numerics::{DiffConfig, QuadratureConfig};

/// Quadrature used for spatial derivatives inside residual checks.
pub fn space_quadrature() -> QuadratureConfig {
    QuadratureConfig {
        rel_tol: 1e-11,
        abs_tol: 1e-14,
        max_subdivisions: 4000,
    }
}

/// Tighter quadrature for densities that are differentiated numerically in
/// time, where sample noise is amplified by the stencil.
pub fn time_quadrature() -> QuadratureConfig {
    QuadratureConfig {
        rel_tol: 1e-13,
        abs_tol: 1e-15,
        max_subdivisions: 4000,
    }
}

/// Finite-difference settings for time derivatives: a coarse first step with
/// four Richardson levels keeps both truncation and noise amplification low.
pub fn time_diff() -> DiffConfig {
    DiffConfig {
        base_step: 1e-2,
        richardson_levels: 4,
        max_order: 4,
    }
}
