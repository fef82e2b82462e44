//! Quadrature, finite differences, half-order time derivatives and the
//! spectral `|β|` operator.

mod diff;
mod fractional;
mod quadrature;
mod spectral;

pub use diff::{
    differentiate, differentiate_positive, try_differentiate, try_differentiate_positive, Derivative,
    DiffConfig,
};
pub use fractional::{
    caputo_half_time_derivative, half_integral, riemann_liouville_half, FractionalEstimate, CAPUTO_CUTOFF,
};
pub use quadrature::{
    guarded, integrate, integrate_from, integrate_halfline, integrate_halfline_with, integrate_real_line,
    integrate_with_points, try_integrate, try_integrate_halfline, try_integrate_halfline_with,
    try_integrate_with_points, QuadratureConfig,
};
pub use spectral::{
    fourier_multiplier, riesz_modulus_derivative, riesz_modulus_derivative_periodic, Grid1D, MAX_TAIL_FRACTION,
};

use serde::{Deserialize, Serialize};

/// A computed value with an absolute error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate { value, error: 0.0 }
    }
}
