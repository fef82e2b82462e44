//! Pointwise marginal densities and distribution functions.
//!
//! Closed forms are used where they exist (Gaussian, Cauchy, the `K0` law of
//! `J^1`, the law of `C1(|C2(t)|)`); every other model is a scale mixture
//! `2 ∫_0^∞ K(x; s) w(s) ds` evaluated by adaptive quadrature, with
//! `x`-derivatives taken under the integral sign on the closed-form kernel.

mod cauchy;
mod law;

use serde::{Deserialize, Serialize};

pub use cauchy::{density_cc_closed, density_cc_expweights, density_cc_integral, DIAGONAL_RADIUS};

use crate::error::{Error, Result};
use crate::model::ProcessModel;
use crate::numerics::{try_differentiate_positive, Derivative, DiffConfig, Estimate, QuadratureConfig};
use law::Law;

/// A model together with the numerical settings used to evaluate its law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityEvaluator {
    pub model: ProcessModel,
    pub quad: QuadratureConfig,
    pub diff: DiffConfig,
}

impl DensityEvaluator {
    /// Fails with `Unsupported` for models without an implemented density.
    pub fn new(model: ProcessModel) -> Result<Self> {
        model.validate()?;
        if !has_density(&model) {
            return Err(Error::Unsupported(format!("no density implemented for {model}")));
        }
        Ok(DensityEvaluator {
            model,
            quad: QuadratureConfig::default(),
            diff: DiffConfig::default(),
        })
    }

    pub fn with_quadrature(mut self, quad: QuadratureConfig) -> Self {
        self.quad = quad;
        self
    }

    pub fn with_diff(mut self, diff: DiffConfig) -> Self {
        self.diff = diff;
        self
    }

    fn law(&self, t: f64) -> Result<Law> {
        self.quad.validate()?;
        Law::for_model(&self.model, t)
    }

    pub fn density(&self, x: f64, t: f64) -> Result<Estimate> {
        self.law(t)?.density(x, &self.quad)
    }

    /// `∂ⁿ/∂xⁿ` of the density for `n <= 4`.
    pub fn density_dx(&self, x: f64, t: f64, order: usize) -> Result<Estimate> {
        self.law(t)?.derivative(x, order, &self.quad)
    }

    /// `∂ⁿ/∂tⁿ` of the density by finite differences in `t`.
    pub fn density_dt(&self, x: f64, t: f64, order: usize) -> Result<Derivative> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::domain(format!("density needs t > 0, got {t}")));
        }
        try_differentiate_positive(|s| Ok(self.density(x, s)?.value), t, order, &self.diff)
    }

    /// `∂ⁿ/∂tⁿ` of the `m`-th `x`-derivative.
    pub fn density_dx_dt(&self, x: f64, t: f64, x_order: usize, t_order: usize) -> Result<Derivative> {
        try_differentiate_positive(|s| Ok(self.density_dx(x, s, x_order)?.value), t, t_order, &self.diff)
    }

    pub fn cdf(&self, x: f64, t: f64) -> Result<Estimate> {
        self.law(t)?.cdf(x, &self.quad)
    }

    /// `P(X > x)` for `x > 0`, without the cancellation of `1 - cdf`.
    pub fn upper_tail(&self, x: f64, t: f64) -> Result<Estimate> {
        if !(x > 0.0) {
            return Err(Error::domain(format!("upper tail needs x > 0, got {x}")));
        }
        self.law(t)?.upper_tail(x, &self.quad)
    }

    /// Whether the `order`-th `x`-derivative blows up at the origin.
    pub fn singular_at_origin(&self, order: usize) -> bool {
        Law::for_model(&self.model, 1.0).map_or(true, |l| l.singular_at_origin(order))
    }
}

/// Whether [`density`] is implemented for the model.
pub fn has_density(model: &ProcessModel) -> bool {
    !matches!(model, ProcessModel::WeightedJ { n, .. } if *n > law::MAX_WEIGHTED_DEPTH)
}

/// Marginal density of `model` at `(x, t)` with default quadrature.
pub fn density(model: &ProcessModel, x: f64, t: f64) -> Result<f64> {
    Ok(Law::for_model(model, t)?.density(x, &QuadratureConfig::default())?.value)
}

/// `P(X(t) <= x)`.
pub fn cdf(model: &ProcessModel, x: f64, t: f64) -> Result<f64> {
    Ok(Law::for_model(model, t)?.cdf(x, &QuadratureConfig::default())?.value)
}
