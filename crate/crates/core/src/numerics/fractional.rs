use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::diff::{try_differentiate_positive, DiffConfig};
use super::quadrature::{try_integrate, QuadratureConfig};
use crate::error::{Error, Result};

/// Relative position of the Caputo lower cut-off: the integral runs over
/// `[CUTOFF * t, t]`.
pub const CAPUTO_CUTOFF: f64 = 1e-6;

/// Half-order time derivative with its error accounting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FractionalEstimate {
    pub value: f64,
    /// Quadrature error estimate of the retained integral.
    pub error: f64,
    /// Bound on the piece `[0, delta]` that was discarded (zero for the
    /// Riemann-Liouville form, which keeps the whole range).
    pub truncation_bound: f64,
    pub delta: f64,
}

/// Caputo derivative of order 1/2 in time,
/// `(1/Γ(1/2)) ∫_0^t ∂_s q(x, s) (t - s)^(-1/2) ds`.
///
/// The endpoint singularity is removed by `s = t - u²`; the range near
/// `s = 0` is cut at `delta = 1e-6 t`, and the discarded piece is bounded by
/// assuming `|∂_s q| <= C s^(-1/2)` with `C` measured at `delta`.
pub fn caputo_half_time_derivative<Q>(
    q: Q,
    x: f64,
    t: f64,
    quad: &QuadratureConfig,
    diff: &DiffConfig,
) -> Result<FractionalEstimate>
where
    Q: Fn(f64, f64) -> Result<f64>,
{
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::domain(format!("Caputo derivative needs t > 0, got {t}")));
    }
    let delta = CAPUTO_CUTOFF * t;
    let dq = |s: f64| try_differentiate_positive(|r| q(x, r), s, 1, diff).map(|d| d.value);
    let upper = (t - delta).sqrt();
    let body = try_integrate(|u| dq(t - u * u).map(|v| 2.0 * v), 0.0, upper, quad)?;
    let c = dq(delta)?.abs() * delta.sqrt();
    let truncation_bound = 2.0 * c * delta.sqrt() / (t - delta).sqrt() / PI.sqrt();
    Ok(FractionalEstimate {
        value: body.value / PI.sqrt(),
        error: body.error / PI.sqrt(),
        truncation_bound,
        delta,
    })
}

/// `∫_0^t q(s) (t - s)^(-1/2) ds`, split at `t/2` with `s = (t/2) w⁴` below
/// (tames `s^(-a)` behavior at the origin) and `s = t - u²` above.
pub fn half_integral<Q>(q: Q, t: f64, quad: &QuadratureConfig) -> Result<f64>
where
    Q: Fn(f64) -> Result<f64>,
{
    let half = 0.5 * t;
    let lower = try_integrate(
        |w| {
            let w3 = w * w * w;
            let s = half * w3 * w;
            if s <= 0.0 {
                return Ok(0.0);
            }
            Ok(q(s)? * 4.0 * half * w3 / (t - s).sqrt())
        },
        0.0,
        1.0,
        quad,
    )?;
    let upper = try_integrate(|u| Ok(2.0 * q(t - u * u)?), 0.0, half.sqrt(), quad)?;
    Ok(lower.value + upper.value)
}

/// Riemann-Liouville derivative of order 1/2,
/// `(1/Γ(1/2)) d/dt ∫_0^t q(s)(t - s)^(-1/2) ds`.
///
/// Coincides with the Caputo form whenever `q(0+) = 0`, and stays finite for
/// integrands whose time derivative is not integrable at the origin.
pub fn riemann_liouville_half<Q>(
    q: Q,
    t: f64,
    quad: &QuadratureConfig,
    diff: &DiffConfig,
) -> Result<FractionalEstimate>
where
    Q: Fn(f64) -> Result<f64>,
{
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::domain(format!("half derivative needs t > 0, got {t}")));
    }
    let d = try_differentiate_positive(|r| half_integral(&q, r, quad), t, 1, diff)?;
    Ok(FractionalEstimate {
        value: d.value / PI.sqrt(),
        error: d.error / PI.sqrt(),
        truncation_bound: 0.0,
        delta: 0.0,
    })
}
