//! The law of `C1(|C2(t)|)` and the two constructions that share it.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numerics::{integrate, integrate_halfline_with, Estimate, QuadratureConfig};

const INV_PI2: f64 = 1.0 / (PI * PI);

/// Relative radius around `|x| = t` inside which the closed form is replaced
/// by its expansion.
pub const DIAGONAL_RADIUS: f64 = 1e-6;

/// The integrands here are positive, so only the relative tolerance is
/// meaningful; this keeps tiny tail values accurate.
fn relative(quad: &QuadratureConfig) -> QuadratureConfig {
    quad.with_abs_tol(f64::MIN_POSITIVE)
}

fn check(x: f64, t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::domain(format!("density needs t > 0, got {t}")));
    }
    if x == 0.0 {
        return Err(Error::SingularPoint { x });
    }
    if !x.is_finite() {
        return Err(Error::domain(format!("density at non-finite point {x}")));
    }
    Ok(())
}

/// `(2t / (π² (t² - x²))) log(t / |x|)`, written in `u = (|x| - t)/t` as
/// `(2 / (π² t)) log1p(u) / (u (2 + u))`.
pub(crate) fn cc_closed_form(x: f64, t: f64) -> Estimate {
    let u = (x.abs() - t) / t;
    let ratio = if u.abs() < DIAGONAL_RADIUS {
        (1.0 - u / 2.0 + u * u / 3.0) / (2.0 + u)
    } else {
        u.ln_1p() / (u * (2.0 + u))
    };
    let value = 2.0 * INV_PI2 / t * ratio;
    Estimate {
        value,
        error: 8.0 * f64::EPSILON * value,
    }
}

/// Closed-form density of `C1(|C2(t)|)`.
pub fn density_cc_closed(x: f64, t: f64) -> Result<f64> {
    check(x, t)?;
    Ok(cc_closed_form(x, t).value)
}

/// The same density as the subordination integral
/// `(2/π²) ∫_0^∞ s/(s² + x²) · t/(t² + s²) ds`.
pub fn density_cc_integral(x: f64, t: f64) -> Result<f64> {
    check(x, t)?;
    let ax = x.abs();
    let r = integrate_halfline_with(
        |s| 2.0 * INV_PI2 * s / (s * s + ax * ax) * t / (t * t + s * s),
        &[ax, t],
        &relative(&QuadratureConfig::default()),
    )?;
    Ok(r.value)
}

/// The same density as `(1/π²) E[t / (x² Z1 + t² Z2)]` with independent
/// unit exponentials, by iterated quadrature over both weights.
pub fn density_cc_expweights(x: f64, t: f64, quad: &QuadratureConfig) -> Result<f64> {
    check(x, t)?;
    let x2 = x * x;
    let t2 = t * t;
    let inner = |w: f64| -> Result<f64> {
        // the z-integrand bends at z = t² w / x²
        let bend = t2 * w / x2;
        Ok(integrate_halfline_with(|z| (-z).exp() * t / (x2 * z + t2 * w), &[bend, 1.0], &relative(quad))?.value)
    };
    let r = crate::numerics::try_integrate_halfline_with(|w| Ok((-w).exp() * inner(w)?), &[x2 / t2, 1.0], &relative(quad))?;
    Ok(INV_PI2 * r.value)
}

/// Density of `C1(√(2t)) C2(√(2t)) / 2 = t U V` with standard Cauchy `U`, `V`:
/// `(2/(π² t)) ∫_0^∞ u / ((u² + r²)(1 + u²)) du` with `r = |w|/t`.
pub(crate) fn half_product_density(w: f64, t: f64, quad: &QuadratureConfig) -> Result<Estimate> {
    check(w, t)?;
    let r = w.abs() / t;
    let i = integrate_halfline_with(|u| u / ((u * u + r * r) * (1.0 + u * u)), &[r, 1.0], &relative(quad))?;
    let c = 2.0 * INV_PI2 / t;
    Ok(Estimate {
        value: c * i.value,
        error: c * i.error,
    })
}

/// `P(0 < tUV <= w)` = `(2/π²) ∫_0^∞ atan(r/u) / (1 + u²) du`.
pub(crate) fn half_product_half_mass(w: f64, t: f64, quad: &QuadratureConfig) -> Result<Estimate> {
    let r = w / t;
    let i = integrate_halfline_with(|u| (r / u).atan() / (1.0 + u * u), &[r, 1.0], &relative(quad))?;
    Ok(Estimate {
        value: 2.0 * INV_PI2 * i.value,
        error: 2.0 * INV_PI2 * i.error,
    })
}

/// Density of `1 / C1(|C2(1/t)|)`:
/// `(2/π²) ∫_0^∞ s t / ((w² s² + 1)(1 + t² s²)) ds`.
pub(crate) fn reciprocal_density(w: f64, t: f64, quad: &QuadratureConfig) -> Result<Estimate> {
    check(w, t)?;
    let w2 = w * w;
    let i = integrate_halfline_with(
        |s| s * t / ((w2 * s * s + 1.0) * (1.0 + t * t * s * s)),
        &[1.0 / w.abs(), 1.0 / t],
        &relative(quad),
    )?;
    Ok(Estimate {
        value: 2.0 * INV_PI2 * i.value,
        error: 2.0 * INV_PI2 * i.error,
    })
}

/// `P(0 < 1/C1(|C2(1/t)|) <= w)` = `(2/π²) ∫_0^∞ atan(w s) t / (1 + t² s²) ds`.
pub(crate) fn reciprocal_half_mass(w: f64, t: f64, quad: &QuadratureConfig) -> Result<Estimate> {
    let i = integrate_halfline_with(|s| (w * s).atan() * t / (1.0 + t * t * s * s), &[1.0 / w, 1.0 / t], &relative(quad))?;
    Ok(Estimate {
        value: 2.0 * INV_PI2 * i.value,
        error: 2.0 * INV_PI2 * i.error,
    })
}

/// `∫_0^x q(y, t) dy` for the closed-form density.
pub(crate) fn cc_half_mass(x: f64, t: f64, quad: &QuadratureConfig) -> Result<Estimate> {
    let q = |y: f64| cc_closed_form(y, t).value;
    if x <= t {
        // y = x w² tames the logarithmic singularity at 0
        integrate(|w| if w == 0.0 { 0.0 } else { 2.0 * x * w * q(x * w * w) }, 0.0, 1.0, &relative(quad))
    } else {
        let tail = integrate_halfline_with(|s| q(x + s), &[t, x], &relative(quad))?;
        Ok(Estimate {
            value: 0.5 - tail.value,
            error: tail.error,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_limit() {
        for t in [0.5, 1.0, 3.0] {
            let exact = INV_PI2 / t;
            for u in [0.0, 1e-7, -1e-7, 2e-6] {
                let v = density_cc_closed(t * (1.0 + u), t).unwrap();
                // q = (1/(π² t)) (1 - u + O(u²)) near the diagonal
                assert!((v - exact * (1.0 - u)).abs() < 1e-11 * exact, "{u}: {v}");
            }
        }
    }

    #[test]
    fn expansion_matches_logarithm_at_switch() {
        let t = 1.7;
        for u in [0.999e-6, -0.999e-6] {
            let series = density_cc_closed(t * (1.0 + u), t).unwrap();
            let u = (t * (1.0 + u) - t) / t;
            let direct = 2.0 * INV_PI2 / t * u.ln_1p() / (u * (2.0 + u));
            assert!((series - direct).abs() < 1e-9 * direct, "{series} vs {direct}");
        }
    }

    #[test]
    fn three_forms_agree() {
        let q = QuadratureConfig::default();
        for (x, t) in [(0.5, 1.0), (1.0, 2.0), (2.0, 1.0), (-3.0, 0.4)] {
            let a = density_cc_closed(x, t).unwrap();
            let b = density_cc_integral(x, t).unwrap();
            let c = density_cc_expweights(x, t, &q).unwrap();
            let d = half_product_density(x, t, &q).unwrap().value;
            let e = reciprocal_density(x, t, &q).unwrap().value;
            for v in [b, c, d, e] {
                assert!((v - a).abs() < 1e-8 * a, "({x},{t}): {v} vs {a}");
            }
        }
    }

    #[test]
    fn half_masses_agree() {
        let q = QuadratureConfig::default();
        for (x, t) in [(0.3, 1.0), (1.0, 1.0), (5.0, 2.0), (400.0, 0.5)] {
            let a = cc_half_mass(x, t, &q).unwrap().value;
            let b = half_product_half_mass(x, t, &q).unwrap().value;
            let c = reciprocal_half_mass(x, t, &q).unwrap().value;
            assert!((a - b).abs() < 1e-10 && (a - c).abs() < 1e-10, "({x},{t}): {a} {b} {c}");
        }
    }

    #[test]
    fn singular_origin() {
        assert!(matches!(density_cc_closed(0.0, 1.0), Err(Error::SingularPoint { .. })));
        assert!(density_cc_integral(1.0, 0.0).is_err());
    }
}
