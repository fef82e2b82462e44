//! Marginal laws as a small algebra: elementary laws plus scale mixtures
//! `2 ∫_0^∞ K(x; s) w(s) ds` of a kernel against the density `w` of an
//! inner law.

use std::f64::consts::{FRAC_1_PI, PI};

use rustfft::num_complex::Complex64;
use statrs::function::erf::{erf, erfc};

use super::cauchy;
use crate::error::{Error, Result};
use crate::model::ProcessModel;
use crate::numerics::{
    try_integrate, try_integrate_halfline_with, Estimate, QuadratureConfig,
};
use crate::specfun::{bessel_k0, k0_derivative};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Conditional law of the outer process given the inner value `s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Kernel {
    /// Centered Gaussian with variance `c s^p`.
    Gaussian { c: f64, p: f64 },
    /// Cauchy with scale `s`.
    Cauchy,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Law {
    Gaussian { var: f64 },
    Cauchy { scale: f64 },
    /// `K0(|x|/a) / (π a)`, the law of a product of two centered Gaussians
    /// with standard deviations whose product is `a`.
    BesselK0 { scale: f64 },
    /// `C1(|C2(t)|)` in closed form.
    CauchyOfCauchy { t: f64 },
    HalfProduct { t: f64 },
    Reciprocal { t: f64 },
    Mixture { kernel: Kernel, inner: Box<Law> },
}

fn gaussian_mixture(c: f64, p: f64, inner: Law) -> Law {
    Law::Mixture {
        kernel: Kernel::Gaussian { c, p },
        inner: Box::new(inner),
    }
}

fn product_law(n: usize, sd: f64) -> Law {
    match n {
        1 => Law::Gaussian { var: sd * sd },
        2 => Law::BesselK0 { scale: sd * sd },
        _ => gaussian_mixture(sd * sd, 2.0, product_law(n - 1, sd)),
    }
}

fn chain_law(hursts: &[f64], t: f64) -> Law {
    match hursts {
        [h] => Law::Gaussian { var: t.powf(2.0 * h) },
        [h, rest @ ..] => gaussian_mixture(1.0, 2.0 * h, chain_law(rest, t)),
        [] => unreachable!("validated chain"),
    }
}

/// Largest `n` for which `WeightedJ(n, H)` has a density here.
pub(crate) const MAX_WEIGHTED_DEPTH: usize = 2;

impl Law {
    pub(crate) fn for_model(model: &ProcessModel, t: f64) -> Result<Law> {
        model.validate()?;
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::domain(format!("density needs t > 0, got {t}")));
        }
        Ok(match model {
            ProcessModel::FBm { h } => Law::Gaussian {
                var: t.powf(2.0 * h.value()),
            },
            ProcessModel::IteratedFBm { outer, inner } => chain_law(&[outer.value(), inner.value()], t),
            ProcessModel::IteratedFBmChain { hursts } => {
                chain_law(&hursts.iter().map(|h| h.value()).collect::<Vec<_>>(), t)
            }
            ProcessModel::WeightedJ { n, h } => {
                let a = t.powf(h.value());
                match n {
                    1 => Law::BesselK0 { scale: a },
                    2 => gaussian_mixture(1.0, 2.0, Law::BesselK0 { scale: a }),
                    _ => {
                        return Err(Error::Unsupported(format!(
                            "no density for WeightedJ with n = {n} > {MAX_WEIGHTED_DEPTH}; use sampling"
                        )))
                    }
                }
            }
            ProcessModel::ScaledIterated { k, h } => gaussian_mixture(
                t.powf(2.0 * k),
                1.0,
                Law::Gaussian {
                    var: t.powf(2.0 * h.value()),
                },
            ),
            ProcessModel::ProductFBm { n, h } => product_law(*n, t.powf(h.value() / *n as f64)),
            ProcessModel::Cauchy => Law::Cauchy { scale: t },
            ProcessModel::CauchyOfFBm { h } => Law::Mixture {
                kernel: Kernel::Cauchy,
                inner: Box::new(Law::Gaussian {
                    var: t.powf(2.0 * h.value()),
                }),
            },
            ProcessModel::BmOfCauchy => gaussian_mixture(1.0, 1.0, Law::Cauchy { scale: t }),
            ProcessModel::CauchyOfCauchy => Law::CauchyOfCauchy { t },
            ProcessModel::HalfProductCauchy => Law::HalfProduct { t },
            ProcessModel::ReciprocalCC => Law::Reciprocal { t },
        })
    }

    /// Typical spatial scale, used to place quadrature breakpoints.
    pub(crate) fn scale(&self) -> f64 {
        match self {
            Law::Gaussian { var } => var.sqrt(),
            Law::Cauchy { scale } | Law::BesselK0 { scale } => *scale,
            Law::CauchyOfCauchy { t } | Law::HalfProduct { t } | Law::Reciprocal { t } => *t,
            Law::Mixture { kernel, inner } => {
                let s = inner.scale();
                match kernel {
                    Kernel::Gaussian { c, p } => (c * s.powf(*p)).sqrt(),
                    Kernel::Cauchy => s,
                }
            }
        }
    }

    /// Whether the `order`-th derivative of the density is unbounded (or
    /// undefined) at `x = 0`.
    pub(crate) fn singular_at_origin(&self, order: usize) -> bool {
        match self {
            Law::Gaussian { .. } | Law::Cauchy { .. } => false,
            Law::BesselK0 { .. } | Law::CauchyOfCauchy { .. } | Law::HalfProduct { .. } | Law::Reciprocal { .. } => {
                true
            }
            Law::Mixture { kernel, .. } => match kernel {
                Kernel::Cauchy => true,
                // ∂ⁿK(0; s) ~ s^{-p(n+1)/2}, integrable at 0 iff the power is < 1
                Kernel::Gaussian { p, .. } => p * (order as f64 + 1.0) / 2.0 >= 1.0,
            },
        }
    }

    /// Relative accuracy of [`Law::density`], which bounds how much error an
    /// outer mixture inherits from this law.
    fn relative_accuracy(&self, quad: &QuadratureConfig) -> f64 {
        match self {
            Law::Gaussian { .. } | Law::Cauchy { .. } => 4.0 * f64::EPSILON,
            Law::BesselK0 { .. } | Law::CauchyOfCauchy { .. } => 16.0 * f64::EPSILON,
            Law::HalfProduct { .. } | Law::Reciprocal { .. } | Law::Mixture { .. } => quad.rel_tol,
        }
    }

    pub(crate) fn density(&self, x: f64, quad: &QuadratureConfig) -> Result<Estimate> {
        self.derivative(x, 0, quad)
    }

    /// `d^n/dx^n` of the density; `n = 0` is the density itself.
    pub(crate) fn derivative(&self, x: f64, n: usize, quad: &QuadratureConfig) -> Result<Estimate> {
        if !x.is_finite() {
            return Err(Error::domain(format!("density at non-finite point {x}")));
        }
        if n > 4 {
            return Err(Error::InvalidParameter(format!("x-derivative order {n} > 4")));
        }
        if x == 0.0 && self.singular_at_origin(n) {
            return Err(Error::SingularPoint { x });
        }
        match self {
            Law::Gaussian { var } => Ok(Estimate::exact(gaussian_kernel_derivative(x, var.sqrt(), n))),
            Law::Cauchy { scale } => Ok(Estimate::exact(cauchy_kernel_derivative(x, *scale, n))),
            Law::BesselK0 { scale } => {
                let z = x.abs() / scale;
                let sign = if x < 0.0 && n % 2 == 1 { -1.0 } else { 1.0 };
                let norm = PI * scale.powi(n as i32 + 1);
                if n == 0 {
                    let r = bessel_k0(z)?;
                    return Ok(Estimate {
                        value: r.value / norm,
                        error: r.est_abs_error / norm,
                    });
                }
                let v = sign * k0_derivative(z, n)? / norm;
                Ok(Estimate {
                    value: v,
                    error: 16.0 * f64::EPSILON * v.abs(),
                })
            }
            Law::CauchyOfCauchy { t } | Law::HalfProduct { t } | Law::Reciprocal { t } => {
                if n == 0 {
                    return self.elementary_density(x, quad);
                }
                // all three share the Cauchy-kernel mixture against a Cauchy clock,
                // which is differentiated under the integral sign
                let mixture = Law::Mixture {
                    kernel: Kernel::Cauchy,
                    inner: Box::new(Law::Cauchy { scale: *t }),
                };
                mixture.derivative(x, n, quad)
            }
            Law::Mixture { kernel, inner } => {
                if x == 0.0 && n % 2 == 1 {
                    return Ok(Estimate::exact(0.0));
                }
                let peak = match kernel {
                    Kernel::Gaussian { c, p } => (x * x / c).powf(1.0 / p),
                    Kernel::Cauchy => x.abs(),
                };
                let integrand = |s: f64| -> Result<f64> {
                    let k = match kernel {
                        Kernel::Gaussian { c, p } => gaussian_kernel_derivative(x, (c * s.powf(*p)).sqrt(), n),
                        Kernel::Cauchy => cauchy_kernel_derivative(x, s, n),
                    };
                    if k == 0.0 {
                        return Ok(0.0);
                    }
                    Ok(2.0 * k * inner.density(s, quad)?.value)
                };
                let r = mixture_integral(integrand, peak, inner.scale(), quad)?;
                Ok(Estimate {
                    value: r.value,
                    error: r.error + inner.relative_accuracy(quad) * r.value.abs(),
                })
            }
        }
    }

    fn elementary_density(&self, x: f64, quad: &QuadratureConfig) -> Result<Estimate> {
        match self {
            Law::CauchyOfCauchy { t } => Ok(cauchy::cc_closed_form(x, *t)),
            Law::HalfProduct { t } => cauchy::half_product_density(x, *t, quad),
            Law::Reciprocal { t } => cauchy::reciprocal_density(x, *t, quad),
            _ => unreachable!("only called for the Cauchy-pair laws"),
        }
    }

    pub(crate) fn cdf(&self, x: f64, quad: &QuadratureConfig) -> Result<Estimate> {
        if x.is_nan() {
            return Err(Error::domain("CDF at NaN"));
        }
        if x == f64::INFINITY {
            return Ok(Estimate::exact(1.0));
        }
        if x == f64::NEG_INFINITY {
            return Ok(Estimate::exact(0.0));
        }
        if x == 0.0 {
            return Ok(Estimate::exact(0.5));
        }
        let sign = x.signum();
        let ax = x.abs();
        // mass of (0, |x|)
        let half = match self {
            Law::Gaussian { var } => Estimate::exact(0.5 * erf(ax / (2.0 * var).sqrt())),
            Law::Cauchy { scale } => Estimate::exact(FRAC_1_PI * (ax / scale).atan()),
            Law::BesselK0 { scale } => {
                let i = k0_integral(ax / scale, quad)?;
                Estimate {
                    value: i.value / PI,
                    error: i.error / PI,
                }
            }
            Law::CauchyOfCauchy { t } => cauchy::cc_half_mass(ax, *t, quad)?,
            Law::HalfProduct { t } => cauchy::half_product_half_mass(ax, *t, quad)?,
            Law::Reciprocal { t } => cauchy::reciprocal_half_mass(ax, *t, quad)?,
            Law::Mixture { kernel, inner } => {
                let peak = match kernel {
                    Kernel::Gaussian { c, p } => (ax * ax / c).powf(1.0 / p),
                    Kernel::Cauchy => ax,
                };
                let integrand = |s: f64| -> Result<f64> {
                    let g = match kernel {
                        Kernel::Gaussian { c, p } => 0.5 * erf(ax / (2.0 * c * s.powf(*p)).sqrt()),
                        Kernel::Cauchy => FRAC_1_PI * (ax / s).atan(),
                    };
                    if g == 0.0 {
                        return Ok(0.0);
                    }
                    Ok(2.0 * g * inner.density(s, quad)?.value)
                };
                let r = mixture_integral(integrand, peak, inner.scale(), quad)?;
                Estimate {
                    value: r.value,
                    error: r.error + inner.relative_accuracy(quad) * r.value.abs(),
                }
            }
        };
        Ok(Estimate {
            value: (0.5 + sign * half.value).clamp(0.0, 1.0),
            error: half.error,
        })
    }

    /// Upper tail `P(X > x)` for `x > 0`, accurate where the CDF rounds to 1.
    pub(crate) fn upper_tail(&self, x: f64, quad: &QuadratureConfig) -> Result<Estimate> {
        match self {
            Law::Gaussian { var } => Ok(Estimate::exact(0.5 * erfc(x / (2.0 * var).sqrt()))),
            Law::Cauchy { scale } => Ok(Estimate::exact(FRAC_1_PI * (scale / x).atan())),
            _ => {
                let c = self.cdf(x, quad)?;
                Ok(Estimate {
                    value: 1.0 - c.value,
                    error: c.error,
                })
            }
        }
    }
}

/// `∫_0^∞ f(s) ds` for a mixture integrand concentrated around the kernel
/// peak `peak` and the inner scale `scale`.
///
/// Both points are bracketed geometrically so that no panel straddles a
/// narrow bump unseen, and the absolute tolerance is taken relative to the
/// size of the integrand there, so tiny tail values keep their relative
/// accuracy.
fn mixture_integral<F: Fn(f64) -> Result<f64>>(f: F, peak: f64, scale: f64, quad: &QuadratureConfig) -> Result<Estimate> {
    let mut points = Vec::with_capacity(10);
    let mut magnitude = 0.0f64;
    for centre in [peak, scale] {
        if centre > 0.0 && centre.is_finite() {
            magnitude = magnitude.max((f(centre)? * centre).abs());
            points.extend([centre / 16.0, centre / 4.0, centre, 4.0 * centre, 16.0 * centre]);
        }
    }
    let cfg = if magnitude > 0.0 && magnitude.is_finite() {
        quad.with_abs_tol((quad.abs_tol * magnitude).max(f64::MIN_POSITIVE))
    } else {
        *quad
    };
    try_integrate_halfline_with(f, &points, &cfg)
}

/// `∫_0^z K0(u) du`.
pub(crate) fn k0_integral(z: f64, quad: &QuadratureConfig) -> Result<Estimate> {
    if z <= 2.0 {
        // u = z w² removes the logarithmic singularity at 0
        try_integrate(|w| Ok(if w == 0.0 { 0.0 } else { 2.0 * z * w * bessel_k0(z * w * w)?.value }), 0.0, 1.0, quad)
    } else {
        let tail = try_integrate_halfline_with(|s| bessel_k0(z + s).map(|r| r.value), &[1.0], &quad.with_abs_tol(f64::MIN_POSITIVE))?;
        Ok(Estimate {
            value: 0.5 * PI - tail.value,
            error: tail.error,
        })
    }
}

/// Probabilists' Hermite polynomial `He_n(z)`, `n <= 4`.
fn hermite(z: f64, n: usize) -> f64 {
    let z2 = z * z;
    match n {
        0 => 1.0,
        1 => z,
        2 => z2 - 1.0,
        3 => z * (z2 - 3.0),
        _ => z2 * (z2 - 6.0) + 3.0,
    }
}

/// `d^n/dx^n` of the centered Gaussian density with standard deviation `sd`.
pub(crate) fn gaussian_kernel_derivative(x: f64, sd: f64, n: usize) -> f64 {
    let z = x / sd;
    let e = 0.5 * z * z;
    if !(e < 745.0) || sd == 0.0 {
        return 0.0;
    }
    let sign = if n % 2 == 1 { -1.0 } else { 1.0 };
    sign * hermite(z, n) * (-e - LN_SQRT_2PI - (n as f64 + 1.0) * sd.ln()).exp()
}

/// `d^n/dx^n` of `s / (π (s² + x²))`.
pub(crate) fn cauchy_kernel_derivative(x: f64, s: f64, n: usize) -> f64 {
    if n == 0 {
        return FRAC_1_PI * s / (s * s + x * x);
    }
    let factorial = [1.0, 1.0, 2.0, 6.0, 24.0][n];
    let sign = if n % 2 == 1 { -1.0 } else { 1.0 };
    let w = Complex64::new(x, -s).powi(-(n as i32 + 1));
    FRAC_1_PI * sign * factorial * w.im
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::k0;

    fn k0_density(x: f64, a: f64) -> f64 {
        k0(x.abs() / a) / (PI * a)
    }

    #[test]
    fn gaussian_derivatives_match_finite_differences() {
        let cfg = crate::numerics::DiffConfig::default();
        for n in 1..=4 {
            for x in [-1.3, 0.2, 2.0] {
                let fd = crate::numerics::differentiate(|y| gaussian_kernel_derivative(y, 0.8, n - 1), x, 1, &cfg)
                    .unwrap();
                let exact = gaussian_kernel_derivative(x, 0.8, n);
                assert!((fd.value - exact).abs() < 1e-8, "{n} {x}: {} vs {exact}", fd.value);
            }
        }
    }

    #[test]
    fn cauchy_derivatives_match_finite_differences() {
        let cfg = crate::numerics::DiffConfig::default();
        for n in 1..=4 {
            for x in [-1.3, 0.0, 2.0] {
                let fd = crate::numerics::differentiate(|y| cauchy_kernel_derivative(y, 0.7, n - 1), x, 1, &cfg)
                    .unwrap();
                let exact = cauchy_kernel_derivative(x, 0.7, n);
                assert!((fd.value - exact).abs() < 1e-7, "{n} {x}: {} vs {exact}", fd.value);
            }
        }
    }

    #[test]
    fn k0_integral_is_half_pi_at_infinity() {
        let q = QuadratureConfig::default();
        let near = k0_integral(2.0, &q).unwrap().value;
        let far = k0_integral(2.000_000_1, &q).unwrap().value;
        assert!((far - near - 1e-7 * k0(2.0)).abs() < 1e-12);
        assert!((k0_integral(60.0, &q).unwrap().value - 0.5 * PI).abs() < 1e-14);
    }

    #[test]
    fn product_of_two_gaussians_is_k0() {
        let q = QuadratureConfig::default();
        let mix = gaussian_mixture(0.49, 2.0, Law::Gaussian { var: 0.49 });
        for x in [0.1, 0.6, 2.5] {
            let a = mix.density(x, &q).unwrap().value;
            let b = k0_density(x, 0.49);
            assert!((a - b).abs() < 1e-10 * b, "{x}: {a} vs {b}");
        }
    }
}
