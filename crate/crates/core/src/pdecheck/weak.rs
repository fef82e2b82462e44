use serde::{Deserialize, Serialize};

use super::registry::{mismatch, scaled_parameters, EquationSpec, EquationTag};
use super::strong::Term;
use super::{time_diff, time_quadrature};
use crate::densities::DensityEvaluator;
use crate::error::{Error, Result};
use crate::model::ProcessModel;
use crate::numerics::{try_differentiate_positive, try_integrate_halfline_with, Estimate, QuadratureConfig};

/// Test function `φ(x) = P(x) e^{-x²}` with polynomial `P` given by its
/// coefficients in increasing degree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub poly: Vec<f64>,
}

impl TestFunction {
    pub fn new(poly: Vec<f64>) -> Result<Self> {
        if poly.is_empty() || poly.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("test function needs finite coefficients".into()));
        }
        Ok(TestFunction { poly })
    }

    /// `e^{-x²}`.
    pub fn gaussian() -> Self {
        TestFunction { poly: vec![1.0] }
    }

    /// `x⁴ e^{-x²}`, whose second derivative vanishes at the origin.
    pub fn flat_at_origin() -> Self {
        TestFunction {
            poly: vec![0.0, 0.0, 0.0, 0.0, 1.0],
        }
    }

    /// Polynomial factor of the `n`-th derivative: `(P e^{-x²})' = (P' - 2xP) e^{-x²}`.
    fn derivative_poly(&self, n: usize) -> Vec<f64> {
        let mut p = self.poly.clone();
        for _ in 0..n {
            let mut next = vec![0.0; p.len() + 1];
            for (k, c) in p.iter().enumerate() {
                if k > 0 {
                    next[k - 1] += k as f64 * c;
                }
                next[k + 1] -= 2.0 * c;
            }
            p = next;
        }
        p
    }

    /// `φ⁽ⁿ⁾(x)`.
    pub fn derivative(&self, x: f64, n: usize) -> f64 {
        let p = self.derivative_poly(n);
        p.iter().rev().fold(0.0, |acc, c| acc * x + c) * (-x * x).exp()
    }
}

/// Weak-form defect of a delta-forced equation at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakReport {
    pub tag: EquationTag,
    pub t: f64,
    /// Sum of the pieces; zero when the equation holds in distribution.
    pub defect: f64,
    /// `|defect|` over the largest piece.
    pub rel: f64,
    pub pieces: Vec<Term>,
    /// Multiplier applied to the printed delta coefficient.
    pub delta_scale: f64,
    /// Summed piece errors.
    pub budget: f64,
}

fn pairing_quadrature() -> QuadratureConfig {
    QuadratureConfig {
        rel_tol: 1e-12,
        abs_tol: 1e-15,
        max_subdivisions: 4000,
    }
}

/// `∫_ℝ q(x, t) g(x) dx` for an even density, as `∫_0^∞ q (g(x) + g(-x))`.
fn pair<G: Fn(f64) -> f64>(ev: &DensityEvaluator, t: f64, g: G) -> Result<Estimate> {
    let scale = ev.model.scale(t);
    try_integrate_halfline_with(
        |x| Ok(ev.density(x, t)?.value * (g(x) + g(-x))),
        &[scale, 1.0],
        &pairing_quadrature(),
    )
}

fn piece(label: &str, c: f64, e: Estimate) -> Term {
    Term {
        label: label.to_string(),
        value: c * e.value,
        error: c.abs() * e.error.max(1e-13 * e.value.abs()),
    }
}

/// Pairs a delta-forced equation with `φ` and returns its defect.
///
/// The time side is `d/dt ∫qφ` (times `t` for the scaled forms, or the second
/// derivative for `B(|C(t)|)`), the spatial side moves derivatives onto `φ`,
/// and the delta term contributes `delta_scale · c(t) · φ''(0)`.
pub fn weak_delta_residual(spec: &EquationSpec, phi: &TestFunction, t: f64, delta_scale: f64) -> Result<WeakReport> {
    use EquationTag::*;
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::domain(format!("weak residual needs t > 0, got {t}")));
    }
    let delta = spec
        .delta
        .ok_or_else(|| Error::InvalidParameter(format!("equation ({}) has no delta term", spec.tag)))?;
    let model = &spec.model;
    let ok = match spec.tag {
        ScaledFourthOrder => scaled_parameters(model).is_some(),
        IteratedFourthOrder => scaled_parameters(model).is_some_and(|(k, _)| k == 0.0),
        BrownianFourthOrder => scaled_parameters(model).is_some_and(|(k, h)| k == 0.0 && h == 0.5),
        BrownianOfCauchy => matches!(model, ProcessModel::BmOfCauchy),
        _ => false,
    };
    if !ok {
        return Err(mismatch(spec.tag, model));
    }
    let ev = DensityEvaluator::new(model.clone())?.with_quadrature(time_quadrature());
    let mass = |s: f64| Ok(pair(&ev, s, |x| phi.derivative(x, 0))?.value);
    let centre = pair(&ev, t, |x| phi.derivative(x, 0))?;
    let noise = centre.error.max(1e-13 * centre.value.abs());
    let order = if spec.tag == BrownianOfCauchy { 2 } else { 1 };
    let d = try_differentiate_positive(mass, t, order, &time_diff())?;
    let dm = Estimate {
        value: d.value,
        error: d.error + d.amplification * noise,
    };
    let fourth = pair(&ev, t, |x| phi.derivative(x, 4))?;

    let mut pieces = Vec::new();
    match spec.tag {
        ScaledFourthOrder | IteratedFourthOrder => {
            let (k, h) = scaled_parameters(model).ok_or_else(|| mismatch(spec.tag, model))?;
            pieces.push(piece("t dM/dt", t, dm));
            if k != 0.0 {
                // K ∂(xq)/∂x pairs to -K ∫ x q φ'
                let first = pair(&ev, t, |x| x * phi.derivative(x, 1))?;
                pieces.push(piece("K <xq, phi'>", -k, first));
            }
            pieces.push(piece("<q, phi''''>", -h / 4.0 * t.powf(4.0 * k + 2.0 * h), fourth));
        }
        BrownianFourthOrder => {
            pieces.push(piece("dM/dt", 1.0, dm));
            pieces.push(piece("<q, phi''''>", -0.125, fourth));
        }
        BrownianOfCauchy => {
            pieces.push(piece("d2M/dt2", 1.0, dm));
            pieces.push(piece("<q, phi''''>", 0.25, fourth));
        }
        _ => unreachable!("checked above"),
    }
    let c = delta.coefficient(model, t)?;
    pieces.push(Term {
        label: "delta''".into(),
        value: -delta_scale * c * phi.derivative(0.0, 2),
        error: 0.0,
    });
    let defect: f64 = pieces.iter().map(|p| p.value).sum();
    let scale = pieces.iter().map(|p| p.value.abs()).fold(0.0, f64::max);
    let budget = pieces.iter().map(|p| p.error).sum();
    Ok(WeakReport {
        tag: spec.tag,
        t,
        defect,
        rel: if scale > 0.0 { defect.abs() / scale } else { 0.0 },
        pieces,
        delta_scale,
        budget,
    })
}
