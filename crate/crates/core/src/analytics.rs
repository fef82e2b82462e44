//! Closed-form moments, Mellin transforms and characteristic functions, with
//! numerical counterparts used to cross-check them.

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::densities::DensityEvaluator;
use crate::error::{Error, Result};
use crate::model::{Hurst, ProcessModel};
use crate::numerics::{integrate, integrate_with_points, Estimate, QuadratureConfig};
use crate::specfun::log_gamma;

/// Largest natural log that still fits in an `f64`.
pub const MAX_LOG: f64 = 709.782_712_893_384;

/// Series terms below this fraction of the partial sum end the summation.
pub const SERIES_TERM_RATIO: f64 = 1e-14;

/// Hard cap on characteristic-function series terms.
pub const MAX_SERIES_TERMS: usize = 20_000;

/// Oscillation panels summed before giving up on the characteristic function.
pub const MAX_CF_PANELS: usize = 400;

/// Order `2k` and Hurst exponents `H1..H_{n+1}` (outermost first) of an even
/// moment of an iterated fBm chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSpec {
    pub k: u32,
    pub hursts: Vec<Hurst>,
}

impl MomentSpec {
    pub fn new(k: u32, hursts: Vec<Hurst>) -> Result<Self> {
        let spec = MomentSpec { k, hursts };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParameter("moment half-order k must be >= 1".into()));
        }
        if self.hursts.is_empty() {
            return Err(Error::InvalidParameter("moment needs at least one Hurst exponent".into()));
        }
        Ok(())
    }

    /// `n`, the number of compositions.
    pub fn depth(&self) -> usize {
        self.hursts.len() - 1
    }
}

fn exp_checked(log_value: f64) -> Result<f64> {
    if log_value > MAX_LOG {
        return Err(Error::Overflow { log_value });
    }
    Ok(log_value.exp())
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::domain(format!("moments need t >= 0, got {t}")));
    }
    Ok(())
}

/// Natural log of `E X^{2k}` for `X = B_{H1}(|B_{H2}(...|B_{H_{n+1}}(t)|...)|)`, `t > 0`.
pub fn log_moment_iterated(spec: &MomentSpec, t: f64) -> Result<f64> {
    spec.validate()?;
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::domain(format!("log moment needs t > 0, got {t}")));
    }
    let k = f64::from(spec.k);
    let n = spec.depth();
    // m_r = k Π_{j<=r} H_j with H_0 = 1, for r = 0..n
    let mut prod = 1.0;
    let mut log = (n as f64 + 1.0) * LN_2;
    for r in 0..=n {
        if r > 0 {
            prod *= spec.hursts[r - 1].value();
        }
        let m = k * prod;
        log += log_gamma(2.0 * m)? - log_gamma(m)? - m * LN_2;
    }
    let full: f64 = spec.hursts.iter().map(|h| h.value()).product();
    Ok(log + 2.0 * k * full * t.ln())
}

/// `E X^{2k}` for the iterated chain described by `spec`; `0` at `t = 0`.
pub fn moment_iterated(spec: &MomentSpec, t: f64) -> Result<f64> {
    spec.validate()?;
    check_time(t)?;
    if t == 0.0 {
        return Ok(0.0);
    }
    exp_checked(log_moment_iterated(spec, t)?)
}

/// `Var B_{H1}(|B_{H2}(t)|) = 2^{1-H1} Γ(2H1)/Γ(H1) t^{2 H1 H2}`.
pub fn variance_iterated(h1: Hurst, h2: Hurst, t: f64) -> Result<f64> {
    check_time(t)?;
    if t == 0.0 {
        return Ok(0.0);
    }
    let a = h1.value();
    let log = (1.0 - a) * LN_2 + log_gamma(2.0 * a)? - log_gamma(a)? + 2.0 * a * h2.value() * t.ln();
    exp_checked(log)
}

/// `E B(|B(t)|)^{2k}` from the dedicated Brownian formula
/// `2^{k/2} / 2^{2k} (2k)! / Γ(k/2 + 1) t^{k/2}`.
pub fn ibm_moment_closed(k: u32, t: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidParameter("moment half-order k must be >= 1".into()));
    }
    check_time(t)?;
    if t == 0.0 {
        return Ok(0.0);
    }
    let k = f64::from(k);
    let log = (k / 2.0 - 2.0 * k) * LN_2 + log_gamma(2.0 * k + 1.0)? - log_gamma(k / 2.0 + 1.0)? + k / 2.0 * t.ln();
    exp_checked(log)
}

/// Half-orders `k` in `1..=k_max` where [`ibm_moment_closed`] and the general
/// moment formula at `H1 = H2 = 1/2` differ by more than `rel_tol`.
pub fn ibm_moment_discrepancies(k_max: u32, rel_tol: f64) -> Result<Vec<u32>> {
    let mut bad = Vec::new();
    for k in 1..=k_max {
        let spec = MomentSpec::new(k, vec![Hurst::HALF, Hurst::HALF])?;
        let general = moment_iterated(&spec, 1.0)?;
        let closed = ibm_moment_closed(k, 1.0)?;
        if (general - closed).abs() > rel_tol * closed {
            bad.push(k);
        }
    }
    Ok(bad)
}

/// Mellin transform `E|X|^{α-1}` of `J^{n-1}`, the weighted chain of `n`
/// fBms with common exponent `H`:
/// `[2^{α/2} Γ(α/2) / √(2π)]ⁿ t^{H(α-1)}`.
pub fn mellin_weighted_chain(alpha: f64, n: usize, h: Hurst, t: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::domain(format!("Mellin transform needs alpha > 0, got {alpha}")));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("chain length must be >= 1".into()));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::domain(format!("Mellin transform needs t > 0, got {t}")));
    }
    let layer = alpha / 2.0 * LN_2 + log_gamma(alpha / 2.0)? - 0.5 * (2.0 * PI).ln();
    exp_checked(n as f64 * layer + h.value() * (alpha - 1.0) * t.ln())
}

/// Characteristic function `E cos(βX(t))` of a symmetric model from its
/// density: a bulk integral over a few scales, then half-period panels whose
/// partial sums are accelerated with Wynn's epsilon algorithm.
pub fn charfn_numeric(model: &ProcessModel, beta: f64, t: f64) -> Result<Estimate> {
    charfn_numeric_with(&DensityEvaluator::new(model.clone())?, beta, t)
}

pub fn charfn_numeric_with(ev: &DensityEvaluator, beta: f64, t: f64) -> Result<Estimate> {
    if !beta.is_finite() {
        return Err(Error::domain(format!("non-finite frequency {beta}")));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::domain(format!("characteristic function needs t > 0, got {t}")));
    }
    if beta == 0.0 {
        return Ok(Estimate::exact(1.0));
    }
    let b = beta.abs();
    let half_period = PI / b;
    let scale = ev.model.scale(t);
    let bulk = half_period * (4.0 * scale / half_period).ceil().max(1.0);
    let quad = QuadratureConfig {
        abs_tol: 1e-15,
        ..ev.quad
    };
    let f = |x: f64| 2.0 * (b * x).cos() * ev.density(x, t).map_or(f64::NAN, |e| e.value);
    let marks: Vec<f64> = [0.25, 1.0, 4.0].iter().map(|c| c * scale).filter(|&p| p < bulk).collect();
    let head = guarded_panel(|| integrate_with_points(f, 0.0, bulk, &marks, &quad), ev, bulk, t)?;

    let mut partial = Vec::with_capacity(MAX_CF_PANELS);
    let mut sum = head.value;
    let mut error = head.error;
    let mut previous: Option<f64> = None;
    let mut small = 0;
    for j in 0..MAX_CF_PANELS {
        let a = bulk + j as f64 * half_period;
        let p = guarded_panel(|| integrate(f, a, a + half_period, &quad), ev, a, t)?;
        sum += p.value;
        error += p.error;
        partial.push(sum);
        small = if p.value.abs() < 1e-16 { small + 1 } else { 0 };
        if small >= 2 {
            return Ok(Estimate { value: sum, error: error + 1e-16 });
        }
        if partial.len() >= 3 {
            let extrapolated = wynn_epsilon(&partial);
            if let Some(prev) = previous {
                let change = (extrapolated - prev).abs();
                if change < 1e-13 {
                    return Ok(Estimate {
                        value: extrapolated,
                        error: error + change,
                    });
                }
            }
            previous = Some(extrapolated);
        }
    }
    Err(Error::NonConvergence {
        value: previous.unwrap_or(sum),
        error,
        subdivisions: MAX_CF_PANELS,
    })
}

fn guarded_panel<F>(integral: F, ev: &DensityEvaluator, x: f64, t: f64) -> Result<Estimate>
where
    F: FnOnce() -> Result<Estimate>,
{
    let r = integral()?;
    if r.value.is_finite() {
        Ok(r)
    } else {
        // surface the density failure that produced the NaN
        ev.density(x.max(f64::MIN_POSITIVE), t)?;
        Err(Error::domain(format!("density evaluation failed near x = {x}")))
    }
}

/// Last diagonal entry of Wynn's epsilon table for the given partial sums.
fn wynn_epsilon(s: &[f64]) -> f64 {
    let n = s.len();
    // e[i] holds ε_{k}^{(i)} for the current column k
    let mut prev = vec![0.0; n + 1];
    let mut cur: Vec<f64> = s.to_vec();
    let mut best = *s.last().unwrap();
    for k in 1..n {
        let next: Vec<f64> = (0..n - k)
            .map(|i| {
                let d = cur[i + 1] - cur[i];
                if d == 0.0 {
                    f64::INFINITY
                } else {
                    prev[i + 1] + 1.0 / d
                }
            })
            .collect();
        if k % 2 == 0 {
            match next.last() {
                Some(v) if v.is_finite() => best = *v,
                _ => break,
            }
        }
        prev = cur;
        cur = next;
    }
    best
}

/// Characteristic function of `J^{n-1}`, equivalently of a product of `n`
/// independent `B_{H/n}`, from the even-moment series
/// `Σ_k (-1)^k (β t^H)^{2k} ((2k-1)!!)ⁿ / (2k)!`.
///
/// The series is entire for `n = 1`, converges for `|β| t^H < 1` when
/// `n = 2`, and is only asymptotic for `n >= 3`; summation stops once a term
/// falls below [`SERIES_TERM_RATIO`] of the partial sum and fails with
/// `SeriesDivergence` once terms start growing.
pub fn charfn_series_product(n: usize, h: Hurst, beta: f64, t: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter("product needs n >= 1".into()));
    }
    if !(t > 0.0 && t.is_finite()) || !beta.is_finite() {
        return Err(Error::domain(format!("series needs t > 0 and finite beta, got t = {t}, beta = {beta}")));
    }
    let z = beta.abs() * t.powf(h.value());
    let z2 = z * z;
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    for k in 1..MAX_SERIES_TERMS {
        let kf = k as f64;
        // term_k / term_{k-1} = -z² (2k-1)^{n-1} / (2k)
        let ratio = z2 * (2.0 * kf - 1.0).powi(n as i32 - 1) / (2.0 * kf);
        // for n >= 2 the ratio never decreases, so a ratio of 1 means divergence
        if n >= 2 && ratio >= 1.0 {
            return Err(Error::SeriesDivergence { argument: z, index: k });
        }
        term *= -ratio;
        sum += term;
        if term.abs() < SERIES_TERM_RATIO * sum.abs() {
            return Ok(sum);
        }
    }
    Err(Error::SeriesDivergence {
        argument: z,
        index: MAX_SERIES_TERMS,
    })
}

/// Empirical characteristic function `mean cos(β X_i)` with its standard error.
pub fn charfn_empirical(values: &[f64], beta: f64) -> Result<Estimate> {
    if values.len() < 2 {
        return Err(Error::InvalidParameter("empirical CF needs at least two draws".into()));
    }
    let n = values.len() as f64;
    let c: Vec<f64> = values.iter().map(|x| (beta * x).cos()).collect();
    let mean = c.iter().sum::<f64>() / n;
    let var = c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(Estimate {
        value: mean,
        error: (var / n).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::integrate_halfline_with;
    use crate::specfun::k0;

    fn h(v: f64) -> Hurst {
        Hurst::new(v).unwrap()
    }

    #[test]
    fn iterated_brownian_second_moment() {
        let spec = MomentSpec::new(1, vec![Hurst::HALF, Hurst::HALF]).unwrap();
        let v = moment_iterated(&spec, 1.0).unwrap();
        assert!((v - (2.0 / PI).sqrt()).abs() < 1e-14);
        assert_eq!(moment_iterated(&spec, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn single_layer_is_gaussian_moment() {
        // E Z^{2k} = (2k-1)!!
        let spec = MomentSpec::new(3, vec![Hurst::HALF]).unwrap();
        assert!((moment_iterated(&spec, 1.0).unwrap() - 15.0).abs() < 1e-12);
    }

    #[test]
    fn fourth_moment_matches_density_quadrature() {
        let model = ProcessModel::IteratedFBm { outer: Hurst::HALF, inner: Hurst::HALF };
        let ev = DensityEvaluator::new(model).unwrap();
        let m4 = integrate_halfline_with(
            |x| 2.0 * x.powi(4) * ev.density(x, 1.0).unwrap().value,
            &[1.0, 4.0],
            &QuadratureConfig::default(),
        )
        .unwrap()
        .value;
        let spec = MomentSpec::new(2, vec![Hurst::HALF, Hurst::HALF]).unwrap();
        let exact = moment_iterated(&spec, 1.0).unwrap();
        assert!((m4 - exact).abs() < 1e-6 * exact, "{m4} vs {exact}");
    }

    #[test]
    fn large_orders_stay_finite_or_overflow() {
        let spec = MomentSpec::new(50, vec![h(0.9), h(0.8)]).unwrap();
        assert!(moment_iterated(&spec, 1.0).unwrap().is_finite());
        let spec = MomentSpec::new(200, vec![Hurst::HALF]).unwrap();
        assert!(matches!(moment_iterated(&spec, 1.0), Err(Error::Overflow { .. })));
        assert!(log_moment_iterated(&spec, 1.0).unwrap() > MAX_LOG);
    }

    #[test]
    fn variance_matches_moment() {
        for (a, b, t) in [(0.5, 0.5, 1.0), (0.3, 0.8, 2.5), (0.9, 0.2, 0.4)] {
            let v = variance_iterated(h(a), h(b), t).unwrap();
            let m = moment_iterated(&MomentSpec::new(1, vec![h(a), h(b)]).unwrap(), t).unwrap();
            assert!((v - m).abs() <= 4.0 * f64::EPSILON * m, "{v} vs {m}");
        }
        let v = variance_iterated(Hurst::HALF, Hurst::HALF, 1.0).unwrap();
        assert!((v - (2.0 / PI).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn brownian_closed_form_agrees() {
        assert!(ibm_moment_discrepancies(10, 1e-12).unwrap().is_empty());
        assert!((ibm_moment_closed(1, 1.0).unwrap() - (2.0 / PI).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn mellin_normalization_and_second_moment() {
        for n in 1..5 {
            assert!((mellin_weighted_chain(1.0, n, h(0.3), 2.7).unwrap() - 1.0).abs() < 1e-14);
        }
        let (hv, t) = (0.4, 1.9f64);
        let v = mellin_weighted_chain(3.0, 2, h(hv), t).unwrap();
        assert!((v - t.powf(2.0 * hv)).abs() < 1e-14 * v);
    }

    #[test]
    fn mellin_matches_k0_quadrature() {
        let (hv, t) = (0.6, 1.7f64);
        let a: f64 = t.powf(hv);
        for alpha in [0.5, 1.3, 2.0, 4.5] {
            let q = integrate_halfline_with(
                |x: f64| x.powf(alpha - 1.0) * 2.0 / (PI * a) * k0(x / a),
                &[a],
                &QuadratureConfig::default(),
            )
            .unwrap()
            .value;
            let m = mellin_weighted_chain(alpha, 2, h(hv), t).unwrap();
            assert!((q - m).abs() < 1e-8 * m, "{alpha}: {q} vs {m}");
        }
    }

    #[test]
    fn cauchy_charfn_is_exponential() {
        for (beta, t) in [(0.7, 1.0), (-2.0, 0.5), (0.05, 3.0)] {
            let v = charfn_numeric(&ProcessModel::Cauchy, beta, t).unwrap();
            let exact = (-t * f64::abs(beta)).exp();
            assert!((v.value - exact).abs() < 1e-9, "{beta}: {} vs {exact}", v.value);
        }
        assert_eq!(charfn_numeric(&ProcessModel::Cauchy, 0.0, 1.0).unwrap().value, 1.0);
    }

    #[test]
    fn k0_law_charfn_quadrature_and_series() {
        // ∫ cos(βx) K0(|x|/a)/(πa) dx = 1/√(1 + β²a²)
        let (hv, t) = (0.7, 1.4f64);
        let beta = 0.8 / t.powf(hv);
        let exact = 1.0 / 1.64f64.sqrt();
        let q = charfn_numeric(&ProcessModel::WeightedJ { n: 1, h: h(hv) }, beta, t).unwrap();
        let s = charfn_series_product(2, h(hv), beta, t).unwrap();
        assert!((q.value - s).abs() < 1e-9, "{} vs {s}", q.value);
        assert!((s - exact).abs() < 1e-12);
    }

    #[test]
    fn gaussian_series_and_divergence() {
        let s = charfn_series_product(1, h(0.5), 2.0, 1.0).unwrap();
        assert!((s - (-2.0f64).exp()).abs() < 1e-13);
        assert!(matches!(
            charfn_series_product(3, h(0.5), 1.0, 1.0),
            Err(Error::SeriesDivergence { .. })
        ));
        assert!(matches!(
            charfn_series_product(2, h(0.5), 1.5, 1.0),
            Err(Error::SeriesDivergence { .. })
        ));
    }

    #[test]
    fn wynn_accelerates_alternating_series() {
        // log 2 = 1 - 1/2 + 1/3 - ...
        let mut s = 0.0;
        let partial: Vec<f64> = (1..=15)
            .map(|k| {
                s += if k % 2 == 1 { 1.0 } else { -1.0 } / k as f64;
                s
            })
            .collect();
        assert!((wynn_epsilon(&partial) - LN_2).abs() < 1e-10);
    }
}
