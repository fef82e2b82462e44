use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::Estimate;
use crate::error::{Error, Result};

/// Tolerances for adaptive quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            rel_tol: 1e-10,
            abs_tol: 1e-13,
            max_subdivisions: 2000,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0 && self.max_subdivisions >= 1) {
            return Err(Error::InvalidParameter(format!(
                "quadrature tolerances must be positive: {self:?}"
            )));
        }
        Ok(())
    }

    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn with_abs_tol(mut self, abs_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self
    }

    fn target(&self, value: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.abs())
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

/// 15-point Kronrod rule with the embedded 7-point Gauss rule; the error
/// estimate follows the QUADPACK rescaling.
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<Panel> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let abs_half = half.abs();

    let fc = f(center);
    check_finite(fc, center)?;
    let mut res_g = fc * WG[3];
    let mut res_k = fc * WGK[7];
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];

    for j in 0..7 {
        let dx = half * XGK[j];
        let (x1, x2) = (center - dx, center + dx);
        let f1 = f(x1);
        check_finite(f1, x1)?;
        let f2 = f(x2);
        check_finite(f2, x2)?;
        fv1[j] = f1;
        fv2[j] = f2;
        let sum = f1 + f2;
        res_k += WGK[j] * sum;
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * sum;
        }
    }

    let mean = res_k * 0.5;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }

    let value = res_k * half;
    res_abs *= abs_half;
    res_asc *= abs_half;
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    Ok(Panel {
        a,
        b,
        value,
        error: err,
    })
}

fn check_finite(v: f64, at: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("integrand returned {v} at {at}")))
    }
}

/// Global adaptive bisection over the panels delimited by `points`.
fn adaptive<F: Fn(f64) -> f64>(f: &F, points: &[f64], cfg: &QuadratureConfig) -> Result<Estimate> {
    cfg.validate()?;
    let mut heap = BinaryHeap::new();
    for w in points.windows(2) {
        if w[1] > w[0] {
            heap.push(gk15(f, w[0], w[1])?);
        }
    }
    let mut frozen_value = 0.0;
    let mut frozen_error = 0.0;
    let mut subdivisions = heap.len();

    loop {
        let (value, error) = heap
            .iter()
            .fold((frozen_value, frozen_error), |(v, e), p| (v + p.value, e + p.error));
        if error <= cfg.target(value) {
            return Ok(Estimate { value, error });
        }
        let worst = match heap.pop() {
            Some(p) => p,
            None => {
                return Err(Error::NonConvergence {
                    value,
                    error,
                    subdivisions,
                })
            }
        };
        let mid = 0.5 * (worst.a + worst.b);
        if subdivisions >= cfg.max_subdivisions {
            return Err(Error::NonConvergence {
                value,
                error,
                subdivisions,
            });
        }
        if mid <= worst.a || mid >= worst.b || (worst.b - worst.a) <= 4.0 * f64::EPSILON * mid.abs() {
            frozen_value += worst.value;
            frozen_error += worst.error;
            continue;
        }
        heap.push(gk15(f, worst.a, mid)?);
        heap.push(gk15(f, mid, worst.b)?);
        subdivisions += 1;
    }
}

/// Adaptive integral of `f` over the finite interval `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, cfg: &QuadratureConfig) -> Result<Estimate> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::domain("integration limits must be finite"));
    }
    if a == b {
        return Ok(Estimate::exact(0.0));
    }
    if b < a {
        let r = adaptive(&f, &[b, a], cfg)?;
        return Ok(Estimate {
            value: -r.value,
            error: r.error,
        });
    }
    adaptive(&f, &[a, b], cfg)
}

/// Like [`integrate`] with additional interior breakpoints (kinks, peaks,
/// integrable singularities). Points outside `(a, b)` are ignored.
pub fn integrate_with_points<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    interior: &[f64],
    cfg: &QuadratureConfig,
) -> Result<Estimate> {
    let mut pts = vec![a];
    let mut inner: Vec<f64> = interior.iter().copied().filter(|p| *p > a && *p < b).collect();
    inner.sort_by(f64::total_cmp);
    pts.extend(inner);
    pts.push(b);
    adaptive(&f, &pts, cfg)
}

/// Geometric pre-split of `[0, S]` toward the origin, as fractions of the
/// smallest breakpoint.
const ORIGIN_SPLITS: [f64; 4] = [5.960_464_477_539_063e-8, 1.525_878_906_25e-5, 3.906_25e-3, 6.25e-2];
/// Largest ratio between consecutive breakpoints before gaps are filled.
const GAP_RATIO: f64 = 4.0;
/// Pre-split of the tail variable `τ - 1` in `s = S / (2 - τ)`.
const TAIL_SPLITS: [f64; 7] = [0.5, 0.75, 0.9, 0.97, 0.99, 0.997, 0.999];

/// Integral of `f` over `(0, ∞)`, with `s = u / (1 - u)`-type compression of
/// the tail and a geometric pre-split near zero.
pub fn integrate_halfline<F: Fn(f64) -> f64>(f: F, cfg: &QuadratureConfig) -> Result<Estimate> {
    integrate_halfline_with(f, &[], cfg)
}

/// [`integrate_halfline`] with breakpoints given in the original variable.
///
/// With `S` the largest breakpoint (1 when none is given), the composite
/// variable `τ ∈ [0, 2]` maps `[0, 1]` linearly onto `[0, S]` and `(1, 2)`
/// onto `(S, ∞)` by `s = S / (2 - τ)`. Anchoring the tail map at `S` keeps
/// full relative resolution around breakpoints of any magnitude.
pub fn integrate_halfline_with<F: Fn(f64) -> f64>(
    f: F,
    s_points: &[f64],
    cfg: &QuadratureConfig,
) -> Result<Estimate> {
    let mut inner: Vec<f64> = s_points
        .iter()
        .copied()
        .filter(|s| *s > 0.0 && s.is_finite())
        .collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup();
    // fill wide gaps geometrically so a panel cannot hide a bump at one end
    let mut filled = Vec::with_capacity(inner.len() * 2);
    for (i, &p) in inner.iter().enumerate() {
        if i > 0 {
            let mut q = inner[i - 1] * GAP_RATIO;
            while q * 2.0 < p {
                filled.push(q);
                q *= GAP_RATIO;
            }
        }
        filled.push(p);
    }
    let inner = filled;
    let anchor = inner.last().copied().unwrap_or(1.0);
    let smallest = inner.first().copied().unwrap_or(1.0);
    let g = |tau: f64| {
        if tau <= 1.0 {
            anchor * f(anchor * tau)
        } else {
            let w = 2.0 - tau;
            let s = anchor / w;
            if !s.is_finite() {
                return 0.0;
            }
            f(s) * anchor / (w * w)
        }
    };
    let mut pts = vec![0.0];
    pts.extend(ORIGIN_SPLITS.iter().map(|r| r * smallest / anchor));
    pts.extend(inner.iter().map(|s| s / anchor));
    pts.push(1.0);
    pts.extend(TAIL_SPLITS.iter().map(|r| 1.0 + r));
    pts.push(2.0);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    adaptive(&g, &pts, cfg)
}

/// Integral of `f` over `(a, ∞)`.
pub fn integrate_from<F: Fn(f64) -> f64>(f: F, a: f64, cfg: &QuadratureConfig) -> Result<Estimate> {
    integrate_halfline(|s| f(a + s), cfg)
}

/// Integral of `f` over the real line, folded onto the half-line.
pub fn integrate_real_line<F: Fn(f64) -> f64>(f: F, cfg: &QuadratureConfig) -> Result<Estimate> {
    integrate_halfline(|s| f(s) + f(-s), cfg)
}

/// Runs `body` with a plain `f64` view of a fallible function; the first
/// error raised by `f` wins over whatever `body` reports.
pub fn guarded<T, F, B>(f: F, body: B) -> Result<T>
where
    F: Fn(f64) -> Result<f64>,
    B: FnOnce(&dyn Fn(f64) -> f64) -> Result<T>,
{
    let slot = std::cell::RefCell::new(None);
    let plain = |x: f64| match f(x) {
        Ok(v) => v,
        Err(e) => {
            slot.borrow_mut().get_or_insert(e);
            f64::NAN
        }
    };
    let out = body(&plain);
    match slot.into_inner() {
        Some(e) => Err(e),
        None => out,
    }
}

pub fn try_integrate<F: Fn(f64) -> Result<f64>>(
    f: F,
    a: f64,
    b: f64,
    cfg: &QuadratureConfig,
) -> Result<Estimate> {
    guarded(f, |g| integrate(g, a, b, cfg))
}

pub fn try_integrate_with_points<F: Fn(f64) -> Result<f64>>(
    f: F,
    a: f64,
    b: f64,
    interior: &[f64],
    cfg: &QuadratureConfig,
) -> Result<Estimate> {
    guarded(f, |g| integrate_with_points(g, a, b, interior, cfg))
}

pub fn try_integrate_halfline<F: Fn(f64) -> Result<f64>>(f: F, cfg: &QuadratureConfig) -> Result<Estimate> {
    guarded(f, |g| integrate_halfline(g, cfg))
}

pub fn try_integrate_halfline_with<F: Fn(f64) -> Result<f64>>(
    f: F,
    s_points: &[f64],
    cfg: &QuadratureConfig,
) -> Result<Estimate> {
    guarded(f, |g| integrate_halfline_with(g, s_points, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exponential_halfline() {
        let r = integrate_halfline(|s| (-s).exp(), &QuadratureConfig::default()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
        assert!(r.error <= 1e-10);
    }

    #[test]
    fn finite_polynomial_is_exact() {
        let r = integrate(|x| x * x * x - 2.0 * x, 0.0, 3.0, &QuadratureConfig::default()).unwrap();
        assert_relative_eq!(r.value, 81.0 / 4.0 - 9.0, max_relative = 1e-14);
        let rev = integrate(|x| x * x, 1.0, 0.0, &QuadratureConfig::default()).unwrap();
        assert_relative_eq!(rev.value, -1.0 / 3.0, max_relative = 1e-14);
    }

    #[test]
    fn endpoint_singularity() {
        let r = integrate(|x| x.powf(-0.5), 0.0, 1.0, &QuadratureConfig::default()).unwrap();
        assert!((r.value - 2.0).abs() < 1e-9);
        let log = integrate_halfline(|s| -s.ln() * (-s).exp(), &QuadratureConfig::default()).unwrap();
        assert!((log.value - 0.577_215_664_901_532_9).abs() < 1e-10);
    }

    #[test]
    fn cauchy_tail() {
        let r = integrate_real_line(
            |x| 1.0 / (std::f64::consts::PI * (1.0 + x * x)),
            &QuadratureConfig::default(),
        )
        .unwrap();
        assert!((r.value - 1.0).abs() < 1e-11);
    }

    #[test]
    fn nan_is_domain_error() {
        let r = integrate(|_| f64::NAN, 0.0, 1.0, &QuadratureConfig::default());
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn exhausted_budget_is_nonconvergence() {
        let cfg = QuadratureConfig {
            max_subdivisions: 3,
            ..Default::default()
        };
        let r = integrate(|x| (1.0 / x).sin(), 1e-6, 1.0, &cfg);
        assert!(matches!(r, Err(Error::NonConvergence { .. })));
    }

    #[test]
    fn guarded_propagates_inner_error() {
        let r = try_integrate(
            |x| if x > 0.5 { Err(Error::SingularPoint { x }) } else { Ok(1.0) },
            0.0,
            1.0,
            &QuadratureConfig::default(),
        );
        assert!(matches!(r, Err(Error::SingularPoint { .. })));
    }

    #[test]
    fn invalid_config_rejected() {
        let cfg = QuadratureConfig {
            rel_tol: 0.0,
            ..Default::default()
        };
        assert!(integrate(|x| x, 0.0, 1.0, &cfg).is_err());
    }
}
