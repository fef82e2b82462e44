use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::registry::{mismatch, scaled_parameters, EquationSpec, EquationTag, SingularLocus};
use super::{space_quadrature, time_diff, time_quadrature};
use crate::densities::DensityEvaluator;
use crate::error::{Error, Result};
use crate::model::{Hurst, ProcessModel};
use crate::numerics::{
    caputo_half_time_derivative, differentiate, integrate_halfline_with, riemann_liouville_half,
    riesz_modulus_derivative, try_differentiate_positive, DiffConfig, Estimate, Grid1D, QuadratureConfig,
};

/// Outcome of a residual check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// The residual exceeds the tolerance but so does the numerical error
    /// budget, so the check cannot tell.
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

/// One additive term of an equation written as `Σ terms = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub label: String,
    pub value: f64,
    /// Estimated absolute error of `value`.
    pub error: f64,
}

impl Term {
    fn new(label: &str, e: Estimate) -> Self {
        Term {
            label: label.to_string(),
            value: e.value,
            error: e.error.max(4.0 * f64::EPSILON * e.value.abs()),
        }
    }

    fn scaled(mut self, c: f64) -> Self {
        self.value *= c;
        self.error *= c.abs();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResidual {
    pub x: f64,
    pub t: f64,
    pub residual: f64,
    /// `|residual|` over the largest term magnitude.
    pub rel: f64,
    /// Summed term errors over the largest term magnitude.
    pub budget: f64,
    pub terms: Vec<Term>,
}

impl PointResidual {
    /// The denominator is the largest term, floored at `errors / tol`: where
    /// every term is itself at noise level (for instance where all of them
    /// cross zero together) the residual is judged against its error bar.
    fn from_terms(x: f64, t: f64, terms: Vec<Term>, tol: f64) -> Self {
        let residual: f64 = terms.iter().map(|t| t.value).sum();
        let err: f64 = terms.iter().map(|t| t.error).sum();
        let scale = terms.iter().map(|t| t.value.abs()).fold(0.0, f64::max).max(err / tol);
        let (rel, budget) = if scale > 0.0 {
            (residual.abs() / scale, err / scale)
        } else {
            (0.0, 0.0)
        };
        PointResidual {
            x,
            t,
            residual,
            rel,
            budget,
            terms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub x_min: f64,
    pub x_max: f64,
    pub points: usize,
    pub times: Vec<f64>,
    pub evaluated: usize,
    /// Grid points dropped because they fall inside an excluded radius.
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermMagnitude {
    pub label: String,
    pub max_abs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdeResidualReport {
    pub tag: EquationTag,
    pub model: ProcessModel,
    pub grid: GridSummary,
    pub max_abs_residual: f64,
    pub max_rel_residual: f64,
    pub term_magnitudes: Vec<TermMagnitude>,
    pub tolerance: f64,
    /// Largest relative error budget over the grid.
    pub budget: f64,
    pub verdict: Verdict,
    pub worst: Option<PointResidual>,
    pub points: Vec<PointResidual>,
}

impl PdeResidualReport {
    /// Turns an inconclusive report into `ToleranceBudgetExceeded`.
    pub fn require_conclusive(self) -> Result<Self> {
        if self.verdict == Verdict::Inconclusive {
            return Err(Error::ToleranceBudgetExceeded {
                budget: self.budget,
                tolerance: self.tolerance,
            });
        }
        Ok(self)
    }

    fn assemble(spec: &EquationSpec, skipped: usize, points: Vec<PointResidual>) -> Self {
        let mut labels: Vec<TermMagnitude> = Vec::new();
        for p in &points {
            for term in &p.terms {
                match labels.iter_mut().find(|m| m.label == term.label) {
                    Some(m) => m.max_abs = m.max_abs.max(term.value.abs()),
                    None => labels.push(TermMagnitude {
                        label: term.label.clone(),
                        max_abs: term.value.abs(),
                    }),
                }
            }
        }
        let max_abs_residual = points.iter().map(|p| p.residual.abs()).fold(0.0, f64::max);
        let max_rel_residual = points.iter().map(|p| p.rel).fold(0.0, f64::max);
        let budget = points.iter().map(|p| p.budget).fold(0.0, f64::max);
        let worst = points.iter().max_by(|a, b| a.rel.total_cmp(&b.rel)).cloned();
        let verdict = if max_rel_residual <= spec.tolerance {
            Verdict::Pass
        } else if budget > spec.tolerance {
            Verdict::Inconclusive
        } else {
            Verdict::Fail
        };
        let pts = spec.grid.points();
        PdeResidualReport {
            tag: spec.tag,
            model: spec.model.clone(),
            grid: GridSummary {
                x_min: pts.first().copied().unwrap_or(0.0),
                x_max: pts.last().copied().unwrap_or(0.0),
                points: pts.len(),
                times: spec.times.clone(),
                evaluated: points.len(),
                skipped,
            },
            max_abs_residual,
            max_rel_residual,
            term_magnitudes: labels,
            tolerance: spec.tolerance,
            budget,
            verdict,
            worst,
            points,
        }
    }
}

/// Highest `x`-derivative each equation needs in strong form.
fn x_order(tag: EquationTag) -> usize {
    use EquationTag::*;
    match tag {
        FirstOrder => 1,
        HeatFbm | VarianceClock | SecondOrder | CauchyLaplace | CauchyWave | CauchyOfFbmHeat | HalfOrderTime => 2,
        BesselThirdOrder => 3,
        ScaledFourthOrder | IteratedFourthOrder | BrownianFourthOrder | BesselFourthOrder | BrownianOfCauchy => 4,
        CauchyRiesz => 0,
    }
}

/// Points of the spec's grid that are kept at time `t`.
fn kept_points(spec: &EquationSpec, ev: &DensityEvaluator, t: f64) -> Vec<f64> {
    let origin = spec.excluded.contains(&SingularLocus::Origin)
        || (spec.tag != EquationTag::HalfOrderTime && ev.singular_at_origin(x_order(spec.tag)));
    let r0 = if origin {
        spec.grid.excluded_radius.max(spec.origin_radius * spec.model.scale(t))
    } else {
        spec.grid.excluded_radius
    };
    let diagonal = spec.excluded.contains(&SingularLocus::Diagonal);
    spec.grid
        .points()
        .iter()
        .copied()
        .filter(|x| {
            let near_origin = if r0 > 0.0 { x.abs() < r0 } else { false };
            let near_diag = diagonal && (x.abs() - t).abs() < spec.diagonal_radius * t;
            !near_origin && !near_diag
        })
        .collect()
}

/// Evaluates with the evaluator's tolerance, relaxing it by up to two
/// decades where cancellation puts that tolerance out of reach. The returned
/// error estimate reflects whichever tolerance succeeded.
fn relaxed<F>(ev: &DensityEvaluator, eval: F) -> Result<Estimate>
where
    F: Fn(&DensityEvaluator) -> Result<Estimate>,
{
    let mut last = None;
    for factor in [1.0, 10.0, 100.0] {
        let e = ev.clone().with_quadrature(ev.quad.with_rel_tol(ev.quad.rel_tol * factor));
        match eval(&e) {
            Err(err @ Error::NonConvergence { .. }) => last = Some(err),
            other => return other,
        }
    }
    Err(last.expect("at least one attempt"))
}

/// Density derivatives at one point, with error estimates.
struct Probe<'a> {
    space: &'a DensityEvaluator,
    time: &'a DensityEvaluator,
    diff: &'a DiffConfig,
    x: f64,
    t: f64,
}

impl Probe<'_> {
    fn dx(&self, label: &str, n: usize) -> Result<Term> {
        Ok(Term::new(label, relaxed(self.space, |ev| ev.density_dx(self.x, self.t, n))?))
    }

    fn dt(&self, label: &str, n: usize) -> Result<Term> {
        let centre = relaxed(self.time, |ev| ev.density(self.x, self.t))?;
        let noise = centre.error.max(4.0 * f64::EPSILON * centre.value.abs());
        let d = try_differentiate_positive(
            |s| Ok(relaxed(self.time, |ev| ev.density(self.x, s))?.value),
            self.t,
            n,
            self.diff,
        )?;
        Ok(Term {
            label: label.to_string(),
            value: d.value,
            error: d.error + d.amplification * noise,
        })
    }
}

fn iterated_exponent(tag: EquationTag, model: &ProcessModel) -> Result<f64> {
    match model {
        ProcessModel::IteratedFBm { outer, inner } => Ok(outer.value() * inner.value()),
        ProcessModel::IteratedFBmChain { hursts } => Ok(hursts.iter().map(|h| h.value()).product()),
        _ => Err(mismatch(tag, model)),
    }
}

fn is_ibm(model: &ProcessModel) -> bool {
    let half = |h: &Hurst| *h == Hurst::HALF;
    match model {
        ProcessModel::IteratedFBm { outer, inner } => half(outer) && half(inner),
        ProcessModel::IteratedFBmChain { hursts } => hursts.len() == 2 && hursts.iter().all(half),
        ProcessModel::ScaledIterated { k, h } => *k == 0.0 && half(h),
        _ => false,
    }
}

/// Checks that `model` is one the equation governs.
fn check_model(tag: EquationTag, model: &ProcessModel) -> Result<()> {
    use EquationTag::*;
    let ok = match tag {
        HeatFbm | VarianceClock => matches!(model, ProcessModel::FBm { .. }),
        ScaledFourthOrder => scaled_parameters(model).is_some(),
        IteratedFourthOrder => scaled_parameters(model).is_some_and(|(k, _)| k == 0.0),
        BrownianFourthOrder | HalfOrderTime => is_ibm(model),
        FirstOrder | SecondOrder => iterated_exponent(tag, model).is_ok(),
        BesselThirdOrder => matches!(model, ProcessModel::WeightedJ { n: 1, .. }),
        BesselFourthOrder => matches!(model, ProcessModel::WeightedJ { n: 2, .. }),
        CauchyLaplace | CauchyRiesz => matches!(model, ProcessModel::Cauchy),
        CauchyWave => matches!(model, ProcessModel::CauchyOfCauchy),
        CauchyOfFbmHeat => matches!(model, ProcessModel::CauchyOfFBm { .. }),
        BrownianOfCauchy => matches!(model, ProcessModel::BmOfCauchy),
    };
    if ok {
        Ok(())
    } else {
        Err(mismatch(tag, model))
    }
}

fn hurst_of(model: &ProcessModel) -> f64 {
    match model {
        ProcessModel::FBm { h } | ProcessModel::WeightedJ { h, .. } | ProcessModel::CauchyOfFBm { h } => h.value(),
        _ => f64::NAN,
    }
}

/// Terms of the strong-form equation at one point, as `Σ terms = 0`.
fn point_terms(spec: &EquationSpec, p: &Probe) -> Result<Vec<Term>> {
    use EquationTag::*;
    let model = &spec.model;
    let (x, t) = (p.x, p.t);
    Ok(match spec.tag {
        HeatFbm | VarianceClock => {
            let h = hurst_of(model);
            // g(t) = t^{2H} is the variance of fBm
            let c = h * t.powf(2.0 * h - 1.0);
            vec![p.dt("p_t", 1)?, p.dx("p_xx", 2)?.scaled(-c)]
        }
        ScaledFourthOrder | IteratedFourthOrder => {
            let (k, h) = scaled_parameters(model).ok_or_else(|| mismatch(spec.tag, model))?;
            let q = p.dx("q", 0)?;
            let qx = p.dx("q_x", 1)?;
            let mut terms = vec![p.dt("q_t", 1)?.scaled(t)];
            if k != 0.0 {
                terms.push(q.scaled(k));
                terms.push(Term {
                    label: "x q_x".into(),
                    ..qx.scaled(k * x)
                });
            }
            terms.push(p.dx("q_xxxx", 4)?.scaled(-h / 4.0 * t.powf(4.0 * k + 2.0 * h)));
            terms
        }
        BrownianFourthOrder => vec![p.dt("q_t", 1)?, p.dx("q_xxxx", 4)?.scaled(-0.125)],
        FirstOrder => {
            let a = iterated_exponent(spec.tag, model)?;
            vec![
                p.dt("p_t", 1)?.scaled(t),
                p.dx("p", 0)?.scaled(a),
                p.dx("x p_x", 1)?.scaled(a * x),
            ]
        }
        SecondOrder => {
            let a = iterated_exponent(spec.tag, model)?;
            vec![
                p.dt("p_t", 1)?.scaled((1.0 + a) * t),
                p.dt("p_tt", 2)?.scaled(t * t),
                p.dx("x p_x", 1)?.scaled(-2.0 * a * a * x),
                p.dx("x^2 p_xx", 2)?.scaled(-a * a * x * x),
            ]
        }
        BesselThirdOrder => {
            let h = hurst_of(model);
            let c = h * t.powf(2.0 * h - 1.0);
            vec![
                p.dt("p_t", 1)?,
                p.dx("p_xx", 2)?.scaled(2.0 * c),
                p.dx("x p_xxx", 3)?.scaled(c * x),
            ]
        }
        BesselFourthOrder => {
            let h = hurst_of(model);
            let c = h * t.powf(2.0 * h - 1.0);
            vec![
                p.dt("p_t", 1)?,
                p.dx("p_xx", 2)?.scaled(-4.0 * c),
                p.dx("x p_xxx", 3)?.scaled(-5.0 * c * x),
                p.dx("x^2 p_xxxx", 4)?.scaled(-c * x * x),
            ]
        }
        CauchyLaplace => vec![p.dt("p_tt", 2)?, p.dx("p_xx", 2)?],
        CauchyWave | CauchyOfFbmHeat => {
            let f = spec.forcing.ok_or_else(|| mismatch(spec.tag, model))?.value(model, x, t)?;
            let forcing = Term {
                label: "forcing".into(),
                value: -f,
                error: 4.0 * f64::EPSILON * f.abs(),
            };
            if spec.tag == CauchyWave {
                vec![p.dt("q_tt", 2)?, p.dx("q_xx", 2)?.scaled(-1.0), forcing]
            } else {
                let h = hurst_of(model);
                vec![p.dt("q_t", 1)?, forcing, p.dx("q_xx", 2)?.scaled(h * t.powf(2.0 * h - 1.0))]
            }
        }
        BrownianOfCauchy => vec![p.dt("q_tt", 2)?, p.dx("q_xxxx", 4)?.scaled(0.25)],
        CauchyRiesz | HalfOrderTime => unreachable!("handled on whole grids"),
    })
}

/// Strong-form residual of the equation on the spec's grid and times, with
/// time derivatives taken by `diff`.
///
/// Points inside an excluded radius are skipped and counted. The verdict is
/// `Pass` iff the largest relative residual is within tolerance; a larger
/// residual is `Fail` only when the error budget is itself within tolerance.
pub fn strong_residual(spec: &EquationSpec, diff: &DiffConfig) -> Result<PdeResidualReport> {
    spec.validate()?;
    diff.validate()?;
    check_model(spec.tag, &spec.model)?;
    let space = DensityEvaluator::new(spec.model.clone())?.with_quadrature(space_quadrature());
    let time = DensityEvaluator::new(spec.model.clone())?.with_quadrature(time_quadrature());

    let mut jobs = Vec::new();
    let mut skipped = 0;
    for &t in &spec.times {
        let kept = kept_points(spec, &space, t);
        skipped += spec.grid.len() - kept.len();
        jobs.push((t, kept));
    }

    let points = match spec.tag {
        EquationTag::CauchyRiesz => {
            let mut out = Vec::new();
            for (t, kept) in &jobs {
                out.extend(riesz_points(spec, &time, diff, *t, kept)?);
            }
            out
        }
        EquationTag::HalfOrderTime => {
            let flat: Vec<(f64, f64)> = jobs.iter().flat_map(|(t, xs)| xs.iter().map(move |x| (*x, *t))).collect();
            flat.par_iter()
                .map(|&(x, t)| {
                    let r = fractional_residual(x, t)?;
                    let terms = vec![
                        Term {
                            label: "D^1/2 q".into(),
                            value: r.lhs,
                            error: r.lhs_error,
                        },
                        Term {
                            label: "q_xx".into(),
                            value: -r.rhs,
                            error: r.rhs_error,
                        },
                    ];
                    Ok(PointResidual::from_terms(x, t, terms, spec.tolerance))
                })
                .collect::<Result<Vec<_>>>()?
        }
        _ => {
            let flat: Vec<(f64, f64)> = jobs.iter().flat_map(|(t, xs)| xs.iter().map(move |x| (*x, *t))).collect();
            flat.par_iter()
                .map(|&(x, t)| {
                    let probe = Probe {
                        space: &space,
                        time: &time,
                        diff,
                        x,
                        t,
                    };
                    Ok(PointResidual::from_terms(x, t, point_terms(spec, &probe)?, spec.tolerance))
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    Ok(PdeResidualReport::assemble(spec, skipped, points))
}

/// Half-width of the spectral window as a multiple of `t`.
const RIESZ_HALF_WIDTH: f64 = 2000.0;
/// Spectral spacing as a fraction of `t`.
const RIESZ_SPACING: f64 = 0.01;

/// Samples `p(·, t)` on a uniform window that contains every kept point as a
/// node, and applies the `|β|` multiplier there.
fn riesz_on_window(ev: &DensityEvaluator, x0: f64, step: f64, t: f64) -> Result<(Vec<f64>, usize, usize)> {
    // refinement factor, even so that the 2dx subgrid still contains the nodes
    let m = 2 * (step / (2.0 * RIESZ_SPACING * t)).ceil().max(1.0) as usize;
    let dx = step / m as f64;
    let n = ((2.0 * RIESZ_HALF_WIDTH * t / dx).ceil() as usize).next_power_of_two();
    let half = n as f64 * dx / 2.0;
    let mut j0 = ((x0 + half) / dx).round() as usize;
    j0 -= j0 % 2;
    let start = x0 - j0 as f64 * dx;
    let grid = Grid1D::uniform(start, dx, n)?;
    let values = grid
        .points()
        .iter()
        .map(|&x| Ok(ev.density(x, t)?.value))
        .collect::<Result<Vec<_>>>()?;
    let fine = riesz_modulus_derivative(&grid, &values)?;
    Ok((fine, j0, m))
}

fn riesz_points(
    spec: &EquationSpec,
    ev: &DensityEvaluator,
    diff: &DiffConfig,
    t: f64,
    kept: &[f64],
) -> Result<Vec<PointResidual>> {
    let step = spec
        .grid
        .uniform_step()
        .ok_or_else(|| Error::InvalidParameter("the Riesz check needs a uniform grid".into()))?;
    let x0 = spec.grid.points()[0];
    let (fine, j0, m) = riesz_on_window(ev, x0, step, t)?;
    // the same window at twice the spacing, for the discretization error
    let n = fine.len();
    let dx = step / m as f64;
    let start = x0 - j0 as f64 * dx;
    let coarse_grid = Grid1D::uniform(start, 2.0 * dx, n / 2)?;
    let coarse_values = coarse_grid
        .points()
        .iter()
        .map(|&x| Ok(ev.density(x, t)?.value))
        .collect::<Result<Vec<_>>>()?;
    let coarse = riesz_modulus_derivative(&coarse_grid, &coarse_values)?;
    // density mass beyond the window, a bound on what truncation can change
    let outside = 2.0 / PI * (t / (n as f64 * dx / 2.0)).atan();
    let tail = outside / (PI * (n as f64 * dx / 4.0).powi(2));

    kept.par_iter()
        .map(|&x| {
            let i = ((x - x0) / step).round() as usize;
            let j = j0 + i * m;
            let r = fine[j];
            let probe = Probe {
                space: ev,
                time: ev,
                diff,
                x,
                t,
            };
            let terms = vec![
                probe.dt("p_t", 1)?,
                Term {
                    label: "|D| p".into(),
                    value: r,
                    error: (r - coarse[j / 2]).abs() + tail,
                },
            ];
            Ok(PointResidual::from_terms(x, t, terms, spec.tolerance))
        })
        .collect()
}

/// Closed-form `(∂²q/∂t², ∂²q/∂x²)` of the density of `C1(|C2(t)|)` off the
/// loci `x = 0` and `|x| = t`.
pub fn cauchy_wave_second_derivatives(x: f64, t: f64) -> Result<(f64, f64)> {
    if !(t > 0.0) || x == 0.0 || x.abs() == t {
        return Err(Error::SingularPoint { x });
    }
    let x2 = x * x;
    let t2 = t * t;
    let d = t2 - x2;
    let l = (t / x.abs()).ln();
    let pi2 = PI * PI;
    let d3 = d * d * d;
    let q_tt = 2.0 * (-4.0 * t2 * d * (l + 1.0) + 2.0 * t2 * (3.0 * t2 + x2) * l + d * d) / (pi2 * t * d3);
    let q_xx = 2.0 * t * (-4.0 * x2 * d + d * d + 2.0 * x2 * (t2 + 3.0 * x2) * l) / (pi2 * x2 * d3);
    Ok((q_tt, q_xx))
}

/// How the half-order time derivative was evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FractionalMethod {
    Caputo,
    /// Used at `x = 0`, where `q(0, s)` grows like `s^{-1/4}` and its time
    /// derivative is not integrable; the two forms agree wherever both exist.
    RiemannLiouville,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FractionalReport {
    pub x: f64,
    pub t: f64,
    /// Half-order time derivative.
    pub lhs: f64,
    pub lhs_error: f64,
    /// `2^{-3/2} ∂²q/∂x²`.
    pub rhs: f64,
    pub rhs_error: f64,
    pub residual: f64,
    /// `|lhs - rhs| / max(|lhs|, |rhs|)`.
    pub rel: f64,
    pub method: FractionalMethod,
}

fn fractional_quadrature() -> QuadratureConfig {
    QuadratureConfig {
        rel_tol: 1e-8,
        abs_tol: 1e-12,
        max_subdivisions: 2000,
    }
}

/// `∂²q/∂x²(0, t)` for the density of `B(|B(t)|)`.
///
/// The Gaussian mixture `∫ ∂²N(x; s) w(s) ds` diverges termwise at `x = 0`,
/// but `∫ ∂²N(x; s) ds = 0` for every `x ≠ 0`, so subtracting `w(0)` gives a
/// convergent integral equal to the limit from either side.
fn ibm_second_derivative_at_origin(t: f64, quad: &QuadratureConfig) -> Result<Estimate> {
    let w0 = 2.0 / (2.0 * PI * t).sqrt();
    // s = u² removes the square-root behavior at the origin
    let r = integrate_halfline_with(
        |u| {
            if u == 0.0 {
                return 0.0;
            }
            let u2 = u * u;
            -2.0 * w0 * (-u2 * u2 / (2.0 * t)).exp_m1() / ((2.0 * PI).sqrt() * u2)
        },
        &[t.powf(0.25)],
        quad,
    )?;
    Ok(r)
}

/// Half-order time derivative of the `B(|B(t)|)` density against
/// `2^{-3/2} ∂²q/∂x²` at one point.
pub fn fractional_residual(x: f64, t: f64) -> Result<FractionalReport> {
    if !(t > 0.0 && t.is_finite()) || !x.is_finite() {
        return Err(Error::domain(format!("fractional residual needs t > 0, got ({x}, {t})")));
    }
    let quad = fractional_quadrature();
    let ev = DensityEvaluator::new(ProcessModel::IteratedFBm {
        outer: Hurst::HALF,
        inner: Hurst::HALF,
    })?
    .with_quadrature(QuadratureConfig::default());
    let diff = DiffConfig {
        base_step: 1e-2,
        richardson_levels: 3,
        max_order: 4,
    };
    let (lhs, method) = if x == 0.0 {
        (
            riemann_liouville_half(|s| Ok(ev.density(0.0, s)?.value), t, &quad, &diff)?,
            FractionalMethod::RiemannLiouville,
        )
    } else {
        (
            caputo_half_time_derivative(|y, s| Ok(ev.density(y, s)?.value), x, t, &quad, &diff)?,
            FractionalMethod::Caputo,
        )
    };
    let qxx = if x == 0.0 {
        ibm_second_derivative_at_origin(t, &space_quadrature())?
    } else {
        ev.clone().with_quadrature(space_quadrature()).density_dx(x, t, 2)?
    };
    let c = 2f64.powf(-1.5);
    let rhs = c * qxx.value;
    let residual = lhs.value - rhs;
    let scale = lhs.value.abs().max(rhs.abs());
    Ok(FractionalReport {
        x,
        t,
        lhs: lhs.value,
        lhs_error: lhs.error + lhs.truncation_bound,
        rhs,
        rhs_error: c * qxx.error,
        residual,
        rel: if scale > 0.0 { residual.abs() / scale } else { 0.0 },
        method,
    })
}

/// Largest relative residual of `t/(H1 H2) ∂u/∂t + x ∂u/∂x + u = 0` for
/// `u(x, t) = f(x / t^{H1 H2}) / x` at the given `(x, t)` points, by finite
/// differences.
pub fn scaling_solution_check<F: Fn(f64) -> f64>(f: F, h1: Hurst, h2: Hurst, points: &[(f64, f64)]) -> Result<f64> {
    let a = h1.value() * h2.value();
    let u = |x: f64, t: f64| f(x / t.powf(a)) / x;
    let diff = DiffConfig::default();
    let mut worst = 0.0f64;
    for &(x, t) in points {
        if x == 0.0 || !(t > 0.0) {
            return Err(Error::domain(format!("scaling solution needs x != 0 and t > 0, got ({x}, {t})")));
        }
        let ut = differentiate(|s| u(x, s), t, 1, &diff)?.value;
        let ux = differentiate(|y| u(y, t), x, 1, &diff)?.value;
        let terms = [t / a * ut, x * ux, u(x, t)];
        let scale = terms.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if scale > 0.0 {
            worst = worst.max(terms.iter().sum::<f64>().abs() / scale);
        }
    }
    Ok(worst)
}

/// Runs every registry entry with its default settings.
pub fn run_registry(tags: &[EquationTag]) -> Vec<(EquationTag, Result<PdeResidualReport>)> {
    tags.iter()
        .map(|&tag| (tag, strong_residual(&super::lookup(tag), &time_diff())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pdecheck::lookup;

    fn run(tag: EquationTag) -> PdeResidualReport {
        strong_residual(&lookup(tag), &time_diff()).unwrap()
    }

    #[test]
    fn wave_oracle_has_the_forcing() {
        for (x, t) in [(0.3, 1.0), (2.0, 0.5), (-1.7, 2.0), (0.999, 1.0)] {
            let (qtt, qxx) = cauchy_wave_second_derivatives(x, t).unwrap();
            let f = -2.0 / (PI * PI * t * x * x);
            assert!((qtt - qxx - f).abs() < 1e-9 * f.abs().max(qtt.abs()), "({x},{t})");
        }
    }

    #[test]
    fn wave_oracle_matches_quadrature_derivatives() {
        let ev = DensityEvaluator::new(ProcessModel::CauchyOfCauchy)
            .unwrap()
            .with_quadrature(space_quadrature());
        for (x, t) in [(0.3, 1.0), (2.5, 1.0), (-0.7, 2.0)] {
            let (_, qxx) = cauchy_wave_second_derivatives(x, t).unwrap();
            let v = ev.density_dx(x, t, 2).unwrap().value;
            assert!((v - qxx).abs() < 1e-8 * qxx.abs(), "({x},{t}): {v} vs {qxx}");
        }
    }

    #[test]
    fn heat_fbm_on_default_grid() {
        let r = run(EquationTag::HeatFbm);
        assert_eq!(r.verdict, Verdict::Pass, "{} {:?}", r.max_rel_residual, r.worst);
        assert!(r.max_rel_residual <= 1e-6);
        assert_eq!(r.grid.skipped, 3, "x = 0 excluded at each time");
    }

    #[test]
    fn first_order_iterated() {
        let r = run(EquationTag::FirstOrder);
        assert!(r.max_rel_residual <= 1e-5, "{}", r.max_rel_residual);
    }

    #[test]
    fn cauchy_laplace() {
        let r = run(EquationTag::CauchyLaplace);
        assert!(r.max_rel_residual <= 1e-6, "{}", r.max_rel_residual);
    }

    #[test]
    fn mismatched_model_rejected() {
        let spec = lookup(EquationTag::CauchyWave).with_model(ProcessModel::Cauchy);
        assert!(matches!(strong_residual(&spec, &time_diff()), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn scaling_solutions() {
        let pts = [(0.5, 1.0), (1.3, 0.7), (-2.0, 2.0), (0.1, 3.0)];
        let (h1, h2) = (Hurst::new(1.0).unwrap(), Hurst::HALF);
        let g = |z: f64| z * (-z * z / 2.0).exp() / (2.0 * PI).sqrt();
        assert!(scaling_solution_check(g, h1, h2, &pts).unwrap() <= 1e-8);
        let (h1, h2) = (Hurst::new(0.6).unwrap(), Hurst::new(0.4).unwrap());
        assert!(scaling_solution_check(|z| z * z * z, h1, h2, &pts).unwrap() <= 1e-8);
        assert!(scaling_solution_check(f64::sin, h1, h2, &pts).unwrap() <= 1e-8);
    }

    #[test]
    fn ibm_curvature_at_origin_closed_form() {
        // -(2/√(2π)) (2πt)^{-1/2} · ½ Γ(-1/4) (2t)^{-1/4}, Γ(-1/4) = -4.901666809860711
        for t in [0.5, 1.0, 3.0] {
            let g = -4.901666809860711;
            let exact = -(2.0 / (2.0 * PI).sqrt()) / (2.0 * PI * t).sqrt() * 0.5 * g * (2.0 * t).powf(-0.25);
            let v = ibm_second_derivative_at_origin(t, &space_quadrature()).unwrap().value;
            assert!((v - exact).abs() < 1e-9 * exact.abs(), "{t}: {v} vs {exact}");
        }
    }
}
