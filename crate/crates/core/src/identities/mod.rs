//! Equalities in distribution, checked by two-sample Kolmogorov-Smirnov
//! tests between independent samplers of each side, plus quadrature and
//! moment cross-checks.

mod ks;

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use ks::{arctan_scale, kolmogorov_survival, ks_one_sample, ks_two_sample, KsReport, SIGNIFICANCE};

use crate::analytics::mellin_weighted_chain;
use crate::densities::DensityEvaluator;
use crate::error::{Error, Result};
use crate::model::{Hurst, ProcessModel};
use crate::numerics::QuadratureConfig;
use crate::sampling::{
    sample_blocks, sample_marginal, sample_squared_clock_chain, sample_weighted_chain, RngState, Samples, Stream,
};

/// Smallest sample size accepted for an identity test.
pub const MIN_SAMPLES: usize = 10_000;

/// Time at which negative controls of the fBm-chain identities run. A wrong
/// Hurst exponent only rescales by a power of `t`, invisible near `t = 1`.
pub const CONTROL_TIME: f64 = 4.0;

/// One equality in distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tag", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum IdentityTag {
    /// `C1(|C2(t)|) = ½ C1(√(2t)) C2(√(2t))`.
    CcProduct,
    /// `C1(|C2(t)|) = 1 / C1(|C2(1/t)|)`.
    CcReciprocal,
    /// `J^{n-1}(t) = Π_{i=1}^{n} B_{H/n}(t)` with `n` factors.
    JFactorization { n: usize, h: Hurst },
    /// `J^n(t) = B(|B(...|B_H(t)|²...)|²)` with `n` outer Brownian layers.
    JBmChain { n: usize, h: Hurst },
    /// `B_H(|B_H(t)|^{1/H}) = B(|B_H(t)|²) = B_{H/2}(t) B_{H/2}(t)`.
    J1Pair { h: Hurst },
    /// Weighted chain with distinct exponents per layer against the
    /// squared-clock chain driven by the innermost one.
    MixedChain { hursts: Vec<Hurst> },
}

impl fmt::Display for IdentityTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IdentityTag::CcProduct => write!(f, "CC_PRODUCT"),
            IdentityTag::CcReciprocal => write!(f, "CC_RECIPROCAL"),
            IdentityTag::JFactorization { n, h } => write!(f, "J_FACTORIZATION(n={n},H={})", h.value()),
            IdentityTag::JBmChain { n, h } => write!(f, "J_BM_CHAIN(n={n},H={})", h.value()),
            IdentityTag::J1Pair { h } => write!(f, "J1_PAIR(H={})", h.value()),
            IdentityTag::MixedChain { hursts } => {
                let hs: Vec<String> = hursts.iter().map(|h| h.value().to_string()).collect();
                write!(f, "MIXED_CHAIN(H={})", hs.join("/"))
            }
        }
    }
}

impl IdentityTag {
    fn validate(&self) -> Result<()> {
        match self {
            IdentityTag::JFactorization { n, .. } if *n < 2 => Err(Error::InvalidParameter(format!(
                "factorization needs at least 2 factors, got {n}"
            ))),
            IdentityTag::JBmChain { n, .. } if *n < 1 => {
                Err(Error::InvalidParameter("chain identity needs n >= 1".into()))
            }
            IdentityTag::MixedChain { hursts } if hursts.len() < 2 => {
                Err(Error::InvalidParameter("mixed chain needs at least two exponents".into()))
            }
            _ => Ok(()),
        }
    }

    fn heavy_tailed(&self) -> bool {
        matches!(self, IdentityTag::CcProduct | IdentityTag::CcReciprocal)
    }
}

/// A configured identity test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityCase {
    pub tag: IdentityTag,
    pub t: f64,
    pub n_samples: usize,
    /// Independent streams for the two sides.
    pub seeds: (RngState, RngState),
    /// Runs the perturbed version of the identity, which must fail.
    pub negative_control: bool,
}

impl IdentityCase {
    pub fn new(tag: IdentityTag, t: f64, n_samples: usize, seeds: (RngState, RngState)) -> Self {
        IdentityCase {
            tag,
            t,
            n_samples,
            seeds,
            negative_control: false,
        }
    }

    /// The perturbed identity: the `½` is dropped from the Cauchy product,
    /// the reciprocal side uses time `t` instead of `1/t`, and the fBm-chain
    /// identities get exponent `H n/(n+1)` on their right side (per factor
    /// `H/(n+1)` instead of `H/n`), run at [`CONTROL_TIME`].
    pub fn negative_control(&self) -> Self {
        let mut c = self.clone();
        c.negative_control = true;
        if !self.tag.heavy_tailed() {
            c.t = CONTROL_TIME;
        }
        c
    }

    pub fn validate(&self) -> Result<()> {
        self.tag.validate()?;
        if self.n_samples < MIN_SAMPLES {
            return Err(Error::InvalidParameter(format!(
                "identity tests need at least {MIN_SAMPLES} samples, got {}",
                self.n_samples
            )));
        }
        if !(self.t > 0.0 && self.t.is_finite()) {
            return Err(Error::domain(format!("identity needs t > 0, got {}", self.t)));
        }
        if self.seeds.0 == self.seeds.1 {
            return Err(Error::InvalidParameter("the two sides need independent streams".into()));
        }
        if self.negative_control && self.tag == IdentityTag::CcReciprocal && self.t == 1.0 {
            return Err(Error::InvalidParameter(
                "the reciprocal control is vacuous at t = 1, where both times coincide".into(),
            ));
        }
        Ok(())
    }
}

type Draw = Box<dyn Fn(&mut Stream) -> Result<f64> + Sync>;

/// One side of an identity: a named sampler.
struct Side {
    label: String,
    draw: Draw,
}

impl Side {
    fn model(model: ProcessModel, t: f64) -> Side {
        Side {
            label: format!("{model}@t={t}"),
            draw: Box::new(move |rng| sample_marginal(&model, t, rng)),
        }
    }

    fn sample(&self, state: RngState, n: usize) -> Result<Samples> {
        sample_blocks(state, n, |rng| (self.draw)(rng))
    }
}

fn perturbed(h: Hurst, n: usize) -> Result<Hurst> {
    Hurst::new(h.value() * n as f64 / (n as f64 + 1.0))
}

/// Left and right sampler of each identity, plus optional extra right sides.
fn sides(case: &IdentityCase) -> Result<(Side, Vec<Side>)> {
    let t = case.t;
    let ctl = case.negative_control;
    Ok(match &case.tag {
        IdentityTag::CcProduct => {
            // HalfProductCauchy at 2t is C1(√(2t))C2(√(2t)) without the ½
            let right_t = if ctl { 2.0 * t } else { t };
            (
                Side::model(ProcessModel::CauchyOfCauchy, t),
                vec![Side::model(ProcessModel::HalfProductCauchy, right_t)],
            )
        }
        IdentityTag::CcReciprocal => {
            let right_t = if ctl { 1.0 / t } else { t };
            (
                Side::model(ProcessModel::CauchyOfCauchy, t),
                vec![Side::model(ProcessModel::ReciprocalCC, right_t)],
            )
        }
        IdentityTag::JFactorization { n, h } => {
            let hp = if ctl { perturbed(*h, *n)? } else { *h };
            (
                Side::model(ProcessModel::WeightedJ { n: n - 1, h: *h }, t),
                vec![Side::model(ProcessModel::ProductFBm { n: *n, h: hp }, t)],
            )
        }
        IdentityTag::JBmChain { n, h } => {
            let (n, hp) = (*n, if ctl { perturbed(*h, *n)? } else { *h });
            (
                Side::model(ProcessModel::WeightedJ { n, h: *h }, t),
                vec![Side {
                    label: format!("squared-clock chain n={n} H={}@t={t}", hp.value()),
                    draw: Box::new(move |rng| Ok(sample_squared_clock_chain(n, hp, t, rng))),
                }],
            )
        }
        IdentityTag::J1Pair { h } => {
            let hp = if ctl { perturbed(*h, 2)? } else { *h };
            let h = *h;
            (
                Side::model(ProcessModel::WeightedJ { n: 1, h }, t),
                vec![
                    Side {
                        label: format!("B(|B_H(t)|^2) H={}@t={t}", h.value()),
                        draw: Box::new(move |rng| Ok(sample_squared_clock_chain(1, h, t, rng))),
                    },
                    Side::model(ProcessModel::ProductFBm { n: 2, h: hp }, t),
                ],
            )
        }
        IdentityTag::MixedChain { hursts } => {
            let last = *hursts.last().expect("validated");
            let n = hursts.len() - 1;
            let hp = if ctl { perturbed(last, n)? } else { last };
            let hs = hursts.clone();
            (
                Side {
                    label: format!("{}@t={t}", IdentityTag::MixedChain { hursts: hs.clone() }),
                    draw: Box::new(move |rng| sample_weighted_chain(&hs, t, rng)),
                },
                vec![Side {
                    label: format!("squared-clock chain n={n} H={}@t={t}", hp.value()),
                    draw: Box::new(move |rng| Ok(sample_squared_clock_chain(n, hp, t, rng))),
                }],
            )
        }
    })
}

/// KS comparison of the left side with one right side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub left: String,
    pub right: String,
    pub ks: KsReport,
}

/// Sample moment `E X^{2k}` against its closed form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentCheck {
    pub side: String,
    pub order: u32,
    pub estimate: f64,
    pub std_error: f64,
    pub exact: f64,
    /// `|estimate - exact| / std_error`.
    pub z: f64,
    /// `z <= 4`.
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub case: IdentityCase,
    pub comparisons: Vec<Comparison>,
    pub moments: Vec<MomentCheck>,
    /// Every comparison and moment check passes.
    pub pass: bool,
    /// Redraws made by rejection steps in the samplers.
    pub redraws: u64,
}

impl IdentityReport {
    /// The comparison with the smallest p-value.
    pub fn worst(&self) -> Option<&Comparison> {
        self.comparisons.iter().min_by(|a, b| a.ks.p_value.total_cmp(&b.ks.p_value))
    }
}

pub(crate) fn moment_check(side: &str, values: &[f64], order: u32, exact: f64) -> MomentCheck {
    let n = values.len() as f64;
    let p: Vec<f64> = values.iter().map(|x| x.powi(2 * order as i32)).collect();
    let mean = p.iter().sum::<f64>() / n;
    let var = p.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let std_error = (var / n).sqrt();
    let z = (mean - exact).abs() / std_error;
    MomentCheck {
        side: side.to_string(),
        order,
        estimate: mean,
        std_error,
        exact,
        z,
        pass: z <= 4.0,
    }
}

/// Draws both sides on their own streams and compares them.
///
/// Every right side uses a child of the second seed, so adding sides never
/// changes the draws of the others. For `J_FACTORIZATION` the sample moments
/// `E X²` and `E X⁴` of both sides are also compared with the closed form.
pub fn run_identity(case: &IdentityCase) -> Result<IdentityReport> {
    case.validate()?;
    let (left, rights) = sides(case)?;
    let a = left.sample(case.seeds.0, case.n_samples)?;
    let mut redraws = a.redraws;
    let heavy = case.tag.heavy_tailed();
    let transform = |v: &[f64]| if heavy { arctan_scale(v, case.t) } else { v.to_vec() };
    let ta = transform(&a.values);
    let mut comparisons = Vec::new();
    let mut right_values = Vec::new();
    for (i, side) in rights.iter().enumerate() {
        let state = if i == 0 { case.seeds.1 } else { case.seeds.1.child(i as u64) };
        let b = side.sample(state, case.n_samples)?;
        redraws += b.redraws;
        comparisons.push(Comparison {
            left: left.label.clone(),
            right: side.label.clone(),
            ks: ks_two_sample(&ta, &transform(&b.values))?,
        });
        right_values.push((side.label.clone(), b.values));
    }
    let mut moments = Vec::new();
    if let IdentityTag::JFactorization { n, h } = &case.tag {
        for k in 1..=2u32 {
            let exact = mellin_weighted_chain(2.0 * k as f64 + 1.0, *n, *h, case.t)?;
            moments.push(moment_check(&left.label, &a.values, k, exact));
            for (label, values) in &right_values {
                moments.push(moment_check(label, values, k, exact));
            }
        }
    }
    let pass = comparisons.iter().all(|c| c.ks.pass) && moments.iter().all(|m| m.pass);
    Ok(IdentityReport {
        case: case.clone(),
        comparisons,
        moments,
        pass,
        redraws,
    })
}

fn h(v: f64) -> Hurst {
    Hurst::new(v).expect("static Hurst exponent")
}

/// First stream id used by [`default_cases`].
pub const STREAM_BASE: u64 = 6;

/// Desk-scale configuration of every identity, with streams derived from
/// `seed`: case `i` uses stream ids `STREAM_BASE + 2i` and
/// `STREAM_BASE + 2i + 1`.
pub fn default_cases(seed: u64, n_samples: usize) -> Vec<IdentityCase> {
    let cases = [
        (IdentityTag::CcProduct, 1.0),
        (IdentityTag::CcReciprocal, 2.0),
        (IdentityTag::JFactorization { n: 2, h: h(0.6) }, 1.5),
        (IdentityTag::JFactorization { n: 3, h: h(0.6) }, 1.5),
        (IdentityTag::JBmChain { n: 2, h: h(0.6) }, 1.5),
        (IdentityTag::J1Pair { h: h(0.6) }, 1.5),
        (
            IdentityTag::MixedChain {
                hursts: vec![h(0.7), h(0.4), h(0.6)],
            },
            1.5,
        ),
    ];
    cases
        .into_iter()
        .enumerate()
        .map(|(i, (tag, t))| {
            let i = i as u64;
            let left = RngState::new(seed, STREAM_BASE + 2 * i);
            let right = RngState::new(seed, STREAM_BASE + 2 * i + 1);
            IdentityCase::new(tag, t, n_samples, (left, right))
        })
        .collect()
}

/// Sup-distance between the quadrature distribution functions of
/// `1/C1(|C2(1/t)|)` and `C1(|C2(t)|)` over 50 points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfIdentityReport {
    pub t: f64,
    pub max_deviation: f64,
    pub worst_w: f64,
    pub points: usize,
}

/// Compares the two distribution functions at `w = t tan(θ)` for 50 angles
/// spread over `(-π/2, π/2)`.
pub fn cdf_identity_check(t: f64) -> Result<CdfIdentityReport> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::domain(format!("CDF identity needs t > 0, got {t}")));
    }
    let quad = QuadratureConfig::default().with_rel_tol(1e-12);
    let recip = DensityEvaluator::new(ProcessModel::ReciprocalCC)?.with_quadrature(quad);
    let cc = DensityEvaluator::new(ProcessModel::CauchyOfCauchy)?.with_quadrature(quad);
    let n = 50;
    let ws: Vec<f64> = (0..n)
        .map(|i| {
            let theta = std::f64::consts::PI * ((i as f64 + 0.5) / n as f64 - 0.5);
            t * theta.tan()
        })
        .collect();
    let devs = ws
        .par_iter()
        .map(|&w| Ok(((recip.cdf(w, t)?.value - cc.cdf(w, t)?.value).abs(), w)))
        .collect::<Result<Vec<_>>>()?;
    let (max_deviation, worst_w) = devs.into_iter().fold((0.0, 0.0), |m, d| if d.0 > m.0 { d } else { m });
    Ok(CdfIdentityReport {
        t,
        max_deviation,
        worst_w,
        points: n,
    })
}

/// Tabulated distribution function on `x = s tan(θ)`, linearly interpolated
/// in `θ`; the table is fine enough that interpolation error stays far below
/// KS resolution at desk-scale sample sizes.
pub struct CdfTable {
    scale: f64,
    thetas: Vec<f64>,
    values: Vec<f64>,
}

impl CdfTable {
    pub fn new(ev: &DensityEvaluator, t: f64, nodes: usize) -> Result<Self> {
        if nodes < 3 {
            return Err(Error::InvalidParameter("CDF table needs at least 3 nodes".into()));
        }
        let scale = ev.model.scale(t);
        let half = std::f64::consts::FRAC_PI_2;
        let thetas: Vec<f64> = (0..nodes)
            .map(|i| -half + std::f64::consts::PI * i as f64 / (nodes - 1) as f64)
            .collect();
        let values = thetas
            .par_iter()
            .map(|&th| {
                if th <= -half {
                    Ok(0.0)
                } else if th >= half {
                    Ok(1.0)
                } else {
                    Ok(ev.cdf(scale * th.tan(), t)?.value)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CdfTable { scale, thetas, values })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let th = (x / self.scale).atan();
        let n = self.thetas.len();
        let step = self.thetas[1] - self.thetas[0];
        let pos = ((th - self.thetas[0]) / step).clamp(0.0, (n - 1) as f64);
        let i = (pos.floor() as usize).min(n - 2);
        let f = pos - i as f64;
        (self.values[i] * (1.0 - f) + self.values[i + 1] * f).clamp(0.0, 1.0)
    }
}

/// One-sample KS of `n` draws of `model` at `t` against its quadrature CDF.
pub fn sampler_density_coherence(model: &ProcessModel, t: f64, n: usize, state: RngState) -> Result<KsReport> {
    let ev = DensityEvaluator::new(model.clone())?;
    let table = CdfTable::new(&ev, t, 2001)?;
    let draws = crate::sampling::sample_many(model, t, state, n)?;
    ks_one_sample(&draws.values, |x| table.eval(x))
}
