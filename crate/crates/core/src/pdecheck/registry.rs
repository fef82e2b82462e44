use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Hurst, ProcessModel};
use crate::numerics::Grid1D;

/// One governing equation, identified by its registry letter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EquationTag {
    /// (a) `∂p/∂t = H t^{2H-1} ∂²p/∂x²` for fBm.
    HeatFbm,
    /// (b) `∂q/∂t = g'(t)/2 ∂²q/∂x²` for a Gaussian with variance `g(t)`.
    VarianceClock,
    /// (c) fourth-order equation of `t^K B(|B_H(t)|)`.
    ScaledFourthOrder,
    /// (d) fourth-order equation of `B(|B_H(t)|)`.
    IteratedFourthOrder,
    /// (e) fourth-order equation of `B(|B(t)|)`.
    BrownianFourthOrder,
    /// (f) `t ∂p/∂t = -H1 H2 ∂(xp)/∂x`.
    FirstOrder,
    /// (g) second-order equation of `B_{H1}(|B_{H2}(t)|)`.
    SecondOrder,
    /// (h) third-order equation of the `K0` law.
    BesselThirdOrder,
    /// (i) fourth-order equation of `J²`.
    BesselFourthOrder,
    /// (j) `∂²p/∂t² + ∂²p/∂x² = 0` for the Cauchy law.
    CauchyLaplace,
    /// (k) `∂p/∂t = -∂p/∂|x|` for the Cauchy law.
    CauchyRiesz,
    /// (l) forced wave equation of `C1(|C2(t)|)`.
    CauchyWave,
    /// (m) forced heat equation of `C(|B_H(t)|)`.
    CauchyOfFbmHeat,
    /// (n) fourth-order equation of `B(|C(t)|)`.
    BrownianOfCauchy,
    /// (o) half-order time-fractional equation of `B(|B(t)|)`.
    HalfOrderTime,
}

impl EquationTag {
    pub const ALL: [EquationTag; 15] = [
        EquationTag::HeatFbm,
        EquationTag::VarianceClock,
        EquationTag::ScaledFourthOrder,
        EquationTag::IteratedFourthOrder,
        EquationTag::BrownianFourthOrder,
        EquationTag::FirstOrder,
        EquationTag::SecondOrder,
        EquationTag::BesselThirdOrder,
        EquationTag::BesselFourthOrder,
        EquationTag::CauchyLaplace,
        EquationTag::CauchyRiesz,
        EquationTag::CauchyWave,
        EquationTag::CauchyOfFbmHeat,
        EquationTag::BrownianOfCauchy,
        EquationTag::HalfOrderTime,
    ];

    pub fn letter(self) -> char {
        let i = EquationTag::ALL.iter().position(|t| *t == self).expect("tag is listed");
        (b'a' + i as u8) as char
    }

    pub fn from_letter(c: char) -> Option<Self> {
        let i = (c as u32).checked_sub('a' as u32)? as usize;
        EquationTag::ALL.get(i).copied()
    }

    /// Whether the equation carries a `δ''` term that only a weak-form
    /// check can see.
    pub fn has_delta(self) -> bool {
        matches!(
            self,
            EquationTag::ScaledFourthOrder
                | EquationTag::IteratedFourthOrder
                | EquationTag::BrownianFourthOrder
                | EquationTag::BrownianOfCauchy
        )
    }
}

impl fmt::Display for EquationTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

impl FromStr for EquationTag {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let mut chars = s.chars();
        if let (Some(c), None) = (chars.next(), chars.next()) {
            if let Some(tag) = EquationTag::from_letter(c.to_ascii_lowercase()) {
                return Ok(tag);
            }
        }
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::InvalidParameter(format!("unknown equation tag '{s}' (expected a..o)")))
    }
}

/// Points where the density or its derivatives are singular.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SingularLocus {
    /// `x = 0`.
    Origin,
    /// `|x| = t`.
    Diagonal,
}

/// Closed-form inhomogeneous term `f(x, t)`, entering the equation as
/// `(time part) = (space part) + f`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Forcing {
    /// `-2 / (π² t x²)`.
    InverseSquareWave,
    /// `2 H t^{H-1} / (π x² √(2π))`.
    InverseSquareHeat,
}

impl Forcing {
    pub fn value(self, model: &ProcessModel, x: f64, t: f64) -> Result<f64> {
        Ok(match self {
            Forcing::InverseSquareWave => -2.0 / (PI * PI * t * x * x),
            Forcing::InverseSquareHeat => {
                let h = match model {
                    ProcessModel::CauchyOfFBm { h } => h.value(),
                    _ => return Err(mismatch(EquationTag::CauchyOfFbmHeat, model)),
                };
                2.0 * h * t.powf(h - 1.0) / (PI * x * x * (2.0 * PI).sqrt())
            }
        })
    }
}

/// Coefficient `c(t)` of the `δ''(x)` term, on the same side as the spatial
/// operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaForcing {
    /// `H t^{2K+H} / √(2π)` for `t^K B(|B_H(t)|)`, including `K = 0`.
    ScaledIterated,
    /// `1 / (2 √(2πt))`.
    Brownian,
    /// `-1 / (π t)`.
    CauchyClock,
}

impl DeltaForcing {
    pub fn coefficient(self, model: &ProcessModel, t: f64) -> Result<f64> {
        Ok(match self {
            DeltaForcing::ScaledIterated => {
                let (k, h) = scaled_parameters(model).ok_or_else(|| mismatch(EquationTag::ScaledFourthOrder, model))?;
                h * t.powf(2.0 * k + h) / (2.0 * PI).sqrt()
            }
            DeltaForcing::Brownian => 1.0 / (2.0 * (2.0 * PI * t).sqrt()),
            DeltaForcing::CauchyClock => -1.0 / (PI * t),
        })
    }
}

/// `(K, H)` of a model of the form `t^K B(|B_H(t)|)`.
pub(crate) fn scaled_parameters(model: &ProcessModel) -> Option<(f64, f64)> {
    match model {
        ProcessModel::ScaledIterated { k, h } => Some((*k, h.value())),
        ProcessModel::IteratedFBm { outer, inner } if *outer == Hurst::HALF => Some((0.0, inner.value())),
        _ => None,
    }
}

pub(crate) fn mismatch(tag: EquationTag, model: &ProcessModel) -> Error {
    Error::InvalidParameter(format!("equation ({tag}) does not govern {model}"))
}

/// A governing equation with the setting it is checked in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquationSpec {
    pub tag: EquationTag,
    /// The equation as printed, for reports.
    pub statement: String,
    /// Model checked by default.
    pub model: ProcessModel,
    pub excluded: Vec<SingularLocus>,
    /// Radius around `x = 0`, as a multiple of the model's scale at `t`.
    pub origin_radius: f64,
    /// Radius around `|x| = t`, as a multiple of `t`.
    pub diagonal_radius: f64,
    pub grid: Grid1D,
    pub times: Vec<f64>,
    pub forcing: Option<Forcing>,
    pub delta: Option<DeltaForcing>,
    pub tolerance: f64,
}

impl EquationSpec {
    fn new(tag: EquationTag, statement: &str, model: ProcessModel, tolerance: f64) -> Self {
        EquationSpec {
            tag,
            statement: statement.to_string(),
            model,
            excluded: Vec::new(),
            origin_radius: 0.05,
            diagonal_radius: 1e-3,
            grid: Grid1D::from_range(-3.0, 3.0, 0.25)
                .expect("static grid")
                .with_excluded_radius(0.1),
            times: vec![0.5, 1.0, 2.0],
            forcing: None,
            delta: None,
            tolerance,
        }
    }

    fn excluding(mut self, loci: &[SingularLocus]) -> Self {
        self.excluded = loci.to_vec();
        self
    }

    fn forced(mut self, f: Forcing) -> Self {
        self.forcing = Some(f);
        self
    }

    fn with_delta(mut self, d: DeltaForcing) -> Self {
        self.delta = Some(d);
        self
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn with_grid(mut self, grid: Grid1D) -> Self {
        self.grid = grid;
        self
    }

    pub fn with_times(mut self, times: Vec<f64>) -> Self {
        self.times = times;
        self
    }

    pub fn with_model(mut self, model: ProcessModel) -> Self {
        self.model = model;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidParameter(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        if self.excluded.contains(&SingularLocus::Origin) && !(self.origin_radius > 0.0 || self.grid.excluded_radius > 0.0)
        {
            return Err(Error::InvalidParameter(format!("({}) needs a positive radius around x = 0", self.tag)));
        }
        if self.excluded.contains(&SingularLocus::Diagonal) && !(self.diagonal_radius > 0.0) {
            return Err(Error::InvalidParameter(format!("({}) needs a positive radius around |x| = t", self.tag)));
        }
        if self.times.is_empty() || self.times.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(Error::InvalidParameter("check times must be positive".into()));
        }
        Ok(())
    }
}

fn h(v: f64) -> Hurst {
    Hurst::new(v).expect("static Hurst exponent")
}

/// Every governing equation, in registry order (a) to (o).
pub fn equation_registry() -> Vec<EquationSpec> {
    use EquationTag::*;
    use SingularLocus::*;
    const ANALYTIC: f64 = 1e-6;
    const QUADRATURE: f64 = 1e-5;
    const HALF_ORDER: f64 = 5e-4;
    let ibm = ProcessModel::IteratedFBm { outer: Hurst::HALF, inner: Hurst::HALF };
    vec![
        EquationSpec::new(HeatFbm, "dp/dt = H t^(2H-1) d2p/dx2", ProcessModel::FBm { h: h(0.7) }, ANALYTIC),
        EquationSpec::new(VarianceClock, "dq/dt = g'(t)/2 d2q/dx2", ProcessModel::FBm { h: h(0.3) }, ANALYTIC),
        EquationSpec::new(
            ScaledFourthOrder,
            "t dq/dt = -K d(xq)/dx + H/4 t^(4K+2H) d4q/dx4 + H t^(2K+H)/sqrt(2pi) delta''",
            ProcessModel::ScaledIterated { k: 0.3, h: h(0.6) },
            ANALYTIC,
        )
        .excluding(&[Origin])
        .with_delta(DeltaForcing::ScaledIterated),
        EquationSpec::new(
            IteratedFourthOrder,
            "t dq/dt = H/4 t^(2H) d4q/dx4 + H t^H/sqrt(2pi) delta''",
            ProcessModel::ScaledIterated { k: 0.0, h: h(0.7) },
            ANALYTIC,
        )
        .excluding(&[Origin])
        .with_delta(DeltaForcing::ScaledIterated),
        EquationSpec::new(
            BrownianFourthOrder,
            "dp/dt = 1/8 d4p/dx4 + 1/(2 sqrt(2 pi t)) delta''",
            ibm.clone(),
            ANALYTIC,
        )
        .excluding(&[Origin])
        .with_delta(DeltaForcing::Brownian),
        EquationSpec::new(
            FirstOrder,
            "t dp/dt = -H1 H2 d(xp)/dx",
            ProcessModel::IteratedFBm { outer: h(0.6), inner: h(0.4) },
            QUADRATURE,
        ),
        EquationSpec::new(
            SecondOrder,
            "(1 + H1 H2) t dp/dt + t^2 d2p/dt2 = H1^2 H2^2 (2x dp/dx + x^2 d2p/dx2)",
            ProcessModel::IteratedFBm { outer: h(0.6), inner: h(0.4) },
            QUADRATURE,
        ),
        EquationSpec::new(
            BesselThirdOrder,
            "dp/dt = -H t^(2H-1) (2 d2p/dx2 + x d3p/dx3)",
            ProcessModel::WeightedJ { n: 1, h: h(0.6) },
            QUADRATURE,
        )
        .excluding(&[Origin]),
        EquationSpec::new(
            BesselFourthOrder,
            "dp/dt = H t^(2H-1) (4 d2p/dx2 + 5x d3p/dx3 + x^2 d4p/dx4)",
            ProcessModel::WeightedJ { n: 2, h: h(0.6) },
            QUADRATURE,
        )
        .excluding(&[Origin]),
        EquationSpec::new(CauchyLaplace, "d2p/dt2 + d2p/dx2 = 0", ProcessModel::Cauchy, ANALYTIC),
        EquationSpec::new(CauchyRiesz, "dp/dt = -dp/d|x|", ProcessModel::Cauchy, ANALYTIC),
        EquationSpec::new(
            CauchyWave,
            "d2q/dt2 = d2q/dx2 - 2/(pi^2 t x^2)",
            ProcessModel::CauchyOfCauchy,
            ANALYTIC,
        )
        .excluding(&[Origin, Diagonal])
        .forced(Forcing::InverseSquareWave),
        EquationSpec::new(
            CauchyOfFbmHeat,
            "dq/dt = 2H t^(H-1)/(pi x^2 sqrt(2pi)) - H t^(2H-1) d2q/dx2",
            ProcessModel::CauchyOfFBm { h: h(0.4) },
            QUADRATURE,
        )
        .excluding(&[Origin])
        .forced(Forcing::InverseSquareHeat),
        EquationSpec::new(
            BrownianOfCauchy,
            "d2q/dt2 = -1/4 d4q/dx4 - 1/(pi t) delta''",
            ProcessModel::BmOfCauchy,
            ANALYTIC,
        )
        .excluding(&[Origin])
        .with_delta(DeltaForcing::CauchyClock),
        EquationSpec::new(HalfOrderTime, "d^(1/2)q/dt^(1/2) = 2^(-3/2) d2q/dx2", ibm, HALF_ORDER)
            .with_grid(Grid1D::from_range(-3.0, 3.0, 0.5).expect("static grid")),
    ]
}

/// Registry entry for `tag`.
pub fn lookup(tag: EquationTag) -> EquationSpec {
    equation_registry()
        .into_iter()
        .find(|e| e.tag == tag)
        .expect("registry is total")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_is_total_and_ordered() {
        let reg = equation_registry();
        assert_eq!(reg.len(), 15);
        for (i, e) in reg.iter().enumerate() {
            assert_eq!(e.tag.letter(), (b'a' + i as u8) as char);
            e.validate().unwrap();
        }
    }

    #[test]
    fn wave_entry_excludes_both_loci() {
        let l = lookup(EquationTag::CauchyWave);
        assert_eq!(l.excluded, vec![SingularLocus::Origin, SingularLocus::Diagonal]);
        assert_eq!(l.forcing, Some(Forcing::InverseSquareWave));
    }

    #[test]
    fn heat_forcing_value() {
        let m = lookup(EquationTag::CauchyOfFbmHeat);
        let (x, t) = (0.7f64, 1.3f64);
        let hv = 0.4f64;
        let exact = 2.0 * hv * t.powf(hv - 1.0) / (PI * x * x * (2.0 * PI).sqrt());
        assert_eq!(m.forcing.unwrap().value(&m.model, x, t).unwrap(), exact);
    }

    #[test]
    fn tags_parse() {
        assert_eq!("l".parse::<EquationTag>().unwrap(), EquationTag::CauchyWave);
        assert_eq!("cauchy_wave".parse::<EquationTag>().unwrap(), EquationTag::CauchyWave);
        assert!("z".parse::<EquationTag>().is_err());
        assert_eq!(EquationTag::from_letter('o'), Some(EquationTag::HalfOrderTime));
    }
}
