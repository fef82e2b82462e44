//! Process descriptors shared by samplers, densities, equation checks and identity tests.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hurst exponent, validated to lie in (0, 1].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Hurst(f64);

impl Hurst {
    pub fn new(h: f64) -> Result<Self> {
        if h.is_finite() && h > 0.0 && h <= 1.0 {
            Ok(Hurst(h))
        } else {
            Err(Error::InvalidParameter(format!(
                "Hurst exponent must lie in (0, 1], got {h}"
            )))
        }
    }

    /// Brownian motion.
    pub const HALF: Hurst = Hurst(0.5);

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Hurst {
    type Error = Error;
    fn try_from(h: f64) -> Result<Self> {
        Hurst::new(h)
    }
}

impl From<Hurst> for f64 {
    fn from(h: Hurst) -> f64 {
        h.0
    }
}

impl fmt::Display for Hurst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One of the composed processes studied here, with its parameters.
///
/// Chains list Hurst exponents from the outermost process to the innermost
/// one, so `IteratedFBmChain { hursts: [h1, h2, h3] }` is
/// `B_h1(|B_h2(|B_h3(t)|)|)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProcessModel {
    /// Fractional Brownian motion `B_H(t)`.
    FBm { h: Hurst },
    /// `B_{H1}(|B_{H2}(t)|)`.
    IteratedFBm { outer: Hurst, inner: Hurst },
    /// Arbitrary-depth iterated fBm, outermost first.
    IteratedFBmChain { hursts: Vec<Hurst> },
    /// `J^n`: `n + 1` fBms with common exponent `H`, inner clocks raised to `1/H`.
    WeightedJ { n: usize, h: Hurst },
    /// `t^K B(|B_H(t)|)`, the scaled iterated process.
    ScaledIterated { k: f64, h: Hurst },
    /// Product of `n` independent fBms, each with exponent `H/n`.
    ProductFBm { n: usize, h: Hurst },
    /// Symmetric Cauchy process with scale `t`.
    Cauchy,
    /// `C(|B_H(t)|)`.
    CauchyOfFBm { h: Hurst },
    /// `B(|C(t)|)`.
    BmOfCauchy,
    /// `C1(|C2(t)|)`.
    CauchyOfCauchy,
    /// `C1(sqrt(2t)) C2(sqrt(2t)) / 2`.
    HalfProductCauchy,
    /// `1 / C1(|C2(1/t)|)`.
    ReciprocalCC,
}

impl ProcessModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            ProcessModel::IteratedFBmChain { hursts } if hursts.len() < 2 => Err(
                Error::InvalidParameter("an iterated chain needs at least two exponents".into()),
            ),
            ProcessModel::WeightedJ { n, .. } if *n < 1 => {
                Err(Error::InvalidParameter("WeightedJ needs n >= 1".into()))
            }
            ProcessModel::ProductFBm { n, .. } if *n < 1 => {
                Err(Error::InvalidParameter("ProductFBm needs n >= 1".into()))
            }
            ProcessModel::ScaledIterated { k, .. } if !(k.is_finite() && *k >= 0.0) => Err(
                Error::InvalidParameter(format!("scaling exponent K must be >= 0, got {k}")),
            ),
            _ => Ok(()),
        }
    }

    /// Spatial scale of the marginal law at time `t`: `X(t) / scale(t)` has a
    /// law that does not depend on `t`.
    pub fn scale(&self, t: f64) -> f64 {
        match self {
            ProcessModel::FBm { h } => t.powf(h.value()),
            ProcessModel::IteratedFBm { outer, inner } => t.powf(outer.value() * inner.value()),
            ProcessModel::IteratedFBmChain { hursts } => {
                t.powf(hursts.iter().map(|h| h.value()).product())
            }
            ProcessModel::WeightedJ { h, .. } | ProcessModel::ProductFBm { h, .. } => {
                t.powf(h.value())
            }
            ProcessModel::ScaledIterated { k, h } => t.powf(k + 0.5 * h.value()),
            ProcessModel::CauchyOfFBm { h } => t.powf(h.value()),
            ProcessModel::BmOfCauchy => t.sqrt(),
            ProcessModel::Cauchy
            | ProcessModel::CauchyOfCauchy
            | ProcessModel::HalfProductCauchy
            | ProcessModel::ReciprocalCC => t,
        }
    }

    /// True for laws with algebraic tails, where comparisons are done on the
    /// arctan scale.
    pub fn heavy_tailed(&self) -> bool {
        matches!(
            self,
            ProcessModel::Cauchy
                | ProcessModel::CauchyOfFBm { .. }
                | ProcessModel::BmOfCauchy
                | ProcessModel::CauchyOfCauchy
                | ProcessModel::HalfProductCauchy
                | ProcessModel::ReciprocalCC
        )
    }

    pub fn cauchy_driven(&self) -> bool {
        matches!(
            self,
            ProcessModel::Cauchy
                | ProcessModel::BmOfCauchy
                | ProcessModel::CauchyOfCauchy
                | ProcessModel::HalfProductCauchy
                | ProcessModel::ReciprocalCC
        )
    }
}

fn fmt_hursts(hursts: &[Hurst]) -> String {
    hursts
        .iter()
        .map(|h| h.to_string())
        .collect::<Vec<_>>()
        .join("/")
}

impl fmt::Display for ProcessModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProcessModel::FBm { h } => write!(f, "fbm:H={h}"),
            ProcessModel::IteratedFBm { outer, inner } => write!(f, "itfbm:H1={outer},H2={inner}"),
            ProcessModel::IteratedFBmChain { hursts } => write!(f, "chain:H={}", fmt_hursts(hursts)),
            ProcessModel::WeightedJ { n, h } => write!(f, "j:n={n},H={h}"),
            ProcessModel::ScaledIterated { k, h } => write!(f, "scaled:K={k},H={h}"),
            ProcessModel::ProductFBm { n, h } => write!(f, "prodfbm:n={n},H={h}"),
            ProcessModel::Cauchy => write!(f, "cauchy"),
            ProcessModel::CauchyOfFBm { h } => write!(f, "cbm:H={h}"),
            ProcessModel::BmOfCauchy => write!(f, "bc"),
            ProcessModel::CauchyOfCauchy => write!(f, "cc"),
            ProcessModel::HalfProductCauchy => write!(f, "halfprod"),
            ProcessModel::ReciprocalCC => write!(f, "recipcc"),
        }
    }
}

struct Params<'a> {
    model: &'a str,
    pairs: Vec<(&'a str, &'a str)>,
}

impl<'a> Params<'a> {
    fn parse(model: &'a str, body: Option<&'a str>) -> Result<Self> {
        let mut pairs = Vec::new();
        if let Some(body) = body {
            for item in body.split(',').filter(|s| !s.is_empty()) {
                let (k, v) = item.split_once('=').ok_or_else(|| {
                    Error::InvalidParameter(format!("expected key=value in '{item}'"))
                })?;
                pairs.push((k.trim(), v.trim()));
            }
        }
        Ok(Params { model, pairs })
    }

    fn allow(&self, keys: &[&str]) -> Result<()> {
        for (k, _) in &self.pairs {
            if !keys.contains(k) {
                return Err(Error::InvalidParameter(format!(
                    "unknown key '{k}' for model '{}'",
                    self.model
                )));
            }
        }
        Ok(())
    }

    fn raw(&self, key: &str) -> Option<&'a str> {
        self.pairs.iter().find(|(k, _)| *k == key).map(|(_, v)| *v)
    }

    fn float(&self, key: &str, default: Option<f64>) -> Result<f64> {
        match self.raw(key) {
            Some(v) => v.parse::<f64>().map_err(|_| {
                Error::InvalidParameter(format!("'{key}' must be a number, got '{v}'"))
            }),
            None => default.ok_or_else(|| {
                Error::InvalidParameter(format!("model '{}' requires '{key}'", self.model))
            }),
        }
    }

    fn hurst(&self, key: &str, default: Option<f64>) -> Result<Hurst> {
        Hurst::new(self.float(key, default)?)
    }

    fn count(&self, key: &str, default: usize) -> Result<usize> {
        match self.raw(key) {
            Some(v) => v.parse::<usize>().map_err(|_| {
                Error::InvalidParameter(format!("'{key}' must be a positive integer, got '{v}'"))
            }),
            None => Ok(default),
        }
    }
}

/// Parses the `name[:key=val[,key=val]*]` grammar, for example
/// `itfbm:H1=0.6,H2=0.4` or `chain:H=0.7/0.5/0.6`.
impl FromStr for ProcessModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, body) = match s.split_once(':') {
            Some((n, b)) => (n, Some(b)),
            None => (s, None),
        };
        let p = Params::parse(name, body)?;
        let model = match name {
            "fbm" => {
                p.allow(&["H"])?;
                ProcessModel::FBm { h: p.hurst("H", Some(0.5))? }
            }
            "itfbm" => {
                p.allow(&["H1", "H2"])?;
                ProcessModel::IteratedFBm {
                    outer: p.hurst("H1", Some(0.5))?,
                    inner: p.hurst("H2", Some(0.5))?,
                }
            }
            "chain" => {
                p.allow(&["H"])?;
                let list = p
                    .raw("H")
                    .ok_or_else(|| Error::InvalidParameter("chain requires H=h1/h2/...".into()))?;
                let hursts = list
                    .split('/')
                    .map(|v| {
                        v.trim()
                            .parse::<f64>()
                            .map_err(|_| Error::InvalidParameter(format!("bad exponent '{v}'")))
                            .and_then(Hurst::new)
                    })
                    .collect::<Result<Vec<_>>>()?;
                ProcessModel::IteratedFBmChain { hursts }
            }
            "j" => {
                p.allow(&["n", "H"])?;
                ProcessModel::WeightedJ {
                    n: p.count("n", 1)?,
                    h: p.hurst("H", None)?,
                }
            }
            "scaled" => {
                p.allow(&["K", "H"])?;
                ProcessModel::ScaledIterated {
                    k: p.float("K", None)?,
                    h: p.hurst("H", None)?,
                }
            }
            "prodfbm" => {
                p.allow(&["n", "H"])?;
                ProcessModel::ProductFBm {
                    n: p.count("n", 2)?,
                    h: p.hurst("H", None)?,
                }
            }
            "cauchy" => {
                p.allow(&[])?;
                ProcessModel::Cauchy
            }
            "cbm" => {
                p.allow(&["H"])?;
                ProcessModel::CauchyOfFBm { h: p.hurst("H", Some(0.5))? }
            }
            "bc" => {
                p.allow(&[])?;
                ProcessModel::BmOfCauchy
            }
            "cc" => {
                p.allow(&[])?;
                ProcessModel::CauchyOfCauchy
            }
            "halfprod" => {
                p.allow(&[])?;
                ProcessModel::HalfProductCauchy
            }
            "recipcc" => {
                p.allow(&[])?;
                ProcessModel::ReciprocalCC
            }
            other => {
                return Err(Error::InvalidParameter(format!("unknown model '{other}'")));
            }
        };
        model.validate()?;
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hurst_bounds() {
        assert!(Hurst::new(1.0).is_ok());
        assert!(Hurst::new(0.0).is_err());
        assert!(Hurst::new(1.2).is_err());
        assert!(Hurst::new(f64::NAN).is_err());
    }

    #[test]
    fn grammar_round_trip() {
        for text in [
            "fbm:H=0.7",
            "itfbm:H1=0.6,H2=0.4",
            "chain:H=0.7/0.5/0.6",
            "j:n=2,H=0.4",
            "scaled:K=0.3,H=0.6",
            "prodfbm:n=2,H=0.8",
            "cauchy",
            "cbm:H=0.7",
            "bc",
            "cc",
            "halfprod",
            "recipcc",
        ] {
            let m: ProcessModel = text.parse().unwrap();
            assert_eq!(m.to_string(), text);
            let again: ProcessModel = m.to_string().parse().unwrap();
            assert_eq!(again, m);
        }
    }

    #[test]
    fn grammar_defaults_and_errors() {
        let j: ProcessModel = "j:H=0.25".parse().unwrap();
        assert_eq!(j, ProcessModel::WeightedJ { n: 1, h: Hurst::new(0.25).unwrap() });
        assert!("nope".parse::<ProcessModel>().is_err());
        assert!("fbm:H=1.5".parse::<ProcessModel>().is_err());
        assert!("fbm:Q=0.5".parse::<ProcessModel>().is_err());
        assert!("chain:H=0.5".parse::<ProcessModel>().is_err());
        assert!("scaled:K=-1,H=0.5".parse::<ProcessModel>().is_err());
    }

    #[test]
    fn serde_round_trip() {
        let m = ProcessModel::IteratedFBmChain {
            hursts: vec![Hurst::new(0.7).unwrap(), Hurst::new(0.5).unwrap()],
        };
        let json = serde_json::to_string(&m).unwrap();
        let back: ProcessModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
        assert!(serde_json::from_str::<Hurst>("2.0").is_err());
    }
}
