use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::rng::{RngState, Stream};
use crate::error::{Error, Result};
use crate::model::{Hurst, ProcessModel};

/// Draws per parallel block; each block owns a child stream.
pub const BLOCK: usize = 4096;

fn check_time(model: &ProcessModel, t: f64) -> Result<()> {
    if t == 0.0 && model.heavy_tailed() {
        return Err(Error::DegenerateTime { t });
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::domain(format!("sampling needs t > 0, got {t}")));
    }
    Ok(())
}

/// `B(|B(...|B_H(t)|²...)|²)` with `n` outer Brownian layers.
pub fn sample_squared_clock_chain(n: usize, h: Hurst, t: f64, rng: &mut Stream) -> f64 {
    let mut v = t.powf(h.value()) * rng.gaussian();
    for _ in 0..n {
        // B(s²) at s = |v| has standard deviation |v|
        v = (v * v).sqrt() * rng.gaussian();
    }
    v
}

/// Weighted chain with one Hurst exponent per layer, outermost first:
/// `B_{H1}(|B_{H2}(...|B_{Hm}(t)|^{1/H_{m-1}}...)|^{1/H1})`.
pub fn sample_weighted_chain(hursts: &[Hurst], t: f64, rng: &mut Stream) -> Result<f64> {
    let (last, outer) = hursts
        .split_last()
        .ok_or_else(|| Error::InvalidParameter("empty Hurst list".into()))?;
    let mut v = t.powf(last.value()) * rng.gaussian();
    for h in outer.iter().rev() {
        let clock = v.abs().powf(1.0 / h.value());
        v = clock.powf(h.value()) * rng.gaussian();
    }
    Ok(v)
}

/// One draw from the marginal law of `model` at time `t`, using the
/// conditional Gaussian (or Cauchy) structure of each composition.
pub fn sample_marginal(model: &ProcessModel, t: f64, rng: &mut Stream) -> Result<f64> {
    check_time(model, t)?;
    Ok(match model {
        ProcessModel::FBm { h } => t.powf(h.value()) * rng.gaussian(),
        ProcessModel::IteratedFBm { outer, inner } => {
            let s = t.powf(inner.value()) * rng.gaussian();
            s.abs().powf(outer.value()) * rng.gaussian()
        }
        ProcessModel::IteratedFBmChain { hursts } => {
            let (last, outer) = hursts.split_last().expect("validated chain");
            let mut v = t.powf(last.value()) * rng.gaussian();
            for h in outer.iter().rev() {
                v = v.abs().powf(h.value()) * rng.gaussian();
            }
            v
        }
        ProcessModel::WeightedJ { n, h } => sample_weighted_chain(&vec![*h; n + 1], t, rng)?,
        ProcessModel::ScaledIterated { k, h } => {
            let s = t.powf(h.value()) * rng.gaussian();
            t.powf(*k) * s.abs().sqrt() * rng.gaussian()
        }
        ProcessModel::ProductFBm { n, h } => {
            let sd = t.powf(h.value() / *n as f64);
            (0..*n).map(|_| sd * rng.gaussian()).product()
        }
        ProcessModel::Cauchy => t * rng.cauchy(),
        ProcessModel::CauchyOfFBm { h } => {
            let s = t.powf(h.value()) * rng.gaussian();
            s.abs() * rng.cauchy()
        }
        ProcessModel::BmOfCauchy => {
            let c = t * rng.cauchy();
            c.abs().sqrt() * rng.gaussian()
        }
        ProcessModel::CauchyOfCauchy => cauchy_of_cauchy(t, rng),
        ProcessModel::HalfProductCauchy => {
            let scale = (2.0 * t).sqrt();
            0.5 * (scale * rng.cauchy()) * (scale * rng.cauchy())
        }
        ProcessModel::ReciprocalCC => loop {
            let d = cauchy_of_cauchy(1.0 / t, rng);
            if d != 0.0 && d.is_finite() {
                break 1.0 / d;
            }
            rng.count_redraw();
        },
    })
}

fn cauchy_of_cauchy(t: f64, rng: &mut Stream) -> f64 {
    let inner = t * rng.cauchy();
    inner.abs() * rng.cauchy()
}

/// Draws produced by [`sample_many`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Samples {
    pub values: Vec<f64>,
    pub redraws: u64,
}

/// `n` draws, generated in blocks of [`BLOCK`] on child streams of `state`.
/// The result is identical for every worker count.
pub fn sample_many(model: &ProcessModel, t: f64, state: RngState, n: usize) -> Result<Samples> {
    sample_blocks(state, n, |rng| sample_marginal(model, t, rng))
}

/// Block-parallel driver for any per-draw sampler.
pub fn sample_blocks<F>(state: RngState, n: usize, draw: F) -> Result<Samples>
where
    F: Fn(&mut Stream) -> Result<f64> + Sync,
{
    let blocks = n.div_ceil(BLOCK);
    let parts: Vec<(Vec<f64>, u64)> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let len = BLOCK.min(n - b * BLOCK);
            let mut rng = state.child(b as u64).stream();
            let values = (0..len).map(|_| draw(&mut rng)).collect::<Result<Vec<f64>>>()?;
            Ok((values, rng.redraws()))
        })
        .collect::<Result<_>>()?;
    let mut values = Vec::with_capacity(n);
    let mut redraws = 0;
    for (v, r) in parts {
        values.extend(v);
        redraws += r;
    }
    Ok(Samples { values, redraws })
}
