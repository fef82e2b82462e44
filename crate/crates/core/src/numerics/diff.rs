use serde::{Deserialize, Serialize};

use super::quadrature::guarded;
use crate::error::{Error, Result};

/// Step and extrapolation settings for finite differences.
///
/// The coarsest step is `max(|x|, 1) * max(base_step, eps^(1/(order+2)))`;
/// each Richardson level halves it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffConfig {
    pub base_step: f64,
    pub richardson_levels: usize,
    pub max_order: usize,
}

impl Default for DiffConfig {
    fn default() -> Self {
        DiffConfig {
            base_step: 1e-3,
            richardson_levels: 3,
            max_order: 4,
        }
    }
}

impl DiffConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.base_step > 0.0 && self.base_step.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "base_step must be positive, got {}",
                self.base_step
            )));
        }
        if !(1..=4).contains(&self.max_order) {
            return Err(Error::InvalidParameter(format!(
                "max_order must be in 1..=4, got {}",
                self.max_order
            )));
        }
        if self.richardson_levels == 0 {
            return Err(Error::InvalidParameter("richardson_levels must be >= 1".into()));
        }
        Ok(())
    }

    pub fn with_base_step(mut self, base_step: f64) -> Self {
        self.base_step = base_step;
        self
    }

    pub fn with_levels(mut self, levels: usize) -> Self {
        self.richardson_levels = levels;
        self
    }
}

/// Finite-difference result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derivative {
    pub value: f64,
    /// Difference between the two most refined Richardson levels.
    pub error: f64,
    /// Factor by which an absolute error in the sampled `f` is amplified in
    /// `value`.
    pub amplification: f64,
}

/// Offsets (in units of the step) and weights of the central stencils.
fn stencil(order: usize) -> (&'static [f64], &'static [f64], f64) {
    match order {
        1 => (&[-1.0, 1.0], &[-0.5, 0.5], 1.0),
        2 => (&[-1.0, 0.0, 1.0], &[1.0, -2.0, 1.0], 1.0),
        3 => (&[-2.0, -1.0, 1.0, 2.0], &[-0.5, 1.0, -1.0, 0.5], 2.0),
        _ => (&[-2.0, -1.0, 0.0, 1.0, 2.0], &[1.0, -4.0, 6.0, -4.0, 1.0], 2.0),
    }
}

fn coarse_step(x: f64, order: usize, cfg: &DiffConfig) -> f64 {
    let rel = cfg.base_step.max(f64::EPSILON.powf(1.0 / (order as f64 + 2.0)));
    x.abs().max(1.0) * rel
}

fn check_order(order: usize, cfg: &DiffConfig) -> Result<()> {
    cfg.validate()?;
    if order == 0 || order > cfg.max_order {
        return Err(Error::InvalidParameter(format!(
            "derivative order {order} outside 1..={}",
            cfg.max_order
        )));
    }
    Ok(())
}

fn richardson<F: Fn(f64) -> f64>(f: &F, x: f64, order: usize, h0: f64, levels: usize) -> Result<Derivative> {
    let (offsets, weights, _) = stencil(order);
    let scale = x.abs().max(1.0);
    let levels = levels.max(2);
    let h_min = h0 / f64::powi(2.0, levels as i32 - 1);
    if !(h_min > 8.0 * f64::EPSILON * scale) || x + h_min == x {
        return Err(Error::StepUnderflow { x });
    }

    let mut raw = Vec::with_capacity(levels);
    let mut norms = Vec::with_capacity(levels);
    for j in 0..levels {
        let h = h0 / f64::powi(2.0, j as i32);
        let mut acc = 0.0;
        for (o, w) in offsets.iter().zip(weights) {
            let v = f(x + o * h);
            if !v.is_finite() {
                return Err(Error::domain(format!("non-finite sample {v} at {}", x + o * h)));
            }
            acc += w * v;
        }
        let hp = h.powi(order as i32);
        raw.push(acc / hp);
        norms.push(weights.iter().map(|w| w.abs()).sum::<f64>() / hp);
    }

    // Tableau of values plus, for each entry, the weights on the raw levels.
    let mut table: Vec<Vec<(f64, Vec<f64>)>> = Vec::with_capacity(levels);
    for j in 0..levels {
        let mut row: Vec<(f64, Vec<f64>)> = Vec::with_capacity(j + 1);
        let mut unit = vec![0.0; levels];
        unit[j] = 1.0;
        row.push((raw[j], unit));
        for k in 1..=j {
            let factor = f64::powi(4.0, k as i32) - 1.0;
            let (cur, cw) = &row[k - 1];
            let (prev, pw) = &table[j - 1][k - 1];
            let value = cur + (cur - prev) / factor;
            let w = cw
                .iter()
                .zip(pw)
                .map(|(c, p)| c + (c - p) / factor)
                .collect();
            row.push((value, w));
        }
        table.push(row);
    }
    let last = &table[levels - 1];
    let (best, weights_on_levels) = &last[levels - 1];
    let previous = last[levels - 2].0;
    let amplification = weights_on_levels
        .iter()
        .zip(&norms)
        .map(|(w, n)| w.abs() * n)
        .sum();
    Ok(Derivative {
        value: *best,
        error: (best - previous).abs(),
        amplification,
    })
}

/// Central finite difference of the given order (1 to 4) with Richardson
/// extrapolation in the step.
pub fn differentiate<F: Fn(f64) -> f64>(f: F, x: f64, order: usize, cfg: &DiffConfig) -> Result<Derivative> {
    check_order(order, cfg)?;
    richardson(&f, x, order, coarse_step(x, order, cfg), cfg.richardson_levels)
}

/// As [`differentiate`], for functions defined only on `(0, ∞)`: the step is
/// capped so the stencil never reaches zero.
pub fn differentiate_positive<F: Fn(f64) -> f64>(
    f: F,
    x: f64,
    order: usize,
    cfg: &DiffConfig,
) -> Result<Derivative> {
    check_order(order, cfg)?;
    if x <= 0.0 {
        return Err(Error::domain(format!("expected a positive point, got {x}")));
    }
    let reach = stencil(order).2;
    let h0 = coarse_step(x, order, cfg).min(x / (2.0 * reach));
    richardson(&f, x, order, h0, cfg.richardson_levels)
}

pub fn try_differentiate<F: Fn(f64) -> Result<f64>>(
    f: F,
    x: f64,
    order: usize,
    cfg: &DiffConfig,
) -> Result<Derivative> {
    guarded(f, |g| differentiate(g, x, order, cfg))
}

pub fn try_differentiate_positive<F: Fn(f64) -> Result<f64>>(
    f: F,
    x: f64,
    order: usize,
    cfg: &DiffConfig,
) -> Result<Derivative> {
    guarded(f, |g| differentiate_positive(g, x, order, cfg))
}
