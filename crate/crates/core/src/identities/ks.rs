use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Significance level of every KS verdict.
pub const SIGNIFICANCE: f64 = 0.01;

/// Kolmogorov-Smirnov statistic with its asymptotic p-value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsReport {
    /// Sup-distance between the distribution functions, in `[0, 1]`.
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
    /// Size of the second sample; `None` for a one-sample test.
    pub m: Option<usize>,
    /// `p_value >= 0.01`.
    pub pass: bool,
}

impl KsReport {
    fn new(statistic: f64, n: usize, m: Option<usize>) -> Self {
        let effective = match m {
            Some(m) => (n as f64 * m as f64) / (n + m) as f64,
            None => n as f64,
        };
        let p_value = kolmogorov_survival(effective.sqrt() * statistic);
        KsReport {
            statistic,
            p_value,
            n,
            m,
            pass: p_value >= SIGNIFICANCE,
        }
    }
}

/// `P(K > λ)` for the Kolmogorov distribution.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.0 {
        // theta-function form, fast for small λ
        let c = (2.0 * PI).sqrt() / lambda;
        let q = -PI * PI / (8.0 * lambda * lambda);
        let s: f64 = (1..=20).map(|k| ((2 * k - 1) as f64).powi(2) * q).map(f64::exp).sum();
        return (1.0 - c * s).clamp(0.0, 1.0);
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-300 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

fn sorted(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::InvalidParameter("KS test needs nonempty samples".into()));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::domain("NaN in KS sample"));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Two-sample KS test. Ties are handled by advancing both empirical CDFs
/// past a shared value before comparing.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsReport> {
    let a = sorted(a)?;
    let b = sorted(b)?;
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < n && j < m {
        let x = a[i].min(b[j]);
        while i < n && a[i] <= x {
            i += 1;
        }
        while j < m && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    Ok(KsReport::new(d, n, Some(m)))
}

/// One-sample KS test against a distribution function.
pub fn ks_one_sample<F: Fn(f64) -> f64>(values: &[f64], cdf: F) -> Result<KsReport> {
    let v = sorted(values)?;
    let n = v.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in v.iter().enumerate() {
        let f = cdf(x);
        if !(0.0..=1.0).contains(&f) {
            return Err(Error::domain(format!("CDF value {f} at {x} is outside [0, 1]")));
        }
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    Ok(KsReport::new(d, v.len(), None))
}

/// Maps a heavy-tailed sample onto `(-π/2, π/2)`; monotone, so KS
/// statistics are unchanged while extreme draws stay well ordered.
pub fn arctan_scale(values: &[f64], scale: f64) -> Vec<f64> {
    values.iter().map(|x| (x / scale).atan()).collect()
}
