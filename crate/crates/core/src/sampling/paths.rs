use nalgebra::{Cholesky, DMatrix, DVector};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use super::rng::{RngState, Stream};
use crate::error::{Error, Result};
use crate::model::Hurst;

/// Largest grid handled by the dense generator.
pub const MAX_CHOLESKY_POINTS: usize = 4096;
/// Largest grid handled by the circulant generator.
pub const MAX_CIRCULANT_STEPS: usize = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathMethod {
    Cholesky,
    Circulant,
}

/// One fBm path at the given times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub hurst: Hurst,
    pub method: PathMethod,
    /// Diagonal jitter added to the covariance (0 when none was needed).
    pub jitter: f64,
}

/// `Cov(B_H(s), B_H(t))`.
pub fn fbm_covariance(h: Hurst, s: f64, t: f64) -> f64 {
    let e = 2.0 * h.value();
    0.5 * (s.abs().powf(e) + t.abs().powf(e) - (t - s).abs().powf(e))
}

/// Factorized covariance of fBm on a fixed set of times; reusable for many
/// paths.
#[derive(Debug, Clone)]
pub struct FbmCholesky {
    hurst: Hurst,
    times: Vec<f64>,
    factor: DMatrix<f64>,
    jitter: f64,
}

impl FbmCholesky {
    pub fn new(h: Hurst, times: &[f64]) -> Result<Self> {
        if times.is_empty() || times.len() > MAX_CHOLESKY_POINTS {
            return Err(Error::InvalidParameter(format!(
                "dense generator takes 1..={MAX_CHOLESKY_POINTS} times, got {}",
                times.len()
            )));
        }
        if times.iter().any(|t| !(*t > 0.0 && t.is_finite())) || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("times must be positive and strictly increasing".into()));
        }
        let n = times.len();
        let cov = DMatrix::from_fn(n, n, |i, j| fbm_covariance(h, times[i], times[j]));
        if let Some(c) = Cholesky::new(cov.clone()) {
            return Ok(FbmCholesky {
                hurst: h,
                times: times.to_vec(),
                factor: c.l(),
                jitter: 0.0,
            });
        }
        let max_diag = (0..n).map(|i| cov[(i, i)]).fold(0.0, f64::max);
        let jitter = 1e-12 * max_diag;
        let regularized = cov + DMatrix::identity(n, n) * jitter;
        let c = Cholesky::new(regularized).ok_or(Error::NotPositiveDefinite { jitter })?;
        Ok(FbmCholesky {
            hurst: h,
            times: times.to_vec(),
            factor: c.l(),
            jitter,
        })
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn sample(&self, rng: &mut Stream) -> Vec<f64> {
        let z = DVector::from_fn(self.times.len(), |_, _| rng.gaussian());
        (&self.factor * z).iter().copied().collect()
    }

    pub fn path(&self, rng: &mut Stream) -> PathSample {
        PathSample {
            times: self.times.clone(),
            values: self.sample(rng),
            hurst: self.hurst,
            method: PathMethod::Cholesky,
            jitter: self.jitter,
        }
    }
}

/// Exact Gaussian path through the Cholesky factor of the covariance matrix.
pub fn fbm_path_cholesky(h: Hurst, times: &[f64], rng: &RngState) -> Result<PathSample> {
    Ok(FbmCholesky::new(h, times)?.path(&mut rng.stream()))
}

/// Circulant embedding of fractional Gaussian noise on `n` steps of size
/// `dt`; reusable for many paths.
pub struct FbmCirculant {
    hurst: Hurst,
    n: usize,
    dt: f64,
    sqrt_eigen: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl FbmCirculant {
    /// `Ok(None)` when the embedding has an eigenvalue below `-1e-9`.
    pub fn new(h: Hurst, n: usize, dt: f64) -> Result<Option<Self>> {
        if !n.is_power_of_two() || n > MAX_CIRCULANT_STEPS {
            return Err(Error::InvalidParameter(format!(
                "circulant generator needs a power of two <= 2^22 steps, got {n}"
            )));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("step must be positive, got {dt}")));
        }
        let m = 2 * n;
        let e = 2.0 * h.value();
        let gamma = |k: f64| 0.5 * ((k + 1.0).powf(e) - 2.0 * k.powf(e) + (k - 1.0).abs().powf(e));
        let mut row: Vec<Complex64> = (0..m)
            .map(|j| {
                let k = if j <= n { j } else { m - j };
                Complex64::new(gamma(k as f64), 0.0)
            })
            .collect();
        let fft = FftPlanner::<f64>::new().plan_fft_forward(m);
        fft.process(&mut row);
        let mut sqrt_eigen = Vec::with_capacity(m);
        for c in &row {
            let lambda = c.re;
            if lambda < -1e-9 {
                return Ok(None);
            }
            sqrt_eigen.push((lambda.max(0.0) / m as f64).sqrt());
        }
        Ok(Some(FbmCirculant {
            hurst: h,
            n,
            dt,
            sqrt_eigen,
            fft,
        }))
    }

    /// Path values at `dt, 2 dt, ..., n dt`.
    pub fn sample(&self, rng: &mut Stream) -> Vec<f64> {
        let mut buf: Vec<Complex64> = self
            .sqrt_eigen
            .iter()
            .map(|s| Complex64::new(s * rng.gaussian(), s * rng.gaussian()))
            .collect();
        self.fft.process(&mut buf);
        let scale = self.dt.powf(self.hurst.value());
        let mut acc = 0.0;
        buf[..self.n]
            .iter()
            .map(|c| {
                acc += c.re;
                acc * scale
            })
            .collect()
    }

    pub fn path(&self, rng: &mut Stream) -> PathSample {
        PathSample {
            times: (1..=self.n).map(|k| k as f64 * self.dt).collect(),
            values: self.sample(rng),
            hurst: self.hurst,
            method: PathMethod::Circulant,
            jitter: 0.0,
        }
    }
}

/// fBm path on `n` equal steps by circulant embedding; falls back to the
/// dense generator when the embedding is not non-negative definite.
pub fn fbm_path_circulant(h: Hurst, n: usize, dt: f64, rng: &RngState) -> Result<PathSample> {
    match FbmCirculant::new(h, n, dt)? {
        Some(gen) => Ok(gen.path(&mut rng.stream())),
        None => {
            let times: Vec<f64> = (1..=n).map(|k| k as f64 * dt).collect();
            fbm_path_cholesky(h, &times, rng).map_err(|e| {
                Error::EmbeddingFailure(format!("negative embedding eigenvalue and fallback failed: {e}"))
            })
        }
    }
}
