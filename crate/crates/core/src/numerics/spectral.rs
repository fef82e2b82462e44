use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Spectral tail fraction above which a grid is rejected.
pub const MAX_TAIL_FRACTION: f64 = 1e-6;

/// Ordered evaluation points, with the radius kept clear of singular loci.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    points: Vec<f64>,
    pub excluded_radius: f64,
}

impl Grid1D {
    pub fn new(points: Vec<f64>, excluded_radius: f64) -> Result<Self> {
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidParameter("grid points must be finite".into()));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("grid points must be strictly increasing".into()));
        }
        if !(excluded_radius >= 0.0) {
            return Err(Error::InvalidParameter("excluded radius must be >= 0".into()));
        }
        Ok(Grid1D {
            points,
            excluded_radius,
        })
    }

    /// `n` equally spaced points from `start` with spacing `step`.
    pub fn uniform(start: f64, step: f64, n: usize) -> Result<Self> {
        if !(step > 0.0) {
            return Err(Error::InvalidParameter("grid step must be positive".into()));
        }
        Grid1D::new((0..n).map(|i| start + step * i as f64).collect(), 0.0)
    }

    /// Points `a, a + step, ...` up to `b` inclusive (to within 1e-9 step).
    pub fn from_range(a: f64, b: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || b < a {
            return Err(Error::InvalidParameter(format!("bad range {a}:{b}:{step}")));
        }
        let n = ((b - a) / step + 1e-9).floor() as usize + 1;
        let pts = (0..n)
            .map(|i| {
                let v = a + step * i as f64;
                // snap values that should be exact multiples, e.g. 0 in -3:3:0.25
                let r = (v / step).round() * step;
                if (v - r).abs() < 1e-9 * step {
                    r
                } else {
                    v
                }
            })
            .collect();
        Grid1D::new(pts, 0.0)
    }

    pub fn with_excluded_radius(mut self, radius: f64) -> Self {
        self.excluded_radius = radius.max(0.0);
        self
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Spacing of a uniform grid, `None` if the spacing varies.
    pub fn uniform_step(&self) -> Option<f64> {
        if self.points.len() < 2 {
            return None;
        }
        let n = self.points.len();
        let h = (self.points[n - 1] - self.points[0]) / (n - 1) as f64;
        let tol = 1e-9 * h.max(self.points[0].abs().max(self.points[n - 1].abs()) * 1e-6);
        self.points
            .windows(2)
            .all(|w| ((w[1] - w[0]) - h).abs() <= tol)
            .then_some(h)
    }
}

/// Periodic-image correction for a unit point mass at `y` on a period `l`:
/// `Σ_{j≠0} 1/(y + j l)²`.
fn image_sum(y: f64, l: f64) -> f64 {
    if y.abs() < 1e-6 * l {
        return PI * PI / (3.0 * l * l) + y * y * PI.powi(4) / (15.0 * l.powi(4));
    }
    let s = (PI * y / l).sin();
    PI * PI / (l * l * s * s) - 1.0 / (y * y)
}

fn checked_step(grid: &Grid1D, values: &[f64]) -> Result<f64> {
    let dx = grid
        .uniform_step()
        .ok_or_else(|| Error::InvalidParameter("spectral operator needs a uniform grid".into()))?;
    if values.len() != grid.len() {
        return Err(Error::InvalidParameter(format!(
            "{} samples for a grid of {} points",
            values.len(),
            grid.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("non-finite sample passed to the spectral operator"));
    }
    Ok(dx)
}

/// Applies a real, even Fourier multiplier `symbol(β)` to samples on a
/// uniform grid treated as one period.
pub fn fourier_multiplier<S: Fn(f64) -> f64>(grid: &Grid1D, values: &[f64], symbol: S) -> Result<Vec<f64>> {
    let dx = checked_step(grid, values)?;
    let n = grid.len();
    if values.iter().all(|v| *v == 0.0) {
        return Ok(vec![0.0; n]);
    }
    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(n);
    let inverse = planner.plan_fft_inverse(n);
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    forward.process(&mut buf);

    let total: f64 = buf.iter().map(|c| c.norm()).sum();
    let tail: f64 = buf
        .iter()
        .enumerate()
        .filter(|(k, _)| (*k).min(n - *k) > n / 4)
        .map(|(_, c)| c.norm())
        .sum();
    let tail_fraction = if total > 0.0 { tail / total } else { 0.0 };
    if tail_fraction > MAX_TAIL_FRACTION {
        return Err(Error::GridTooCoarse { tail_fraction });
    }

    let length = n as f64 * dx;
    for (k, c) in buf.iter_mut().enumerate() {
        let beta = 2.0 * PI * k.min(n - k) as f64 / length;
        *c *= symbol(beta) / n as f64;
    }
    inverse.process(&mut buf);
    Ok(buf.iter().map(|c| c.re).collect())
}

/// The `|β|` multiplier on the periodic grid, without tail correction.
/// Compositions behave exactly like products of symbols, so applying it
/// twice gives `-d²/dx²` to rounding for well-resolved inputs.
pub fn riesz_modulus_derivative_periodic(grid: &Grid1D, values: &[f64]) -> Result<Vec<f64>> {
    fourier_multiplier(grid, values, f64::abs)
}

/// Applies the operator with Fourier symbol `|β|` to samples of a function
/// on the line.
///
/// Because `|β|` is not smooth at the origin, a function with mass `m` has a
/// transform decaying like `-m / (π x²)`; the periodic images of that tail
/// are subtracted in closed form, centered at the `|f|`-weighted mean of the
/// grid.
pub fn riesz_modulus_derivative(grid: &Grid1D, values: &[f64]) -> Result<Vec<f64>> {
    let mut out = riesz_modulus_derivative_periodic(grid, values)?;
    let dx = checked_step(grid, values)?;
    let xs = grid.points();
    let mass: f64 = values.iter().sum::<f64>() * dx;
    let weight: f64 = values.iter().map(|v| v.abs()).sum();
    if mass == 0.0 || weight == 0.0 {
        return Ok(out);
    }
    let center = xs.iter().zip(values).map(|(x, v)| x * v.abs()).sum::<f64>() / weight;
    let length = grid.len() as f64 * dx;
    for (o, &x) in out.iter_mut().zip(xs) {
        *o += mass / PI * image_sum(x - center, length);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cauchy_grid() -> Grid1D {
        let n = 1 << 15;
        let dx = 400.0 / n as f64;
        Grid1D::uniform(-200.0, dx, n).unwrap()
    }

    #[test]
    fn cauchy_density_gives_minus_time_derivative() {
        let grid = cauchy_grid();
        let t = 1.0;
        let p: Vec<f64> = grid.points().iter().map(|x| t / (PI * (t * t + x * x))).collect();
        let r = riesz_modulus_derivative(&grid, &p).unwrap();
        let worst = grid
            .points()
            .iter()
            .zip(&r)
            .map(|(x, v)| {
                let exact = (t * t - x * x) / (PI * (t * t + x * x).powi(2));
                (v - exact).abs()
            })
            .fold(0.0, f64::max);
        assert!(worst < 1e-6, "{worst}");
    }

    #[test]
    fn zero_maps_to_zero() {
        let grid = Grid1D::uniform(-1.0, 0.01, 256).unwrap();
        let r = riesz_modulus_derivative(&grid, &[0.0; 256]).unwrap();
        assert!(r.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn damped_cosine_is_an_eigenfunction() {
        let n = 1 << 14;
        let grid = Grid1D::uniform(-200.0, 400.0 / n as f64, n).unwrap();
        let (beta, width) = (5.0, 30.0);
        let env = |x: f64| (-x * x / (2.0 * width * width)).exp();
        let f: Vec<f64> = grid.points().iter().map(|&x| (beta * x).cos() * env(x)).collect();
        let r = riesz_modulus_derivative(&grid, &f).unwrap();
        let mut leading = 0.0f64;
        let mut full = 0.0f64;
        for ((&x, a), b) in grid.points().iter().zip(&f).zip(&r) {
            leading = leading.max((b - beta * a).abs());
            // envelope correction: the symbol is linear on the support of the spectrum
            let denv = -x / (width * width) * env(x);
            full = full.max((b - beta * a - (beta * x).sin() * denv).abs());
        }
        assert!(leading < 0.05 * beta, "{leading}");
        assert!(full < 1e-8, "{full}");
    }

    #[test]
    fn twice_is_minus_second_derivative() {
        let n = 1 << 12;
        let grid = Grid1D::uniform(-40.0, 80.0 / n as f64, n).unwrap();
        let g: Vec<f64> = grid.points().iter().map(|x| (-x * x / 2.0).exp()).collect();
        let once = riesz_modulus_derivative_periodic(&grid, &g).unwrap();
        let twice = riesz_modulus_derivative_periodic(&grid, &once).unwrap();
        for ((x, v), gx) in grid.points().iter().zip(&twice).zip(&g) {
            let minus_second = (1.0 - x * x) * gx;
            assert!((v - minus_second).abs() < 1e-6, "{x}: {v} vs {minus_second}");
        }
    }

    #[test]
    fn coarse_grid_rejected() {
        let grid = Grid1D::uniform(-10.0, 0.5, 40).unwrap();
        let f: Vec<f64> = grid.points().iter().map(|x| if x.abs() < 1.0 { 1.0 } else { 0.0 }).collect();
        assert!(matches!(
            riesz_modulus_derivative(&grid, &f),
            Err(Error::GridTooCoarse { .. })
        ));
    }

    #[test]
    fn grid_validation() {
        assert!(Grid1D::new(vec![0.0, 0.0], 0.0).is_err());
        assert!(Grid1D::new(vec![0.0, f64::NAN], 0.0).is_err());
        let g = Grid1D::from_range(-3.0, 3.0, 0.25).unwrap();
        assert_eq!(g.len(), 25);
        assert!(g.points().contains(&0.0));
        assert!(g.uniform_step().is_some());
    }
}
