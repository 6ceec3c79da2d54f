//! Density estimates of the limiting singular value law.
//!
//! Both the tree method and the population-dynamics method produce the same
//! object: the Lorentzian-smoothed density `Im m(x + iε)/π` of a symmetric
//! measure on the real line, where `m` is the Stieltjes transform at the
//! root. Reflecting it onto `[0, ∞)` yields the singular value law.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectra::TabulatedCdf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimateMethod {
    Pwit,
    Rde,
}

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McValue {
    pub mean: f64,
    pub se: f64,
}

impl McValue {
    pub fn from_samples(xs: &[f64]) -> Self {
        let m = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / m;
        if xs.len() < 2 {
            return McValue { mean, se: f64::NAN };
        }
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
        McValue {
            mean,
            se: (var / m).sqrt(),
        }
    }
}

/// Parameters echoed into exports.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct EstimateMeta {
    pub alpha: f64,
    pub z: [f64; 2],
    pub seed: u64,
    pub b: Option<usize>,
    pub h: Option<usize>,
    pub pool_size: Option<usize>,
    pub sweeps: Option<usize>,
    pub series_terms: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RootMeasureEstimate {
    pub method: EstimateMethod,
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    /// Pointwise Monte Carlo standard error of `density`.
    pub standard_error: Vec<f64>,
    pub eta_eps: f64,
    pub trials: usize,
    /// Exact even moments `(order, estimate)` of the root measure when the
    /// method provides them.
    pub moments: Vec<(u32, McValue)>,
    pub meta: EstimateMeta,
}

fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xw, yw)| 0.5 * (xw[1] - xw[0]) * (yw[0] + yw[1]))
        .sum()
}

fn interpolate(x: &[f64], y: &[f64], t: f64) -> f64 {
    let k = x.partition_point(|&g| g <= t);
    if k == 0 {
        return y[0];
    }
    if k == x.len() {
        return y[x.len() - 1];
    }
    y[k - 1] + (y[k] - y[k - 1]) * (t - x[k - 1]) / (x[k] - x[k - 1])
}

impl RootMeasureEstimate {
    pub fn validate(&self) -> Result<()> {
        if self.grid.len() < 2 || self.grid.len() != self.density.len() {
            return Err(Error::Dimension("estimate grid and density must match, at least two points".into()));
        }
        if self.grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::domain("grid", "must be strictly increasing"));
        }
        Ok(())
    }

    /// Total mass of the (smoothed) density over the grid.
    pub fn mass(&self) -> f64 {
        trapezoid(&self.grid, &self.density)
    }

    /// Density of the reflected law on the non-negative grid points.
    ///
    /// The symmetric partner value at `-x` is interpolated when the grid
    /// covers it and otherwise taken equal to the value at `x`.
    pub fn reflected(&self) -> (Vec<f64>, Vec<f64>) {
        let lo = self.grid[0];
        let mut xs = Vec::new();
        let mut gs = Vec::new();
        for (&x, &f) in self.grid.iter().zip(&self.density) {
            if x < 0.0 {
                continue;
            }
            let partner = if x == 0.0 {
                f
            } else if -x >= lo {
                interpolate(&self.grid, &self.density, -x)
            } else {
                f
            };
            xs.push(x);
            gs.push(f + partner);
        }
        (xs, gs)
    }

    /// CDF of the reflected law, normalized to one at the right end of the grid.
    pub fn reflected_cdf(&self) -> Result<TabulatedCdf> {
        let (xs, gs) = self.reflected();
        if xs.len() < 2 {
            return Err(Error::Dimension("grid has fewer than two non-negative points".into()));
        }
        let mut f = Vec::with_capacity(xs.len());
        let mut acc = 0.0;
        f.push(0.0);
        for k in 1..xs.len() {
            acc += 0.5 * (xs[k] - xs[k - 1]) * (gs[k] + gs[k - 1]);
            f.push(acc);
        }
        if !(acc > 0.0) {
            return Err(Error::NumericalFault {
                context: "reflected CDF",
                detail: "estimate carries no mass on the grid".into(),
                dump: None,
            });
        }
        let mut x = xs;
        if x[0] > 0.0 {
            x.insert(0, 0.0);
            f.insert(0, 0.0);
        }
        TabulatedCdf::new(x, f.into_iter().map(|v| v / acc).collect())
    }

    /// `∫ x² g(x) dx` of the reflected smoothed density over the grid.
    pub fn smoothed_second_moment(&self) -> f64 {
        let (xs, gs) = self.reflected();
        let w: Vec<f64> = xs.iter().zip(&gs).map(|(x, g)| x * x * g).collect();
        trapezoid(&xs, &w)
    }

    /// Second moment with the Lorentzian smoothing removed.
    ///
    /// For a probability measure concentrated well inside `[-L, L]`, the
    /// Cauchy kernel of width `ε` adds `2εL/π - ε²` to the truncated second
    /// moment and scales the true one by `1 - 6ε/(πL)`; both corrections are
    /// undone here.
    pub fn second_moment(&self) -> f64 {
        let (xs, _) = self.reflected();
        let l = *xs.last().expect("non-empty grid");
        let e = self.eta_eps;
        let pi = std::f64::consts::PI;
        (self.smoothed_second_moment() - 2.0 * e * l / pi + e * e) / (1.0 - 6.0 * e / (pi * l))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["x", "density", "se"])?;
        for k in 0..self.grid.len() {
            w.write_record([
                format!("{:e}", self.grid[k]),
                format!("{:e}", self.density[k]),
                format!("{:e}", self.standard_error.get(k).copied().unwrap_or(f64::NAN)),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn metadata_json(&self) -> serde_json::Value {
        serde_json::json!({
            "method": self.method,
            "alpha": self.meta.alpha,
            "z": self.meta.z,
            "b": self.meta.b,
            "h": self.meta.h,
            "pool_size": self.meta.pool_size,
            "sweeps": self.meta.sweeps,
            "series_terms": self.meta.series_terms,
            "trials": self.trials,
            "eta_eps": self.eta_eps,
            "seed": self.meta.seed,
            "mass": self.mass(),
            "second_moment": self.second_moment(),
            "moments": self.moments,
        })
    }
}

/// Evenly spaced grid of `count` points on `[min, max]`.
pub fn linear_grid(min: f64, max: f64, count: usize) -> Result<Vec<f64>> {
    if count < 2 || !(max > min) || !min.is_finite() || !max.is_finite() {
        return Err(Error::domain("grid", "need count >= 2 and finite max > min"));
    }
    let step = (max - min) / (count - 1) as f64;
    Ok((0..count).map(|k| min + k as f64 * step).collect())
}

/// Default grid for density estimates: 400 points on `[-6, 6]`.
pub fn default_grid() -> Vec<f64> {
    linear_grid(-6.0, 6.0, 400).expect("valid constants")
}

/// Default Lorentzian smoothing width.
pub const DEFAULT_ETA_EPS: f64 = 0.05;

#[cfg(test)]
mod tests {
    use super::*;

    fn lorentz_estimate(center: f64, eps: f64, grid: Vec<f64>) -> RootMeasureEstimate {
        let pi = std::f64::consts::PI;
        let density: Vec<f64> = grid
            .iter()
            .map(|&x| {
                0.5 * eps / pi * (1.0 / ((x - center).powi(2) + eps * eps) + 1.0 / ((x + center).powi(2) + eps * eps))
            })
            .collect();
        RootMeasureEstimate {
            method: EstimateMethod::Pwit,
            standard_error: vec![0.0; grid.len()],
            grid,
            density,
            eta_eps: eps,
            trials: 1,
            moments: vec![],
            meta: EstimateMeta::default(),
        }
    }

    #[test]
    fn deconvolved_moment_of_two_atoms() {
        let e = lorentz_estimate(0.8, 0.05, linear_grid(-6.0, 6.0, 1201).unwrap());
        assert!((e.second_moment() - 0.64).abs() < 2e-3, "{}", e.second_moment());
        let half = lorentz_estimate(0.8, 0.05, linear_grid(0.0, 6.0, 601).unwrap());
        assert!((half.second_moment() - e.second_moment()).abs() < 1e-6);
    }

    #[test]
    fn reflected_cdf_is_normalized() {
        let e = lorentz_estimate(1.0, 0.05, linear_grid(-6.0, 6.0, 801).unwrap());
        let c = e.reflected_cdf().unwrap();
        assert_eq!(*c.f.last().unwrap(), 1.0);
        assert!((c.eval(1.0) - 0.5).abs() < 0.02);
    }
}
