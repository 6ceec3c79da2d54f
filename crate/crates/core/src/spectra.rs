//! Empirical spectra and the statistics computed from them.

use std::path::Path;

use num_complex::Complex64;
use serde::Serialize;

use crate::ensemble::{bipartize, shifted};
use crate::error::{Error, Result};
use crate::linalg::{RealMatrix, SpectralBackend};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectrumKind {
    Singular,
    Eigen,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SpectrumValues {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

/// Metadata carried alongside a spectrum.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SpectrumMeta {
    pub n: usize,
    pub z: Option<[f64; 2]>,
    pub alpha: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalSpectrum {
    kind: SpectrumKind,
    values: SpectrumValues,
    pub meta: SpectrumMeta,
}

impl EmpiricalSpectrum {
    pub fn singular(values: Vec<f64>, z: Complex64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("singular values"));
        }
        if values.iter().any(|&s| !(s >= 0.0)) {
            return Err(Error::domain("singular values", "must be non-negative"));
        }
        let n = values.len();
        Ok(EmpiricalSpectrum {
            kind: SpectrumKind::Singular,
            values: SpectrumValues::Real(values),
            meta: SpectrumMeta {
                n,
                z: Some([z.re, z.im]),
                ..Default::default()
            },
        })
    }

    pub fn eigen(values: Vec<Complex64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("eigenvalues"));
        }
        let n = values.len();
        Ok(EmpiricalSpectrum {
            kind: SpectrumKind::Eigen,
            values: SpectrumValues::Complex(values),
            meta: SpectrumMeta {
                n,
                ..Default::default()
            },
        })
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.meta.alpha = Some(alpha);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.meta.seed = Some(seed);
        self
    }

    pub fn kind(&self) -> SpectrumKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.meta.n
    }

    pub fn is_empty(&self) -> bool {
        self.meta.n == 0
    }

    pub fn values(&self) -> &SpectrumValues {
        &self.values
    }

    /// Singular values, or moduli of eigenvalues.
    pub fn magnitudes(&self) -> Vec<f64> {
        match &self.values {
            SpectrumValues::Real(v) => v.clone(),
            SpectrumValues::Complex(v) => v.iter().map(|z| z.norm()).collect(),
        }
    }

    pub fn ranked_descending(&self) -> Vec<f64> {
        let mut v = self.magnitudes();
        v.sort_by(|a, b| b.total_cmp(a));
        v
    }

    pub fn eigenvalues(&self) -> Result<&[Complex64]> {
        match &self.values {
            SpectrumValues::Complex(v) => Ok(v),
            SpectrumValues::Real(_) => Err(Error::domain("spectrum", "eigenvalue spectrum required")),
        }
    }

    /// CSV export: `re,im` for eigenvalues, `s` for singular values.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        match &self.values {
            SpectrumValues::Real(v) => {
                w.write_record(["s"])?;
                for s in v {
                    w.write_record([format!("{s:e}")])?;
                }
            }
            SpectrumValues::Complex(v) => {
                w.write_record(["re", "im"])?;
                for z in v {
                    w.write_record([format!("{:e}", z.re), format!("{:e}", z.im)])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn metadata_json(&self) -> serde_json::Value {
        serde_json::json!({
            "kind": self.kind,
            "n": self.meta.n,
            "alpha": self.meta.alpha,
            "z": self.meta.z,
            "seed": self.meta.seed,
        })
    }
}

/// How singular values are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SingularMethod {
    #[default]
    Svd,
    /// Positive half of the spectrum of the Hermitian bipartization.
    Bipartized,
}

pub fn singular_values(
    m: &RealMatrix,
    z: Complex64,
    method: SingularMethod,
    backend: &dyn SpectralBackend,
) -> Result<EmpiricalSpectrum> {
    if !m.is_square() {
        return Err(Error::Dimension(format!("{}x{} matrix is not square", m.rows(), m.cols())));
    }
    let n = m.rows();
    let values = match method {
        SingularMethod::Svd if z.im == 0.0 => {
            let mut a = m.clone();
            for i in 0..n {
                a.set(i, i, a.get(i, i) - z.re);
            }
            backend.singular_values_real(&a)?
        }
        SingularMethod::Svd => backend.singular_values(&shifted(m, z)?)?,
        SingularMethod::Bipartized => {
            let ev = backend.hermitian_eigenvalues(&bipartize(m, z)?.h)?;
            let mut top: Vec<f64> = ev[n..].iter().map(|x| x.abs()).collect();
            top.sort_by(|a, b| b.total_cmp(a));
            top
        }
    };
    EmpiricalSpectrum::singular(values, z)
}

pub fn eigenvalues(m: &RealMatrix, backend: &dyn SpectralBackend) -> Result<EmpiricalSpectrum> {
    EmpiricalSpectrum::eigen(backend.eigenvalues(m)?)
}

/// `(1/n) Σ |value|^k` for each order `k`.
pub fn empirical_moments(spec: &EmpiricalSpectrum, orders: &[u32]) -> Result<Vec<f64>> {
    if orders.contains(&0) {
        return Err(Error::domain("orders", "moment orders start at 1"));
    }
    let mags = spec.magnitudes();
    let n = mags.len() as f64;
    Ok(orders
        .iter()
        .map(|&k| mags.iter().map(|x| x.powi(k as i32)).sum::<f64>() / n)
        .collect())
}

/// Piecewise-linear CDF given on an increasing grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TabulatedCdf {
    pub x: Vec<f64>,
    pub f: Vec<f64>,
}

impl TabulatedCdf {
    pub fn new(x: Vec<f64>, f: Vec<f64>) -> Result<Self> {
        if x.is_empty() || x.len() != f.len() {
            return Err(Error::Dimension("CDF grid and values must be non-empty and equal length".into()));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::domain("CDF grid", "must be strictly increasing"));
        }
        Ok(TabulatedCdf { x, f })
    }

    /// Value at `t`: 0 left of the grid, the last value right of it.
    pub fn eval(&self, t: f64) -> f64 {
        let k = self.x.partition_point(|&g| g <= t);
        if k == 0 {
            return 0.0;
        }
        if k == self.x.len() {
            return *self.f.last().expect("non-empty");
        }
        let (x0, x1) = (self.x[k - 1], self.x[k]);
        let (f0, f1) = (self.f[k - 1], self.f[k]);
        f0 + (f1 - f0) * (t - x0) / (x1 - x0)
    }
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// Two-sample sup distance between empirical CDFs.
pub fn kolmogorov_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("Kolmogorov distance sample"));
    }
    let (a, b) = (sorted(a), sorted(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() || j < b.len() {
        let t = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        while i < a.len() && a[i] <= t {
            i += 1;
        }
        while j < b.len() && b[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Sup distance between an empirical CDF and a continuous CDF.
pub fn kolmogorov_distance_to(sample: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::Empty("Kolmogorov distance sample"));
    }
    let s = sorted(sample);
    let m = s.len() as f64;
    let mut d = 0.0f64;
    let mut i = 0;
    while i < s.len() {
        let t = s[i];
        let below = i as f64 / m;
        while i < s.len() && s[i] == t {
            i += 1;
        }
        let above = i as f64 / m;
        let f = cdf(t);
        d = d.max((f - below).abs()).max((above - f).abs());
    }
    Ok(d)
}

pub fn kolmogorov_distance_tabulated(sample: &[f64], cdf: &TabulatedCdf) -> Result<f64> {
    kolmogorov_distance_to(sample, |t| cdf.eval(t))
}

/// Smallest singular value below which the log potential is refused.
pub const LOG_POTENTIAL_FLOOR: f64 = 1e-9;

/// `-(1/n) Σ log s_i` of a singular spectrum.
pub fn log_potential(spec: &EmpiricalSpectrum) -> Result<f64> {
    let s = match spec.values() {
        SpectrumValues::Real(v) => v,
        SpectrumValues::Complex(_) => {
            return Err(Error::domain("spectrum", "singular spectrum required"))
        }
    };
    let smin = s.iter().copied().fold(f64::INFINITY, f64::min);
    if smin < LOG_POTENTIAL_FLOOR {
        let z = spec.meta.z.map_or(Complex64::new(0.0, 0.0), |[re, im]| Complex64::new(re, im));
        return Err(Error::SingularShift {
            z,
            reason: format!("smallest singular value {smin:e} is numerically zero, z is in the spectrum"),
        });
    }
    Ok(-s.iter().map(|x| x.ln()).sum::<f64>() / s.len() as f64)
}

/// Index of the eigenvalue nearest 1.
pub fn perron_index(values: &[Complex64]) -> Option<usize> {
    let one = Complex64::new(1.0, 0.0);
    values
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - one).norm().total_cmp(&(b.1 - one).norm()))
        .map(|(i, _)| i)
}

/// Result of the angular uniformity test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IsotropyStat {
    /// Sup distance between folded angles and the uniform law on `[0, π]`.
    pub statistic: f64,
    /// Eigenvalues entering the statistic.
    pub count: usize,
    /// Independent angles: conjugate pairs count once.
    pub effective_count: usize,
}

/// Minimum number of eigenvalues for [`isotropy_stat`].
pub const ISOTROPY_MIN_COUNT: usize = 10;

pub fn isotropy_stat(spec: &EmpiricalSpectrum, exclude_perron: bool) -> Result<IsotropyStat> {
    let ev = spec.eigenvalues()?;
    let skip = if exclude_perron { perron_index(ev) } else { None };
    let angles: Vec<f64> = ev
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != skip)
        .map(|(_, z)| z.im.abs().atan2(z.re))
        .collect();
    if angles.len() < ISOTROPY_MIN_COUNT {
        return Err(Error::Capacity(format!(
            "{} eigenvalues remain, the angular test needs {ISOTROPY_MIN_COUNT}",
            angles.len()
        )));
    }
    let pi = std::f64::consts::PI;
    let statistic = kolmogorov_distance_to(&angles, |t| (t / pi).clamp(0.0, 1.0))?;
    let complex = ev
        .iter()
        .enumerate()
        .filter(|(i, z)| Some(*i) != skip && z.im != 0.0)
        .count();
    Ok(IsotropyStat {
        statistic,
        count: angles.len(),
        effective_count: angles.len() - complex / 2,
    })
}

/// Asymptotic one-sample Kolmogorov critical value with Stephens' correction.
pub fn ks_critical_value(count: usize, level: f64) -> Result<f64> {
    let c = match level {
        l if (l - 0.10).abs() < 1e-12 => 1.2238,
        l if (l - 0.05).abs() < 1e-12 => 1.3581,
        l if (l - 0.01).abs() < 1e-12 => 1.6276,
        l if (l - 0.001).abs() < 1e-12 => 1.9495,
        _ => return Err(Error::domain("level", "supported levels are 0.10, 0.05, 0.01, 0.001")),
    };
    if count == 0 {
        return Err(Error::Empty("sample for critical value"));
    }
    let r = (count as f64).sqrt();
    Ok(c / (r + 0.12 + 0.11 / r))
}

/// Largest modulus after removing the eigenvalue nearest 1.
pub fn edge_radius(spec: &EmpiricalSpectrum) -> Result<f64> {
    let ev = spec.eigenvalues()?;
    if ev.len() < 2 {
        return Err(Error::domain("n", "edge radius needs at least two eigenvalues"));
    }
    let skip = perron_index(ev);
    Ok(ev
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != skip)
        .map(|(_, z)| z.norm())
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramBin {
    pub bin_left: f64,
    pub bin_right: f64,
    pub count: u64,
}

/// Histogram of magnitudes on `[lo, hi)` with `bins` equal bins.
pub fn magnitude_histogram(values: &[f64], lo: f64, hi: f64, bins: usize) -> Result<Vec<HistogramBin>> {
    if bins == 0 || !(hi > lo) {
        return Err(Error::domain("histogram", "need bins > 0 and hi > lo"));
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0u64; bins];
    for &v in values {
        if v >= lo && v <= hi {
            let k = (((v - lo) / width) as usize).min(bins - 1);
            counts[k] += 1;
        }
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(k, count)| HistogramBin {
            bin_left: lo + k as f64 * width,
            bin_right: lo + (k + 1) as f64 * width,
            count,
        })
        .collect())
}

/// Median of a non-empty slice.
pub fn median(v: &[f64]) -> Result<f64> {
    if v.is_empty() {
        return Err(Error::Empty("median"));
    }
    let s = sorted(v);
    let m = s.len();
    Ok(if m % 2 == 1 {
        s[m / 2]
    } else {
        0.5 * (s[m / 2 - 1] + s[m / 2])
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_small_cases() {
        assert_eq!(kolmogorov_distance(&[0.3, 0.1], &[0.1, 0.3]).unwrap(), 0.0);
        assert_eq!(kolmogorov_distance(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(kolmogorov_distance(&[0.0, 1.0], &[0.5, 1.0]).unwrap(), 0.5);
        assert!(kolmogorov_distance(&[], &[1.0]).is_err());
    }

    #[test]
    fn edge_radius_small() {
        let s = EmpiricalSpectrum::eigen(vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(0.5, 0.0),
            Complex64::new(0.0, 0.3),
        ])
        .unwrap();
        assert_eq!(edge_radius(&s).unwrap(), 0.5);
    }

    #[test]
    fn tabulated_cdf_interpolates() {
        let c = TabulatedCdf::new(vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
        assert_eq!(c.eval(-1.0), 0.0);
        assert_eq!(c.eval(0.25), 0.25);
        assert_eq!(c.eval(3.0), 1.0);
    }
}
