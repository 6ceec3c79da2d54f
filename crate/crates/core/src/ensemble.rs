//! The random Markov matrix ensemble.
//!
//! Weights are produced by a counter-based field: entry `(i, j)` is a pure
//! function of the seed, `i` and `j`. Dense generation and lazy access to a
//! single row or column therefore agree exactly, which lets large-`n`
//! experiments touch only the entries they need.

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heavy_tail::TailLaw;
use crate::linalg::{ComplexMatrix, RealMatrix};
use crate::seed::{derive_seed, splitmix64, unit_open_closed};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Read access to an `n × n` weight matrix.
pub trait WeightAccess: Sync {
    fn dim(&self) -> usize;
    fn weight(&self, i: usize, j: usize) -> f64;

    fn row_sum(&self, i: usize) -> f64 {
        (0..self.dim()).map(|j| self.weight(i, j)).sum()
    }
}

impl WeightAccess for RealMatrix {
    fn dim(&self) -> usize {
        self.rows()
    }

    fn weight(&self, i: usize, j: usize) -> f64 {
        self.get(i, j)
    }

    fn row_sum(&self, i: usize) -> f64 {
        self.row(i).iter().sum()
    }
}

/// Lazily evaluated i.i.d. weights.
#[derive(Debug, Clone)]
pub struct WeightField {
    law: TailLaw,
    seed: u64,
    row_keys: Vec<u64>,
}

impl WeightField {
    pub fn new(n: usize, law: TailLaw, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("n", "dimension must be at least 1"));
        }
        let row_keys = (0..n)
            .map(|i| derive_seed(seed, ["weights".into(), "row".into(), i.into()]))
            .collect();
        Ok(WeightField { law, seed, row_keys })
    }

    pub fn law(&self) -> &TailLaw {
        &self.law
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform in `(0, 1]` behind entry `(i, j)`.
    #[inline]
    pub fn uniform(&self, i: usize, j: usize) -> f64 {
        let key = self.row_keys[i];
        unit_open_closed(splitmix64(key.wrapping_add((j as u64 + 1).wrapping_mul(GOLDEN))))
    }

    pub fn fill_row(&self, i: usize, out: &mut [f64]) {
        for (j, slot) in out.iter_mut().enumerate() {
            *slot = self.law.from_uniform(self.uniform(i, j));
        }
    }

    pub fn to_matrix(&self) -> RealMatrix {
        let n = self.row_keys.len();
        let mut data = vec![0.0; n * n];
        data.par_chunks_mut(n)
            .enumerate()
            .for_each(|(i, row)| self.fill_row(i, row));
        RealMatrix::from_row_major(n, n, data).expect("shape is consistent")
    }
}

impl WeightAccess for WeightField {
    fn dim(&self) -> usize {
        self.row_keys.len()
    }

    #[inline]
    fn weight(&self, i: usize, j: usize) -> f64 {
        self.law.from_uniform(self.uniform(i, j))
    }
}

/// Where a sample came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub master: Option<u64>,
    pub label: String,
}

/// Weights `X`, row sums `ρ` and the Markov matrix `M = X/ρ`.
#[derive(Debug, Clone)]
pub struct EnsembleSample {
    pub n: usize,
    pub x: RealMatrix,
    pub rho: Vec<f64>,
    pub m: RealMatrix,
    pub seed: SeedRecord,
}

/// Row sums and the row-normalized matrix, with identity rows where `ρ_i = 0`.
pub fn normalize_rows(x: &RealMatrix) -> (Vec<f64>, RealMatrix) {
    let n = x.rows();
    let rho: Vec<f64> = (0..n).map(|i| x.row(i).iter().sum()).collect();
    let mut m = RealMatrix::zeros(n, x.cols());
    for i in 0..n {
        let row = m.row_mut(i);
        if rho[i] == 0.0 {
            if i < row.len() {
                row[i] = 1.0;
            }
        } else {
            for (dst, &w) in row.iter_mut().zip(x.row(i)) {
                *dst = w / rho[i];
            }
        }
    }
    (rho, m)
}

pub fn generate(n: usize, law: &TailLaw, seed: u64) -> Result<EnsembleSample> {
    let field = WeightField::new(n, law.clone(), seed)?;
    let x = field.to_matrix();
    let (rho, m) = normalize_rows(&x);
    Ok(EnsembleSample {
        n,
        x,
        rho,
        m,
        seed: SeedRecord {
            master: Some(seed),
            label: format!("{}(alpha={})", law.recipe_name(), law.alpha()),
        },
    })
}

/// Build a sample from given non-negative weights.
pub fn from_weights(x: RealMatrix, label: impl Into<String>) -> Result<EnsembleSample> {
    if !x.is_square() || x.rows() == 0 {
        return Err(Error::Dimension(format!(
            "weights must be a non-empty square matrix, got {}x{}",
            x.rows(),
            x.cols()
        )));
    }
    if x.as_slice().iter().any(|&w| !(w >= 0.0 && w.is_finite())) {
        return Err(Error::domain("X", "weights must be finite and non-negative"));
    }
    let (rho, m) = normalize_rows(&x);
    Ok(EnsembleSample {
        n: x.rows(),
        x,
        rho,
        m,
        seed: SeedRecord {
            master: None,
            label: label.into(),
        },
    })
}

/// Hermitization `[[0, M - z], [Mᵀ - z̄, 0]]`.
#[derive(Debug, Clone)]
pub struct BipartizedMatrix {
    pub z: Complex64,
    pub h: ComplexMatrix,
}

/// `M - zI`.
pub fn shifted(m: &RealMatrix, z: Complex64) -> Result<ComplexMatrix> {
    if !m.is_square() {
        return Err(Error::Dimension(format!("{}x{} matrix is not square", m.rows(), m.cols())));
    }
    let n = m.rows();
    Ok(ComplexMatrix::from_fn(n, n, |i, j| {
        let v = Complex64::new(m.get(i, j), 0.0);
        if i == j {
            v - z
        } else {
            v
        }
    }))
}

pub fn bipartize(m: &RealMatrix, z: Complex64) -> Result<BipartizedMatrix> {
    let a = shifted(m, z)?;
    let n = m.rows();
    let mut h = ComplexMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let v = a.get(i, j);
            h.set(i, n + j, v);
            h.set(n + j, i, v.conj());
        }
    }
    Ok(BipartizedMatrix { z, h })
}

/// Closed-form `K_n = ‖A_z^{-1}‖` for the extremal matrix of the smallest
/// singular value bound.
pub fn kn_bound(z: Complex64, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("n", "dimension must be at least 1"));
    }
    let d2 = (Complex64::new(1.0, 0.0) - z).norm_sqr();
    if d2 == 0.0 {
        return Err(Error::SingularShift {
            z,
            reason: "M - z is not invertible at z = 1".into(),
        });
    }
    if n == 1 {
        // No orthogonal complement, so no unit singular value.
        return Ok(d2.sqrt().recip());
    }
    let a = 1.0 + (n as f64 - 1.0) * z.norm_sqr() + d2;
    let disc = (a * a - 4.0 * d2).max(0.0);
    Ok(((a + disc.sqrt()) / (2.0 * d2)).sqrt())
}

#[derive(Serialize)]
struct DumpSidecar<'a> {
    n: usize,
    alpha: f64,
    c: f64,
    recipe: &'a str,
    seed: &'a SeedRecord,
    files: [&'a str; 2],
}

/// Write `X` and `M` as CSV with a JSON sidecar of `(n, α, c, seed)`.
pub fn write_dump(sample: &EnsembleSample, law: &TailLaw, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_matrix_csv(&sample.x, &dir.join("x.csv"))?;
    write_matrix_csv(&sample.m, &dir.join("m.csv"))?;
    let side = DumpSidecar {
        n: sample.n,
        alpha: law.alpha(),
        c: law.tail_constant(),
        recipe: law.recipe_name(),
        seed: &sample.seed,
        files: ["x.csv", "m.csv"],
    };
    fs::write(dir.join("sample.json"), serde_json::to_vec_pretty(&side)?)?;
    Ok(())
}

pub fn write_matrix_csv(m: &RealMatrix, path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    for i in 0..m.rows() {
        w.write_record(m.row(i).iter().map(|v| format!("{v:e}")))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix_csv(path: &Path) -> Result<RealMatrix> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| Error::domain("matrix entry", format!("`{s}`: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    RealMatrix::from_rows(&rows)
}
