//! Dense matrices and the dense spectral engine.
//!
//! The engine sits behind [`SpectralBackend`] so that an alternative
//! implementation can be swapped in. The default [`FaerBackend`] delegates to
//! the `faer` crate.

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

pub type RealMatrix = Matrix<f64>;
pub type ComplexMatrix = Matrix<Complex64>;

impl<T: Copy + Default> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![T::default(); rows * cols],
        }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries supplied for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Ok(Matrix {
            rows: r,
            cols: c,
            data: rows.concat(),
        })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }
}

impl RealMatrix {
    pub fn to_complex(&self) -> ComplexMatrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        }
    }

    fn to_faer(&self) -> Mat<f64> {
        Mat::from_fn(self.rows, self.cols, |i, j| self.get(i, j))
    }
}

impl ComplexMatrix {
    pub fn conj_transpose(&self) -> Self {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i).conj())
    }

    fn to_faer(&self) -> Mat<Complex64> {
        Mat::from_fn(self.rows, self.cols, |i, j| self.get(i, j))
    }
}

/// Dense eigen, singular value and linear-solve routines.
pub trait SpectralBackend: Send + Sync {
    /// All eigenvalues of a real square matrix, in no particular order.
    fn eigenvalues(&self, m: &RealMatrix) -> Result<Vec<Complex64>>;
    /// Singular values of a real matrix, non-increasing.
    fn singular_values_real(&self, m: &RealMatrix) -> Result<Vec<f64>>;
    /// Singular values of a complex matrix, non-increasing.
    fn singular_values(&self, m: &ComplexMatrix) -> Result<Vec<f64>>;
    /// Eigenvalues of a Hermitian matrix, non-decreasing.
    fn hermitian_eigenvalues(&self, h: &ComplexMatrix) -> Result<Vec<f64>>;
    /// Solve `a x = b` for square `a`.
    fn solve(&self, a: &ComplexMatrix, b: &[Complex64]) -> Result<Vec<Complex64>>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct FaerBackend;

/// Run dense kernels on the calling thread, so that results do not depend on
/// the size of the worker pool.
pub fn sequential_kernels() {
    faer::set_global_parallelism(faer::Par::Seq);
}

fn square(m_rows: usize, m_cols: usize) -> Result<()> {
    if m_rows != m_cols {
        return Err(Error::Dimension(format!("{m_rows}x{m_cols} matrix is not square")));
    }
    Ok(())
}

impl SpectralBackend for FaerBackend {
    fn eigenvalues(&self, m: &RealMatrix) -> Result<Vec<Complex64>> {
        square(m.rows, m.cols)?;
        m.to_faer().eigenvalues().map_err(|_| Error::Convergence {
            routine: "eigenvalue iteration",
            n: m.rows,
            dump: None,
        })
    }

    fn singular_values_real(&self, m: &RealMatrix) -> Result<Vec<f64>> {
        m.to_faer().singular_values().map_err(|_| Error::Convergence {
            routine: "singular value iteration",
            n: m.rows,
            dump: None,
        })
    }

    fn singular_values(&self, m: &ComplexMatrix) -> Result<Vec<f64>> {
        m.to_faer().singular_values().map_err(|_| Error::Convergence {
            routine: "singular value iteration",
            n: m.rows,
            dump: None,
        })
    }

    fn hermitian_eigenvalues(&self, h: &ComplexMatrix) -> Result<Vec<f64>> {
        square(h.rows, h.cols)?;
        h.to_faer()
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|_| Error::Convergence {
                routine: "Hermitian eigenvalue iteration",
                n: h.rows,
                dump: None,
            })
    }

    fn solve(&self, a: &ComplexMatrix, b: &[Complex64]) -> Result<Vec<Complex64>> {
        square(a.rows, a.cols)?;
        if b.len() != a.rows {
            return Err(Error::Dimension(format!(
                "right-hand side of length {} for a {}x{} system",
                b.len(),
                a.rows,
                a.cols
            )));
        }
        let rhs = Mat::from_fn(b.len(), 1, |i, _| b[i]);
        let x = a.to_faer().partial_piv_lu().solve(&rhs);
        let out: Vec<Complex64> = (0..b.len()).map(|i| x[(i, 0)]).collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalFault {
                context: "dense solve",
                detail: "non-finite solution".into(),
                dump: None,
            });
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_eigen_and_svd() {
        let m = RealMatrix::from_rows(&[vec![2.0, 0.0], vec![0.0, -3.0]]).unwrap();
        let b = FaerBackend;
        let mut ev: Vec<f64> = b.eigenvalues(&m).unwrap().iter().map(|z| z.re).collect();
        ev.sort_by(f64::total_cmp);
        assert!((ev[0] + 3.0).abs() < 1e-14 && (ev[1] - 2.0).abs() < 1e-14);
        let s = b.singular_values_real(&m).unwrap();
        assert!((s[0] - 3.0).abs() < 1e-14 && (s[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn solve_roundtrip() {
        let a = ComplexMatrix::from_rows(&[
            vec![Complex64::new(1.0, 1.0), Complex64::new(2.0, 0.0)],
            vec![Complex64::new(0.0, -1.0), Complex64::new(3.0, 0.5)],
        ])
        .unwrap();
        let x = [Complex64::new(0.3, -0.2), Complex64::new(-1.0, 2.0)];
        let b: Vec<_> = (0..2).map(|i| a.get(i, 0) * x[0] + a.get(i, 1) * x[1]).collect();
        let y = FaerBackend.solve(&a, &b).unwrap();
        for k in 0..2 {
            assert!((y[k] - x[k]).norm() < 1e-13);
        }
    }
}
