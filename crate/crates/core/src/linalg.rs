//! Small dense kernels: Cholesky and LU factorizations plus a few helpers
//! for carving nodewise blocks out of a shared covariance.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// Lower-triangular Cholesky factor `A = L Lᵀ`, stored dense row-major.
#[derive(Clone, Debug)]
pub struct Cholesky {
    dim: usize,
    lower: Vec<f64>,
}

impl Cholesky {
    pub fn factor(a: ArrayView2<f64>) -> Result<Self> {
        let d = a.nrows();
        if a.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "cholesky of {}x{} matrix",
                d,
                a.ncols()
            )));
        }
        let mut l = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..=i {
                let mut s = a[[i, j]];
                let (ri, rj) = (&l[i * d..i * d + j], &l[j * d..j * d + j]);
                for k in 0..j {
                    s -= ri[k] * rj[k];
                }
                if i == j {
                    if !s.is_finite() || s <= 0.0 {
                        return Err(Error::NotPositiveDefinite);
                    }
                    l[i * d + i] = s.sqrt();
                } else {
                    l[i * d + j] = s / l[j * d + j];
                }
            }
        }
        Ok(Cholesky { dim: d, lower: l })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lower(&self) -> Array2<f64> {
        Array2::from_shape_vec((self.dim, self.dim), self.lower.clone()).unwrap()
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let d = self.dim;
        let l = &self.lower;
        for i in 0..d {
            let row = &l[i * d..i * d + i];
            let s: f64 = row.iter().zip(&b[..i]).map(|(a, x)| a * x).sum();
            b[i] = (b[i] - s) / l[i * d + i];
        }
        for i in (0..d).rev() {
            let mut s = b[i];
            for k in i + 1..d {
                s -= l[k * d + i] * b[k];
            }
            b[i] = s / l[i * d + i];
        }
    }

    /// Solves `Lᵀ x = b` in place (back substitution with the transposed factor).
    pub fn solve_upper_in_place(&self, b: &mut [f64]) {
        let d = self.dim;
        let l = &self.lower;
        for i in (0..d).rev() {
            let mut s = b[i];
            for k in i + 1..d {
                s -= l[k * d + i] * b[k];
            }
            b[i] = s / l[i * d + i];
        }
    }

    pub fn inverse(&self) -> Array2<f64> {
        let d = self.dim;
        let mut inv = Array2::zeros((d, d));
        let mut col = vec![0.0; d];
        for j in 0..d {
            col.iter_mut().for_each(|c| *c = 0.0);
            col[j] = 1.0;
            self.solve_in_place(&mut col);
            for i in 0..d {
                inv[[i, j]] = col[i];
            }
        }
        inv
    }
}

/// LU factorization with partial pivoting, `P A = L U`.
#[derive(Clone, Debug)]
pub struct Lu {
    dim: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl Lu {
    /// Returns `None` when a pivot falls below `1e-14` times the largest entry.
    pub fn factor(a: ArrayView2<f64>) -> Option<Self> {
        let d = a.nrows();
        let mut m: Vec<f64> = a.iter().copied().collect();
        let mut perm: Vec<usize> = (0..d).collect();
        let scale = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1e-300);
        for col in 0..d {
            let (piv, best) = (col..d)
                .map(|r| (r, m[r * d + col].abs()))
                .fold((col, -1.0), |acc, v| if v.1 > acc.1 { v } else { acc });
            if best.is_nan() || best <= 1e-14 * scale {
                return None;
            }
            if piv != col {
                for k in 0..d {
                    m.swap(col * d + k, piv * d + k);
                }
                perm.swap(col, piv);
            }
            let p = m[col * d + col];
            for r in col + 1..d {
                let f = m[r * d + col] / p;
                m[r * d + col] = f;
                if f != 0.0 {
                    for k in col + 1..d {
                        m[r * d + k] -= f * m[col * d + k];
                    }
                }
            }
        }
        Some(Lu {
            dim: d,
            lu: m,
            perm,
        })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let m = &self.lu;
        let mut x: Vec<f64> = self.perm.iter().map(|&i| b[i]).collect();
        for i in 0..d {
            let s: f64 = (0..i).map(|k| m[i * d + k] * x[k]).sum();
            x[i] -= s;
        }
        for i in (0..d).rev() {
            let s: f64 = (i + 1..d).map(|k| m[i * d + k] * x[k]).sum();
            x[i] = (x[i] - s) / m[i * d + i];
        }
        x
    }
}

/// Solves a square system by Gaussian elimination with partial pivoting.
pub fn lu_solve(a: ArrayView2<f64>, b: ArrayView1<f64>) -> Option<Array1<f64>> {
    let x = Lu::factor(a)?.solve(&b.to_vec());
    x.iter().all(|v| v.is_finite()).then(|| Array1::from(x))
}

/// Principal submatrix with row/column `skip` removed.
pub fn drop_index(a: ArrayView2<f64>, skip: usize) -> Array2<f64> {
    let d = a.nrows();
    let keep: Vec<usize> = (0..d).filter(|&i| i != skip).collect();
    Array2::from_shape_fn((d - 1, d - 1), |(i, j)| a[[keep[i], keep[j]]])
}

/// Column `col` of `a` with entry `col` removed.
pub fn column_without(a: ArrayView2<f64>, col: usize) -> Array1<f64> {
    (0..a.nrows())
        .filter(|&i| i != col)
        .map(|i| a[[i, col]])
        .collect()
}

/// Largest absolute entry.
pub fn max_abs(a: impl IntoIterator<Item = f64>) -> f64 {
    a.into_iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn is_symmetric(a: ArrayView2<f64>, tol: f64) -> bool {
    let d = a.nrows();
    a.ncols() == d && (0..d).all(|i| (0..i).all(|j| (a[[i, j]] - a[[j, i]]).abs() <= tol))
}
