//! Shared numeric containers: standardized sample matrices, empirical
//! covariances and the configuration records threaded through the solvers.
//!
//! Standardization divides each centered column by its root mean square
//! (the `1/n` convention), so the empirical covariance `XᵀX/n` has an exact
//! unit diagonal. Every nodewise subproblem reads its Gram blocks out of one
//! shared covariance instead of recomputing them.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// An `n × p` data matrix, rows are samples.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleMatrix {
    data: Array2<f64>,
    standardized: bool,
}

impl SampleMatrix {
    /// Wraps raw data without transforming it.
    pub fn from_raw(data: Array2<f64>) -> Result<Self> {
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        Ok(SampleMatrix {
            data,
            standardized: false,
        })
    }

    pub fn data(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    pub fn into_data(self) -> Array2<f64> {
        self.data
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn p(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_standardized(&self) -> bool {
        self.standardized
    }

    pub fn column(&self, j: usize) -> ArrayView1<'_, f64> {
        self.data.column(j)
    }

    /// All columns except `v`, as a new matrix.
    pub fn without_column(&self, v: usize) -> SampleMatrix {
        let keep: Vec<usize> = (0..self.p()).filter(|&j| j != v).collect();
        SampleMatrix {
            data: self.data.select(Axis(1), &keep),
            standardized: self.standardized,
        }
    }

    pub fn covariance(&self) -> EmpiricalCovariance {
        covariance(self)
    }
}

/// Centers each column and scales it to unit root mean square.
pub fn standardize(raw: ArrayView2<f64>) -> Result<SampleMatrix> {
    let n = raw.nrows();
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "standardization needs at least 2 samples, got {n}"
        )));
    }
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    let mut data = raw.to_owned();
    for (j, mut col) in data.axis_iter_mut(Axis(1)).enumerate() {
        let mean = col.sum() / n as f64;
        col.mapv_inplace(|v| v - mean);
        let ms = col.iter().map(|v| v * v).sum::<f64>() / n as f64;
        let scale = mean.abs().max(1.0);
        if ms <= (1e-13 * scale).powi(2) {
            return Err(Error::ConstantColumn(j));
        }
        let rms = ms.sqrt();
        col.mapv_inplace(|v| v / rms);
    }
    Ok(SampleMatrix {
        data,
        standardized: true,
    })
}

/// `Σ̂ = XᵀX / n`.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalCovariance {
    sigma_hat: Array2<f64>,
    n: usize,
}

impl EmpiricalCovariance {
    /// Wraps a precomputed symmetric matrix; `n` is the sample count behind it.
    pub fn from_matrix(sigma_hat: Array2<f64>, n: usize) -> Result<Self> {
        if !linalg::is_symmetric(sigma_hat.view(), 1e-12) {
            return Err(Error::InvalidParameter(
                "covariance must be square and symmetric".into(),
            ));
        }
        if sigma_hat.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        Ok(EmpiricalCovariance { sigma_hat, n })
    }

    pub fn matrix(&self) -> ArrayView2<'_, f64> {
        self.sigma_hat.view()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.sigma_hat.nrows()
    }

    /// Covariance of all variables except `v` (principal submatrix).
    pub fn without(&self, v: usize) -> EmpiricalCovariance {
        EmpiricalCovariance {
            sigma_hat: linalg::drop_index(self.sigma_hat.view(), v),
            n: self.n,
        }
    }

    /// `X_{v^c}ᵀ x_v / n`.
    pub fn cross(&self, v: usize) -> Array1<f64> {
        linalg::column_without(self.sigma_hat.view(), v)
    }
}

pub fn covariance(x: &SampleMatrix) -> EmpiricalCovariance {
    let n = x.n();
    let mut s = x.data.t().dot(&x.data) / n as f64;
    // Force exact symmetry; the product is symmetric only up to rounding.
    let p = s.nrows();
    for i in 0..p {
        for j in 0..i {
            let m = 0.5 * (s[[i, j]] + s[[j, i]]);
            s[[i, j]] = m;
            s[[j, i]] = m;
        }
    }
    EmpiricalCovariance { sigma_hat: s, n }
}

/// `λ₁`, `λ₂` plus the cross-validation settings that produced them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularizationParams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub k_grid: Vec<f64>,
    pub cv_folds: usize,
}

impl RegularizationParams {
    pub fn new(lambda1: f64, lambda2: f64) -> Self {
        RegularizationParams {
            lambda1,
            lambda2,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda1 >= 0.0 && self.lambda1.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "lambda1 must be finite and >= 0, got {}",
                self.lambda1
            )));
        }
        if !(self.lambda2 >= 0.0 && self.lambda2.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "lambda2 must be finite and >= 0, got {}",
                self.lambda2
            )));
        }
        if self.k_grid.is_empty() || self.k_grid.iter().any(|&k| !(k > 0.0 && k.is_finite())) {
            return Err(Error::InvalidParameter(
                "k grid must be nonempty and strictly positive".into(),
            ));
        }
        if self.cv_folds < 2 {
            return Err(Error::InvalidParameter(format!(
                "cv folds must be >= 2, got {}",
                self.cv_folds
            )));
        }
        Ok(())
    }
}

impl Default for RegularizationParams {
    fn default() -> Self {
        RegularizationParams {
            lambda1: 0.0,
            lambda2: 0.0,
            k_grid: default_k_grid(),
            cv_folds: 3,
        }
    }
}

/// Ten log-spaced points from 0.1 to 100.
pub fn default_k_grid() -> Vec<f64> {
    log_grid(0.1, 100.0, 10)
}

pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
}

impl SolverConfig {
    /// Settings for the debiasing QPs.
    pub fn qp() -> Self {
        SolverConfig {
            max_iter: 50_000,
            tol: 1e-7,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.tol.is_nan() || self.tol <= 0.0 || self.max_iter == 0 {
            return Err(Error::InvalidParameter(format!(
                "solver needs tol > 0 and max_iter >= 1 (got {}, {})",
                self.tol, self.max_iter
            )));
        }
        Ok(())
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iter: 100_000,
            tol: 1e-9,
            seed: 0,
        }
    }
}
