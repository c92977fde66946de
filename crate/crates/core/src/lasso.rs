//! Cyclic coordinate descent for `(1/2n)‖y − Xβ‖² + λ‖β‖₁`.
//!
//! The solver works on the Gram form of the loss, so nodewise problems can be
//! fed blocks of a shared covariance without touching the raw samples. With
//! this scaling the stationarity condition reads `k̂ = Xᵀ(y − Xβ̂)/n` with
//! `‖k̂‖∞ ≤ λ`, which is exactly the subgradient consumed by the debiasing
//! step.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::types::{SampleMatrix, SolverConfig};

/// Least-squares loss in Gram form: `G = XᵀX/n`, `c = Xᵀy/n`, `yty = yᵀy/n`.
#[derive(Clone, Debug)]
pub struct GramProblem {
    pub gram: Array2<f64>,
    pub xty: Array1<f64>,
    pub yty: f64,
}

impl GramProblem {
    pub fn from_data(x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch(format!(
                "design has {} rows, response has {}",
                x.nrows(),
                y.len()
            )));
        }
        let n = x.nrows() as f64;
        Ok(GramProblem {
            gram: x.t().dot(&x) / n,
            xty: x.t().dot(&y) / n,
            yty: y.dot(&y) / n,
        })
    }

    pub fn p(&self) -> usize {
        self.xty.len()
    }

    /// `(1/2n)‖y − Xβ‖²`.
    pub fn loss(&self, beta: ArrayView1<f64>) -> f64 {
        let gb = self.gram.dot(&beta);
        (0.5 * self.yty - beta.dot(&self.xty) + 0.5 * beta.dot(&gb)).max(0.0)
    }

    /// `c − Gβ`, i.e. `Xᵀ(y − Xβ)/n`.
    pub fn correlation(&self, beta: ArrayView1<f64>) -> Array1<f64> {
        &self.xty - &self.gram.dot(&beta)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LassoFit {
    pub beta: Array1<f64>,
    /// Subgradient of `λ‖β‖₁` at the solution, `Xᵀ(y − Xβ̂)/n`.
    pub k_hat: Array1<f64>,
    pub lambda: f64,
    pub objective: f64,
    pub iterations: usize,
    pub kkt_residual: f64,
}

impl LassoFit {
    pub fn support_size(&self) -> usize {
        self.beta.iter().filter(|b| **b != 0.0).count()
    }
}

#[inline]
pub(crate) fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Largest violation of the lasso optimality conditions.
pub fn kkt_residual(beta: ArrayView1<f64>, k_hat: ArrayView1<f64>, lambda: f64) -> f64 {
    beta.iter()
        .zip(k_hat.iter())
        .map(|(&b, &k)| {
            if b > 0.0 {
                (k - lambda).abs()
            } else if b < 0.0 {
                (k + lambda).abs()
            } else {
                (k.abs() - lambda).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// `Xᵀ(y − Xβ)/n`.
pub fn subgradient(
    x: &SampleMatrix,
    y: ArrayView1<f64>,
    beta: ArrayView1<f64>,
) -> Result<Array1<f64>> {
    if x.n() != y.len() || x.p() != beta.len() {
        return Err(Error::DimensionMismatch(format!(
            "X is {}x{}, y has {}, beta has {}",
            x.n(),
            x.p(),
            y.len(),
            beta.len()
        )));
    }
    let resid = &y - &x.data().dot(&beta);
    Ok(x.data().t().dot(&resid) / x.n() as f64)
}

pub fn solve_lasso(
    x: &SampleMatrix,
    y: ArrayView1<f64>,
    lambda: f64,
    cfg: &SolverConfig,
) -> Result<LassoFit> {
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    let problem = GramProblem::from_data(x.data(), y)?;
    let mut fit = solve_lasso_gram(&problem, lambda, cfg, None)?;
    fit.k_hat = subgradient(x, y, fit.beta.view())?;
    fit.kkt_residual = kkt_residual(fit.beta.view(), fit.k_hat.view(), lambda);
    Ok(fit)
}

pub fn solve_lasso_gram(
    problem: &GramProblem,
    lambda: f64,
    cfg: &SolverConfig,
    warm: Option<ArrayView1<f64>>,
) -> Result<LassoFit> {
    coordinate_descent(problem, lambda, cfg, warm, None)
}

/// Same as [`solve_lasso_gram`] but records the objective after every pass.
pub fn solve_lasso_traced(
    problem: &GramProblem,
    lambda: f64,
    cfg: &SolverConfig,
) -> Result<(LassoFit, Vec<f64>)> {
    let mut trace = Vec::new();
    let fit = coordinate_descent(problem, lambda, cfg, None, Some(&mut trace))?;
    Ok((fit, trace))
}

fn objective(problem: &GramProblem, beta: ArrayView1<f64>, lambda: f64) -> f64 {
    problem.loss(beta) + lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
}

fn coordinate_descent(
    problem: &GramProblem,
    lambda: f64,
    cfg: &SolverConfig,
    warm: Option<ArrayView1<f64>>,
    mut trace: Option<&mut Vec<f64>>,
) -> Result<LassoFit> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("lambda = {lambda}")));
    }
    let p = problem.p();
    let g = &problem.gram;
    let mut beta = match warm {
        Some(w) if w.len() == p => w.to_owned(),
        Some(w) => {
            return Err(Error::DimensionMismatch(format!(
                "warm start has {} entries, problem has {p}",
                w.len()
            )))
        }
        None => Array1::zeros(p),
    };
    let mut r = problem.correlation(beta.view());
    let mut residual = f64::INFINITY;

    for pass in 1..=cfg.max_iter {
        let mut max_step = 0.0f64;
        for j in 0..p {
            let gjj = g[[j, j]];
            if gjj <= 0.0 {
                continue;
            }
            let old = beta[j];
            let new = soft_threshold(r[j] + gjj * old, lambda) / gjj;
            let delta = new - old;
            if delta != 0.0 {
                beta[j] = new;
                let col = g.column(j);
                r.scaled_add(-delta, &col);
                max_step = max_step.max(delta.abs());
            }
        }
        if let Some(t) = trace.as_deref_mut() {
            t.push(objective(problem, beta.view(), lambda));
        }
        if max_step < cfg.tol {
            r = problem.correlation(beta.view());
            residual = kkt_residual(beta.view(), r.view(), lambda);
            if residual < cfg.tol {
                return Ok(LassoFit {
                    objective: objective(problem, beta.view(), lambda),
                    beta,
                    k_hat: r,
                    lambda,
                    iterations: pass,
                    kkt_residual: residual,
                });
            }
        }
    }
    Err(Error::NotConverged {
        solver: "lasso",
        iterations: cfg.max_iter,
        residual,
    })
}

/// Fits a sequence of penalties with warm starts, largest penalty first.
/// Results are returned in the order of `lambdas`.
pub fn lasso_path(
    problem: &GramProblem,
    lambdas: &[f64],
    cfg: &SolverConfig,
) -> Result<Vec<LassoFit>> {
    let mut order: Vec<usize> = (0..lambdas.len()).collect();
    order.sort_by(|&a, &b| lambdas[b].total_cmp(&lambdas[a]));
    let mut fits: Vec<Option<LassoFit>> = vec![None; lambdas.len()];
    let mut warm: Option<Array1<f64>> = None;
    for i in order {
        let fit = solve_lasso_gram(problem, lambdas[i], cfg, warm.as_ref().map(|w| w.view()))?;
        warm = Some(fit.beta.clone());
        fits[i] = Some(fit);
    }
    Ok(fits.into_iter().map(Option::unwrap).collect())
}
