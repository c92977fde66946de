//! Two-task multi-task fused lasso:
//!
//! ```text
//! (1/2n₁)‖y₁ − X₁β₁‖² + (1/2n₂)‖y₂ − X₂β₂‖² + λ₁‖β₁‖₁ + λ₁‖β₂‖₁ + λ₂‖β₁ − β₂‖₁
//! ```
//!
//! The fusion term only couples `β₁ⱼ` with `β₂ⱼ`, so block coordinate descent
//! over coordinate pairs converges to the global minimum. Each pair update is
//! solved exactly by checking the stationary point of every smooth piece.

use ndarray::{Array1, ArrayView1};

use crate::error::{Error, Result};
use crate::lasso::{soft_threshold, subgradient, GramProblem};
use crate::types::{RegularizationParams, SampleMatrix, SolverConfig};

/// Differences below this are treated as fused when checking optimality.
pub const TIE_THRESHOLD: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct FusedProblem {
    pub task1: GramProblem,
    pub task2: GramProblem,
}

impl FusedProblem {
    pub fn new(task1: GramProblem, task2: GramProblem) -> Result<Self> {
        if task1.p() != task2.p() {
            return Err(Error::DimensionMismatch(format!(
                "tasks have {} and {} variables",
                task1.p(),
                task2.p()
            )));
        }
        Ok(FusedProblem { task1, task2 })
    }

    pub fn p(&self) -> usize {
        self.task1.p()
    }

    pub fn objective(
        &self,
        beta1: ArrayView1<f64>,
        beta2: ArrayView1<f64>,
        lambda1: f64,
        lambda2: f64,
    ) -> f64 {
        let l1: f64 = beta1.iter().chain(beta2.iter()).map(|b| b.abs()).sum();
        let ld: f64 = beta1
            .iter()
            .zip(beta2.iter())
            .map(|(a, b)| (a - b).abs())
            .sum();
        self.task1.loss(beta1) + self.task2.loss(beta2) + lambda1 * l1 + lambda2 * ld
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FusedFit {
    pub beta1: Array1<f64>,
    pub beta2: Array1<f64>,
    /// `X₁ᵀ(y₁ − X₁β̂₁)/n₁`.
    pub k1: Array1<f64>,
    /// `X₂ᵀ(y₂ − X₂β̂₂)/n₂`.
    pub k2: Array1<f64>,
    pub params: RegularizationParams,
    pub objective: f64,
    pub iterations: usize,
    pub kkt_residual: f64,
}

/// Exact minimizer of
/// `½g₁a² − z₁a + ½g₂b² − z₂b + λ₁(|a| + |b|) + λ₂|a − b|` for `g₁, g₂ > 0`.
///
/// The minimizer lies on one of the pieces where the signs of `a`, `b` and
/// `a − b` are fixed (or zero); each piece has a closed-form stationary point.
/// Every candidate is a valid point, so the lowest objective among them is
/// the global minimum.
pub fn solve_pair(g1: f64, z1: f64, g2: f64, z2: f64, l1: f64, l2: f64) -> (f64, f64) {
    let objective = |a: f64, b: f64| {
        0.5 * g1 * a * a - z1 * a + 0.5 * g2 * b * b - z2 * b
            + l1 * (a.abs() + b.abs())
            + l2 * (a - b).abs()
    };
    let mut best = (0.0, 0.0);
    let mut best_val = 0.0;
    let mut consider = |a: f64, b: f64| {
        let v = objective(a, b);
        if v < best_val {
            best_val = v;
            best = (a, b);
        }
    };
    consider(soft_threshold(z1, l1 + l2) / g1, 0.0);
    consider(0.0, soft_threshold(z2, l1 + l2) / g2);
    let t = soft_threshold(z1 + z2, 2.0 * l1) / (g1 + g2);
    consider(t, t);
    for sa in [-1.0, 1.0] {
        for sb in [-1.0, 1.0] {
            for sd in [-1.0, 1.0] {
                let a = (z1 - l1 * sa - l2 * sd) / g1;
                let b = (z2 - l1 * sb + l2 * sd) / g2;
                consider(a, b);
            }
        }
    }
    best
}

fn sign_interval(v: f64, zero_tol: f64) -> (f64, f64) {
    if v > zero_tol {
        (1.0, 1.0)
    } else if v < -zero_tol {
        (-1.0, -1.0)
    } else {
        (-1.0, 1.0)
    }
}

fn dist_to_interval(x: f64, lo: f64, hi: f64) -> f64 {
    (lo - x).max(x - hi).max(0.0)
}

/// Smallest violation of the pair's stationarity conditions
/// `k₁ = λ₁s_a + λ₂s_d`, `k₂ = λ₁s_b − λ₂s_d` over valid subgradients
/// `s_a ∈ ∂|a|`, `s_b ∈ ∂|b|`, `s_d ∈ ∂|a − b|`.
pub fn pair_kkt_residual(a: f64, b: f64, k1: f64, k2: f64, l1: f64, l2: f64) -> f64 {
    let (alo, ahi) = sign_interval(a, 0.0);
    let (blo, bhi) = sign_interval(b, 0.0);
    let (mut lo, mut hi) = sign_interval(a - b, TIE_THRESHOLD);
    let r = |sd: f64| {
        dist_to_interval(k1 - l2 * sd, l1 * alo, l1 * ahi).max(dist_to_interval(
            k2 + l2 * sd,
            l1 * blo,
            l1 * bhi,
        ))
    };
    // Convex in s_d: ternary search.
    for _ in 0..100 {
        if hi - lo < 1e-15 {
            break;
        }
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if r(m1) <= r(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    r(0.5 * (lo + hi))
}

pub fn fused_kkt_residual(
    beta1: ArrayView1<f64>,
    beta2: ArrayView1<f64>,
    k1: ArrayView1<f64>,
    k2: ArrayView1<f64>,
    lambda1: f64,
    lambda2: f64,
) -> f64 {
    (0..beta1.len())
        .map(|j| pair_kkt_residual(beta1[j], beta2[j], k1[j], k2[j], lambda1, lambda2))
        .fold(0.0, f64::max)
}

pub fn solve_fused(
    x1: &SampleMatrix,
    y1: ArrayView1<f64>,
    x2: &SampleMatrix,
    y2: ArrayView1<f64>,
    params: &RegularizationParams,
    cfg: &SolverConfig,
) -> Result<FusedFit> {
    if y1.iter().chain(y2.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    let problem = FusedProblem::new(
        GramProblem::from_data(x1.data(), y1)?,
        GramProblem::from_data(x2.data(), y2)?,
    )?;
    let mut fit = solve_fused_gram(&problem, params, cfg, None)?;
    fit.k1 = subgradient(x1, y1, fit.beta1.view())?;
    fit.k2 = subgradient(x2, y2, fit.beta2.view())?;
    fit.kkt_residual = fused_kkt_residual(
        fit.beta1.view(),
        fit.beta2.view(),
        fit.k1.view(),
        fit.k2.view(),
        params.lambda1,
        params.lambda2,
    );
    Ok(fit)
}

pub fn solve_fused_gram(
    problem: &FusedProblem,
    params: &RegularizationParams,
    cfg: &SolverConfig,
    warm: Option<(ArrayView1<f64>, ArrayView1<f64>)>,
) -> Result<FusedFit> {
    block_descent(problem, params, cfg, warm, None)
}

/// Same as [`solve_fused_gram`] but records the objective after every sweep.
pub fn solve_fused_traced(
    problem: &FusedProblem,
    params: &RegularizationParams,
    cfg: &SolverConfig,
) -> Result<(FusedFit, Vec<f64>)> {
    let mut trace = Vec::new();
    let fit = block_descent(problem, params, cfg, None, Some(&mut trace))?;
    Ok((fit, trace))
}

fn block_descent(
    problem: &FusedProblem,
    params: &RegularizationParams,
    cfg: &SolverConfig,
    warm: Option<(ArrayView1<f64>, ArrayView1<f64>)>,
    mut trace: Option<&mut Vec<f64>>,
) -> Result<FusedFit> {
    let (l1, l2) = (params.lambda1, params.lambda2);
    if !(l1 >= 0.0 && l2 >= 0.0 && l1.is_finite() && l2.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "lambda1 = {l1}, lambda2 = {l2}"
        )));
    }
    let p = problem.p();
    let (g1, g2) = (&problem.task1.gram, &problem.task2.gram);
    let (mut b1, mut b2) = match warm {
        Some((w1, w2)) if w1.len() == p && w2.len() == p => (w1.to_owned(), w2.to_owned()),
        Some(_) => return Err(Error::DimensionMismatch("warm start length".into())),
        None => (Array1::zeros(p), Array1::zeros(p)),
    };
    let mut r1 = problem.task1.correlation(b1.view());
    let mut r2 = problem.task2.correlation(b2.view());
    let mut residual = f64::INFINITY;

    for sweep in 1..=cfg.max_iter {
        let mut max_step = 0.0f64;
        for j in 0..p {
            let (d1, d2) = (g1[[j, j]], g2[[j, j]]);
            if d1 <= 0.0 || d2 <= 0.0 {
                continue;
            }
            let (a0, b0) = (b1[j], b2[j]);
            let (a, b) = solve_pair(d1, r1[j] + d1 * a0, d2, r2[j] + d2 * b0, l1, l2);
            let (da, db) = (a - a0, b - b0);
            if da != 0.0 {
                b1[j] = a;
                r1.scaled_add(-da, &g1.column(j));
            }
            if db != 0.0 {
                b2[j] = b;
                r2.scaled_add(-db, &g2.column(j));
            }
            max_step = max_step.max(da.abs()).max(db.abs());
        }
        if let Some(t) = trace.as_deref_mut() {
            t.push(problem.objective(b1.view(), b2.view(), l1, l2));
        }
        if max_step < cfg.tol {
            r1 = problem.task1.correlation(b1.view());
            r2 = problem.task2.correlation(b2.view());
            residual = fused_kkt_residual(b1.view(), b2.view(), r1.view(), r2.view(), l1, l2);
            if residual < cfg.tol {
                return Ok(FusedFit {
                    objective: problem.objective(b1.view(), b2.view(), l1, l2),
                    beta1: b1,
                    beta2: b2,
                    k1: r1,
                    k2: r2,
                    params: params.clone(),
                    iterations: sweep,
                    kkt_residual: residual,
                });
            }
        }
    }
    Err(Error::NotConverged {
        solver: "fused lasso",
        iterations: cfg.max_iter,
        residual,
    })
}
