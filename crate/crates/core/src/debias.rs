//! Debiasing matrices and the debiased difference estimator.
//!
//! Single task: each row `mᵢ` of `M` minimizes `mᵢᵀΣ̂mᵢ` subject to
//! `‖Σ̂mᵢ − eᵢ‖∞ ≤ μ`. Joint (fused) case: each row pair `(m₁, m₂)` minimizes
//! `(1/n₁)m₁ᵀΣ̂₁m₁ + (1/n₂)m₂ᵀΣ̂₂m₂` subject to
//!
//! ```text
//! ‖Σ̂₁m₁ + Σ̂₂m₂ − 2eᵢ‖∞ ≤ μ₁     ‖Σ̂₁m₁ − Σ̂₂m₂‖∞ ≤ μ₂
//! ```
//!
//! Rows whose budgets are infeasible get both budgets multiplied by 1.5 until
//! the QP is feasible; the number of relaxations is recorded.

use ndarray::{concatenate, s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fused::FusedFit;
use crate::lasso::{subgradient, LassoFit};
use crate::par;
use crate::qp::{PreparedQp, QpStatus, FEAS_TOL};
use crate::types::{EmpiricalCovariance, SampleMatrix, SolverConfig};

pub const RELAX_FACTOR: f64 = 1.5;
const MAX_RELAXATIONS: usize = 80;

/// Sparsity assumptions and constants behind the joint bias budgets.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsConfig {
    pub c: f64,
    pub a: f64,
    /// Assumed difference sparsity.
    pub s_d: usize,
    /// Assumed parameter sparsity `|S₁| + |S₂|`.
    pub s_12: usize,
    pub m: f64,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        BoundsConfig {
            c: 2.0,
            a: 2.0,
            s_d: 2,
            s_12: 15,
            m: 0.01,
        }
    }
}

impl BoundsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 1.0 && self.a > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "bounds constants c and a must exceed 1 (got {}, {})",
                self.c, self.a
            )));
        }
        if !(self.m > 0.0 && self.m < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "bounds exponent m must be in (0,1), got {}",
                self.m
            )));
        }
        if self.s_d == 0 || self.s_12 == 0 {
            return Err(Error::InvalidParameter(
                "sparsity assumptions must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// `μ₁ = 1/(c·λ₂·s_d·n₂^m)` and `μ₂ = 1/(a·(λ₁·s₁₂ + λ₂·s_d)·n₂^m)`.
pub fn bias_bounds(
    lambda1: f64,
    lambda2: f64,
    n2: usize,
    cfg: &BoundsConfig,
) -> Result<(f64, f64)> {
    cfg.validate()?;
    if !(lambda1 > 0.0 && lambda2 > 0.0) || n2 == 0 {
        return Err(Error::InvalidParameter(format!(
            "bias bounds need positive lambdas and n2 (got {lambda1}, {lambda2}, {n2})"
        )));
    }
    let growth = (n2 as f64).powf(cfg.m);
    let (sd, s12) = (cfg.s_d as f64, cfg.s_12 as f64);
    let mu1 = 1.0 / (cfg.c * lambda2 * sd * growth);
    let mu2 = 1.0 / (cfg.a * (lambda1 * s12 + lambda2 * sd) * growth);
    Ok((mu1, mu2))
}

/// Single-task budget `scale·sqrt(log p / n)`.
pub fn single_budget(p: usize, n: usize, scale: f64) -> f64 {
    scale * ((p.max(2) as f64).ln() / n as f64).sqrt()
}

#[derive(Clone, Debug, PartialEq)]
pub struct DebiasMatrices {
    pub m1: Array2<f64>,
    pub m2: Option<Array2<f64>>,
    /// Largest budget used by any row after relaxation.
    pub mu1: f64,
    pub mu2: f64,
    /// True when every row was solved at the requested budgets.
    pub feasible: bool,
    pub relaxations: usize,
    /// Sum of the per-row QP objectives.
    pub objective: f64,
}

impl DebiasMatrices {
    /// Pairs two single-task estimates, as used by the nodewise debiased lasso.
    pub fn independent(first: DebiasMatrices, second: DebiasMatrices) -> DebiasMatrices {
        DebiasMatrices {
            m1: first.m1,
            m2: Some(second.m1),
            mu1: first.mu1,
            mu2: second.mu1,
            feasible: first.feasible && second.feasible,
            relaxations: first.relaxations + second.relaxations,
            objective: first.objective + second.objective,
        }
    }

    fn second(&self) -> Result<&Array2<f64>> {
        self.m2
            .as_ref()
            .ok_or_else(|| Error::DimensionMismatch("second debiasing matrix missing".into()))
    }
}

/// `‖MΣ̂ − I‖` as the largest absolute entry.
pub fn single_constraint_norm(m: ArrayView2<f64>, sigma: ArrayView2<f64>) -> f64 {
    let prod = m.dot(&sigma);
    let mut worst = 0.0f64;
    for ((i, j), v) in prod.indexed_iter() {
        let e = if i == j { 1.0 } else { 0.0 };
        worst = worst.max((v - e).abs());
    }
    worst
}

/// `(‖M₁Σ̂₁ + M₂Σ̂₂ − 2I‖, ‖M₁Σ̂₁ − M₂Σ̂₂‖)`, largest absolute entries.
pub fn joint_constraint_norms(
    m1: ArrayView2<f64>,
    m2: ArrayView2<f64>,
    sigma1: ArrayView2<f64>,
    sigma2: ArrayView2<f64>,
) -> (f64, f64) {
    let a = m1.dot(&sigma1);
    let b = m2.dot(&sigma2);
    let mut sum_norm = 0.0f64;
    let mut diff_norm = 0.0f64;
    for ((i, j), &u) in a.indexed_iter() {
        let v = b[[i, j]];
        let two = if i == j { 2.0 } else { 0.0 };
        sum_norm = sum_norm.max((u + v - two).abs());
        diff_norm = diff_norm.max((u - v).abs());
    }
    (sum_norm, diff_norm)
}

/// Re-checks the budget constraints by direct matrix arithmetic. The QP's
/// absolute feasibility tolerance is allowed on top of the relative slack.
pub fn verify_single(m: &DebiasMatrices, sigma: &EmpiricalCovariance) -> bool {
    single_constraint_norm(m.m1.view(), sigma.matrix()) <= m.mu1 * (1.0 + 1e-6) + FEAS_TOL
}

pub fn verify_joint(
    m: &DebiasMatrices,
    sigma1: &EmpiricalCovariance,
    sigma2: &EmpiricalCovariance,
) -> bool {
    let Some(m2) = m.m2.as_ref() else {
        return false;
    };
    let (a, b) = joint_constraint_norms(m.m1.view(), m2.view(), sigma1.matrix(), sigma2.matrix());
    a <= m.mu1 * (1.0 + 1e-6) + FEAS_TOL && b <= m.mu2 * (1.0 + 1e-6) + FEAS_TOL
}

struct RowSolution {
    x: Array1<f64>,
    objective: f64,
    budget1: f64,
    budget2: f64,
    relaxations: usize,
}

/// Solves every row at the smallest budget `μ·1.5ᵏ` that is feasible.
/// Feasibility is monotone in `k`, so `k` is found by galloping followed by
/// bisection rather than a linear scan.
fn solve_rows<F>(
    qp: &PreparedQp,
    p: usize,
    mu1: f64,
    mu2: f64,
    cfg: &SolverConfig,
    bounds: F,
) -> Result<Vec<RowSolution>>
where
    F: Fn(usize, f64, f64) -> (Array1<f64>, Array1<f64>) + Sync + Send,
{
    par::try_map_indexed(p, |i| {
        let attempt = |k: usize| -> Result<Option<RowSolution>> {
            let scale = RELAX_FACTOR.powi(k as i32);
            let (b1, b2) = (mu1 * scale, mu2 * scale);
            let (lower, upper) = bounds(i, b1, b2);
            let sol = qp.solve(lower.view(), upper.view(), cfg)?;
            let usable = match sol.status {
                QpStatus::Optimal => true,
                QpStatus::MaxIter => sol.primal_infeasibility <= FEAS_TOL,
                QpStatus::Infeasible => false,
            };
            Ok(usable.then_some(RowSolution {
                x: sol.x,
                objective: sol.objective,
                budget1: b1,
                budget2: b2,
                relaxations: k,
            }))
        };
        if let Some(row) = attempt(0)? {
            return Ok(row);
        }
        let (mut bad, mut good) = (0usize, None);
        let mut k = 1usize;
        loop {
            if let Some(row) = attempt(k)? {
                good = Some(row);
                break;
            }
            bad = k;
            if k == MAX_RELAXATIONS {
                break;
            }
            k = (2 * k).min(MAX_RELAXATIONS);
        }
        let mut best = good.ok_or(Error::InfeasibleBudget { row: i })?;
        while best.relaxations - bad > 1 {
            let mid = bad + (best.relaxations - bad) / 2;
            match attempt(mid)? {
                Some(row) => best = row,
                None => bad = mid,
            }
        }
        Ok(best)
    })
}

pub fn estimate_m_single(
    sigma: &EmpiricalCovariance,
    mu: f64,
    cfg: &SolverConfig,
) -> Result<DebiasMatrices> {
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "budget must be >= 0, got {mu}"
        )));
    }
    let p = sigma.p();
    let s = sigma.matrix();
    let qp = PreparedQp::new(&s * 2.0, s.to_owned())?;
    let rows = solve_rows(&qp, p, mu, 0.0, cfg, |i, b, _| {
        let mut lower = Array1::from_elem(p, -b);
        let mut upper = Array1::from_elem(p, b);
        lower[i] += 1.0;
        upper[i] += 1.0;
        (lower, upper)
    })?;
    let mut m = Array2::zeros((p, p));
    for (i, r) in rows.iter().enumerate() {
        m.row_mut(i).assign(&r.x);
    }
    let relaxations: usize = rows.iter().map(|r| r.relaxations).sum();
    Ok(DebiasMatrices {
        m1: m,
        m2: None,
        mu1: rows.iter().map(|r| r.budget1).fold(mu, f64::max),
        mu2: 0.0,
        feasible: relaxations == 0,
        relaxations,
        objective: rows.iter().map(|r| r.objective).sum(),
    })
}

pub fn estimate_m_joint(
    sigma1: &EmpiricalCovariance,
    sigma2: &EmpiricalCovariance,
    n1: usize,
    n2: usize,
    mu1: f64,
    mu2: f64,
    cfg: &SolverConfig,
) -> Result<DebiasMatrices> {
    let p = sigma1.p();
    if sigma2.p() != p {
        return Err(Error::DimensionMismatch(format!(
            "covariances are {p}x{p} and {0}x{0}",
            sigma2.p()
        )));
    }
    if n1 == 0 || n2 == 0 {
        return Err(Error::InvalidParameter(
            "sample sizes must be positive".into(),
        ));
    }
    if !(mu1 >= 0.0 && mu2 >= 0.0 && mu1.is_finite() && mu2.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "budgets must be >= 0, got {mu1}, {mu2}"
        )));
    }
    let (s1, s2) = (sigma1.matrix(), sigma2.matrix());
    let mut q = Array2::zeros((2 * p, 2 * p));
    q.slice_mut(s![..p, ..p]).assign(&(&s1 * (2.0 / n1 as f64)));
    q.slice_mut(s![p.., p..]).assign(&(&s2 * (2.0 / n2 as f64)));
    let top = concatenate![Axis(1), s1, s2];
    let neg = -&s2;
    let bottom = concatenate![Axis(1), s1, neg];
    let a = concatenate![Axis(0), top, bottom];
    let qp = PreparedQp::new(q, a)?;

    let rows = solve_rows(&qp, p, mu1, mu2, cfg, |i, b1, b2| {
        let mut lower = Array1::zeros(2 * p);
        let mut upper = Array1::zeros(2 * p);
        lower.slice_mut(s![..p]).fill(-b1);
        upper.slice_mut(s![..p]).fill(b1);
        lower.slice_mut(s![p..]).fill(-b2);
        upper.slice_mut(s![p..]).fill(b2);
        lower[i] += 2.0;
        upper[i] += 2.0;
        (lower, upper)
    })?;
    let mut m1 = Array2::zeros((p, p));
    let mut m2 = Array2::zeros((p, p));
    for (i, r) in rows.iter().enumerate() {
        m1.row_mut(i).assign(&r.x.slice(s![..p]));
        m2.row_mut(i).assign(&r.x.slice(s![p..]));
    }
    let relaxations: usize = rows.iter().map(|r| r.relaxations).sum();
    Ok(DebiasMatrices {
        m1,
        m2: Some(m2),
        mu1: rows.iter().map(|r| r.budget1).fold(mu1, f64::max),
        mu2: rows.iter().map(|r| r.budget2).fold(mu2, f64::max),
        feasible: relaxations == 0,
        relaxations,
        objective: rows.iter().map(|r| r.objective).sum(),
    })
}

/// `β̂ + M·k̂`.
pub fn debias_with_subgradient(
    beta: ArrayView1<f64>,
    k_hat: ArrayView1<f64>,
    m: ArrayView2<f64>,
) -> Array1<f64> {
    &beta + &m.dot(&k_hat)
}

/// `β̂ + M·Xᵀ(y − Xβ̂)/n`.
pub fn debias_single(
    fit: &LassoFit,
    m: &DebiasMatrices,
    x: &SampleMatrix,
    y: ArrayView1<f64>,
) -> Result<Array1<f64>> {
    if m.m1.nrows() != fit.beta.len() || m.m1.ncols() != fit.beta.len() {
        return Err(Error::DimensionMismatch(format!(
            "M is {:?}, beta has {}",
            m.m1.dim(),
            fit.beta.len()
        )));
    }
    let k = subgradient(x, y, fit.beta.view())?;
    Ok(debias_with_subgradient(
        fit.beta.view(),
        k.view(),
        m.m1.view(),
    ))
}

/// Debiased difference with its standard errors and z-statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct DebiasedDifference {
    pub beta_d: Array1<f64>,
    pub sigma_d: Array1<f64>,
    pub z: Array1<f64>,
}

impl DebiasedDifference {
    pub fn new(beta_d: Array1<f64>, variance: Array1<f64>) -> Result<Self> {
        if beta_d.len() != variance.len() {
            return Err(Error::DimensionMismatch(
                "difference and variance lengths".into(),
            ));
        }
        if let Some(i) = variance.iter().position(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::NonPositiveVariance(i));
        }
        let sigma_d = variance.mapv(f64::sqrt);
        let z = &beta_d / &sigma_d;
        Ok(DebiasedDifference { beta_d, sigma_d, z })
    }
}

/// Noise standard deviations of the two regressions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseEstimate {
    pub sigma1: f64,
    pub sigma2: f64,
}

impl NoiseEstimate {
    pub fn new(sigma1: f64, sigma2: f64) -> Result<Self> {
        if !(sigma1 > 0.0 && sigma2 > 0.0 && sigma1.is_finite() && sigma2.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise levels must be positive and finite, got {sigma1}, {sigma2}"
            )));
        }
        Ok(NoiseEstimate { sigma1, sigma2 })
    }
}

/// `diag((σ̂₁²/n₁)·M₁Σ̂₁M₁ᵀ + (σ̂₂²/n₂)·M₂Σ̂₂M₂ᵀ)`.
pub fn variance_difference(
    m: &DebiasMatrices,
    sigma1: &EmpiricalCovariance,
    sigma2: &EmpiricalCovariance,
    noise: NoiseEstimate,
    n1: usize,
    n2: usize,
) -> Result<Array1<f64>> {
    let m2 = m.second()?;
    let p = m.m1.nrows();
    if sigma1.p() != p || sigma2.p() != p || m2.nrows() != p {
        return Err(Error::DimensionMismatch(
            "debiasing matrices and covariances".into(),
        ));
    }
    let quad = |mm: &Array2<f64>, s: ArrayView2<f64>| -> Array1<f64> {
        let ms = mm.dot(&s);
        (&ms * mm).sum_axis(Axis(1))
    };
    let w1 = noise.sigma1 * noise.sigma1 / n1 as f64;
    let w2 = noise.sigma2 * noise.sigma2 / n2 as f64;
    let v = quad(&m.m1, sigma1.matrix()) * w1 + quad(m2, sigma2.matrix()) * w2;
    if let Some(i) = v.iter().position(|x| !(*x > 0.0 && x.is_finite())) {
        return Err(Error::NonPositiveVariance(i));
    }
    Ok(v)
}

/// Debiased difference from a joint fit:
/// `(β̂₁ + M₁k̂₁) − (β̂₂ + M₂k̂₂)` with `k̂ⱼ = Xⱼᵀ(yⱼ − Xⱼβ̂ⱼ)/nⱼ`.
#[allow(clippy::too_many_arguments)]
pub fn debias_difference(
    fit: &FusedFit,
    m: &DebiasMatrices,
    x1: &SampleMatrix,
    y1: ArrayView1<f64>,
    x2: &SampleMatrix,
    y2: ArrayView1<f64>,
    noise: NoiseEstimate,
) -> Result<DebiasedDifference> {
    let m2 = m.second()?;
    let k1 = subgradient(x1, y1, fit.beta1.view())?;
    let k2 = subgradient(x2, y2, fit.beta2.view())?;
    let b1 = debias_with_subgradient(fit.beta1.view(), k1.view(), m.m1.view());
    let b2 = debias_with_subgradient(fit.beta2.view(), k2.view(), m2.view());
    let var = variance_difference(m, &x1.covariance(), &x2.covariance(), noise, x1.n(), x2.n())?;
    DebiasedDifference::new(b1 - b2, var)
}

/// `‖(M₁Σ̂₁ − I)(β̂₁ − β₁) − (M₂Σ̂₂ − I)(β̂₂ − β₂)‖∞`.
#[allow(clippy::too_many_arguments)]
pub fn empirical_delta_parts(
    beta_hat1: ArrayView1<f64>,
    beta_hat2: ArrayView1<f64>,
    m: &DebiasMatrices,
    sigma1: &EmpiricalCovariance,
    sigma2: &EmpiricalCovariance,
    beta1: ArrayView1<f64>,
    beta2: ArrayView1<f64>,
) -> Result<f64> {
    let m2 = m.second()?;
    let p = beta1.len();
    let term = |mm: &Array2<f64>, s: ArrayView2<f64>, err: Array1<f64>| -> Array1<f64> {
        let mut a = mm.dot(&s);
        for i in 0..p {
            a[[i, i]] -= 1.0;
        }
        a.dot(&err)
    };
    let d = term(&m.m1, sigma1.matrix(), &beta_hat1 - &beta1)
        - term(m2, sigma2.matrix(), &beta_hat2 - &beta2);
    Ok(d.iter().fold(0.0, |acc, v| acc.max(v.abs())))
}

pub fn empirical_delta(
    fit: &FusedFit,
    m: &DebiasMatrices,
    sigma1: &EmpiricalCovariance,
    sigma2: &EmpiricalCovariance,
    truth: (ArrayView1<f64>, ArrayView1<f64>),
) -> Result<f64> {
    empirical_delta_parts(
        fit.beta1.view(),
        fit.beta2.view(),
        m,
        sigma1,
        sigma2,
        truth.0,
        truth.1,
    )
}
