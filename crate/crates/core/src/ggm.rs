//! Nodewise difference testing.
//!
//! Every node is regressed on the remaining nodes in both datasets. The
//! regressions are debiased and their difference standardized, which gives
//! one row of a `p × (p − 1)` matrix of z-statistics. Column `c` of row `v`
//! refers to node `c` when `c < v` and to node `c + 1` otherwise.
//!
//! All nodewise quantities are carved out of per-dataset covariance matrices
//! that are computed once, including the per-fold matrices used for
//! cross-validation. Folds are shared by every node, so relabelling the
//! variables does not change the fits.

use std::fmt;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::debias::{
    bias_bounds, debias_with_subgradient, estimate_m_joint, estimate_m_single, single_budget,
    BoundsConfig, DebiasMatrices, DebiasedDifference, NoiseEstimate,
};
use crate::error::{Error, Result};
use crate::fused::{solve_fused_gram, FusedProblem};
use crate::lasso::{lasso_path, solve_lasso_gram, GramProblem};
use crate::linalg::{column_without, drop_index};
use crate::par;
use crate::types::{
    default_k_grid, EmpiricalCovariance, RegularizationParams, SampleMatrix, SolverConfig,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "lasso")]
    DebiasedLasso,
    #[serde(rename = "fused")]
    DebiasedFused,
}

impl Method {
    pub fn tag(self) -> &'static str {
        match self {
            Method::DebiasedLasso => "lasso",
            Method::DebiasedFused => "fused",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::DebiasedLasso => "debiased lasso",
            Method::DebiasedFused => "debiased fused lasso",
        })
    }
}

/// Two-sided normal p-value `2(1 − Φ(|z|))`.
pub fn p_value(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0)
}

/// Node index referred to by column `col` of row `v`.
pub fn other_node(v: usize, col: usize) -> usize {
    if col < v {
        col
    } else {
        col + 1
    }
}

/// Column of row `v` that refers to node `j` (`j ≠ v`).
pub fn column_of(v: usize, j: usize) -> usize {
    debug_assert_ne!(v, j);
    if j < v {
        j
    } else {
        j - 1
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TestStatMatrix {
    pub b: Array2<f64>,
    pub pvals: Array2<f64>,
    pub method: Method,
}

impl TestStatMatrix {
    pub fn from_z(b: Array2<f64>, method: Method) -> Result<Self> {
        if b.iter().any(|z| !z.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        if b.ncols() + 1 != b.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "statistics must be p x (p-1), got {:?}",
                b.dim()
            )));
        }
        let pvals = b.mapv(p_value);
        Ok(TestStatMatrix { b, pvals, method })
    }

    pub fn p(&self) -> usize {
        self.b.nrows()
    }

    /// Conservative symmetric view: entries `(v, j)` and `(j, v)` both take the
    /// larger of the two p-values (and the matching statistic).
    pub fn symmetrized(&self) -> TestStatMatrix {
        let mut out = self.clone();
        let p = self.p();
        for v in 0..p {
            for j in v + 1..p {
                let (a, b) = ((v, column_of(v, j)), (j, column_of(j, v)));
                let keep = if self.pvals[a] >= self.pvals[b] { a } else { b };
                for idx in [a, b] {
                    out.pvals[idx] = self.pvals[keep];
                    out.b[idx] = self.b[keep];
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Correction {
    None,
    Bh,
}

/// Benjamini-Hochberg step-up: rejects the `k` smallest p-values for the
/// largest `k` with `p₍ₖ₎ ≤ k·q/m`.
pub fn benjamini_hochberg(pvals: &[f64], q: f64) -> Vec<bool> {
    let m = pvals.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| pvals[a].total_cmp(&pvals[b]));
    let cutoff = order
        .iter()
        .enumerate()
        .filter(|(rank, &i)| pvals[i] <= (rank + 1) as f64 * q / m as f64)
        .map(|(rank, _)| rank + 1)
        .max()
        .unwrap_or(0);
    let mut reject = vec![false; m];
    for &i in &order[..cutoff] {
        reject[i] = true;
    }
    reject
}

pub fn select_edges(stats: &TestStatMatrix, alpha: f64, correction: Correction) -> Array2<bool> {
    match correction {
        Correction::None => stats.pvals.mapv(|p| p < alpha),
        Correction::Bh => {
            let flat: Vec<f64> = stats.pvals.iter().copied().collect();
            let reject = benjamini_hochberg(&flat, alpha);
            Array2::from_shape_vec(stats.pvals.dim(), reject).expect("shape preserved")
        }
    }
}

/// Settings shared by both nodewise procedures.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodewiseConfig {
    pub solver: SolverConfig,
    pub qp: SolverConfig,
    pub k_grid: Vec<f64>,
    pub cv_folds: usize,
    pub bounds: BoundsConfig,
    /// Single-task budget is `single_budget·sqrt(log p / n)`.
    pub single_budget: f64,
    /// The fused bias bounds are evaluated at penalties no smaller than
    /// `min_bound_multiplier·σ̂₂·sqrt(log p / n₂)`.
    pub min_bound_multiplier: f64,
    /// ... and with the fusion penalty capped at `max_fusion_ratio` times the
    /// sparsity penalty.
    pub max_fusion_ratio: f64,
    /// Seeds the shuffle behind the cross-validation folds.
    pub seed: u64,
}

impl Default for NodewiseConfig {
    fn default() -> Self {
        NodewiseConfig {
            solver: SolverConfig::default(),
            qp: SolverConfig::qp(),
            k_grid: default_k_grid(),
            cv_folds: 3,
            bounds: BoundsConfig::default(),
            single_budget: 0.25,
            min_bound_multiplier: 2.0,
            max_fusion_ratio: 1.0,
            seed: 0,
        }
    }
}

impl NodewiseConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        self.qp.validate()?;
        self.bounds.validate()?;
        RegularizationParams {
            k_grid: self.k_grid.clone(),
            cv_folds: self.cv_folds,
            ..Default::default()
        }
        .validate()?;
        if !(self.single_budget > 0.0 && self.single_budget.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "single-task budget scale must be positive, got {}",
                self.single_budget
            )));
        }
        if !(self.min_bound_multiplier >= 0.0 && self.min_bound_multiplier.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "bound multiplier must be non-negative, got {}",
                self.min_bound_multiplier
            )));
        }
        if !(self.max_fusion_ratio > 0.0 && self.max_fusion_ratio.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "fusion ratio must be positive, got {}",
                self.max_fusion_ratio
            )));
        }
        Ok(())
    }
}

/// Covariance of a dataset plus train/test covariances for every fold.
#[derive(Clone, Debug)]
struct Prepared {
    cov: Array2<f64>,
    n: usize,
    train: Vec<Array2<f64>>,
    test: Vec<Array2<f64>>,
}

/// Contiguous folds over a seeded shuffle of `0..n`.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    (0..folds)
        .map(|f| idx[f * n / folds..(f + 1) * n / folds].to_vec())
        .collect()
}

impl Prepared {
    fn new(data: ArrayView2<f64>, folds: usize, seed: u64) -> Result<Self> {
        let n = data.nrows();
        if n < 2 * folds {
            return Err(Error::InvalidParameter(format!(
                "{folds}-fold cross-validation needs at least {} samples, got {n}",
                2 * folds
            )));
        }
        let total = data.t().dot(&data);
        let cov = &total / n as f64;
        let mut train = Vec::with_capacity(folds);
        let mut test = Vec::with_capacity(folds);
        for rows in fold_assignment(n, folds, seed) {
            let sub = data.select(ndarray::Axis(0), &rows);
            let held = sub.t().dot(&sub);
            test.push(&held / rows.len() as f64);
            train.push((&total - &held) / (n - rows.len()) as f64);
        }
        Ok(Prepared {
            cov,
            n,
            train,
            test,
        })
    }
}

fn node_problem(s: &Array2<f64>, v: usize) -> GramProblem {
    GramProblem {
        gram: drop_index(s.view(), v),
        xty: column_without(s.view(), v),
        yty: s[[v, v]],
    }
}

/// Mean held-out squared error `(1/n)‖y − Xβ‖²` from a held-out Gram problem.
fn held_out_error(test: &GramProblem, beta: ArrayView1<f64>) -> f64 {
    2.0 * test.loss(beta)
}

/// Index of the smallest score, preferring the later (larger) grid entry on ties.
fn argmin_prefer_large(scores: &[f64], keys: &[f64]) -> usize {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| keys[b].total_cmp(&keys[a]));
    let mut best = order[0];
    for &i in &order[1..] {
        if scores[i] < scores[best] {
            best = i;
        }
    }
    best
}

fn cv_lasso_node(
    data: &Prepared,
    v: usize,
    scale: f64,
    grid: &[f64],
    cfg: &SolverConfig,
) -> Result<f64> {
    if grid.len() == 1 {
        return Ok(grid[0]);
    }
    let lambdas: Vec<f64> = grid.iter().map(|k| k * scale).collect();
    let mut scores = vec![0.0; grid.len()];
    for (train, test) in data.train.iter().zip(&data.test) {
        let fits = lasso_path(&node_problem(train, v), &lambdas, cfg)?;
        let held = node_problem(test, v);
        for (s, fit) in scores.iter_mut().zip(&fits) {
            *s += held_out_error(&held, fit.beta.view());
        }
    }
    Ok(grid[argmin_prefer_large(&scores, grid)])
}

fn cv_fused_node(
    d1: &Prepared,
    d2: &Prepared,
    v: usize,
    scale: f64,
    grid: &[f64],
    cfg: &SolverConfig,
) -> Result<(f64, f64)> {
    if grid.len() == 1 {
        return Ok((grid[0], grid[0]));
    }
    let mut desc: Vec<f64> = grid.to_vec();
    desc.sort_by(|a, b| b.total_cmp(a));
    let g = desc.len();
    let mut scores = vec![0.0; g * g];
    for f in 0..d1.train.len() {
        let problem =
            FusedProblem::new(node_problem(&d1.train[f], v), node_problem(&d2.train[f], v))?;
        let (held1, held2) = (node_problem(&d1.test[f], v), node_problem(&d2.test[f], v));
        let mut row_start: Option<(Array1<f64>, Array1<f64>)> = None;
        for (a, &k1) in desc.iter().enumerate() {
            let mut warm = row_start.clone();
            for (b, &k2) in desc.iter().enumerate() {
                let params = RegularizationParams::new(k1 * scale, k2 * scale);
                let fit = solve_fused_gram(
                    &problem,
                    &params,
                    cfg,
                    warm.as_ref().map(|(x, y)| (x.view(), y.view())),
                )?;
                scores[a * g + b] += held_out_error(&held1, fit.beta1.view())
                    + held_out_error(&held2, fit.beta2.view());
                if b == 0 {
                    row_start = Some((fit.beta1.clone(), fit.beta2.clone()));
                }
                warm = Some((fit.beta1, fit.beta2));
            }
        }
    }
    // Row-major over the descending grid, so the first minimum has the largest penalties.
    let mut best = 0;
    for i in 1..scores.len() {
        if scores[i] < scores[best] {
            best = i;
        }
    }
    Ok((desc[best / g], desc[best % g]))
}

/// Residual noise level of a cross-validated lasso pilot:
/// `σ̂² = ‖y − Xβ̃‖²/(n − ŝ)` with `ŝ` the pilot's support size.
fn noise_node(data: &Prepared, v: usize, grid: &[f64], cfg: &SolverConfig) -> Result<f64> {
    let full = node_problem(&data.cov, v);
    let (coef, support) = pilot(data, &full, v, grid, cfg)?;
    let mean_rss = 2.0 * full.loss(coef.view());
    Ok((data.n as f64 * mean_rss / (data.n - support) as f64).sqrt())
}

/// Lasso pilot with penalty `k·‖y‖·sqrt(log p / n)`, `k` chosen by cross-validation.
fn pilot(
    data: &Prepared,
    full: &GramProblem,
    v: usize,
    grid: &[f64],
    cfg: &SolverConfig,
) -> Result<(Array1<f64>, usize)> {
    let n = data.n;
    let dims = data.cov.nrows() as f64;
    let scale = full.yty.sqrt() * (dims.ln() / n as f64).sqrt();
    let k = cv_lasso_node(data, v, scale, grid, cfg)?;
    let beta = solve_lasso_gram(full, k * scale, cfg, None)?.beta;
    let support = beta.iter().filter(|b| **b != 0.0).count();
    check_residual_dof(n, support)?;
    Ok((beta, support))
}

fn check_residual_dof(n: usize, support: usize) -> Result<()> {
    if n <= support {
        return Err(Error::DegenerateResidual { n, support });
    }
    Ok(())
}

/// Noise level of the regression of `y` on `x`, see [`NodewiseConfig`] for
/// the cross-validation settings.
pub fn estimate_noise(x: &SampleMatrix, y: ArrayView1<f64>, cfg: &NodewiseConfig) -> Result<f64> {
    if x.n() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} rows vs {} responses",
            x.n(),
            y.len()
        )));
    }
    let mut aug = Array2::zeros((x.n(), x.p() + 1));
    aug.slice_mut(ndarray::s![.., ..x.p()]).assign(&x.data());
    aug.column_mut(x.p()).assign(&y);
    let prepared = Prepared::new(aug.view(), cfg.cv_folds, cfg.seed)?;
    let full = node_problem(&prepared.cov, x.p());
    let (coef, support) = pilot(&prepared, &full, x.p(), &cfg.k_grid, &cfg.solver)?;
    let resid = &y - &x.data().dot(&coef);
    Ok((resid.dot(&resid) / (x.n() - support) as f64).sqrt())
}

/// Cross-validated lasso multiplier `k` for penalties `k·scale`.
pub fn cross_validate_lasso(
    x: &SampleMatrix,
    y: ArrayView1<f64>,
    scale: f64,
    cfg: &NodewiseConfig,
) -> Result<f64> {
    let mut aug = Array2::zeros((x.n(), x.p() + 1));
    aug.slice_mut(ndarray::s![.., ..x.p()]).assign(&x.data());
    aug.column_mut(x.p()).assign(&y);
    let prepared = Prepared::new(aug.view(), cfg.cv_folds, cfg.seed)?;
    cv_lasso_node(&prepared, x.p(), scale, &cfg.k_grid, &cfg.solver)
}

/// Cross-validated fused multipliers `(k₁, k₂)` for penalties `kᵢ·scale`.
pub fn cross_validate_fused(
    x1: &SampleMatrix,
    y1: ArrayView1<f64>,
    x2: &SampleMatrix,
    y2: ArrayView1<f64>,
    scale: f64,
    cfg: &NodewiseConfig,
) -> Result<(f64, f64)> {
    let prep = |x: &SampleMatrix, y: ArrayView1<f64>| {
        let mut aug = Array2::zeros((x.n(), x.p() + 1));
        aug.slice_mut(ndarray::s![.., ..x.p()]).assign(&x.data());
        aug.column_mut(x.p()).assign(&y);
        Prepared::new(aug.view(), cfg.cv_folds, cfg.seed)
    };
    if x1.p() != x2.p() {
        return Err(Error::DimensionMismatch(
            "tasks differ in predictor count".into(),
        ));
    }
    let (d1, d2) = (prep(x1, y1)?, prep(x2, y2)?);
    cv_fused_node(&d1, &d2, x1.p(), scale, &cfg.k_grid, &cfg.solver)
}

/// Everything computed for one node.
#[derive(Clone, Debug)]
pub struct NodeDetail {
    pub node: usize,
    pub beta_hat1: Array1<f64>,
    pub beta_hat2: Array1<f64>,
    pub difference: DebiasedDifference,
    pub noise: NoiseEstimate,
    /// Lasso: the two per-dataset penalties. Fused: `(λ₁, λ₂)`.
    pub lambdas: (f64, f64),
    pub multipliers: (f64, f64),
    pub debias: DebiasMatrices,
}

#[derive(Clone, Debug)]
pub struct NodewiseResult {
    pub stats: TestStatMatrix,
    pub nodes: Vec<NodeDetail>,
}

impl NodewiseResult {
    /// Debiased differences stacked as a `p × (p − 1)` matrix.
    pub fn beta_d(&self) -> Array2<f64> {
        stack_rows(self.nodes.iter().map(|d| d.difference.beta_d.view()))
    }

    pub fn sigma_d(&self) -> Array2<f64> {
        stack_rows(self.nodes.iter().map(|d| d.difference.sigma_d.view()))
    }
}

fn stack_rows<'a>(rows: impl ExactSizeIterator<Item = ArrayView1<'a, f64>>) -> Array2<f64> {
    let rows: Vec<_> = rows.collect();
    let width = rows.first().map_or(0, |r| r.len());
    let mut out = Array2::zeros((rows.len(), width));
    for (i, r) in rows.into_iter().enumerate() {
        out.row_mut(i).assign(&r);
    }
    out
}

fn check_pair(x1: &SampleMatrix, x2: &SampleMatrix, cfg: &NodewiseConfig) -> Result<()> {
    cfg.validate()?;
    if x1.p() != x2.p() {
        return Err(Error::DimensionMismatch(format!(
            "datasets have {} and {} variables",
            x1.p(),
            x2.p()
        )));
    }
    if x1.p() < 2 {
        return Err(Error::InvalidParameter(
            "need at least two variables".into(),
        ));
    }
    Ok(())
}

fn sub_covariance(data: &Prepared, v: usize) -> Result<EmpiricalCovariance> {
    EmpiricalCovariance::from_matrix(drop_index(data.cov.view(), v), data.n)
}

fn lasso_node(d1: &Prepared, d2: &Prepared, v: usize, cfg: &NodewiseConfig) -> Result<NodeDetail> {
    let log_p = (d1.cov.nrows() as f64).ln();
    let mut parts = Vec::with_capacity(2);
    for d in [d1, d2] {
        let sigma = noise_node(d, v, &cfg.k_grid, &cfg.solver)?;
        let scale = sigma * (log_p / d.n as f64).sqrt();
        let k = cv_lasso_node(d, v, scale, &cfg.k_grid, &cfg.solver)?;
        let full = node_problem(&d.cov, v);
        let fit = solve_lasso_gram(&full, k * scale, &cfg.solver, None)?;
        let cov = sub_covariance(d, v)?;
        let budget = single_budget(d.cov.nrows(), d.n, cfg.single_budget);
        let m = estimate_m_single(&cov, budget, &cfg.qp)?;
        let debiased = debias_with_subgradient(fit.beta.view(), fit.k_hat.view(), m.m1.view());
        parts.push((sigma, k, fit, cov, m, debiased));
    }
    let (s2, k2, fit2, cov2, m2, deb2) = parts.pop().expect("two datasets");
    let (s1, k1, fit1, cov1, m1, deb1) = parts.pop().expect("two datasets");
    let noise = NoiseEstimate::new(s1, s2)?;
    let debias = DebiasMatrices::independent(m1, m2);
    let var = crate::debias::variance_difference(&debias, &cov1, &cov2, noise, d1.n, d2.n)?;
    Ok(NodeDetail {
        node: v,
        difference: DebiasedDifference::new(deb1 - deb2, var)?,
        lambdas: (fit1.lambda, fit2.lambda),
        beta_hat1: fit1.beta,
        beta_hat2: fit2.beta,
        noise,
        multipliers: (k1, k2),
        debias,
    })
}

fn fused_node(d1: &Prepared, d2: &Prepared, v: usize, cfg: &NodewiseConfig) -> Result<NodeDetail> {
    let log_p = (d1.cov.nrows() as f64).ln();
    let noise = NoiseEstimate::new(
        noise_node(d1, v, &cfg.k_grid, &cfg.solver)?,
        noise_node(d2, v, &cfg.k_grid, &cfg.solver)?,
    )?;
    let scale = noise.sigma2 * (log_p / d2.n as f64).sqrt();
    let (k1, k2) = cv_fused_node(d1, d2, v, scale, &cfg.k_grid, &cfg.solver)?;
    let params = RegularizationParams {
        lambda1: k1 * scale,
        lambda2: k2 * scale,
        k_grid: cfg.k_grid.clone(),
        cv_folds: cfg.cv_folds,
    };
    let problem = FusedProblem::new(node_problem(&d1.cov, v), node_problem(&d2.cov, v))?;
    let fit = solve_fused_gram(&problem, &params, &cfg.solver, None)?;
    let floor = cfg.min_bound_multiplier * scale;
    let bound1 = params.lambda1.max(floor);
    let bound2 = params.lambda2.max(floor).min(cfg.max_fusion_ratio * bound1);
    let (mu1, mu2) = bias_bounds(bound1, bound2, d2.n, &cfg.bounds)?;
    let (cov1, cov2) = (sub_covariance(d1, v)?, sub_covariance(d2, v)?);
    let debias = estimate_m_joint(&cov1, &cov2, d1.n, d2.n, mu1, mu2, &cfg.qp)?;
    let m2 = debias.m2.as_ref().expect("joint estimate has two matrices");
    let b1 = debias_with_subgradient(fit.beta1.view(), fit.k1.view(), debias.m1.view());
    let b2 = debias_with_subgradient(fit.beta2.view(), fit.k2.view(), m2.view());
    let var = crate::debias::variance_difference(&debias, &cov1, &cov2, noise, d1.n, d2.n)?;
    Ok(NodeDetail {
        node: v,
        difference: DebiasedDifference::new(b1 - b2, var)?,
        beta_hat1: fit.beta1,
        beta_hat2: fit.beta2,
        noise,
        lambdas: (params.lambda1, params.lambda2),
        multipliers: (k1, k2),
        debias,
    })
}

pub fn nodewise(
    x1: &SampleMatrix,
    x2: &SampleMatrix,
    method: Method,
    cfg: &NodewiseConfig,
) -> Result<NodewiseResult> {
    check_pair(x1, x2, cfg)?;
    let d1 = Prepared::new(x1.data(), cfg.cv_folds, cfg.seed)?;
    let d2 = Prepared::new(x2.data(), cfg.cv_folds, cfg.seed)?;
    let nodes = par::try_map_indexed(x1.p(), |v| {
        match method {
            Method::DebiasedLasso => lasso_node(&d1, &d2, v, cfg),
            Method::DebiasedFused => fused_node(&d1, &d2, v, cfg),
        }
        .map_err(|e| e.at_node(v))
    })?;
    let b = stack_rows(nodes.iter().map(|d| d.difference.z.view()));
    Ok(NodewiseResult {
        stats: TestStatMatrix::from_z(b, method)?,
        nodes,
    })
}

pub fn nodewise_lasso_stats(
    x1: &SampleMatrix,
    x2: &SampleMatrix,
    cfg: &NodewiseConfig,
) -> Result<TestStatMatrix> {
    Ok(nodewise(x1, x2, Method::DebiasedLasso, cfg)?.stats)
}

pub fn nodewise_fused_stats(
    x1: &SampleMatrix,
    x2: &SampleMatrix,
    cfg: &NodewiseConfig,
) -> Result<TestStatMatrix> {
    Ok(nodewise(x1, x2, Method::DebiasedFused, cfg)?.stats)
}
