//! Scoring against simulated truth, Monte-Carlo drivers, null calibration and
//! permutation p-values.

use ndarray::{concatenate, Array2, Axis};
use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::debias::empirical_delta_parts;
use crate::error::{Error, Result};
use crate::ggm::{
    column_of, nodewise, other_node, Method, NodewiseConfig, NodewiseResult, TestStatMatrix,
};
use crate::linalg::drop_index;
use crate::par;
use crate::simulate::{generate_ggm_pair, sample_dataset, GgmPair, StandardizedTruth};
use crate::types::{standardize, EmpiricalCovariance, SampleMatrix};

/// Independent seed for task `index`, derived from `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index + 1);
    rng.next_u64()
}

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Rejection counts for one statistics matrix at an uncorrected level.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeCounts {
    pub null_total: usize,
    pub null_rejected: usize,
    pub diff_total: usize,
    pub diff_rejected: usize,
}

impl EdgeCounts {
    pub fn fp_rate(&self) -> f64 {
        ratio(self.null_rejected, self.null_total)
    }

    pub fn power(&self) -> f64 {
        ratio(self.diff_rejected, self.diff_total)
    }

    fn add(&mut self, other: &EdgeCounts) {
        self.null_total += other.null_total;
        self.null_rejected += other.null_rejected;
        self.diff_total += other.diff_total;
        self.diff_rejected += other.diff_rejected;
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

pub fn edge_counts(stats: &TestStatMatrix, truth: &GgmPair, alpha: f64) -> Result<EdgeCounts> {
    let p = truth.p();
    if stats.pvals.dim() != (p, p - 1) {
        return Err(Error::DimensionMismatch(format!(
            "statistics {:?} vs {p} nodes",
            stats.pvals.dim()
        )));
    }
    let mask = truth.difference_mask();
    let mut c = EdgeCounts::default();
    for ((v, col), &pv) in stats.pvals.indexed_iter() {
        let reject = pv < alpha;
        if mask[[v, other_node(v, col)]] {
            c.diff_total += 1;
            c.diff_rejected += reject as usize;
        } else {
            c.null_total += 1;
            c.null_rejected += reject as usize;
        }
    }
    Ok(c)
}

/// `(fp_rate, power)` with every entry treated as a separate, uncorrected test.
pub fn edge_metrics(stats: &TestStatMatrix, truth: &GgmPair, alpha: f64) -> Result<(f64, f64)> {
    let c = edge_counts(stats, truth, alpha)?;
    Ok((c.fp_rate(), c.power()))
}

/// Sums for interval coverage and length on the difference support and its
/// complement.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CoverageCounts {
    pub s_total: usize,
    pub s_covered: usize,
    pub s_length: f64,
    pub sdc_total: usize,
    pub sdc_covered: usize,
    pub sdc_length: f64,
}

impl CoverageCounts {
    fn add(&mut self, o: &CoverageCounts) {
        self.s_total += o.s_total;
        self.s_covered += o.s_covered;
        self.s_length += o.s_length;
        self.sdc_total += o.sdc_total;
        self.sdc_covered += o.sdc_covered;
        self.sdc_length += o.sdc_length;
    }

    /// `(coverage_S, coverage_Sdc, len_S, len_Sdc)`.
    pub fn summary(&self) -> (f64, f64, f64, f64) {
        let mean = |s: f64, n: usize| if n == 0 { 0.0 } else { s / n as f64 };
        (
            ratio(self.s_covered, self.s_total),
            ratio(self.sdc_covered, self.sdc_total),
            mean(self.s_length, self.s_total),
            mean(self.sdc_length, self.sdc_total),
        )
    }
}

/// True difference of standardized regressions, laid out like the statistics.
pub fn true_difference(truth: &GgmPair) -> Result<Array2<f64>> {
    let p = truth.p();
    let st = StandardizedTruth::new(truth)?;
    let mut out = Array2::zeros((p, p - 1));
    for v in 0..p {
        let t = st.node(truth, v);
        out.row_mut(v).assign(&(&t.beta1 - &t.beta2));
    }
    Ok(out)
}

/// Intervals `beta_d ± z₁₋α/₂·sigma_d` scored against `true_diff`.
pub fn coverage_counts(
    beta_d: &Array2<f64>,
    sigma_d: &Array2<f64>,
    true_diff: &Array2<f64>,
    mask: &Array2<bool>,
    alpha: f64,
) -> Result<CoverageCounts> {
    if beta_d.dim() != sigma_d.dim() || beta_d.dim() != true_diff.dim() {
        return Err(Error::DimensionMismatch(
            "estimates, errors and truth must agree".into(),
        ));
    }
    let q = standard_normal().inverse_cdf(1.0 - alpha / 2.0);
    let mut c = CoverageCounts::default();
    for ((v, col), &b) in beta_d.indexed_iter() {
        let half = q * sigma_d[[v, col]];
        let covered = (b - true_diff[[v, col]]).abs() <= half;
        if mask[[v, other_node(v, col)]] {
            c.s_total += 1;
            c.s_covered += covered as usize;
            c.s_length += 2.0 * half;
        } else {
            c.sdc_total += 1;
            c.sdc_covered += covered as usize;
            c.sdc_length += 2.0 * half;
        }
    }
    Ok(c)
}

/// `(coverage_S, coverage_Sdc, len_S, len_Sdc)` for one nodewise result.
pub fn coverage_length(
    result: &NodewiseResult,
    truth: &GgmPair,
    alpha: f64,
) -> Result<(f64, f64, f64, f64)> {
    let c = coverage_counts(
        &result.beta_d(),
        &result.sigma_d(),
        &true_difference(truth)?,
        &truth.difference_mask(),
        alpha,
    )?;
    Ok(c.summary())
}

/// Simulation settings for one Monte-Carlo scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub p: usize,
    pub n1: usize,
    pub n2: usize,
    pub sparsity: f64,
    pub diff_sparsity: f64,
    pub alpha: f64,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            p: 75,
            n1: 800,
            n2: 60,
            sparsity: 0.19,
            diff_sparsity: 0.03,
            alpha: 0.05,
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must be in (0,1), got {}",
                self.alpha
            )));
        }
        if self.n1 < 2 || self.n2 < 2 {
            return Err(Error::InvalidParameter("sample sizes must be >= 2".into()));
        }
        Ok(())
    }

    /// Graph and data for replicate seed `seed`.
    pub fn draw(&self, seed: u64) -> Result<(GgmPair, SampleMatrix, SampleMatrix)> {
        let pair = generate_ggm_pair(
            self.p,
            self.sparsity,
            self.diff_sparsity,
            derive_seed(seed, 0),
        )?;
        let (x1, x2) = sample_dataset(&pair, self.n1, self.n2, derive_seed(seed, 1))?;
        Ok((pair, x1, x2))
    }
}

/// Per-replicate outcome for one method.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub method: Method,
    pub edges: EdgeCounts,
    pub coverage: CoverageCounts,
    pub max_delta: f64,
    pub relaxations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: Method,
    pub fp_rate: f64,
    pub power: f64,
    pub coverage_s: f64,
    pub coverage_sdc: f64,
    pub len_s: f64,
    pub len_sdc: f64,
    pub replicates: usize,
    /// Standard error of the per-replicate power.
    pub power_se: f64,
    pub fp_se: f64,
}

impl EvalReport {
    pub fn from_outcomes(method: Method, outcomes: &[ReplicateOutcome]) -> Result<Self> {
        let mine: Vec<&ReplicateOutcome> = outcomes.iter().filter(|o| o.method == method).collect();
        if mine.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut edges = EdgeCounts::default();
        let mut cov = CoverageCounts::default();
        for o in &mine {
            edges.add(&o.edges);
            cov.add(&o.coverage);
        }
        let (coverage_s, coverage_sdc, len_s, len_sdc) = cov.summary();
        let powers: Vec<f64> = mine.iter().map(|o| o.edges.power()).collect();
        let fps: Vec<f64> = mine.iter().map(|o| o.edges.fp_rate()).collect();
        Ok(EvalReport {
            method,
            fp_rate: edges.fp_rate(),
            power: edges.power(),
            coverage_s,
            coverage_sdc,
            len_s,
            len_sdc,
            replicates: mine.len(),
            power_se: standard_error(&powers),
            fp_se: standard_error(&fps),
        })
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len().max(1) as f64
}

pub fn standard_error(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    (var / xs.len() as f64).sqrt()
}

/// `‖Δ‖∞` for each node, against the standardized population truth.
pub fn bias_delta(
    x1: &SampleMatrix,
    x2: &SampleMatrix,
    result: &NodewiseResult,
    truth: &GgmPair,
) -> Result<Vec<f64>> {
    let st = StandardizedTruth::new(truth)?;
    let (c1, c2) = (x1.covariance(), x2.covariance());
    result
        .nodes
        .iter()
        .map(|d| {
            let v = d.node;
            let t = st.node(truth, v);
            let s1 = EmpiricalCovariance::from_matrix(drop_index(c1.matrix(), v), x1.n())?;
            let s2 = EmpiricalCovariance::from_matrix(drop_index(c2.matrix(), v), x2.n())?;
            empirical_delta_parts(
                d.beta_hat1.view(),
                d.beta_hat2.view(),
                &d.debias,
                &s1,
                &s2,
                t.beta1.view(),
                t.beta2.view(),
            )
        })
        .collect()
}

/// Runs every method on one simulated replicate.
pub fn run_replicate(
    scenario: &Scenario,
    methods: &[Method],
    cfg: &NodewiseConfig,
    seed: u64,
) -> Result<Vec<ReplicateOutcome>> {
    let (pair, x1, x2) = scenario.draw(seed)?;
    let true_diff = true_difference(&pair)?;
    let mask = pair.difference_mask();
    methods
        .iter()
        .map(|&m| {
            let r = nodewise(&x1, &x2, m, cfg)?;
            let deltas = bias_delta(&x1, &x2, &r, &pair)?;
            Ok(ReplicateOutcome {
                method: m,
                edges: edge_counts(&r.stats, &pair, scenario.alpha)?,
                coverage: coverage_counts(
                    &r.beta_d(),
                    &r.sigma_d(),
                    &true_diff,
                    &mask,
                    scenario.alpha,
                )?,
                max_delta: deltas.into_iter().fold(0.0, f64::max),
                relaxations: r.nodes.iter().map(|d| d.debias.relaxations).sum(),
            })
        })
        .collect()
}

/// All replicate outcomes, replicate-major, in replicate order.
pub fn run_replicates(
    scenario: &Scenario,
    methods: &[Method],
    replicates: usize,
    cfg: &NodewiseConfig,
    seed: u64,
) -> Result<Vec<Vec<ReplicateOutcome>>> {
    scenario.validate()?;
    if replicates == 0 {
        return Err(Error::EmptyInput);
    }
    par::try_map_indexed(replicates, |r| {
        run_replicate(scenario, methods, cfg, derive_seed(seed, r as u64))
            .map_err(|e| e.at_replicate(r))
    })
}

/// Summary report over replicates, one row per method.
pub fn benchmark(
    scenario: &Scenario,
    methods: &[Method],
    replicates: usize,
    cfg: &NodewiseConfig,
    seed: u64,
) -> Result<Vec<EvalReport>> {
    let all: Vec<ReplicateOutcome> = run_replicates(scenario, methods, replicates, cfg, seed)?
        .into_iter()
        .flatten()
        .collect();
    methods
        .iter()
        .map(|&m| EvalReport::from_outcomes(m, &all))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerPoint {
    pub n2: usize,
    pub method: Method,
    pub power: f64,
    pub power_se: f64,
    pub fp_rate: f64,
    pub replicates: usize,
}

/// Mean power over replicates for each `n₂`. Replicate `r` uses the same graph
/// at every grid point.
pub fn power_curve(
    scenario: &Scenario,
    n2_grid: &[usize],
    methods: &[Method],
    replicates: usize,
    cfg: &NodewiseConfig,
    seed: u64,
) -> Result<Vec<PowerPoint>> {
    if n2_grid.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut out = Vec::new();
    for &n2 in n2_grid {
        let scn = Scenario {
            n2,
            ..scenario.clone()
        };
        let runs = run_replicates(&scn, methods, replicates, cfg, seed)?;
        for &m in methods {
            let per: Vec<&ReplicateOutcome> =
                runs.iter().flatten().filter(|o| o.method == m).collect();
            let powers: Vec<f64> = per.iter().map(|o| o.edges.power()).collect();
            let fps: Vec<f64> = per.iter().map(|o| o.edges.fp_rate()).collect();
            out.push(PowerPoint {
                n2,
                method: m,
                power: mean(&powers),
                power_se: standard_error(&powers),
                fp_rate: mean(&fps),
                replicates: per.len(),
            });
        }
    }
    Ok(out)
}

/// Empirical summary of a pool of z-statistics against `N(0, 1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSummary {
    pub count: usize,
    /// Fraction with `|z| > 1.96`.
    pub tail_fraction: f64,
    pub ks_distance: f64,
    pub mean: f64,
    pub variance: f64,
}

pub fn calibration_summary(z: &[f64]) -> Result<CalibrationSummary> {
    if z.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = z.len() as f64;
    let mut sorted = z.to_vec();
    sorted.sort_by(f64::total_cmp);
    let norm = standard_normal();
    let ks = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = norm.cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    let m = mean(z);
    Ok(CalibrationSummary {
        count: z.len(),
        tail_fraction: z.iter().filter(|x| x.abs() > 1.96).count() as f64 / n,
        ks_distance: ks,
        mean: m,
        variance: z.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n,
    })
}

/// Pools the z-statistics of `replicates` null runs (no difference edges).
pub fn null_calibration(
    scenario: &Scenario,
    method: Method,
    replicates: usize,
    cfg: &NodewiseConfig,
    seed: u64,
) -> Result<CalibrationSummary> {
    let scn = Scenario {
        diff_sparsity: 0.0,
        ..scenario.clone()
    };
    scn.validate()?;
    if replicates == 0 {
        return Err(Error::EmptyInput);
    }
    let pools = par::try_map_indexed(replicates, |r| {
        let (_, x1, x2) = scn
            .draw(derive_seed(seed, r as u64))
            .map_err(|e| e.at_replicate(r))?;
        let res = nodewise(&x1, &x2, method, cfg).map_err(|e| e.at_replicate(r))?;
        Ok::<_, Error>(res.stats.b.into_iter().collect::<Vec<f64>>())
    })?;
    calibration_summary(&pools.concat())
}

#[derive(Clone, Debug, PartialEq)]
pub struct PermutationResult {
    pub observed: TestStatMatrix,
    pub pvals: Array2<f64>,
    pub n_perms: usize,
}

/// Add-one permutation p-values `(1 + #{|perm| ≥ |obs|})/(n_perms + 1)` from
/// random re-splits of the pooled rows into groups of the original sizes.
/// Each group is re-standardized after the split.
pub fn permutation_test(
    x1: &SampleMatrix,
    x2: &SampleMatrix,
    method: Method,
    n_perms: usize,
    cfg: &NodewiseConfig,
    seed: u64,
) -> Result<PermutationResult> {
    if n_perms < 19 {
        return Err(Error::InvalidParameter(format!(
            "need at least 19 permutations, got {n_perms}"
        )));
    }
    if x1.p() != x2.p() {
        return Err(Error::DimensionMismatch(
            "groups differ in variable count".into(),
        ));
    }
    let observed = nodewise(x1, x2, method, cfg)?.stats;
    let pooled = concatenate(Axis(0), &[x1.data(), x2.data()]).expect("equal column counts");
    let n1 = x1.n();
    let exceed = par::try_map_indexed(n_perms, |k| {
        let mut idx: Vec<usize> = (0..pooled.nrows()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(seed, k as u64)));
        let a = standardize(pooled.select(Axis(0), &idx[..n1]).view())?;
        let b = standardize(pooled.select(Axis(0), &idx[n1..]).view())?;
        let stats = nodewise(&a, &b, method, cfg)
            .map_err(|e| e.at_replicate(k))?
            .stats;
        Ok::<_, Error>(
            ndarray::Zip::from(&stats.b)
                .and(&observed.b)
                .map_collect(|s, o| (s.abs() >= o.abs()) as usize),
        )
    })?;
    let mut counts = Array2::<usize>::zeros(observed.b.dim());
    for e in &exceed {
        counts += e;
    }
    let pvals = counts.mapv(|c| (1 + c) as f64 / (n_perms + 1) as f64);
    Ok(PermutationResult {
        observed,
        pvals,
        n_perms,
    })
}

/// How parametric and permutation p-values line up on one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PermutationAgreement {
    pub entries: usize,
    /// Fraction of permutation p-values `≤ alpha`.
    pub permutation_rejections: f64,
    pub parametric_rejections: f64,
    /// Fraction of entries whose parametric p-value sits below the
    /// permutation one by more than [`permutation_slack`].
    pub anti_conservative: f64,
}

/// Allowed shortfall of a parametric p-value below a permutation p-value
/// estimated from `n_perms` re-splits: two binomial standard errors plus one
/// grid step.
pub fn permutation_slack(perm_p: f64, n_perms: usize) -> f64 {
    let b = n_perms as f64;
    2.0 * (perm_p * (1.0 - perm_p) / b).sqrt() + 1.0 / (b + 1.0)
}

pub fn permutation_agreement(result: &PermutationResult, alpha: f64) -> PermutationAgreement {
    let n = result.pvals.len();
    let frac = |count: usize| ratio(count, n);
    let pairs = || result.observed.pvals.iter().zip(result.pvals.iter());
    PermutationAgreement {
        entries: n,
        permutation_rejections: frac(result.pvals.iter().filter(|&&p| p <= alpha).count()),
        parametric_rejections: frac(
            result
                .observed
                .pvals
                .iter()
                .filter(|&&p| p <= alpha)
                .count(),
        ),
        anti_conservative: frac(
            pairs()
                .filter(|&(&par, &perm)| par < perm - permutation_slack(perm, result.n_perms))
                .count(),
        ),
    }
}

/// Lets callers index statistics by node pair.
pub fn entry(stats: &Array2<f64>, v: usize, j: usize) -> f64 {
    stats[[v, column_of(v, j)]]
}
