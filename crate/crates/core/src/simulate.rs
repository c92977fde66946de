//! Ground-truth pairs of sparse precision matrices and Gaussian sampling.
//!
//! A base support is drawn Erdős–Rényi style, weights are uniform in
//! `±[0.2, 0.6]`, and the diagonal is the absolute row sum plus `0.5`. The two
//! models are the base with two disjoint edge subsets removed, one per model.
//! Removing edges keeps diagonal dominance, so both stay positive definite.

use ndarray::{Array1, Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::Cholesky;
use crate::types::{standardize, SampleMatrix};

pub const WEIGHT_RANGE: (f64, f64) = (0.2, 0.6);
pub const DIAGONAL_MARGIN: f64 = 0.5;

pub type Edge = (usize, usize);

#[derive(Clone, Debug, PartialEq)]
pub struct GgmPair {
    pub theta1: Array2<f64>,
    pub theta2: Array2<f64>,
    /// Off-diagonal supports, `i < j`, sorted.
    pub s1: Vec<Edge>,
    pub s2: Vec<Edge>,
    pub sd: Vec<Edge>,
    pub seed: u64,
}

impl GgmPair {
    pub fn p(&self) -> usize {
        self.theta1.nrows()
    }

    /// `true` at `(i, j)` and `(j, i)` for every edge in the difference set.
    pub fn difference_mask(&self) -> Array2<bool> {
        let p = self.p();
        let mut mask = Array2::from_elem((p, p), false);
        for &(i, j) in &self.sd {
            mask[[i, j]] = true;
            mask[[j, i]] = true;
        }
        mask
    }

    /// Builds a pair from two precision matrices, deriving the edge sets.
    pub fn from_precisions(theta1: Array2<f64>, theta2: Array2<f64>, seed: u64) -> Result<Self> {
        let p = theta1.nrows();
        if theta1.dim() != (p, p) || theta2.dim() != (p, p) {
            return Err(Error::DimensionMismatch(
                "precision matrices must be square and equal size".into(),
            ));
        }
        Cholesky::factor(theta1.view())?;
        Cholesky::factor(theta2.view())?;
        let support = |t: &Array2<f64>| -> Vec<Edge> {
            upper_pairs(p)
                .into_iter()
                .filter(|&(i, j)| t[[i, j]] != 0.0)
                .collect()
        };
        let sd = upper_pairs(p)
            .into_iter()
            .filter(|&(i, j)| theta1[[i, j]] != theta2[[i, j]])
            .collect();
        Ok(GgmPair {
            s1: support(&theta1),
            s2: support(&theta2),
            sd,
            theta1,
            theta2,
            seed,
        })
    }
}

fn upper_pairs(p: usize) -> Vec<Edge> {
    (0..p)
        .flat_map(|i| (i + 1..p).map(move |j| (i, j)))
        .collect()
}

pub fn edge_count(p: usize) -> usize {
    p * (p.saturating_sub(1)) / 2
}

pub fn generate_ggm_pair(
    p: usize,
    sparsity: f64,
    diff_sparsity: f64,
    seed: u64,
) -> Result<GgmPair> {
    if p < 4 {
        return Err(Error::InvalidParameter(format!("need p >= 4, got {p}")));
    }
    if !(sparsity > 0.0 && sparsity < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "sparsity must be in (0,1), got {sparsity}"
        )));
    }
    if !(diff_sparsity >= 0.0 && diff_sparsity <= sparsity) {
        return Err(Error::InvalidParameter(format!(
            "difference sparsity must be in [0, sparsity], got {diff_sparsity}"
        )));
    }
    let total = edge_count(p);
    let per_model = (sparsity * total as f64).round() as usize;
    let removed_each = (diff_sparsity * total as f64 / 2.0).round() as usize;
    if diff_sparsity > 0.0 && removed_each == 0 {
        return Err(Error::InfeasibleTargets(format!(
            "difference sparsity {diff_sparsity} rounds to no edges at p = {p}"
        )));
    }
    let base = per_model + removed_each;
    if base > total || 2 * removed_each > base || per_model == 0 {
        return Err(Error::InfeasibleTargets(format!(
            "cannot place {base} base edges ({removed_each} removed per model) among {total}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = upper_pairs(p);
    pairs.shuffle(&mut rng);
    let mut chosen: Vec<Edge> = pairs[..base].to_vec();

    let mut theta = Array2::<f64>::zeros((p, p));
    for &(i, j) in &chosen {
        let mag = rng.random_range(WEIGHT_RANGE.0..=WEIGHT_RANGE.1);
        let w = if rng.random_bool(0.5) { mag } else { -mag };
        theta[[i, j]] = w;
        theta[[j, i]] = w;
    }
    for i in 0..p {
        let row: f64 = theta.row(i).iter().map(|v| v.abs()).sum();
        theta[[i, i]] = row + DIAGONAL_MARGIN;
    }

    chosen.shuffle(&mut rng);
    let mut theta1 = theta.clone();
    let mut theta2 = theta;
    for &(i, j) in &chosen[..removed_each] {
        theta1[[i, j]] = 0.0;
        theta1[[j, i]] = 0.0;
    }
    for &(i, j) in &chosen[removed_each..2 * removed_each] {
        theta2[[i, j]] = 0.0;
        theta2[[j, i]] = 0.0;
    }
    GgmPair::from_precisions(theta1, theta2, seed)
}

/// `n` draws from `N(0, Θ⁻¹)`: with `Θ = LLᵀ`, `x = L⁻ᵀz` has covariance `Θ⁻¹`.
pub fn sample_gaussian<R: Rng>(
    theta: ArrayView2<f64>,
    n: usize,
    rng: &mut R,
) -> Result<Array2<f64>> {
    let chol = Cholesky::factor(theta)?;
    let p = chol.dim();
    let mut out = Array2::zeros((n, p));
    let mut z = vec![0.0; p];
    for mut row in out.rows_mut() {
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        chol.solve_upper_in_place(&mut z);
        row.iter_mut().zip(&z).for_each(|(r, v)| *r = *v);
    }
    Ok(out)
}

/// Standardized samples of sizes `n1` and `n2` from the two models.
pub fn sample_dataset(
    truth: &GgmPair,
    n1: usize,
    n2: usize,
    seed: u64,
) -> Result<(SampleMatrix, SampleMatrix)> {
    if n1 < 2 || n2 < 2 {
        return Err(Error::InvalidParameter(format!(
            "sample sizes must be >= 2, got {n1}, {n2}"
        )));
    }
    let draw = |theta: &Array2<f64>, n: usize, stream: u64| -> Result<SampleMatrix> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        standardize(sample_gaussian(theta.view(), n, &mut rng)?.view())
    };
    Ok((draw(&truth.theta1, n1, 1)?, draw(&truth.theta2, n2, 2)?))
}

/// Population regression of node `v` on the others in both models.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeTruth {
    pub beta1: Array1<f64>,
    pub beta2: Array1<f64>,
    pub sigma1: f64,
    pub sigma2: f64,
}

fn regression(theta: &Array2<f64>, v: usize) -> (Array1<f64>, f64) {
    let d = theta[[v, v]];
    let beta = (0..theta.nrows())
        .filter(|&j| j != v)
        .map(|j| -theta[[j, v]] / d)
        .collect();
    (beta, (1.0 / d).sqrt())
}

/// `β = −Θ_{v^c,v}/Θ_vv`, `σ² = 1/Θ_vv` in the raw coordinates.
pub fn node_truth(truth: &GgmPair, v: usize) -> NodeTruth {
    let (beta1, sigma1) = regression(&truth.theta1, v);
    let (beta2, sigma2) = regression(&truth.theta2, v);
    NodeTruth {
        beta1,
        beta2,
        sigma1,
        sigma2,
    }
}

/// Population standard deviations `sqrt(diag(Θ⁻¹))`.
pub fn population_sd(theta: ArrayView2<f64>) -> Result<Array1<f64>> {
    let inv = Cholesky::factor(theta)?.inverse();
    Ok(inv.diag().mapv(f64::sqrt))
}

/// Truth after every variable is scaled to unit population variance:
/// `β̃ⱼ = βⱼ·sdⱼ/sd_v` and `σ̃ = σ/sd_v`.
#[derive(Clone, Debug)]
pub struct StandardizedTruth {
    sd1: Array1<f64>,
    sd2: Array1<f64>,
}

impl StandardizedTruth {
    pub fn new(truth: &GgmPair) -> Result<Self> {
        Ok(StandardizedTruth {
            sd1: population_sd(truth.theta1.view())?,
            sd2: population_sd(truth.theta2.view())?,
        })
    }

    pub fn node(&self, truth: &GgmPair, v: usize) -> NodeTruth {
        let raw = node_truth(truth, v);
        let rescale = |beta: Array1<f64>, sd: &Array1<f64>| -> Array1<f64> {
            let others = (0..sd.len()).filter(|&j| j != v);
            beta.iter()
                .zip(others)
                .map(|(b, j)| b * sd[j] / sd[v])
                .collect()
        };
        NodeTruth {
            beta1: rescale(raw.beta1, &self.sd1),
            beta2: rescale(raw.beta2, &self.sd2),
            sigma1: raw.sigma1 / self.sd1[v],
            sigma2: raw.sigma2 / self.sd2[v],
        }
    }
}

pub fn node_truth_standardized(truth: &GgmPair, v: usize) -> Result<NodeTruth> {
    Ok(StandardizedTruth::new(truth)?.node(truth, v))
}
