//! Simulated nodewise problems and direct optimality checks.
#![allow(dead_code)]

use diffggm::debias::{
    bias_bounds, estimate_m_joint, estimate_m_single, BoundsConfig, DebiasMatrices,
};
use diffggm::fused::{solve_fused, FusedFit};
use diffggm::ggm::{Method, NodewiseResult};
use diffggm::lasso::solve_lasso;
use diffggm::simulate::{generate_ggm_pair, node_truth_standardized, sample_dataset};
use diffggm::{EmpiricalCovariance, RegularizationParams, SampleMatrix, SolverConfig};
use ndarray::{Array1, Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Instance {
    pub x1: SampleMatrix,
    pub y1: Array1<f64>,
    pub x2: SampleMatrix,
    pub y2: Array1<f64>,
    pub beta1: Array1<f64>,
    pub beta2: Array1<f64>,
}

/// One nodewise regression problem drawn from a simulated model pair.
pub fn instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = rng.random_range(6..12);
    let pair = generate_ggm_pair(p, 0.3, 0.1, seed).unwrap();
    let (n1, n2) = (rng.random_range(60..200), rng.random_range(20..80));
    let (d1, d2) = sample_dataset(&pair, n1, n2, seed ^ 0xabc).unwrap();
    let v = rng.random_range(0..p);
    let truth = node_truth_standardized(&pair, v).unwrap();
    Instance {
        y1: d1.column(v).to_owned(),
        x1: d1.without_column(v),
        y2: d2.column(v).to_owned(),
        x2: d2.without_column(v),
        beta1: truth.beta1,
        beta2: truth.beta2,
    }
}

/// Penalties around the usual `sqrt(log p / n₂)` scale.
pub fn penalties<R: Rng>(rng: &mut R, inst: &Instance) -> (f64, f64) {
    let scale = ((inst.x1.p() + 1) as f64).ln().sqrt() / (inst.x2.n() as f64).sqrt();
    (
        rng.random_range(0.1..3.0) * scale,
        rng.random_range(0.0..3.0) * scale,
    )
}

/// `Xᵀ(y − Xβ)/n`.
pub fn residual_correlation(
    x: &SampleMatrix,
    y: &Array1<f64>,
    beta: ArrayView1<f64>,
) -> Array1<f64> {
    let r = y - &x.data().dot(&beta);
    x.data().t().dot(&r) / x.n() as f64
}

pub fn l1(v: ArrayView1<f64>) -> f64 {
    v.iter().map(|a| a.abs()).sum()
}

/// Lasso stationarity: `|k_j| ≤ λ`, with equality and matching sign on the support.
pub fn lasso_stationary(beta: ArrayView1<f64>, k: ArrayView1<f64>, lambda: f64, tol: f64) -> bool {
    beta.iter().zip(k.iter()).all(|(b, kj)| {
        kj.abs() <= lambda + tol && (*b == 0.0 || (kj - lambda * b.signum()).abs() <= tol)
    })
}

/// Range of subgradients of `|t|`.
fn sign_set(t: f64, tie: f64) -> (f64, f64) {
    if t > tie {
        (1.0, 1.0)
    } else if t < -tie {
        (-1.0, -1.0)
    } else {
        (-1.0, 1.0)
    }
}

/// Whether some `s_d ∈ ∂|a − b|` makes both stationarity equations
/// `k₁ = λ₁s_a + λ₂s_d`, `k₂ = λ₁s_b − λ₂s_d` hold within `tol`.
pub fn fused_stationary(a: f64, b: f64, k1: f64, k2: f64, l1: f64, l2: f64, tol: f64) -> bool {
    let (alo, ahi) = sign_set(a, 0.0);
    let (blo, bhi) = sign_set(b, 0.0);
    let (mut lo, mut hi) = sign_set(a - b, 1e-12);
    if l2 == 0.0 {
        return k1 >= l1 * alo - tol
            && k1 <= l1 * ahi + tol
            && k2 >= l1 * blo - tol
            && k2 <= l1 * bhi + tol;
    }
    let slack = tol / l2;
    lo = lo
        .max((k1 - l1 * ahi) / l2 - slack)
        .max((l1 * blo - k2) / l2 - slack);
    hi = hi
        .min((k1 - l1 * alo) / l2 + slack)
        .min((l1 * bhi - k2) / l2 + slack);
    lo <= hi
}

pub fn fit_is_stationary(inst: &Instance, fit: &FusedFit, l1: f64, l2: f64, tol: f64) -> bool {
    let k1 = residual_correlation(&inst.x1, &inst.y1, fit.beta1.view());
    let k2 = residual_correlation(&inst.x2, &inst.y2, fit.beta2.view());
    (0..k1.len()).all(|j| fused_stationary(fit.beta1[j], fit.beta2[j], k1[j], k2[j], l1, l2, tol))
}

/// `lhs − rhs` of the basic inequality
/// `Σⱼ‖Xⱼ(β̂ⱼ − βⱼ)‖²/nⱼ + 2λ₁‖β̂‖₁ + 2λ₂‖β̂₁ − β̂₂‖₁ ≤ Σⱼ2εⱼᵀXⱼ(β̂ⱼ − βⱼ)/nⱼ + 2λ₁‖β‖₁ + 2λ₂‖β₁ − β₂‖₁`,
/// which any minimizer satisfies against the true coefficients.
pub fn basic_inequality_excess(inst: &Instance, fit: &FusedFit, l1: f64, l2: f64) -> f64 {
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for (x, y, hat, truth) in [
        (&inst.x1, &inst.y1, &fit.beta1, &inst.beta1),
        (&inst.x2, &inst.y2, &fit.beta2, &inst.beta2),
    ] {
        let n = x.n() as f64;
        let noise = y - &x.data().dot(truth);
        let fitted_gap = x.data().dot(&(hat - truth));
        lhs += fitted_gap.dot(&fitted_gap) / n;
        rhs += 2.0 * noise.dot(&fitted_gap) / n;
    }
    let pen = |b1: &Array1<f64>, b2: &Array1<f64>| {
        2.0 * l1 * (l1_norm(b1) + l1_norm(b2)) + 2.0 * l2 * l1_norm(&(b1 - b2))
    };
    lhs += pen(&fit.beta1, &fit.beta2);
    rhs += pen(&inst.beta1, &inst.beta2);
    lhs - rhs
}

fn l1_norm(v: &Array1<f64>) -> f64 {
    l1(v.view())
}

pub fn fused_fit(inst: &Instance, l1: f64, l2: f64) -> FusedFit {
    solve_fused(
        &inst.x1,
        inst.y1.view(),
        &inst.x2,
        inst.y2.view(),
        &RegularizationParams::new(l1, l2),
        &SolverConfig::default(),
    )
    .unwrap()
}

/// Seeds among `0..cases` whose lasso fits (both datasets) fail stationarity.
pub fn lasso_kkt_failures(cases: u64) -> Vec<u64> {
    (0..cases)
        .filter(|&seed| {
            let inst = instance(seed);
            let lambda = 0.05 + 0.01 * (seed % 20) as f64;
            let bad = [(&inst.x1, &inst.y1), (&inst.x2, &inst.y2)]
                .into_iter()
                .any(|(x, y)| {
                    let fit = solve_lasso(x, y.view(), lambda, &SolverConfig::default()).unwrap();
                    let k = residual_correlation(x, y, fit.beta.view());
                    !lasso_stationary(fit.beta.view(), k.view(), lambda, 1e-8)
                });
            bad
        })
        .collect()
}

pub fn fused_kkt_failures(cases: u64) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    (0..cases)
        .filter(|&seed| {
            let inst = instance(seed);
            let (l1, l2) = penalties(&mut rng, &inst);
            !fit_is_stationary(&inst, &fused_fit(&inst, l1, l2), l1, l2, 1e-8)
        })
        .collect()
}

/// Seeds where the basic inequality is violated by more than `1e-10`.
pub fn basic_inequality_failures(cases: u64) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    (0..cases)
        .filter(|seed| {
            let inst = instance(1000 + seed);
            let (l1, l2) = penalties(&mut rng, &inst);
            basic_inequality_excess(&inst, &fused_fit(&inst, l1, l2), l1, l2) > 1e-10
        })
        .collect()
}

fn within(v: f64, budget: f64) -> bool {
    v.abs() <= budget * (1.0 + 1e-6) + 1e-7
}

/// `‖MΣ̂ − I‖∞ ≤ μ`, entry by entry.
pub fn single_ok(m: &Array2<f64>, s: &EmpiricalCovariance, mu: f64) -> bool {
    m.dot(&s.matrix())
        .indexed_iter()
        .all(|((i, j), v)| within(v - if i == j { 1.0 } else { 0.0 }, mu))
}

pub fn joint_ok(d: &DebiasMatrices, s1: &EmpiricalCovariance, s2: &EmpiricalCovariance) -> bool {
    let Some(m2) = d.m2.as_ref() else {
        return false;
    };
    let a = d.m1.dot(&s1.matrix());
    let b = m2.dot(&s2.matrix());
    a.indexed_iter().all(|((i, j), v)| {
        let two = if i == j { 2.0 } else { 0.0 };
        within(v + b[[i, j]] - two, d.mu1) && within(v - b[[i, j]], d.mu2)
    })
}

/// Seeds whose single or joint debiasing matrices break their constraints.
pub fn debias_failures(cases: u64) -> Vec<u64> {
    let qp = SolverConfig::qp();
    let bounds = BoundsConfig::default();
    (0..cases)
        .filter(|seed| {
            let inst = instance(2000 + seed);
            let (s1, s2) = (inst.x1.covariance(), inst.x2.covariance());
            let single = estimate_m_single(&s2, 0.2, &qp).unwrap();
            let (mu1, mu2) = bias_bounds(0.3, 0.2, inst.x2.n(), &bounds).unwrap();
            let joint =
                estimate_m_joint(&s1, &s2, inst.x1.n(), inst.x2.n(), mu1, mu2, &qp).unwrap();
            !single_ok(&single.m1, &s2, single.mu1) || !joint_ok(&joint, &s1, &s2)
        })
        .collect()
}

/// Nodes of a nodewise run whose debiasing matrices or penalized fits fail
/// their checks.
pub fn nodewise_failures(
    x1: &SampleMatrix,
    x2: &SampleMatrix,
    method: Method,
    result: &NodewiseResult,
) -> Vec<usize> {
    result
        .nodes
        .iter()
        .filter(|d| {
            let v = d.node;
            let (z1, z2) = (x1.without_column(v), x2.without_column(v));
            let (y1, y2) = (x1.column(v).to_owned(), x2.column(v).to_owned());
            let (s1, s2) = (z1.covariance(), z2.covariance());
            let k1 = residual_correlation(&z1, &y1, d.beta_hat1.view());
            let k2 = residual_correlation(&z2, &y2, d.beta_hat2.view());
            let (l1, l2) = d.lambdas;
            let ok = match method {
                Method::DebiasedLasso => {
                    let m2 = d.debias.m2.as_ref();
                    m2.is_some_and(|m2| {
                        single_ok(&d.debias.m1, &s1, d.debias.mu1)
                            && single_ok(m2, &s2, d.debias.mu2)
                    }) && lasso_stationary(d.beta_hat1.view(), k1.view(), l1, 1e-6)
                        && lasso_stationary(d.beta_hat2.view(), k2.view(), l2, 1e-6)
                }
                Method::DebiasedFused => {
                    joint_ok(&d.debias, &s1, &s2)
                        && (0..k1.len()).all(|j| {
                            fused_stationary(
                                d.beta_hat1[j],
                                d.beta_hat2[j],
                                k1[j],
                                k2[j],
                                l1,
                                l2,
                                1e-6,
                            )
                        })
                }
            };
            !ok
        })
        .map(|d| d.node)
        .collect()
}
