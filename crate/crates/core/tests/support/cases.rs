//! Randomized solver-versus-oracle comparisons, shared by several test targets.
#![allow(dead_code)]

use diffggm::fused::{solve_fused_gram, FusedProblem};
use diffggm::lasso::{solve_lasso_gram, GramProblem};
use diffggm::qp::{solve_qp, BoxConstrainedQp, QpStatus};
use diffggm::{RegularizationParams, SolverConfig};
use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::oracles::{fused_oracle, lasso_oracle, qp_oracle, random_spd, FusedTasks};

fn tight() -> SolverConfig {
    SolverConfig {
        max_iter: 1_000_000,
        tol: 1e-12,
        seed: 0,
    }
}

fn random_task(rng: &mut ChaCha8Rng, p: usize) -> GramProblem {
    let n = p + rng.random_range(2..20);
    let x = Array2::from_shape_fn((n, p), |_| rng.random_range(-1.5..1.5));
    let y = Array1::from_shape_fn(n, |_| rng.random_range(-2.0..2.0));
    GramProblem::from_data(x.view(), y.view()).unwrap()
}

fn to_na_mat(a: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

fn to_na_vec(a: &Array1<f64>) -> DVector<f64> {
    DVector::from_iterator(a.len(), a.iter().copied())
}

fn max_gap(a: &Array1<f64>, b: &DVector<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Largest coordinate gap to the sign-pattern oracle on each of `cases`
/// lasso problems with one to three predictors.
pub fn lasso_gaps(cases: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..cases)
        .map(|case| {
            let p = 1 + case % 3;
            let prob = random_task(&mut rng, p);
            let cmax = prob.xty.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let lambda = rng.random_range(0.02..1.1) * cmax.max(1e-3);
            let fit = solve_lasso_gram(&prob, lambda, &tight(), None).unwrap();
            max_gap(
                &fit.beta,
                &lasso_oracle(&to_na_mat(&prob.gram), &to_na_vec(&prob.xty), lambda),
            )
        })
        .collect()
}

pub fn fused_gaps(cases: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..cases)
        .map(|case| {
            let p = 1 + case % 3;
            let (t1, t2) = (random_task(&mut rng, p), random_task(&mut rng, p));
            let l1 = rng.random_range(0.01..0.4);
            let l2 = rng.random_range(0.0..0.6);
            let tasks = FusedTasks {
                g1: to_na_mat(&t1.gram),
                c1: to_na_vec(&t1.xty),
                g2: to_na_mat(&t2.gram),
                c2: to_na_vec(&t2.xty),
            };
            let fit = solve_fused_gram(
                &FusedProblem::new(t1, t2).unwrap(),
                &RegularizationParams::new(l1, l2),
                &tight(),
                None,
            )
            .unwrap();
            let (w1, w2) = fused_oracle(&tasks, l1, l2);
            max_gap(&fit.beta1, &w1).max(max_gap(&fit.beta2, &w2))
        })
        .collect()
}

pub struct QpComparison {
    /// Gap to the oracle, or infinity when the solver did not report optimality.
    pub gaps: Vec<f64>,
    /// Instances whose optimum is not the unconstrained one.
    pub binding: usize,
}

/// `cases` feasible QPs in one to four variables.
pub fn qp_gaps(cases: usize, seed: u64) -> QpComparison {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = SolverConfig {
        max_iter: 200_000,
        tol: 1e-10,
        seed: 0,
    };
    let mut out = QpComparison {
        gaps: Vec::new(),
        binding: 0,
    };
    while out.gaps.len() < cases {
        let d = 1 + out.gaps.len() % 4;
        let m = rng.random_range(1..=d + 1);
        let q = random_spd(d, &mut rng);
        let a = DMatrix::from_fn(m, d, |_, _| rng.random_range(-1.0..1.0));
        // boxes that usually exclude the origin
        let centre = DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0));
        let half = DVector::from_fn(m, |_, _| rng.random_range(0.0..0.6));
        let (lower, upper) = (&centre - &half, &centre + &half);
        let Some(want) = qp_oracle(&q, &a, &lower, &upper) else {
            continue;
        };
        let to_nd = |v: &DVector<f64>| Array1::from_iter(v.iter().copied());
        let prob = BoxConstrainedQp::new(
            Array2::from_shape_fn((d, d), |(i, j)| q[(i, j)]),
            Array2::from_shape_fn((m, d), |(i, j)| a[(i, j)]),
            to_nd(&lower),
            to_nd(&upper),
        )
        .unwrap();
        let sol = solve_qp(&prob, &cfg).unwrap();
        let gap = if sol.status == QpStatus::Optimal {
            max_gap(&sol.x, &want)
        } else {
            f64::INFINITY
        };
        out.gaps.push(gap);
        out.binding += usize::from(want.norm() > 1e-6);
    }
    out
}
