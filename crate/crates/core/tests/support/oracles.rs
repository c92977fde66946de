//! Brute-force reference solvers for tiny problems.
//!
//! Each oracle enumerates every piece on which the problem is smooth, solves
//! the equality-constrained quadratic on that piece with nalgebra, keeps the
//! candidates that actually lie on their piece and returns the cheapest one.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;

const STRICT: f64 = 1e-12;

/// Minimizes `½xᵀHx − fᵀx` over `x = Bz`.
fn restricted_min(
    h: &DMatrix<f64>,
    f: &DVector<f64>,
    basis: &DMatrix<f64>,
) -> Option<DVector<f64>> {
    if basis.ncols() == 0 {
        return Some(DVector::zeros(h.nrows()));
    }
    let reduced = basis.transpose() * h * basis;
    let rhs = basis.transpose() * f;
    let z = reduced.lu().solve(&rhs)?;
    Some(basis * z)
}

fn sign_ok(value: f64, sign: i8) -> bool {
    match sign {
        0 => value == 0.0,
        1 => value > STRICT,
        _ => value < -STRICT,
    }
}

fn patterns(len: usize) -> impl Iterator<Item = Vec<i8>> {
    (0..3usize.pow(len as u32)).map(move |mut code| {
        (0..len)
            .map(|_| {
                let s = [0i8, 1, -1][code % 3];
                code /= 3;
                s
            })
            .collect()
    })
}

/// `½βᵀGβ − cᵀβ + λ‖β‖₁`, the lasso objective up to a constant.
pub fn lasso_objective(
    g: &DMatrix<f64>,
    c: &DVector<f64>,
    lambda: f64,
    beta: &DVector<f64>,
) -> f64 {
    0.5 * beta.dot(&(g * beta)) - c.dot(beta) + lambda * beta.lp_norm(1)
}

/// Exact lasso solution by enumerating sign patterns. `g` must be positive definite.
pub fn lasso_oracle(g: &DMatrix<f64>, c: &DVector<f64>, lambda: f64) -> DVector<f64> {
    let p = c.len();
    let mut best: Option<(f64, DVector<f64>)> = None;
    for signs in patterns(p) {
        let active: Vec<usize> = (0..p).filter(|&j| signs[j] != 0).collect();
        let basis = DMatrix::from_fn(
            p,
            active.len(),
            |r, k| if r == active[k] { 1.0 } else { 0.0 },
        );
        let shift = DVector::from_fn(p, |j, _| lambda * signs[j] as f64);
        let Some(beta) = restricted_min(g, &(c - shift), &basis) else {
            continue;
        };
        if !(0..p).all(|j| sign_ok(beta[j], signs[j])) {
            continue;
        }
        let obj = lasso_objective(g, c, lambda, &beta);
        if best.as_ref().is_none_or(|(b, _)| obj < *b) {
            best = Some((obj, beta));
        }
    }
    best.expect("the true minimizer lies on some sign pattern")
        .1
}

pub struct FusedTasks {
    pub g1: DMatrix<f64>,
    pub c1: DVector<f64>,
    pub g2: DMatrix<f64>,
    pub c2: DVector<f64>,
}

impl FusedTasks {
    pub fn objective(&self, l1: f64, l2: f64, b1: &DVector<f64>, b2: &DVector<f64>) -> f64 {
        0.5 * b1.dot(&(&self.g1 * b1)) - self.c1.dot(b1) + 0.5 * b2.dot(&(&self.g2 * b2))
            - self.c2.dot(b2)
            + l1 * (b1.lp_norm(1) + b2.lp_norm(1))
            + l2 * (b1 - b2).lp_norm(1)
    }
}

/// Exact multi-task fused lasso solution. Every coordinate carries signs for
/// `β₁ⱼ`, `β₂ⱼ` and `β₁ⱼ − β₂ⱼ`, giving `27ᵖ` pieces.
pub fn fused_oracle(t: &FusedTasks, l1: f64, l2: f64) -> (DVector<f64>, DVector<f64>) {
    let p = t.c1.len();
    let mut h = DMatrix::zeros(2 * p, 2 * p);
    h.view_mut((0, 0), (p, p)).copy_from(&t.g1);
    h.view_mut((p, p), (p, p)).copy_from(&t.g2);
    let mut best: Option<(f64, DVector<f64>, DVector<f64>)> = None;
    'pattern: for signs in patterns(3 * p) {
        let mut cols: Vec<DVector<f64>> = Vec::new();
        let mut lin = DVector::zeros(2 * p);
        for j in 0..p {
            let (sa, sb, sd) = (signs[3 * j], signs[3 * j + 1], signs[3 * j + 2]);
            match (sa, sb, sd) {
                (0, 0, 0) => {}
                (_, _, 0) if sa == sb => {
                    let mut col = DVector::zeros(2 * p);
                    col[j] = 1.0;
                    col[p + j] = 1.0;
                    cols.push(col);
                }
                (_, _, 0) => continue 'pattern,
                _ => {
                    for (on, idx) in [(sa, j), (sb, p + j)] {
                        if on != 0 {
                            let mut col = DVector::zeros(2 * p);
                            col[idx] = 1.0;
                            cols.push(col);
                        }
                    }
                }
            }
            lin[j] = l1 * sa as f64 + l2 * sd as f64;
            lin[p + j] = l1 * sb as f64 - l2 * sd as f64;
        }
        let basis = if cols.is_empty() {
            DMatrix::zeros(2 * p, 0)
        } else {
            DMatrix::from_columns(&cols)
        };
        let f = DVector::from_iterator(2 * p, t.c1.iter().chain(t.c2.iter()).copied()) - lin;
        let Some(x) = restricted_min(&h, &f, &basis) else {
            continue;
        };
        let b1 = x.rows(0, p).into_owned();
        let b2 = x.rows(p, p).into_owned();
        let ok = (0..p).all(|j| {
            sign_ok(b1[j], signs[3 * j])
                && sign_ok(b2[j], signs[3 * j + 1])
                && if signs[3 * j + 2] == 0 {
                    b1[j] == b2[j]
                } else {
                    sign_ok(b1[j] - b2[j], signs[3 * j + 2])
                }
        });
        if !ok {
            continue;
        }
        let obj = t.objective(l1, l2, &b1, &b2);
        if best.as_ref().is_none_or(|(b, _, _)| obj < *b) {
            best = Some((obj, b1, b2));
        }
    }
    let (_, b1, b2) = best.expect("the true minimizer lies on some piece");
    (b1, b2)
}

/// Exact minimizer of `½xᵀQx` subject to `l ≤ Ax ≤ u`, by trying every
/// assignment of constraints to {free, at lower, at upper}.
pub fn qp_oracle(
    q: &DMatrix<f64>,
    a: &DMatrix<f64>,
    lower: &DVector<f64>,
    upper: &DVector<f64>,
) -> Option<DVector<f64>> {
    let (m, d) = (a.nrows(), a.ncols());
    let mut best: Option<(f64, DVector<f64>)> = None;
    for states in patterns(m) {
        let working: Vec<(usize, f64)> = (0..m)
            .filter_map(|i| match states[i] {
                0 => None,
                1 => Some((i, upper[i])),
                _ => Some((i, lower[i])),
            })
            .collect();
        let k = working.len();
        let mut kkt = DMatrix::zeros(d + k, d + k);
        kkt.view_mut((0, 0), (d, d)).copy_from(q);
        let mut rhs = DVector::zeros(d + k);
        for (r, &(i, target)) in working.iter().enumerate() {
            for c in 0..d {
                kkt[(d + r, c)] = a[(i, c)];
                kkt[(c, d + r)] = a[(i, c)];
            }
            rhs[d + r] = target;
        }
        let Some(sol) = kkt.lu().solve(&rhs) else {
            continue;
        };
        let x = sol.rows(0, d).into_owned();
        let ax = a * &x;
        if !(0..m).all(|i| ax[i] >= lower[i] - 1e-9 && ax[i] <= upper[i] + 1e-9) {
            continue;
        }
        let obj = 0.5 * x.dot(&(q * &x));
        if best.as_ref().is_none_or(|(b, _)| obj < *b) {
            best = Some((obj, x));
        }
    }
    best.map(|(_, x)| x)
}

/// Well-conditioned symmetric positive definite matrix.
pub fn random_spd<R: Rng>(d: usize, rng: &mut R) -> DMatrix<f64> {
    let b = DMatrix::from_fn(d, d + 2, |_, _| rng.random_range(-1.0..1.0));
    &b * b.transpose() / (d + 2) as f64 + DMatrix::identity(d, d) * 0.1
}
