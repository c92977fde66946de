//! Dense convex QP `min ½xᵀQx  s.t.  l ≤ Ax ≤ u`.
//!
//! Operator splitting in the style of OSQP: over-relaxed ADMM on the split
//! `z = Ax` with a cached Cholesky factor of `Q + σI + ρAᵀA`. Problems that
//! share `Q` and `A` but differ in their bounds reuse one [`PreparedQp`].
//! Once the iterates settle, the active set they imply is polished by an
//! equality-constrained KKT solve, which yields the exact optimum whenever the
//! guessed active set is right (verified before accepting it).

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{Error, Result};
use crate::linalg::{self, Cholesky, Lu};
use crate::types::SolverConfig;

/// Maximum bound violation accepted for an `Optimal` status.
pub const FEAS_TOL: f64 = 1e-7;

const ALPHA: f64 = 1.6;
const SIGMA: f64 = 1e-6;
const RHO_INIT: f64 = 0.1;
const CHECK_EVERY: usize = 5;
const ADAPT_EVERY: usize = 50;
const POLISH_EVERY: usize = 25;
const INFEASIBILITY_TOL: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct BoxConstrainedQp {
    pub q: Array2<f64>,
    pub a: Array2<f64>,
    pub lower: Array1<f64>,
    pub upper: Array1<f64>,
}

impl BoxConstrainedQp {
    pub fn new(
        q: Array2<f64>,
        a: Array2<f64>,
        lower: Array1<f64>,
        upper: Array1<f64>,
    ) -> Result<Self> {
        let prob = BoxConstrainedQp { q, a, lower, upper };
        check_bounds(prob.a.nrows(), prob.lower.view(), prob.upper.view())?;
        if prob.a.ncols() != prob.q.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "Q is {}x{}, A is {}x{}",
                prob.q.nrows(),
                prob.q.ncols(),
                prob.a.nrows(),
                prob.a.ncols()
            )));
        }
        Ok(prob)
    }

    pub fn objective(&self, x: ArrayView1<f64>) -> f64 {
        0.5 * x.dot(&self.q.dot(&x))
    }
}

fn check_bounds(m: usize, lower: ArrayView1<f64>, upper: ArrayView1<f64>) -> Result<()> {
    if lower.len() != m || upper.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "{m} constraints but bounds of length {} and {}",
            lower.len(),
            upper.len()
        )));
    }
    if lower
        .iter()
        .zip(upper.iter())
        .any(|(l, u)| l > u || l.is_nan() || u.is_nan())
    {
        return Err(Error::InvalidParameter(
            "lower bound exceeds upper bound".into(),
        ));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    MaxIter,
    Infeasible,
}

#[derive(Clone, Debug)]
pub struct QpSolution {
    pub x: Array1<f64>,
    pub objective: f64,
    /// Largest bound violation of `Ax`.
    pub primal_infeasibility: f64,
    pub status: QpStatus,
    /// Multipliers of `l ≤ Ax ≤ u`: positive where the upper bound binds,
    /// negative where the lower bound binds.
    pub dual: Array1<f64>,
    pub iterations: usize,
    pub polished: bool,
}

/// `Q` and `A` with the ADMM linear system already factored.
#[derive(Clone, Debug)]
pub struct PreparedQp {
    d: usize,
    m: usize,
    /// Unscaled cost, for reporting.
    q: Array2<f64>,
    /// `Q / cost_scale`.
    qs: Vec<f64>,
    cost_scale: f64,
    a: Vec<f64>,
    rho: f64,
    factor: Cholesky,
}

pub fn solve_qp(prob: &BoxConstrainedQp, cfg: &SolverConfig) -> Result<QpSolution> {
    PreparedQp::new(prob.q.clone(), prob.a.clone())?.solve(
        prob.lower.view(),
        prob.upper.view(),
        cfg,
    )
}

impl PreparedQp {
    pub fn new(q: Array2<f64>, a: Array2<f64>) -> Result<Self> {
        let d = q.nrows();
        if q.ncols() != d || a.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "Q is {}x{}, A is {}x{}",
                d,
                q.ncols(),
                a.nrows(),
                a.ncols()
            )));
        }
        if q.iter().chain(a.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        if !linalg::is_symmetric(q.view(), 1e-12) {
            return Err(Error::InvalidParameter("Q must be symmetric".into()));
        }
        let shifted = &q + &(Array2::<f64>::eye(d) * 1e-8);
        if d > 0 && Cholesky::factor(shifted.view()).is_err() {
            return Err(Error::NonPsdCost);
        }
        let max_diag = (0..d).map(|i| q[[i, i]]).fold(0.0f64, f64::max);
        let cost_scale = if max_diag > 0.0 { max_diag } else { 1.0 };
        let qs: Vec<f64> = q.iter().map(|v| v / cost_scale).collect();
        let m = a.nrows();
        let a_flat: Vec<f64> = a.iter().copied().collect();
        let factor = Self::factor_kkt(d, m, &qs, &a_flat, RHO_INIT)?;
        Ok(PreparedQp {
            d,
            m,
            q,
            qs,
            cost_scale,
            a: a_flat,
            rho: RHO_INIT,
            factor,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn constraints(&self) -> usize {
        self.m
    }

    fn factor_kkt(d: usize, m: usize, qs: &[f64], a: &[f64], rho: f64) -> Result<Cholesky> {
        let mut k = Array2::<f64>::zeros((d, d));
        for i in 0..d {
            for j in 0..d {
                k[[i, j]] = qs[i * d + j];
            }
            k[[i, i]] += SIGMA;
        }
        for r in 0..m {
            let row = &a[r * d..(r + 1) * d];
            for i in 0..d {
                if row[i] == 0.0 {
                    continue;
                }
                let s = rho * row[i];
                for j in 0..d {
                    k[[i, j]] += s * row[j];
                }
            }
        }
        Cholesky::factor(k.view())
    }

    fn a_mul(&self, x: &[f64], out: &mut [f64]) {
        let d = self.d;
        for (r, o) in out.iter_mut().enumerate() {
            *o = self.a[r * d..(r + 1) * d]
                .iter()
                .zip(x)
                .map(|(a, b)| a * b)
                .sum();
        }
    }

    fn at_mul(&self, y: &[f64], out: &mut [f64]) {
        let d = self.d;
        out.iter_mut().for_each(|o| *o = 0.0);
        for (r, &yr) in y.iter().enumerate() {
            if yr == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(&self.a[r * d..(r + 1) * d]) {
                *o += a * yr;
            }
        }
    }

    fn q_mul(&self, x: &[f64], out: &mut [f64]) {
        let d = self.d;
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.qs[i * d..(i + 1) * d]
                .iter()
                .zip(x)
                .map(|(a, b)| a * b)
                .sum();
        }
    }

    fn violation(&self, ax: &[f64], lower: ArrayView1<f64>, upper: ArrayView1<f64>) -> f64 {
        ax.iter()
            .enumerate()
            .map(|(i, &v)| (lower[i] - v).max(v - upper[i]).max(0.0))
            .fold(0.0, f64::max)
    }

    /// Solves for one set of bounds.
    pub fn solve(
        &self,
        lower: ArrayView1<f64>,
        upper: ArrayView1<f64>,
        cfg: &SolverConfig,
    ) -> Result<QpSolution> {
        check_bounds(self.m, lower, upper)?;
        cfg.validate()?;
        let (d, m) = (self.d, self.m);
        let tol = cfg.tol;
        let mut x = vec![0.0; d];
        let mut z: Vec<f64> = (0..m).map(|i| 0.0f64.clamp(lower[i], upper[i])).collect();
        let mut y = vec![0.0; m];
        let mut y_prev = vec![0.0; m];
        let mut rho = self.rho;
        let mut local_factor: Option<Cholesky> = None;

        let mut rhs = vec![0.0; d];
        let mut tmp_m = vec![0.0; m];
        let mut ax = vec![0.0; m];
        let mut qx = vec![0.0; d];
        let mut aty = vec![0.0; d];
        let mut last_polish_set: Option<Vec<i8>> = None;

        for it in 1..=cfg.max_iter {
            for i in 0..m {
                tmp_m[i] = rho * z[i] - y[i];
            }
            self.at_mul(&tmp_m, &mut rhs);
            for i in 0..d {
                rhs[i] += SIGMA * x[i];
            }
            local_factor
                .as_ref()
                .unwrap_or(&self.factor)
                .solve_in_place(&mut rhs);
            let x_tilde = &rhs;
            self.a_mul(x_tilde, &mut ax);
            for i in 0..d {
                x[i] = ALPHA * x_tilde[i] + (1.0 - ALPHA) * x[i];
            }
            y_prev.copy_from_slice(&y);
            for i in 0..m {
                let zr = ALPHA * ax[i] + (1.0 - ALPHA) * z[i];
                let zn = (zr + y[i] / rho).clamp(lower[i], upper[i]);
                y[i] += rho * (zr - zn);
                z[i] = zn;
            }

            if it % CHECK_EVERY != 0 && it != cfg.max_iter {
                continue;
            }
            self.a_mul(&x, &mut ax);
            self.q_mul(&x, &mut qx);
            self.at_mul(&y, &mut aty);
            let r_prim = ax
                .iter()
                .zip(&z)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let r_dual = qx
                .iter()
                .zip(&aty)
                .map(|(a, b)| (a + b).abs())
                .fold(0.0, f64::max);
            let norm_ax =
                linalg::max_abs(ax.iter().copied()).max(linalg::max_abs(z.iter().copied()));
            let norm_dual =
                linalg::max_abs(qx.iter().copied()).max(linalg::max_abs(aty.iter().copied()));
            let eps_prim = tol + tol * norm_ax;
            let eps_dual = tol + tol * norm_dual;
            let violation = self.violation(&ax, lower, upper);

            if r_prim <= eps_prim && r_dual <= eps_dual && violation <= FEAS_TOL {
                if let Some(sol) = self.polish(&z, &y, lower, upper, tol, it) {
                    return Ok(sol);
                }
                return Ok(self.finish(x, y, ax, lower, upper, QpStatus::Optimal, it, false));
            }

            if self.primal_infeasible(&y, &y_prev, lower, upper) {
                return Ok(self.finish(x, y, ax, lower, upper, QpStatus::Infeasible, it, false));
            }

            if it % POLISH_EVERY == 0
                && r_prim <= 1e-3 * (1.0 + norm_ax)
                && r_dual <= 1e-3 * (1.0 + norm_dual)
            {
                let set = self.active_set(&z, &y, lower, upper);
                if last_polish_set.as_ref() != Some(&set) {
                    if let Some(sol) = self.polish(&z, &y, lower, upper, tol, it) {
                        return Ok(sol);
                    }
                    last_polish_set = Some(set);
                }
            }

            if it % ADAPT_EVERY == 0 {
                let pr = r_prim / norm_ax.max(1e-30);
                let du = r_dual / norm_dual.max(1e-30);
                if pr > 0.0 && du > 0.0 {
                    let new_rho = (rho * (pr / du).sqrt()).clamp(1e-6, 1e6);
                    if new_rho > 5.0 * rho || new_rho < 0.2 * rho {
                        let f = Self::factor_kkt(d, m, &self.qs, &self.a, new_rho)?;
                        rho = new_rho;
                        local_factor = Some(f);
                    }
                }
            }
        }
        self.a_mul(&x, &mut ax);
        Ok(self.finish(
            x,
            y,
            ax,
            lower,
            upper,
            QpStatus::MaxIter,
            cfg.max_iter,
            false,
        ))
    }

    /// OSQP certificate: `Aᵀδy ≈ 0` and `uᵀδy₊ + lᵀδy₋ < 0`.
    fn primal_infeasible(
        &self,
        y: &[f64],
        y_prev: &[f64],
        lower: ArrayView1<f64>,
        upper: ArrayView1<f64>,
    ) -> bool {
        let dy: Vec<f64> = y.iter().zip(y_prev).map(|(a, b)| a - b).collect();
        let norm = linalg::max_abs(dy.iter().copied());
        if norm <= 1e-12 {
            return false;
        }
        let mut atdy = vec![0.0; self.d];
        self.at_mul(&dy, &mut atdy);
        if linalg::max_abs(atdy.iter().copied()) > INFEASIBILITY_TOL * norm {
            return false;
        }
        let mut support = 0.0;
        for (i, &v) in dy.iter().enumerate() {
            if v > 0.0 {
                if upper[i].is_infinite() {
                    return false;
                }
                support += upper[i] * v;
            } else if v < 0.0 {
                if lower[i].is_infinite() {
                    return false;
                }
                support += lower[i] * v;
            }
        }
        support < -INFEASIBILITY_TOL * norm
    }

    /// -1 lower bound active, 1 upper bound active, 0 inactive.
    fn active_set(
        &self,
        z: &[f64],
        y: &[f64],
        lower: ArrayView1<f64>,
        upper: ArrayView1<f64>,
    ) -> Vec<i8> {
        (0..self.m)
            .map(|i| {
                if lower[i] == upper[i] {
                    if y[i] < 0.0 {
                        -1
                    } else {
                        1
                    }
                } else if lower[i].is_finite() && z[i] - lower[i] < -y[i] {
                    -1
                } else if upper[i].is_finite() && upper[i] - z[i] < y[i] {
                    1
                } else {
                    0
                }
            })
            .collect()
    }

    /// Solves the equality-constrained problem on the guessed active set and
    /// accepts it only if it is primal feasible with correctly signed duals.
    fn polish(
        &self,
        z: &[f64],
        y: &[f64],
        lower: ArrayView1<f64>,
        upper: ArrayView1<f64>,
        tol: f64,
        iterations: usize,
    ) -> Option<QpSolution> {
        let (d, m) = (self.d, self.m);
        let set = self.active_set(z, y, lower, upper);
        let active: Vec<usize> = (0..m).filter(|&i| set[i] != 0).collect();
        let k = active.len();
        let size = d + k;
        let delta = 1e-10;
        let mut kkt = Array2::<f64>::zeros((size, size));
        let mut reg = kkt.clone();
        for i in 0..d {
            for j in 0..d {
                kkt[[i, j]] = self.qs[i * d + j];
            }
        }
        for (r, &c) in active.iter().enumerate() {
            for j in 0..d {
                let v = self.a[c * d + j];
                kkt[[d + r, j]] = v;
                kkt[[j, d + r]] = v;
            }
        }
        reg.assign(&kkt);
        for i in 0..d {
            reg[[i, i]] += delta;
        }
        for r in 0..k {
            reg[[d + r, d + r]] -= delta;
        }
        let lu = Lu::factor(reg.view())?;
        let mut b = vec![0.0; size];
        for (r, &c) in active.iter().enumerate() {
            b[d + r] = if set[c] < 0 { lower[c] } else { upper[c] };
        }
        let mut sol = lu.solve(&b);
        for _ in 0..5 {
            let ks = kkt.dot(&Array1::from(sol.clone()));
            let resid: Vec<f64> = b.iter().zip(ks.iter()).map(|(a, c)| a - c).collect();
            if linalg::max_abs(resid.iter().copied()) < 1e-15 {
                break;
            }
            let corr = lu.solve(&resid);
            sol.iter_mut().zip(corr).for_each(|(s, c)| *s += c);
        }
        if sol.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let x: Vec<f64> = sol[..d].to_vec();
        let mut yfull = vec![0.0; m];
        for (r, &c) in active.iter().enumerate() {
            let v = sol[d + r];
            if set[c] < 0 && lower[c] != upper[c] && v > tol {
                return None;
            }
            if set[c] > 0 && lower[c] != upper[c] && v < -tol {
                return None;
            }
            yfull[c] = v;
        }
        let mut ax = vec![0.0; m];
        self.a_mul(&x, &mut ax);
        if self.violation(&ax, lower, upper) > FEAS_TOL {
            return None;
        }
        let mut qx = vec![0.0; d];
        let mut aty = vec![0.0; d];
        self.q_mul(&x, &mut qx);
        self.at_mul(&yfull, &mut aty);
        let stat = qx
            .iter()
            .zip(&aty)
            .map(|(a, b)| (a + b).abs())
            .fold(0.0, f64::max);
        if stat > tol {
            return None;
        }
        Some(self.finish(
            x,
            yfull,
            ax,
            lower,
            upper,
            QpStatus::Optimal,
            iterations,
            true,
        ))
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        &self,
        x: Vec<f64>,
        y: Vec<f64>,
        ax: Vec<f64>,
        lower: ArrayView1<f64>,
        upper: ArrayView1<f64>,
        status: QpStatus,
        iterations: usize,
        polished: bool,
    ) -> QpSolution {
        let x = Array1::from(x);
        let primal_infeasibility = self.violation(&ax, lower, upper);
        let status = if status == QpStatus::Optimal && primal_infeasibility > FEAS_TOL {
            QpStatus::MaxIter
        } else {
            status
        };
        QpSolution {
            objective: 0.5 * x.dot(&self.q.dot(&x)),
            x,
            primal_infeasibility,
            status,
            dual: Array1::from(y) * self.cost_scale,
            iterations,
            polished,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn cfg() -> SolverConfig {
        SolverConfig::qp()
    }

    #[test]
    fn equality_pinned_solution() {
        let prob = BoxConstrainedQp::new(
            Array2::eye(3),
            Array2::eye(3),
            array![1.0, 0.0, 0.0],
            array![1.0, 0.0, 0.0],
        )
        .unwrap();
        let sol = solve_qp(&prob, &cfg()).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        for (v, e) in sol.x.iter().zip([1.0, 0.0, 0.0]) {
            assert!((v - e).abs() < 1e-9);
        }
    }

    #[test]
    fn halfspace_projection() {
        let prob = BoxConstrainedQp::new(
            Array2::eye(2),
            array![[1.0, 1.0]],
            array![1.0],
            array![f64::INFINITY],
        )
        .unwrap();
        let sol = solve_qp(&prob, &cfg()).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((sol.x[0] - 0.5).abs() < 1e-9 && (sol.x[1] - 0.5).abs() < 1e-9);
        assert!((sol.objective - 0.25).abs() < 1e-9);
        assert!(sol.dual[0] < 0.0);
    }

    #[test]
    fn unconstrained_minimum_is_origin() {
        let q = array![[2.0, 0.5], [0.5, 1.0]];
        let prob = BoxConstrainedQp::new(
            q,
            Array2::eye(2),
            array![f64::NEG_INFINITY, f64::NEG_INFINITY],
            array![f64::INFINITY, f64::INFINITY],
        )
        .unwrap();
        let sol = solve_qp(&prob, &cfg()).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!(sol.x.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn detects_infeasible_bounds() {
        // x₁ + x₂ ≥ 2 and x₁ + x₂ ≤ 1.
        let prob = BoxConstrainedQp::new(
            Array2::eye(2),
            array![[1.0, 1.0], [1.0, 1.0]],
            array![2.0, f64::NEG_INFINITY],
            array![f64::INFINITY, 1.0],
        )
        .unwrap();
        let sol = solve_qp(&prob, &cfg()).unwrap();
        assert_eq!(sol.status, QpStatus::Infeasible);
    }

    #[test]
    fn rejects_bad_problems() {
        let not_psd = array![[1.0, 0.0], [0.0, -1.0]];
        assert!(matches!(
            PreparedQp::new(not_psd, Array2::eye(2)),
            Err(Error::NonPsdCost)
        ));
        assert!(matches!(
            BoxConstrainedQp::new(
                Array2::eye(2),
                Array2::eye(3),
                array![0.0, 0.0, 0.0],
                array![1.0, 1.0, 1.0]
            ),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(
            BoxConstrainedQp::new(Array2::eye(1), Array2::eye(1), array![1.0], array![0.0])
                .is_err()
        );
    }

    #[test]
    fn prepared_handle_reused_across_bounds() {
        let q = array![[2.0, 0.3], [0.3, 1.0]];
        let a = array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        let handle = PreparedQp::new(q.clone(), a.clone()).unwrap();
        for shift in [0.5, 1.0, 2.0] {
            let lower = array![shift, f64::NEG_INFINITY, f64::NEG_INFINITY];
            let upper = array![f64::INFINITY, f64::INFINITY, 10.0];
            let a_sol = handle.solve(lower.view(), upper.view(), &cfg()).unwrap();
            let b_sol = solve_qp(
                &BoxConstrainedQp::new(q.clone(), a.clone(), lower, upper).unwrap(),
                &cfg(),
            )
            .unwrap();
            assert!((&a_sol.x - &b_sol.x).iter().all(|v| v.abs() < 1e-9));
        }
    }
}
