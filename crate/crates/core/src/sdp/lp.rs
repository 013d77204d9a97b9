//! Master problem of the cutting-plane loop:
//!
//! ```text
//! maximize cᵀw   subject to   G w <= h (one row per cut),   |w_i| <= W
//! ```
//!
//! solved by a primal-dual interior-point method with Mehrotra's
//! predictor-corrector. Near the optimum of the outer problem the cuts come
//! from eigenvectors of a nearly degenerate top eigenspace and become close
//! to linearly dependent; an interior-point method converges to the center
//! of the optimal face instead of pivoting between ill-conditioned bases.
//!
//! The reported value is the dual objective of the final iterate after the
//! residual of `Gᵀy + s⁺ - s⁻ = c` has been moved into the bound
//! multipliers, so by weak duality it bounds the true optimum from above
//! however inexact the iterate is.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative gap between the certified bound and the primal value.
const TOL: f64 = 1e-8;
/// Residuals below which certification is attempted.
const LOOSE_TOL: f64 = 1e-8;
/// Certification attempts without progress before giving up.
const MAX_STALLED: usize = 5;
/// Fraction of the distance to the boundary taken per step.
const STEP_DAMPING: f64 = 0.995;

#[derive(Debug, Clone)]
pub struct CutLp {
    n: usize,
    c: Vec<f64>,
    w_max: f64,
    cuts: Vec<(Vec<f64>, f64)>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub w: Vec<f64>,
    /// Certified upper bound on the optimum.
    pub value: f64,
    pub iterations: usize,
}

impl CutLp {
    pub fn new(c: Vec<f64>, w_max: f64) -> Result<Self> {
        if !(w_max > 0.0 && w_max.is_finite()) {
            return Err(Error::Lp(format!("box bound must be positive, got {w_max}")));
        }
        if c.iter().any(|x| !x.is_finite()) {
            return Err(Error::Lp("objective has non-finite entries".into()));
        }
        Ok(Self {
            n: c.len(),
            c,
            w_max,
            cuts: Vec::new(),
        })
    }

    pub fn n_vars(&self) -> usize {
        self.n
    }

    pub fn n_cuts(&self) -> usize {
        self.cuts.len()
    }

    /// Adds the constraint `gᵀw <= h`, stored scaled to unit max-norm.
    pub fn add_cut(&mut self, g: Vec<f64>, h: f64) -> Result<()> {
        if g.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                actual: g.len(),
            });
        }
        if !h.is_finite() || g.iter().any(|x| !x.is_finite()) {
            return Err(Error::Lp("cut has non-finite entries".into()));
        }
        let gmax = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if gmax == 0.0 {
            if h < 0.0 {
                return Err(Error::Lp(format!("cut 0 <= {h} is infeasible")));
            }
            return Ok(());
        }
        self.cuts.push((g.into_iter().map(|x| x / gmax).collect(), h / gmax));
        Ok(())
    }

    /// Solves the current master problem from scratch.
    pub fn solve(&self, max_iterations: usize) -> Result<LpSolution> {
        let n = self.n;
        let k = self.cuts.len();
        let wm = self.w_max;
        let g = DMatrix::from_fn(k, n, |r, i| self.cuts[r].0[i]);
        let h = DVector::from_iterator(k, self.cuts.iter().map(|c| c.1));
        let c = DVector::from_column_slice(&self.c);
        let bscale = 1.0 + h.amax().max(wm);
        let cscale = 1.0 + c.amax();

        // rows: cuts, then w_i <= W, then -w_i <= W
        let mut w = DVector::<f64>::zeros(n);
        let mut sc = h.map(|x| x.max(1.0));
        let mut su = DVector::from_element(n, wm);
        let mut sl = DVector::from_element(n, wm);
        let mut yc = DVector::from_element(k, 1.0);
        let mut yu = DVector::from_element(n, 1.0);
        let mut yl = DVector::from_element(n, 1.0);
        let m = (k + 2 * n) as f64;

        let mut best: Option<LpSolution> = None;
        let mut stalled = 0;
        for it in 0..max_iterations {
            let rd = &c - g.tr_mul(&yc) - &yu + &yl;
            let rpc = &h - &g * &w - &sc;
            let rpu = DVector::from_element(n, wm) - &w - &su;
            let rpl = DVector::from_element(n, wm) + &w - &sl;
            let gap = sc.dot(&yc) + su.dot(&yu) + sl.dot(&yl);
            let primal = c.dot(&w);
            let rp_norm = rpc.amax().max(rpu.amax()).max(rpl.amax());
            if rp_norm <= LOOSE_TOL * bscale && rd.amax() <= 1e-3 * cscale && gap <= LOOSE_TOL * (1.0 + primal.abs()) {
                let sol = self.finish(&w, &[&sc, &su, &sl], &[&yc, &yu, &yl], it);
                let done = sol.value - primal <= TOL * (1.0 + primal.abs());
                let improved = best
                    .as_ref()
                    .is_none_or(|b: &LpSolution| sol.value < b.value - TOL * (1.0 + b.value.abs()));
                if best.as_ref().is_none_or(|b: &LpSolution| sol.value < b.value) {
                    best = Some(sol);
                }
                stalled = if improved { 0 } else { stalled + 1 };
                if done || stalled >= MAX_STALLED {
                    break;
                }
            }
            let mu = gap / m;
            let dc = yc.component_div(&sc);
            let du = yu.component_div(&su);
            let dl = yl.component_div(&sl);
            let mut mat = g.tr_mul(&DMatrix::from_fn(k, n, |r, i| g[(r, i)] * dc[r]));
            for i in 0..n {
                mat[(i, i)] += du[i] + dl[i];
            }
            let chol = match mat.clone().cholesky() {
                Some(ch) => ch,
                None => {
                    let reg = 1e-12 * (1.0 + mat.diagonal().amax());
                    for i in 0..n {
                        mat[(i, i)] += reg;
                    }
                    mat.cholesky()
                        .ok_or_else(|| Error::Lp("normal equations lost definiteness".into()))?
                }
            };

            // Newton direction for complementarity targets (rc, ru, rl)
            let direction = |rcc: &DVector<f64>, rcu: &DVector<f64>, rcl: &DVector<f64>| {
                let tc = dc.component_mul(&rpc) - rcc.component_div(&sc);
                let tu = du.component_mul(&rpu) - rcu.component_div(&su);
                let tl = dl.component_mul(&rpl) - rcl.component_div(&sl);
                let rhs = &rd + g.tr_mul(&tc) + &tu - &tl;
                let mut dw = chol.solve(&rhs);
                let dual_steps = |dw: &DVector<f64>| {
                    (
                        dc.component_mul(&(&g * dw - &rpc)) + rcc.component_div(&sc),
                        du.component_mul(&(dw - &rpu)) + rcu.component_div(&su),
                        dl.component_mul(&(-dw - &rpl)) + rcl.component_div(&sl),
                    )
                };
                // iterative refinement against the dual equation Aᵀdy = r_d
                for _ in 0..3 {
                    let (dyc, dyu, dyl) = dual_steps(&dw);
                    let e = &rd - g.tr_mul(&dyc) - &dyu + &dyl;
                    if e.amax() <= 1e-3 * TOL * cscale {
                        break;
                    }
                    dw += chol.solve(&e);
                }
                let (dyc, dyu, dyl) = dual_steps(&dw);
                let dsc = (rcc - sc.component_mul(&dyc)).component_div(&yc);
                let dsu = (rcu - su.component_mul(&dyu)).component_div(&yu);
                let dsl = (rcl - sl.component_mul(&dyl)).component_div(&yl);
                (dw, [dsc, dsu, dsl], [dyc, dyu, dyl])
            };
            let max_step = |x: &[&DVector<f64>; 3], dx: &[DVector<f64>; 3]| {
                let mut a: f64 = 1.0;
                for (v, d) in x.iter().zip(dx) {
                    for (vi, di) in v.iter().zip(d.iter()) {
                        if *di < 0.0 {
                            a = a.min(-vi / di);
                        }
                    }
                }
                a
            };

            let (_, ds_aff, dy_aff) = direction(
                &(-sc.component_mul(&yc)),
                &(-su.component_mul(&yu)),
                &(-sl.component_mul(&yl)),
            );
            let ap = max_step(&[&sc, &su, &sl], &ds_aff);
            let ad = max_step(&[&yc, &yu, &yl], &dy_aff);
            let mu_aff = (&sc + &ds_aff[0] * ap).dot(&(&yc + &dy_aff[0] * ad))
                + (&su + &ds_aff[1] * ap).dot(&(&yu + &dy_aff[1] * ad))
                + (&sl + &ds_aff[2] * ap).dot(&(&yl + &dy_aff[2] * ad));
            let sigma = (mu_aff / m / mu).powi(3).min(1.0);
            let target = |s: &DVector<f64>, y: &DVector<f64>, ds: &DVector<f64>, dy: &DVector<f64>| {
                DVector::from_element(s.len(), sigma * mu) - s.component_mul(y) - ds.component_mul(dy)
            };
            let (dw, ds, dy) = direction(
                &target(&sc, &yc, &ds_aff[0], &dy_aff[0]),
                &target(&su, &yu, &ds_aff[1], &dy_aff[1]),
                &target(&sl, &yl, &ds_aff[2], &dy_aff[2]),
            );
            let ap = (STEP_DAMPING * max_step(&[&sc, &su, &sl], &ds)).min(1.0);
            let ad = (STEP_DAMPING * max_step(&[&yc, &yu, &yl], &dy)).min(1.0);
            let (ap, ad) = (ap.min(ad), ap.min(ad));
            w += &dw * ap;
            sc += &ds[0] * ap;
            su += &ds[1] * ap;
            sl += &ds[2] * ap;
            yc += &dy[0] * ad;
            yu += &dy[1] * ad;
            yl += &dy[2] * ad;
        }
        best.ok_or_else(|| {
            Error::Lp(format!("interior-point method did not converge in {max_iterations} iterations"))
        })
    }

    /// Row `j` of the stacked constraint matrix: cuts, then `w_i <= W`,
    /// then `-w_i <= W`.
    fn row(&self, j: usize) -> (Vec<f64>, f64) {
        let (n, k) = (self.n, self.cuts.len());
        if j < k {
            self.cuts[j].clone()
        } else {
            let mut e = vec![0.0; n];
            e[(j - k) % n] = if j < k + n { 1.0 } else { -1.0 };
            (e, self.w_max)
        }
    }

    /// Certified upper bound from the multipliers `y`. The residual of the
    /// dual equality is first reduced by a correction on the `n` most
    /// strongly active rows; what remains is absorbed into the bound
    /// multipliers at cost `W` per unit.
    fn finish(
        &self,
        w: &DVector<f64>,
        slack: &[&DVector<f64>; 3],
        mult: &[&DVector<f64>; 3],
        iterations: usize,
    ) -> LpSolution {
        let n = self.n;
        let s: Vec<f64> = slack.iter().flat_map(|v| v.iter().copied()).collect();
        let y0: Vec<f64> = mult.iter().flat_map(|v| v.iter().map(|x| x.max(0.0))).collect();
        let rows: Vec<(Vec<f64>, f64)> = (0..y0.len()).map(|j| self.row(j)).collect();
        let residual = |y: &[f64]| {
            let mut r = self.c.clone();
            for ((a, _), &yj) in rows.iter().zip(y) {
                if yj != 0.0 {
                    for (ri, ai) in r.iter_mut().zip(a) {
                        *ri -= ai * yj;
                    }
                }
            }
            r
        };
        let value = |y: &[f64]| {
            rows.iter().zip(y).map(|((_, b), yj)| b * yj).sum::<f64>()
                + self.w_max * residual(y).iter().map(|x| x.abs()).sum::<f64>()
        };

        let mut best = value(&y0);

        // Interior multipliers, corrected on the rows ranked most active.
        let mut order: Vec<usize> = (0..y0.len()).collect();
        order.sort_by(|&a, &b| (y0[b] / s[b].max(1e-300)).total_cmp(&(y0[a] / s[a].max(1e-300))));
        let active = &order[..n.min(order.len())];
        let basis = DMatrix::from_fn(n, active.len(), |i, col| rows[active[col]].0[i]);
        let r = DVector::from_vec(residual(&y0));
        if let Ok(delta) = basis.svd(true, true).solve(&r, 1e-12) {
            let mut trial = y0.clone();
            for (col, &j) in active.iter().enumerate() {
                trial[j] = (trial[j] + delta[col]).max(0.0);
            }
            best = best.min(value(&trial));
        }

        // Nonnegative multipliers on the rows tight at w.
        let gap: Vec<f64> = rows
            .iter()
            .map(|(a, b)| (b - a.iter().zip(w.iter()).map(|(x, y)| x * y).sum::<f64>()) / (1.0 + b.abs()))
            .collect();
        let mut last = usize::MAX;
        for e in -11..=-4 {
            let t = 10f64.powi(e);
            let tight: Vec<usize> = (0..rows.len()).filter(|&j| gap[j] <= t).collect();
            if tight.is_empty() || tight.len() == last {
                continue;
            }
            last = tight.len();
            let a = DMatrix::from_fn(n, tight.len(), |i, col| rows[tight[col]].0[i]);
            let c = DVector::from_column_slice(&self.c);
            let z = nnls(&a, &c);
            let mut y = vec![0.0; rows.len()];
            for (col, &j) in tight.iter().enumerate() {
                y[j] = z[col];
            }
            best = best.min(value(&y));
        }

        LpSolution {
            w: w.iter().copied().collect(),
            value: best,
            iterations,
        }
    }
}

/// Lawson-Hanson: minimize `‖a z - c‖₂` over `z >= 0`.
fn nnls(a: &DMatrix<f64>, c: &DVector<f64>) -> DVector<f64> {
    let m = a.ncols();
    let mut z = DVector::zeros(m);
    let mut passive = vec![false; m];
    let tol = 1e-12 * (1.0 + a.amax() * c.amax());
    for _ in 0..3 * m + 10 {
        let grad = a.transpose() * (c - a * &z);
        let next = (0..m)
            .filter(|&j| !passive[j])
            .max_by(|&i, &j| grad[i].total_cmp(&grad[j]));
        match next {
            Some(j) if grad[j] > tol => passive[j] = true,
            _ => break,
        }
        loop {
            let cols: Vec<usize> = (0..m).filter(|&j| passive[j]).collect();
            let sub = a.select_columns(&cols);
            let Ok(sol) = sub.svd(true, true).solve(c, 1e-12) else {
                return z;
            };
            if sol.iter().all(|&x| x > 0.0) {
                for (k, &j) in cols.iter().enumerate() {
                    z[j] = sol[k];
                }
                break;
            }
            let mut alpha = 1.0f64;
            for (k, &j) in cols.iter().enumerate() {
                if sol[k] <= 0.0 {
                    alpha = alpha.min(z[j] / (z[j] - sol[k]));
                }
            }
            for (k, &j) in cols.iter().enumerate() {
                z[j] += alpha * (sol[k] - z[j]);
                if z[j] <= 1e-15 {
                    z[j] = 0.0;
                    passive[j] = false;
                }
            }
        }
    }
    z
}
