//! Lower bound from arbitrary measured expectations:
//!
//! ```text
//! maximize Σ w_i c_i   subject to   Σ w_i C_i ⪯ |Φ⟩⟨Φ|
//! ```
//!
//! solved by cutting planes. The constraint is enforced through an oracle
//! returning the top eigenpairs of `Σ w_i C_i - |Φ⟩⟨Φ|`; each violating
//! eigenvector `v` becomes the linear cut `Σ w_i ⟨v|C_i|v⟩ <= |⟨Φ|v⟩|²`.

mod lp;
mod observables;

pub use lp::{CutLp, LpSolution};
pub use observables::{
    measure_expectations, parse_measurements, parse_observable, ExpectationRecord, Observable,
    ObservableSet,
};

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::basis;
use crate::eig::{self, FnOperator, LanczosOptions};
use crate::error::{Error, Result};
use crate::witness::{bits_from_raw, BellReference, BoundReport, Branch, Certificate, Method};

/// Oracle dimension up to which the dense eigensolver is used.
const DENSE_ORACLE_DIM: usize = 256;
/// Certificate verification dimension up to which the dense solver is used.
const DENSE_VERIFY_DIM: usize = 1024;

#[derive(Debug, Clone)]
pub struct SdpOptions {
    pub branch: Branch,
    /// Box bound on every weight.
    pub w_max: f64,
    /// Largest eigenvalue of `Σ w C - |Φ⟩⟨Φ|` accepted as feasible.
    pub feasibility_tol: f64,
    /// Stop once the master LP value and the best feasible value are this
    /// close (relative to `max(1, |LP value|)`).
    pub gap_tol: f64,
    pub max_rounds: usize,
    /// Violating eigenvectors turned into cuts per round.
    pub cuts_per_round: usize,
    /// Interior-point iterations per master solve.
    pub max_lp_iterations: usize,
    pub lanczos: LanczosOptions,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self {
            branch: Branch::Ferro,
            w_max: 1e3,
            feasibility_tol: 1e-7,
            gap_tol: 1e-6,
            max_rounds: 3000,
            cuts_per_round: 8,
            max_lp_iterations: 200,
            lanczos: LanczosOptions {
                compute_gap: false,
                ..LanczosOptions::default()
            },
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NamedWeight {
    pub observable: String,
    pub weight: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SdpCertificate {
    pub branch: Branch,
    pub weights: Vec<NamedWeight>,
    /// `λ_max(Σ w C - |Φ⟩⟨Φ|)` of the returned weights.
    pub lambda_max_residual: f64,
    pub bound_bits: f64,
    pub raw_value: f64,
    /// Value of the final master LP, an upper bound on the program.
    pub upper_bound: f64,
    pub rounds: usize,
    pub cuts: usize,
    pub converged: bool,
}

struct Oracle<'a> {
    set: &'a ObservableSet,
    reference: BellReference,
    lanczos: LanczosOptions,
}

impl Oracle<'_> {
    fn dim(&self) -> usize {
        basis::dim(self.set.n_sites())
    }

    fn dense(&self, w: &[f64]) -> DMatrix<C64> {
        let dim = self.dim();
        let mut m = DMatrix::<C64>::zeros(dim, dim);
        for (o, &wi) in self.set.observables().iter().zip(w) {
            if wi != 0.0 {
                o.add_dense(wi, &mut m);
            }
        }
        for &s in self.reference.support() {
            for &t in self.reference.support() {
                m[(s, t)] -= 1.0;
            }
        }
        m
    }

    /// `-(Σ w C - |Φ⟩⟨Φ|)`, whose lowest eigenpairs are the wanted ones.
    fn negated<'b>(&'b self, w: &'b [f64]) -> FnOperator<impl Fn(&[C64], &mut [C64]) + Sync + 'b> {
        FnOperator::new(self.dim(), move |x: &[C64], y: &mut [C64]| {
            y.fill(C64::new(0.0, 0.0));
            for (o, &wi) in self.set.observables().iter().zip(w) {
                if wi != 0.0 {
                    o.apply_add(-wi, x, y);
                }
            }
            self.reference.apply_projector_raw(1.0, x, y);
        })
    }

    /// Largest eigenvalue and up to `k` leading eigenpairs.
    fn top(&self, w: &[f64], k: usize) -> Result<(f64, Vec<(f64, Vec<C64>)>)> {
        if self.dim() <= DENSE_ORACLE_DIM {
            let (vals, vecs) = eig::dense_eigh(&self.dense(w));
            let n = vals.len();
            let pairs = (0..k.min(n))
                .map(|i| {
                    let c = n - 1 - i;
                    (vals[c], vecs.column(c).iter().copied().collect())
                })
                .collect();
            return Ok((vals[n - 1], pairs));
        }
        let op = self.negated(w);
        let mut locked: Vec<Vec<C64>> = Vec::new();
        let mut pairs = Vec::new();
        for _ in 0..k.clamp(1, 3) {
            let (theta, v, res) = eig::smallest_eigpair_deflated(&op, &self.lanczos, &locked, None)?;
            // largest eigenvalue of the original is at most -(θ - r)
            pairs.push((-theta + res, v.clone()));
            locked.push(v);
        }
        Ok((pairs[0].0, pairs))
    }

    fn lambda_max(&self, w: &[f64]) -> Result<f64> {
        if self.dim() <= DENSE_VERIFY_DIM {
            let vals = eig::dense_eigenvalues(&self.dense(w));
            return Ok(vals[vals.len() - 1]);
        }
        let op = self.negated(w);
        let (theta, _, res) = eig::smallest_eigpair_deflated(&op, &self.lanczos, &[], None)?;
        Ok(-theta + res)
    }
}

/// `λ_max(Σ w_i C_i - |Φ⟩⟨Φ|)`; the weights certify a bound iff this is at
/// most `1e-7`.
pub fn verify_certificate(set: &ObservableSet, w: &[f64], branch: Branch) -> Result<f64> {
    if w.len() != set.len() {
        return Err(Error::DimensionMismatch {
            expected: set.len(),
            actual: w.len(),
        });
    }
    let oracle = Oracle {
        set,
        reference: BellReference::new(set.n_sites(), branch)?,
        lanczos: SdpOptions::default().lanczos,
    };
    oracle.lambda_max(w)
}

fn objective(c: &[f64], w: &[f64]) -> f64 {
    c.iter().zip(w).map(|(a, b)| a * b).sum()
}

/// Approximate analytic center of `{g_k·w <= h_k, |w_i| <= W, c·w >= floor}`
/// by damped Newton steps on the log barrier, starting from `w`.
fn analytic_center(
    cuts: &[(Vec<f64>, f64)],
    c: &[f64],
    floor: f64,
    w_max: f64,
    mut w: Vec<f64>,
) -> Vec<f64> {
    let n = w.len();
    // cuts touched by both endpoints of the start segment are relaxed slightly
    let relax = |h: f64| h + 1e-9 * h.abs().max(1.0);
    let slacks = |w: &[f64]| -> Option<(Vec<f64>, f64, Vec<f64>)> {
        let mut sc = Vec::with_capacity(cuts.len());
        for (g, h) in cuts {
            let v = relax(*h) - objective(g, w);
            if !(v > 0.0) {
                return None;
            }
            sc.push(v);
        }
        let so = objective(c, w) - floor;
        if !(so > 0.0) || w.iter().any(|x| x.abs() >= w_max) {
            return None;
        }
        Some((sc, so, w.to_vec()))
    };
    let barrier = |w: &[f64]| -> f64 {
        match slacks(w) {
            None => f64::INFINITY,
            Some((sc, so, _)) => {
                -sc.iter().map(|v| v.ln()).sum::<f64>()
                    - so.ln()
                    - w.iter().map(|x| (w_max - x).ln() + (w_max + x).ln()).sum::<f64>()
            }
        }
    };
    if slacks(&w).is_none() {
        return w;
    }
    for _ in 0..50 {
        let (sc, so, _) = slacks(&w).expect("iterate stays interior");
        let mut grad = nalgebra::DVector::<f64>::zeros(n);
        let mut hess = DMatrix::<f64>::zeros(n, n);
        for ((g, _), v) in cuts.iter().zip(&sc) {
            let gv = nalgebra::DVector::from_column_slice(g) / *v;
            grad += &gv;
            hess.syger(1.0, &gv, &gv, 1.0);
        }
        let cv = nalgebra::DVector::from_column_slice(c) / so;
        grad -= &cv;
        hess.syger(1.0, &cv, &cv, 1.0);
        for i in 0..n {
            let (a, b) = (w_max - w[i], w_max + w[i]);
            grad[i] += 1.0 / a - 1.0 / b;
            hess[(i, i)] += 1.0 / (a * a) + 1.0 / (b * b);
        }
        hess.fill_upper_triangle_with_lower_triangle();
        let Some(chol) = hess.cholesky() else {
            break;
        };
        let step = -chol.solve(&grad);
        let decrement = -grad.dot(&step);
        if decrement < 1e-8 {
            break;
        }
        let f0 = barrier(&w);
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = w.iter().zip(step.iter()).map(|(a, d)| a + t * d).collect();
            let f = barrier(&trial);
            if f <= f0 - 0.25 * t * decrement {
                w = trial;
                break;
            }
            t *= 0.5;
            if t < 1e-12 {
                return w;
            }
        }
    }
    w
}

/// Expectation values aligned with the order of `set`.
fn aligned_values(set: &ObservableSet, data: &[ExpectationRecord]) -> Result<Vec<f64>> {
    let mut c = vec![None; set.len()];
    for rec in data {
        let i = set.index_of(&rec.name).ok_or_else(|| {
            Error::InvalidArgument(format!("record {} matches no observable in the set", rec.name))
        })?;
        if c[i].is_some() {
            return Err(Error::InvalidArgument(format!("observable {} measured twice", rec.name)));
        }
        c[i] = Some(rec.value);
    }
    c.into_iter()
        .zip(set.observables())
        .map(|(v, o)| {
            v.ok_or_else(|| Error::InvalidArgument(format!("no value given for {}", o.name())))
        })
        .collect()
}

pub fn sdp_lower_bound(
    set: &ObservableSet,
    data: &[ExpectationRecord],
    opts: &SdpOptions,
) -> Result<BoundReport> {
    if set.is_empty() {
        return Err(Error::InvalidArgument("empty observable set".into()));
    }
    let c = aligned_values(set, data)?;
    let oracle = Oracle {
        set,
        reference: BellReference::new(set.n_sites(), opts.branch)?,
        lanczos: opts.lanczos.clone(),
    };
    let id = set.identity_index();
    let mut lp = CutLp::new(c.clone(), opts.w_max)?;
    // w = 0 is always feasible: -|Φ⟩⟨Φ| ⪯ 0
    let mut best_w = vec![0.0; set.len()];
    let mut best = 0.0;
    let mut upper = f64::INFINITY;
    let mut converged = false;
    let mut rounds = 0;

    // The master LP supplies the upper bound; the oracle is queried at the
    // analytic center of {cuts, box, cᵀw >= best}, which keeps the query
    // away from the extreme vertices a plain Kelley iteration jumps between.
    let mut cuts: Vec<(Vec<f64>, f64)> = Vec::new();
    while rounds < opts.max_rounds {
        rounds += 1;
        let sol = lp.solve(opts.max_lp_iterations)?;
        upper = sol.value;
        if upper - best <= opts.gap_tol * upper.abs().max(1.0) {
            converged = true;
            break;
        }
        let start: Vec<f64> = best_w.iter().zip(&sol.w).map(|(b, x)| 0.5 * (b + x)).collect();
        let query = analytic_center(&cuts, &c, best, opts.w_max, start);
        let mut added = 0;
        for q in [query, sol.w] {
            let (lam, pairs) = oracle.top(&q, opts.cuts_per_round)?;
            let mut candidate = q;
            let value = if lam <= opts.feasibility_tol {
                objective(&c, &candidate)
            } else if let Some(i) = id {
                candidate[i] -= lam / set.observables()[i].scale();
                objective(&c, &candidate)
            } else {
                f64::NEG_INFINITY
            };
            if value > best {
                best = value;
                best_w = candidate;
            }
            for (val, v) in pairs {
                if val <= opts.feasibility_tol {
                    break;
                }
                let g: Vec<f64> = set.observables().iter().map(|o| o.quadratic_form(&v)).collect();
                let h = oracle
                    .reference
                    .support()
                    .iter()
                    .map(|&s| v[s])
                    .sum::<C64>()
                    .norm_sqr();
                lp.add_cut(g.clone(), h)?;
                cuts.push((g, h));
                added += 1;
            }
            if added > 0 {
                break;
            }
        }
        if added == 0 {
            // the LP optimum itself is feasible
            upper = best.max(upper.min(sol.value));
            converged = true;
            break;
        }
    }
    if !converged {
        upper = lp.solve(opts.max_lp_iterations)?.value;
        log::warn!("cutting planes stopped after {rounds} rounds; gap {:e}", upper - best);
    }

    let mut residual = oracle.lambda_max(&best_w)?;
    if let Some(i) = id {
        if residual > 0.0 {
            best_w[i] -= residual / set.observables()[i].scale();
            residual = oracle.lambda_max(&best_w)?;
        }
    }
    if residual > opts.feasibility_tol {
        best_w = vec![0.0; set.len()];
        residual = oracle.lambda_max(&best_w)?;
    }
    let raw = objective(&c, &best_w);
    let cert = SdpCertificate {
        branch: opts.branch,
        weights: set
            .observables()
            .iter()
            .zip(&best_w)
            .map(|(o, &weight)| NamedWeight {
                observable: o.name().to_string(),
                weight,
            })
            .collect(),
        lambda_max_residual: residual,
        bound_bits: bits_from_raw(raw),
        raw_value: raw,
        upper_bound: upper,
        rounds,
        cuts: lp.n_cuts(),
        converged,
    };
    let mut report = BoundReport::new(Method::Sdp, raw, Certificate::Sdp(cert));
    if !converged {
        report
            .warnings
            .push("iteration cap reached; best feasible certificate returned".into());
    }
    Ok(report)
}
