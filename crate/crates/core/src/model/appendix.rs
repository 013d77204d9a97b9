//! Numerical checks of the definiteness criterion for algebraic couplings.
//!
//! With `ζ(i) = (N+1)/2 - i` (1-based), ferromagnetic algebraic couplings give
//! `-𝒥_ij = (ζ(i) + ζ(j))^{-p}`, the entrywise `p`-th power of the Cauchy-like
//! matrix `d_ij = 1/(ζ(i) + ζ(j))`. `d` is a Hilbert-type matrix whose
//! smallest eigenvalue underflows double precision around `N/2 ≈ 12`, so its
//! positive definiteness is decided exactly: `d_ij = 1/(N+1-i-j)` is rational
//! and Gaussian elimination over the rationals yields the pivots of Sylvester's
//! criterion.

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::Serialize;

use super::{algebraic_couplings, cross_block, DEFINITENESS_TOL};
use crate::eig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize)]
pub struct AppendixReport {
    pub n_half: usize,
    pub p: f64,
    /// Smallest eigenvalue of `d` in double precision.
    pub d_min_eigenvalue: f64,
    /// Smallest pivot of the exact elimination of `d`.
    pub d_min_pivot: f64,
    pub d_positive_definite: bool,
    /// Smallest eigenvalue of `-𝒥`.
    pub neg_cross_block_min_eigenvalue: f64,
    pub cross_block_norm: f64,
    /// `λ_max(𝒥) <= 1e-10 ‖𝒥‖`.
    pub cross_block_nsd: bool,
    /// Smallest `τ >= 0` found with `log[d] + τE ⪰ 0`.
    pub tau: f64,
}

fn zeta_sum(n_half: usize, i: usize, j: usize) -> i64 {
    // ζ(i) + ζ(j) = N + 1 - i - j with 1-based i, j
    (2 * n_half + 1) as i64 - (i + 1) as i64 - (j + 1) as i64
}

pub fn d_matrix(n_half: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n_half, n_half, |i, j| 1.0 / zeta_sum(n_half, i, j) as f64)
}

/// Pivots of exact Gaussian elimination of `d` without row exchanges.
pub fn d_exact_pivots(n_half: usize) -> Vec<BigRational> {
    let mut a: Vec<Vec<BigRational>> = (0..n_half)
        .map(|i| {
            (0..n_half)
                .map(|j| BigRational::new(BigInt::from(1), BigInt::from(zeta_sum(n_half, i, j))))
                .collect()
        })
        .collect();
    let mut pivots = Vec::with_capacity(n_half);
    for k in 0..n_half {
        let pivot = a[k][k].clone();
        if pivot.is_zero() {
            pivots.push(pivot);
            break;
        }
        for i in k + 1..n_half {
            let f = &a[i][k] / &pivot;
            for j in k..n_half {
                let t = &f * &a[k][j];
                a[i][j] -= t;
            }
        }
        pivots.push(pivot);
    }
    pivots
}

fn min_eig(m: &DMatrix<f64>) -> f64 {
    eig::dense_eigenvalues(m)[0]
}

fn smallest_tau(log_d: &DMatrix<f64>) -> f64 {
    let n = log_d.nrows();
    let ones = DMatrix::from_element(n, n, 1.0);
    let threshold = -1e-10 * log_d.norm().max(1.0);
    let ok = |tau: f64| min_eig(&(log_d + &ones * tau)) >= threshold;
    if ok(0.0) {
        return 0.0;
    }
    let mut hi = 1.0;
    while !ok(hi) {
        hi *= 2.0;
        if hi > 1e15 {
            return f64::INFINITY;
        }
    }
    let mut lo = 0.0;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

pub fn validate_appendix_positivity(n_half: usize, p: f64) -> Result<AppendixReport> {
    if n_half < 1 {
        return Err(Error::InvalidArgument("n_half must be at least 1".into()));
    }
    let d = d_matrix(n_half);
    let d_min_eigenvalue = min_eig(&d);
    let pivots = d_exact_pivots(n_half);
    let d_positive_definite = pivots.len() == n_half && pivots.iter().all(|q| q.is_positive());
    let d_min_pivot = pivots
        .iter()
        .map(|q| q.to_f64().unwrap_or(0.0))
        .fold(f64::INFINITY, f64::min);

    let j = algebraic_couplings(2 * n_half, p, -1.0)?;
    let cb = cross_block(&j, DEFINITENESS_TOL)?;
    let log_d = d.map(f64::ln);
    Ok(AppendixReport {
        n_half,
        p,
        d_min_eigenvalue,
        d_min_pivot,
        d_positive_definite,
        neg_cross_block_min_eigenvalue: -cb.max_eigenvalue,
        cross_block_norm: cb.spectral_norm,
        cross_block_nsd: cb.max_eigenvalue <= DEFINITENESS_TOL * cb.spectral_norm,
        tau: smallest_tau(&log_d),
    })
}
