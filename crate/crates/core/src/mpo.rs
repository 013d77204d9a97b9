//! Bounds on the Frobenius error of approximating a density operator by a
//! matrix-product operator of bond dimension `D`.
//!
//! `ρ` is read as a vector on a chain of `N` sites with local dimension 4,
//! the row and column bit of each site interleaved, so `‖ρ‖_F` is the vector
//! norm. Any bond-`D` MPO has rank at most `D` across every cut, so the best
//! rank-`D` error at a single cut (Eckart–Young) is a lower bound. A
//! left-to-right sweep of truncated SVDs constructs an explicit bond-`D`
//! approximant; its error is the upper bound.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::basis;
use crate::eig;
use crate::error::{Error, Result};
use crate::states::DensityOperator;

/// Largest chain handled.
pub const MAX_SITES: usize = 10;

/// Relative size below which Gram eigenvalues count as zero.
const ZERO_CUTOFF: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MpoErrorBounds {
    pub bond_dimension: usize,
    pub lower: f64,
    pub upper: f64,
}

/// Chain-ordered vectorization: site `k` contributes the base-4 digit
/// `2 r_k + c_k` at position `N-1-k`.
pub fn vectorize(rho: &DMatrix<C64>, n_sites: usize) -> Vec<C64> {
    let dim = basis::dim(n_sites);
    let mut v = vec![C64::new(0.0, 0.0); dim * dim];
    for c in 0..dim {
        for r in 0..dim {
            v[interleave(r, c, n_sites)] = rho[(r, c)];
        }
    }
    v
}

fn interleave(r: usize, c: usize, n_sites: usize) -> usize {
    let mut idx = 0usize;
    for p in 0..n_sites {
        idx |= ((r >> p) & 1) << (2 * p + 1);
        idx |= ((c >> p) & 1) << (2 * p);
    }
    idx
}

/// Gram matrix `A A†` of the row-major `rows x cols` matrix stored in `a`.
fn gram_rows(a: &[C64], rows: usize, cols: usize) -> DMatrix<C64> {
    let mut g = DMatrix::<C64>::zeros(rows, rows);
    for i in 0..rows {
        let ri = &a[i * cols..(i + 1) * cols];
        for j in 0..=i {
            let rj = &a[j * cols..(j + 1) * cols];
            let s: C64 = ri.iter().zip(rj).map(|(x, y)| x * y.conj()).sum();
            g[(i, j)] = s;
            g[(j, i)] = s.conj();
        }
    }
    g
}

/// Gram matrix `A† A`.
fn gram_cols(a: &[C64], rows: usize, cols: usize) -> DMatrix<C64> {
    let mut g = DMatrix::<C64>::zeros(cols, cols);
    for i in 0..rows {
        let row = &a[i * cols..(i + 1) * cols];
        for p in 0..cols {
            let x = row[p].conj();
            if x == C64::new(0.0, 0.0) {
                continue;
            }
            for q in 0..cols {
                g[(p, q)] += x * row[q];
            }
        }
    }
    g
}

fn clean(mut ev: Vec<f64>, total: f64) -> Vec<f64> {
    for e in ev.iter_mut() {
        if *e < ZERO_CUTOFF * total {
            *e = 0.0;
        }
    }
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

/// Squared singular values across the cut after site `cut` (0-based),
/// non-increasing.
fn cut_spectrum(v: &[C64], cut: usize) -> Vec<f64> {
    let rows = 1usize << (2 * (cut + 1));
    let cols = v.len() / rows;
    let total: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    let g = if rows <= cols {
        gram_rows(v, rows, cols)
    } else {
        gram_cols(v, rows, cols)
    };
    clean(eig::dense_eigenvalues(&g), total)
}

/// Operator-Schmidt values across the cut after site `cut`.
pub fn operator_schmidt_values(rho: &DensityOperator, cut: usize) -> Result<Vec<f64>> {
    let n = rho.n_sites();
    if cut + 1 >= n {
        return Err(Error::InvalidArgument(format!("no cut after site {cut} in a chain of {n}")));
    }
    let v = vectorize(rho.matrix(), n);
    Ok(cut_spectrum(&v, cut).into_iter().map(f64::sqrt).collect())
}

fn tail(spectrum: &[f64], d: usize) -> f64 {
    spectrum.iter().skip(d).sum::<f64>().max(0.0)
}

/// Error of the left-to-right truncated-SVD sweep; the cores are
/// left-orthonormal, so the squared errors of the steps add up.
fn sweep_error(v: &[C64], n_sites: usize, d: usize) -> f64 {
    let mut rem = v.to_vec();
    let mut r = 1usize;
    let mut err2 = 0.0;
    for _ in 0..n_sites.saturating_sub(1) {
        let rows = r * 4;
        let cols = rem.len() / rows;
        let total: f64 = rem.iter().map(|z| z.norm_sqr()).sum();
        let g = gram_rows(&rem, rows, cols);
        let (vals, vecs) = eig::dense_eigh(&g);
        // descending order
        let order: Vec<usize> = (0..rows).rev().collect();
        let keep = d.min(rows);
        let spectrum = clean(vals.clone(), total);
        err2 += tail(&spectrum, keep);
        let mut next = vec![C64::new(0.0, 0.0); keep * cols];
        for (k, &col) in order.iter().take(keep).enumerate() {
            for i in 0..rows {
                let u = vecs[(i, col)].conj();
                if u == C64::new(0.0, 0.0) {
                    continue;
                }
                let src = &rem[i * cols..(i + 1) * cols];
                for (t, x) in next[k * cols..(k + 1) * cols].iter_mut().zip(src) {
                    *t += u * x;
                }
            }
        }
        rem = next;
        r = keep;
    }
    err2.sqrt()
}

pub fn mpo_error_bounds(rho: &DensityOperator, d: usize) -> Result<MpoErrorBounds> {
    let n = rho.n_sites();
    if d < 1 {
        return Err(Error::InvalidArgument("bond dimension must be at least 1".into()));
    }
    if n > MAX_SITES {
        return Err(Error::InvalidArgument(format!(
            "MPO bounds support at most {MAX_SITES} sites, got {n}"
        )));
    }
    let v = vectorize(rho.matrix(), n);
    let mut lower2 = 0.0f64;
    for cut in 0..n.saturating_sub(1) {
        lower2 = lower2.max(tail(&cut_spectrum(&v, cut), d));
    }
    let lower = lower2.sqrt();
    // rounding can put the sweep error a hair below the single-cut bound
    let upper = sweep_error(&v, n, d).max(lower);
    Ok(MpoErrorBounds {
        bond_dimension: d,
        lower,
        upper,
    })
}

/// Bounds for `D = 1..=d_max`, computed with shared work.
pub fn mpo_error_bounds_range(rho: &DensityOperator, d_max: usize) -> Result<Vec<MpoErrorBounds>> {
    let n = rho.n_sites();
    if n > MAX_SITES {
        return Err(Error::InvalidArgument(format!(
            "MPO bounds support at most {MAX_SITES} sites, got {n}"
        )));
    }
    let v = vectorize(rho.matrix(), n);
    let spectra: Vec<Vec<f64>> = (0..n.saturating_sub(1)).map(|c| cut_spectrum(&v, c)).collect();
    Ok((1..=d_max)
        .map(|d| {
            let lower = spectra.iter().map(|s| tail(s, d)).fold(0.0, f64::max).sqrt();
            MpoErrorBounds {
                bond_dimension: d,
                lower,
                upper: sweep_error(&v, n, d).max(lower),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{schmidt_spectrum, StateVector};
    use crate::witness::{BellReference, Branch};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_pure(n: usize, rng: &mut impl Rng) -> StateVector {
        let amps = (0..basis::dim(n))
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        StateVector::from_unnormalized(n, amps).unwrap()
    }

    #[test]
    fn maximally_mixed_is_a_product_operator() {
        let rho = DensityOperator::maximally_mixed(6).unwrap();
        let b = mpo_error_bounds(&rho, 1).unwrap();
        assert_eq!((b.lower, b.upper), (0.0, 0.0));
    }

    #[test]
    fn reference_state_middle_cut() {
        let phi = BellReference::new(4, Branch::Ferro).unwrap();
        let rho = phi.normalized().to_density().unwrap();
        let s = operator_schmidt_values(&rho, 1).unwrap();
        assert_eq!(s.len(), 16);
        for x in &s {
            assert!((x - 0.25).abs() < 1e-12);
        }
        let b = mpo_error_bounds(&rho, 2).unwrap();
        assert!((b.lower - 14f64.sqrt() / 4.0).abs() < 1e-12);
        assert!(b.upper >= b.lower);
        let full = mpo_error_bounds(&rho, 16).unwrap();
        assert_eq!((full.lower, full.upper), (0.0, 0.0));
    }

    #[test]
    fn pure_state_operator_schmidt_values_are_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let psi = random_pure(4, &mut rng);
        let lam = schmidt_spectrum(&psi).unwrap().coefficients;
        let mut want: Vec<f64> = lam.iter().flat_map(|a| lam.iter().map(move |b| a * b)).collect();
        want.sort_by(|a, b| b.total_cmp(a));
        let got = operator_schmidt_values(&psi.to_density().unwrap(), 1).unwrap();
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-10);
        }
    }

    /// Explicit reconstruction of the sweep approximant as an oracle.
    fn sweep_reconstruction_error(v: &[C64], n: usize, d: usize) -> f64 {
        // sequential projections: v ≈ P_{n-2} ... P_0 v with P_k the rank-d
        // projector on the left block at cut k, built from the truncated state
        let mut approx = v.to_vec();
        let mut left: DMatrix<C64> = DMatrix::identity(1, 1);
        for cut in 0..n - 1 {
            let rows = 1usize << (2 * (cut + 1));
            let cols = v.len() / rows;
            let r = left.ncols();
            // left ⊗ I_4 basis
            let mut big = DMatrix::<C64>::zeros(rows, r * 4);
            for i in 0..left.nrows() {
                for a in 0..r {
                    for q in 0..4 {
                        big[(i * 4 + q, a * 4 + q)] = left[(i, a)];
                    }
                }
            }
            let a = DMatrix::from_row_slice(rows, cols, &approx);
            let core = big.adjoint() * &a;
            let svd = core.clone().svd(true, false);
            let u = svd.u.unwrap();
            let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
            idx.sort_by(|&x, &y| svd.singular_values[y].total_cmp(&svd.singular_values[x]));
            let keep = d.min(idx.len());
            let uk = DMatrix::from_fn(u.nrows(), keep, |i, k| u[(i, idx[k])]);
            left = &big * uk;
            let proj = &left * (left.adjoint() * &a);
            approx = (0..rows)
                .flat_map(|i| (0..cols).map(move |j| (i, j)))
                .map(|(i, j)| proj[(i, j)])
                .collect();
        }
        v.iter().zip(&approx).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
    }

    #[test]
    fn sweep_error_matches_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let states: Vec<_> = (0..3).map(|_| random_pure(4, &mut rng)).collect();
        let rho = DensityOperator::mixture(&states, &[0.5, 0.3, 0.2]).unwrap();
        let v = vectorize(rho.matrix(), 4);
        for d in 1..=6 {
            let a = sweep_error(&v, 4, d);
            let b = sweep_reconstruction_error(&v, 4, d);
            assert!((a - b).abs() < 1e-9, "D = {d}: {a} vs {b}");
        }
    }

    #[test]
    fn bounds_ordered_and_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for n in [2usize, 4, 6] {
            let states: Vec<_> = (0..2).map(|_| random_pure(n, &mut rng)).collect();
            let rho = DensityOperator::mixture(&states, &[0.6, 0.4]).unwrap();
            let fro = rho.matrix().norm();
            let bounds = mpo_error_bounds_range(&rho, 6).unwrap();
            for w in bounds.windows(2) {
                assert!(w[1].lower <= w[0].lower + 1e-12);
                assert!(w[1].upper <= w[0].upper + 1e-12);
            }
            for b in &bounds {
                assert!(b.lower <= b.upper);
                assert!(b.upper <= fro + 1e-12);
                let single = mpo_error_bounds(&rho, b.bond_dimension).unwrap();
                assert_eq!(single, *b);
            }
        }
    }

    #[test]
    fn rejects_zero_bond_dimension() {
        let rho = DensityOperator::maximally_mixed(2).unwrap();
        assert!(mpo_error_bounds(&rho, 0).is_err());
    }
}
