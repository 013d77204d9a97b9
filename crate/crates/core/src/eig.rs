//! Extremal eigenpairs of Hermitian operators.
//!
//! The iterative solver is a Lanczos/Rayleigh–Ritz loop with full
//! reorthogonalization and thick restarts. Operators are only ever touched
//! through [`LinearOperator::apply`], so `2^N`-dimensional Hamiltonians never
//! have to be materialized. A dense solver is provided as an oracle and as a
//! fallback for small dimensions.

use nalgebra::{ComplexField, DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Field of vector entries: `f64` for real symmetric operators, `Complex64`
/// for Hermitian ones.
pub trait Scalar: ComplexField<RealField = f64> + Copy + Send + Sync {
    fn sample<R: Rng>(rng: &mut R) -> Self;
}

impl Scalar for f64 {
    fn sample<R: Rng>(rng: &mut R) -> Self {
        rng.gen_range(-1.0..1.0)
    }
}

impl Scalar for C64 {
    fn sample<R: Rng>(rng: &mut R) -> Self {
        C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    }
}

/// Matrix-free Hermitian operator.
pub trait LinearOperator<T: Scalar>: Sync {
    fn dim(&self) -> usize;

    /// Writes `A x` into `y`, overwriting it.
    fn apply(&self, x: &[T], y: &mut [T]);
}

/// Wraps a closure as a [`LinearOperator`].
pub struct FnOperator<F> {
    dim: usize,
    f: F,
}

impl<F> FnOperator<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<T: Scalar, F: Fn(&[T], &mut [T]) + Sync> LinearOperator<T> for FnOperator<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        (self.f)(x, y)
    }
}

#[derive(Debug, Clone)]
pub struct LanczosOptions {
    /// Required residual norm `‖A v − λ v‖`.
    pub tol: f64,
    /// Maximum number of operator applications per solve.
    pub max_iter: usize,
    /// Maximum Krylov basis size before a thick restart.
    pub krylov_dim: usize,
    /// Number of Ritz vectors kept across a restart.
    pub keep: usize,
    /// Seed of the pseudo-random start vector.
    pub seed: u64,
    /// Run a second, deflated solve to measure the gap to the next level.
    pub compute_gap: bool,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 20_000,
            krylov_dim: 48,
            keep: 12,
            seed: 0x5eed_1e55,
            compute_gap: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EigResult<T> {
    pub value: f64,
    pub vector: Vec<T>,
    pub residual_norm: f64,
    /// Distance to the second-lowest eigenvalue, `+inf` when not computed.
    pub degeneracy_gap: f64,
    pub degenerate: bool,
    pub applications: usize,
    pub seed: u64,
    /// Smallest Ritz value after every expansion step.
    pub ritz_history: Vec<f64>,
}

/// Gap below which a ground state is treated as degenerate.
pub fn degeneracy_threshold(value: f64) -> f64 {
    1e-8 * value.abs().max(1.0)
}

pub fn inner<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (x, y)| acc + x.conjugate() * *y)
}

pub fn norm<T: Scalar>(a: &[T]) -> f64 {
    a.iter().map(|x| x.modulus_squared()).sum::<f64>().sqrt()
}

fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * *xi;
    }
}

fn scale<T: Scalar>(v: &mut [T], s: f64) {
    for x in v.iter_mut() {
        *x = x.scale(s);
    }
}

/// Removes the components of `w` along each (orthonormal) vector in `basis`.
fn orthogonalize<T: Scalar>(basis: &[Vec<T>], w: &mut [T]) {
    for _ in 0..2 {
        for b in basis {
            let c = inner(b, w);
            axpy(-c, b, w);
        }
    }
}

/// Lowest eigenpair, plus the gap to the next eigenvalue when
/// `opts.compute_gap` is set.
pub fn smallest_eigpair<T: Scalar, A: LinearOperator<T>>(
    op: &A,
    opts: &LanczosOptions,
) -> Result<EigResult<T>> {
    smallest_eigpair_with(op, opts, None)
}

/// Same as [`smallest_eigpair`], restricted to the range of `projector`.
///
/// The projector must commute with the operator; it is applied to the start
/// vector and after every operator application.
pub fn smallest_eigpair_with<T: Scalar, A: LinearOperator<T>>(
    op: &A,
    opts: &LanczosOptions,
    projector: Option<&(dyn Fn(&mut [T]) + Sync)>,
) -> Result<EigResult<T>> {
    if op.dim() < 2 {
        return Err(Error::InvalidArgument(format!(
            "operator dimension must be at least 2, got {}",
            op.dim()
        )));
    }
    let first = lowest(op, opts, &[], projector, opts.seed)?;
    let mut applications = first.applications;
    let mut gap = f64::INFINITY;
    if opts.compute_gap {
        let locked = vec![first.vector.clone()];
        match lowest(op, opts, &locked, projector, opts.seed.wrapping_add(1)) {
            Ok(second) => {
                applications += second.applications;
                gap = (second.value - first.value).max(0.0);
            }
            Err(Error::InvalidArgument(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(EigResult {
        value: first.value,
        degenerate: gap < degeneracy_threshold(first.value),
        vector: first.vector,
        residual_norm: first.residual,
        degeneracy_gap: gap,
        applications,
        seed: opts.seed,
        ritz_history: first.history,
    })
}

/// Lowest eigenvalue in the orthogonal complement of `locked`.
pub fn smallest_eigpair_deflated<T: Scalar, A: LinearOperator<T>>(
    op: &A,
    opts: &LanczosOptions,
    locked: &[Vec<T>],
    projector: Option<&(dyn Fn(&mut [T]) + Sync)>,
) -> Result<(f64, Vec<T>, f64)> {
    let run = lowest(op, opts, locked, projector, opts.seed)?;
    Ok((run.value, run.vector, run.residual))
}

struct Run<T> {
    value: f64,
    vector: Vec<T>,
    residual: f64,
    applications: usize,
    history: Vec<f64>,
}

fn ritz_vector<T: Scalar>(basis: &[Vec<T>], coeffs: &[T]) -> Vec<T> {
    let n = basis[0].len();
    let mut y = vec![T::zero(); n];
    for (b, &c) in basis.iter().zip(coeffs) {
        axpy(c, b, &mut y);
    }
    let nrm = norm(&y);
    scale(&mut y, 1.0 / nrm);
    y
}

fn lowest<T: Scalar, A: LinearOperator<T>>(
    op: &A,
    opts: &LanczosOptions,
    locked: &[Vec<T>],
    projector: Option<&(dyn Fn(&mut [T]) + Sync)>,
    seed: u64,
) -> Result<Run<T>> {
    let n = op.dim();
    if locked.len() >= n {
        return Err(Error::InvalidArgument(
            "deflation leaves an empty subspace".into(),
        ));
    }
    let m_max = opts.krylov_dim.max(2).min(n - locked.len());
    let keep = opts.keep.clamp(1, m_max.saturating_sub(1).max(1));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut start: Vec<T> = (0..n).map(|_| T::sample(&mut rng)).collect();
    if let Some(p) = projector {
        p(&mut start);
    }
    orthogonalize(locked, &mut start);
    let nrm = norm(&start);
    if nrm < 1e-300 {
        return Err(Error::InvalidArgument(
            "start vector vanishes in the requested subspace".into(),
        ));
    }
    scale(&mut start, 1.0 / nrm);

    let mut basis: Vec<Vec<T>> = vec![start];
    let mut h = DMatrix::<T>::zeros(m_max, m_max);
    let mut w = vec![T::zero(); n];
    let mut history = Vec::new();
    let mut applications = 0usize;
    let mut best_residual = f64::INFINITY;

    loop {
        let j = basis.len() - 1;
        op.apply(&basis[j], &mut w);
        applications += 1;
        if let Some(p) = projector {
            p(&mut w);
        }
        orthogonalize(locked, &mut w);
        // classical Gram-Schmidt, twice
        for i in 0..=j {
            h[(i, j)] = T::zero();
        }
        for _ in 0..2 {
            for (i, b) in basis.iter().enumerate() {
                let c = inner(b, &w);
                h[(i, j)] += c;
                axpy(-c, b, &mut w);
            }
        }
        for i in 0..j {
            h[(j, i)] = h[(i, j)].conjugate();
        }
        h[(j, j)] = T::from_real(h[(j, j)].real());

        let k = j + 1;
        let sub = h.view((0, 0), (k, k)).into_owned();
        let (theta, vecs) = dense_eigh(&sub);
        history.push(theta[0]);
        let beta = norm(&w);
        let estimate = beta * vecs[(k - 1, 0)].modulus();
        let exhausted = k >= n - locked.len();
        let breakdown = beta <= 1e-13 * theta.iter().fold(1.0f64, |a, t| a.max(t.abs()));

        if estimate < 0.5 * opts.tol || breakdown || exhausted {
            let coeffs: Vec<T> = (0..k).map(|i| vecs[(i, 0)]).collect();
            let y = ritz_vector(&basis, &coeffs);
            let mut ay = vec![T::zero(); n];
            op.apply(&y, &mut ay);
            applications += 1;
            let value = inner(&y, &ay).real();
            axpy(T::from_real(-value), &y, &mut ay);
            let residual = norm(&ay);
            best_residual = best_residual.min(residual);
            if residual < opts.tol {
                return Ok(Run {
                    value,
                    vector: y,
                    residual,
                    applications,
                    history,
                });
            }
            if breakdown || exhausted {
                // rounding stalled the space; restart from the best vector
                basis = vec![y];
                h.fill(T::zero());
                continue;
            }
        } else {
            best_residual = best_residual.min(estimate);
        }

        if applications >= opts.max_iter {
            return Err(Error::EigNotConverged {
                iterations: applications,
                residual: best_residual,
            });
        }

        scale(&mut w, 1.0 / beta);
        if k == m_max {
            let q = keep.min(k - 1).max(1);
            let kept: Vec<Vec<T>> = (0..q)
                .map(|c| {
                    let coeffs: Vec<T> = (0..k).map(|i| vecs[(i, c)]).collect();
                    ritz_vector(&basis, &coeffs)
                })
                .collect();
            let mut ortho: Vec<Vec<T>> = Vec::with_capacity(q + 1);
            for mut y in kept {
                orthogonalize(&ortho, &mut y);
                let ny = norm(&y);
                scale(&mut y, 1.0 / ny);
                ortho.push(y);
            }
            h.fill(T::zero());
            for (c, t) in theta.iter().take(q).enumerate() {
                h[(c, c)] = T::from_real(*t);
            }
            orthogonalize(&ortho, &mut w);
            let nw = norm(&w);
            scale(&mut w, 1.0 / nw);
            ortho.push(w.clone());
            basis = ortho;
        } else {
            basis.push(w.clone());
        }
    }
}

/// Dense Hermitian eigendecomposition with eigenvalues in ascending order.
pub fn dense_eigh<T: Scalar>(m: &DMatrix<T>) -> (Vec<f64>, DMatrix<T>) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::<T>::zeros(n, n);
    for (c, &i) in order.iter().enumerate() {
        vectors.set_column(c, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

/// Dense eigenvalues only, ascending.
pub fn dense_eigenvalues<T: Scalar>(m: &DMatrix<T>) -> Vec<f64> {
    let mut v: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Builds the dense matrix of an operator column by column.
pub fn materialize<T: Scalar, A: LinearOperator<T>>(op: &A) -> DMatrix<T> {
    let n = op.dim();
    let mut m = DMatrix::<T>::zeros(n, n);
    let mut e = vec![T::zero(); n];
    let mut col = vec![T::zero(); n];
    for j in 0..n {
        e[j] = T::one();
        op.apply(&e, &mut col);
        for (i, c) in col.iter().enumerate() {
            m[(i, j)] = *c;
        }
        e[j] = T::zero();
    }
    m
}
