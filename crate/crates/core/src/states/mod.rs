//! Pure and mixed states of the chain and exact bipartite entanglement
//! functionals across the fixed cut between sites `0..N/2` and `N/2..N`.
//!
//! Logarithms are base 2 throughout.

mod snapshot;

pub use snapshot::{read_snapshot, write_snapshot, Snapshot, SnapshotState};

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::basis;
use crate::eig;
use crate::error::{Error, Result};

/// Largest chain for dense density operators (`4096 x 4096`).
pub const MAX_DENSE_SITES: usize = 12;
/// Largest chain for pure-state paths.
pub const MAX_PURE_SITES: usize = 24;

const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_sites: usize,
    amps: Vec<C64>,
}

impl StateVector {
    /// Wraps amplitudes whose Euclidean norm is 1 within `1e-12`.
    pub fn new(n_sites: usize, amps: Vec<C64>) -> Result<Self> {
        check_len(n_sites, amps.len(), MAX_PURE_SITES)?;
        let nrm = eig::norm(&amps);
        if (nrm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidState(format!("norm {nrm} differs from 1")));
        }
        Ok(Self { n_sites, amps })
    }

    pub fn from_unnormalized(n_sites: usize, mut amps: Vec<C64>) -> Result<Self> {
        check_len(n_sites, amps.len(), MAX_PURE_SITES)?;
        let nrm = eig::norm(&amps);
        if !(nrm > 0.0 && nrm.is_finite()) {
            return Err(Error::InvalidState("cannot normalize a zero vector".into()));
        }
        for a in amps.iter_mut() {
            *a /= nrm;
        }
        Ok(Self { n_sites, amps })
    }

    pub fn basis_state(n_sites: usize, index: usize) -> Result<Self> {
        let mut amps = vec![ZERO; basis::dim(n_sites)];
        if index >= amps.len() {
            return Err(Error::InvalidArgument(format!("basis index {index} out of range")));
        }
        amps[index] = C64::new(1.0, 0.0);
        Self::new(n_sites, amps)
    }

    /// The same single-site state `(a, b)` on every site.
    pub fn product(n_sites: usize, site: [C64; 2]) -> Result<Self> {
        let dim = basis::dim(n_sites);
        let amps = (0..dim)
            .map(|s| {
                (0..n_sites).fold(C64::new(1.0, 0.0), |acc, i| {
                    acc * site[usize::from(s & basis::site_mask(n_sites, i) != 0)]
                })
            })
            .collect();
        Self::from_unnormalized(n_sites, amps)
    }

    /// `|+⟩^⊗N`, the `σ_x = +1` product state.
    pub fn plus_state(n_sites: usize) -> Result<Self> {
        let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self::product(n_sites, [h, h])
    }

    /// `|-⟩^⊗N`, the `σ_x = -1` product state.
    pub fn minus_state(n_sites: usize) -> Result<Self> {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self::product(n_sites, [C64::new(h, 0.0), C64::new(-h, 0.0)])
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    /// `⟨self|other⟩`.
    pub fn overlap(&self, other: &StateVector) -> C64 {
        eig::inner(&self.amps, &other.amps)
    }

    pub fn to_density(&self) -> Result<DensityOperator> {
        DensityOperator::from_pure(self)
    }
}

fn check_len(n_sites: usize, len: usize, cap: usize) -> Result<()> {
    if n_sites == 0 || n_sites > cap {
        return Err(Error::InvalidArgument(format!(
            "number of sites must be in 1..={cap}, got {n_sites}"
        )));
    }
    if len != basis::dim(n_sites) {
        return Err(Error::DimensionMismatch {
            expected: basis::dim(n_sites),
            actual: len,
        });
    }
    Ok(())
}

fn check_even(n_sites: usize) -> Result<()> {
    if n_sites % 2 != 0 || n_sites == 0 {
        return Err(Error::OddSites(n_sites));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    n_sites: usize,
    matrix: DMatrix<C64>,
}

impl DensityOperator {
    /// Validates Hermiticity (`1e-10`), unit trace (`1e-10`) and numerical
    /// positivity (smallest eigenvalue `>= -1e-8`).
    pub fn new(n_sites: usize, matrix: DMatrix<C64>) -> Result<Self> {
        check_len(n_sites, matrix.nrows(), MAX_DENSE_SITES)?;
        if matrix.ncols() != matrix.nrows() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                actual: matrix.ncols(),
            });
        }
        let herm = hermiticity_error(&matrix);
        if herm > 1e-10 {
            return Err(Error::InvalidState(format!("not Hermitian (deviation {herm:e})")));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > 1e-10 || tr.im.abs() > 1e-10 {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let min = eig::dense_eigenvalues(&matrix)[0];
        if min < -1e-8 {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        Ok(Self { n_sites, matrix })
    }

    /// Skips validation; the caller guarantees a physical state.
    pub(crate) fn new_unchecked(n_sites: usize, matrix: DMatrix<C64>) -> Self {
        Self { n_sites, matrix }
    }

    pub fn from_pure(psi: &StateVector) -> Result<Self> {
        check_len(psi.n_sites, psi.dim(), MAX_DENSE_SITES)?;
        let v = DMatrix::from_column_slice(psi.dim(), 1, &psi.amps);
        Ok(Self {
            n_sites: psi.n_sites,
            matrix: &v * v.adjoint(),
        })
    }

    /// `(1/2)^⊗N`.
    pub fn maximally_mixed(n_sites: usize) -> Result<Self> {
        let dim = basis::dim(n_sites);
        check_len(n_sites, dim, MAX_DENSE_SITES)?;
        Ok(Self {
            n_sites,
            matrix: DMatrix::identity(dim, dim) * C64::new(1.0 / dim as f64, 0.0),
        })
    }

    /// Convex mixture `Σ p_k |ψ_k⟩⟨ψ_k|`; weights are normalized.
    pub fn mixture(states: &[StateVector], weights: &[f64]) -> Result<Self> {
        let first = states
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty mixture".into()))?;
        if states.len() != weights.len() || weights.iter().any(|&w| w < 0.0) {
            return Err(Error::InvalidArgument("weights must be non-negative, one per state".into()));
        }
        let total: f64 = weights.iter().sum();
        let dim = first.dim();
        let mut m = DMatrix::<C64>::zeros(dim, dim);
        for (s, &w) in states.iter().zip(weights) {
            let v = DMatrix::from_column_slice(dim, 1, &s.amps);
            m += (&v * v.adjoint()) * C64::new(w / total, 0.0);
        }
        Self::new(first.n_sites, m)
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    /// `⟨ψ|ρ|ψ⟩`.
    pub fn fidelity_with_pure(&self, psi: &StateVector) -> f64 {
        let v = DMatrix::from_column_slice(psi.dim(), 1, &psi.amps);
        (v.adjoint() * &self.matrix * v)[(0, 0)].re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        eig::dense_eigenvalues(&self.matrix)[0]
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }
}

pub(crate) fn hermiticity_error(m: &DMatrix<C64>) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..=j {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Partial transpose of a `2^N x 2^N` operator on the first `N/2` sites.
pub fn partial_transpose_matrix(n_sites: usize, m: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    check_even(n_sites)?;
    let dim = basis::dim(n_sites);
    if m.nrows() != dim || m.ncols() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: m.nrows(),
        });
    }
    let h = n_sites / 2;
    let low = basis::dim(h) - 1;
    Ok(DMatrix::from_fn(dim, dim, |r, c| {
        let (a, b) = (r >> h, r & low);
        let (ap, bp) = (c >> h, c & low);
        m[((ap << h) | b, (a << h) | bp)]
    }))
}

pub fn partial_transpose(rho: &DensityOperator) -> Result<DMatrix<C64>> {
    partial_transpose_matrix(rho.n_sites, &rho.matrix)
}

/// Trace norm of a Hermitian matrix from its eigenvalues.
pub fn trace_norm_hermitian(m: &DMatrix<C64>) -> f64 {
    eig::dense_eigenvalues(m).iter().map(|x| x.abs()).sum()
}

/// Trace norm from singular values; valid for any square matrix.
pub fn trace_norm_svd(m: &DMatrix<C64>) -> f64 {
    m.singular_values().iter().sum()
}

fn clamp_bits(e: f64) -> f64 {
    if (-1e-10..0.0).contains(&e) {
        0.0
    } else {
        e
    }
}

/// `log₂ ‖ρ^Γ‖₁`, with values in `[-1e-10, 0)` clamped to 0.
pub fn log_negativity(rho: &DensityOperator) -> Result<f64> {
    log_negativity_matrix(rho.n_sites, &rho.matrix)
}

/// Same as [`log_negativity`] for a raw Hermitian matrix.
pub fn log_negativity_matrix(n_sites: usize, m: &DMatrix<C64>) -> Result<f64> {
    let herm = hermiticity_error(m);
    if herm > 1e-10 {
        return Err(Error::InvalidState(format!("not Hermitian (deviation {herm:e})")));
    }
    let pt = partial_transpose_matrix(n_sites, m)?;
    Ok(clamp_bits(trace_norm_hermitian(&pt).log2()))
}

/// Schmidt coefficients, non-increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct SchmidtSpectrum {
    pub coefficients: Vec<f64>,
}

impl SchmidtSpectrum {
    /// `2 log₂ Σ λ_k`, the pure-state log-negativity.
    pub fn log_negativity(&self) -> f64 {
        clamp_bits(2.0 * self.coefficients.iter().sum::<f64>().log2())
    }

    /// `-Σ λ² log₂ λ²`.
    pub fn entropy(&self) -> f64 {
        entropy_bits(self.coefficients.iter().map(|l| l * l))
    }
}

fn coefficient_matrix(psi: &StateVector) -> Result<DMatrix<C64>> {
    check_even(psi.n_sites)?;
    let h = psi.n_sites / 2;
    let side = basis::dim(h);
    Ok(DMatrix::from_fn(side, side, |a, b| psi.amps[(a << h) | b]))
}

pub fn schmidt_spectrum(psi: &StateVector) -> Result<SchmidtSpectrum> {
    let m = coefficient_matrix(psi)?;
    let mut coefficients: Vec<f64> = m.singular_values().iter().copied().collect();
    coefficients.sort_by(|a, b| b.total_cmp(a));
    Ok(SchmidtSpectrum { coefficients })
}

/// Log-negativity of `|ψ⟩⟨ψ|` via the Schmidt spectrum.
pub fn log_negativity_pure(psi: &StateVector) -> Result<f64> {
    Ok(schmidt_spectrum(psi)?.log_negativity())
}

fn entropy_bits(probs: impl Iterator<Item = f64>) -> f64 {
    probs
        .filter(|&p| p > 1e-14)
        .map(|p| -p * p.log2())
        .sum::<f64>()
        .max(0.0)
}

/// Reduced state of sites `N/2..N` (the first half traced out).
pub fn reduced_second_half(rho: &DensityOperator) -> Result<DMatrix<C64>> {
    check_even(rho.n_sites)?;
    let h = rho.n_sites / 2;
    let side = basis::dim(h);
    let mut out = DMatrix::<C64>::zeros(side, side);
    for a in 0..side {
        for b in 0..side {
            for bp in 0..side {
                out[(b, bp)] += rho.matrix[((a << h) | b, (a << h) | bp)];
            }
        }
    }
    Ok(out)
}

/// Von Neumann entropy (bits) of the second half.
pub fn block_entropy(rho: &DensityOperator) -> Result<f64> {
    let red = reduced_second_half(rho)?;
    Ok(entropy_bits(eig::dense_eigenvalues(&red).into_iter()))
}
