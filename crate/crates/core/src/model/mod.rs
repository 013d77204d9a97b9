//! Transverse-field Ising chains: coupling matrices, the matrix-free
//! Hamiltonian, the cross-block matrix that selects the Bell reference, and
//! ground states.
//!
//! The Hamiltonian is `H = Σ_{i<j} J_ij σ_z^i σ_z^j + B Σ_i σ_x^i`, one term
//! per unordered pair.

mod appendix;
mod ion_trap;

pub use appendix::{validate_appendix_positivity, AppendixReport};
pub use ion_trap::{
    coulomb_length, equilibrium_positions, ion_trap_couplings, transverse_modes, IonTrapSpec,
    TransverseModes,
};

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis;
use crate::eig::{self, LanczosOptions, LinearOperator, Scalar};
use crate::error::{Error, Result};
use crate::states::StateVector;
use crate::witness::Branch;

/// Relative tolerance of the mirror-symmetry check in [`cross_block`].
pub const REFLECTION_TOL: f64 = 1e-12;

/// Default relative threshold for classifying the cross-block matrix.
pub const DEFINITENESS_TOL: f64 = 1e-10;

const PARALLEL_DIM: usize = 1 << 14;

#[derive(Debug, Clone, PartialEq)]
pub struct SpinModel {
    n_sites: usize,
    couplings: DMatrix<f64>,
    field_b: f64,
}

impl SpinModel {
    pub fn new(couplings: DMatrix<f64>, field_b: f64) -> Result<Self> {
        let n = couplings.nrows();
        check_even(n)?;
        check_couplings(&couplings)?;
        if !field_b.is_finite() {
            return Err(Error::InvalidArgument(format!("field must be finite, got {field_b}")));
        }
        Ok(Self {
            n_sites: n,
            couplings,
            field_b,
        })
    }

    /// Algebraically decaying couplings `amplitude / |i-j|^p`.
    pub fn algebraic(n_sites: usize, p: f64, amplitude: f64, field_b: f64) -> Result<Self> {
        Self::new(algebraic_couplings(n_sites, p, amplitude)?, field_b)
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn dim(&self) -> usize {
        basis::dim(self.n_sites)
    }

    pub fn couplings(&self) -> &DMatrix<f64> {
        &self.couplings
    }

    pub fn field_b(&self) -> f64 {
        self.field_b
    }

    pub fn with_field(&self, field_b: f64) -> Self {
        Self {
            field_b,
            ..self.clone()
        }
    }

    pub fn j0(&self) -> f64 {
        j0_normalization(&self.couplings)
    }

    /// Upper bound on the operator norm, `Σ_{i<j}|J_ij| + N|B|`.
    pub fn norm_bound(&self) -> f64 {
        let mut s = self.n_sites as f64 * self.field_b.abs();
        for i in 0..self.n_sites {
            for j in i + 1..self.n_sites {
                s += self.couplings[(i, j)].abs();
            }
        }
        s
    }

    pub fn hamiltonian(&self) -> IsingHamiltonian {
        IsingHamiltonian::new(self)
    }

    pub fn cross_block(&self) -> Result<CrossBlockMatrix> {
        cross_block(&self.couplings, DEFINITENESS_TOL)
    }

    pub fn ground_state(&self) -> Result<GroundState> {
        ground_state(self, &GroundStateOptions::default())
    }
}

fn check_even(n: usize) -> Result<()> {
    if n < 2 || n % 2 != 0 {
        return Err(Error::OddSites(n));
    }
    Ok(())
}

fn check_couplings(j: &DMatrix<f64>) -> Result<()> {
    let n = j.nrows();
    if j.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: j.ncols(),
        });
    }
    for i in 0..n {
        if j[(i, i)] != 0.0 {
            return Err(Error::InvalidArgument(format!(
                "coupling diagonal must vanish, J[{i}][{i}] = {}",
                j[(i, i)]
            )));
        }
        for k in i + 1..n {
            if !j[(i, k)].is_finite() {
                return Err(Error::InvalidArgument(format!("J[{i}][{k}] is not finite")));
            }
            if j[(i, k)] != j[(k, i)] {
                return Err(Error::AsymmetricCouplings {
                    i,
                    j: k,
                    a: j[(i, k)],
                    b: j[(k, i)],
                });
            }
        }
    }
    Ok(())
}

pub fn algebraic_couplings(n: usize, p: f64, amplitude: f64) -> Result<DMatrix<f64>> {
    check_even(n)?;
    if !p.is_finite() || p < 0.0 {
        return Err(Error::InvalidArgument(format!("decay exponent must be finite and >= 0, got {p}")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            amplitude / (i.abs_diff(j) as f64).powf(p)
        }
    }))
}

/// `Σ_i |J_{i,i+1}| / (N-1)`, the energy unit of field axes.
pub fn j0_normalization(j: &DMatrix<f64>) -> f64 {
    let n = j.nrows();
    if n < 2 {
        return 0.0;
    }
    (0..n - 1).map(|i| j[(i, i + 1)].abs()).sum::<f64>() / (n - 1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Definiteness {
    NegativeSemidefinite,
    PositiveSemidefinite,
    Indefinite,
}

/// Couplings between mirrored halves, `𝒥_ij = J_{i, N-1-j}` (0-based).
#[derive(Debug, Clone)]
pub struct CrossBlockMatrix {
    pub entries: DMatrix<f64>,
    pub classification: Definiteness,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub spectral_norm: f64,
}

impl CrossBlockMatrix {
    /// Bell reference whose overlap equals the ground-state negativity.
    pub fn branch(&self) -> Option<Branch> {
        match self.classification {
            Definiteness::NegativeSemidefinite => Some(Branch::Ferro),
            Definiteness::PositiveSemidefinite => Some(Branch::Antiferro),
            Definiteness::Indefinite => None,
        }
    }
}

/// Checks `J_ij = J_{N-1-i, N-1-j}` up to [`REFLECTION_TOL`] relative to the
/// largest coupling.
pub fn check_reflection_symmetry(j: &DMatrix<f64>) -> Result<()> {
    let n = j.nrows();
    let scale = j.amax().max(f64::MIN_POSITIVE);
    for a in 0..n {
        for b in 0..n {
            let (ra, rb) = (n - 1 - a, n - 1 - b);
            if (j[(a, b)] - j[(ra, rb)]).abs() > REFLECTION_TOL * scale {
                return Err(Error::NotReflectionSymmetric {
                    i: a,
                    j: b,
                    ri: ra,
                    rj: rb,
                    a: j[(a, b)],
                    b: j[(ra, rb)],
                });
            }
        }
    }
    Ok(())
}

pub fn cross_block(j: &DMatrix<f64>, tol: f64) -> Result<CrossBlockMatrix> {
    let n = j.nrows();
    check_even(n)?;
    check_reflection_symmetry(j)?;
    let h = n / 2;
    let raw = DMatrix::from_fn(h, h, |a, b| j[(a, n - 1 - b)]);
    // exact symmetry up to the reflection tolerance; average the rounding away
    let entries = (&raw + raw.transpose()) * 0.5;
    let values = eig::dense_eigenvalues(&entries);
    let min = values[0];
    let max = values[h - 1];
    let norm = min.abs().max(max.abs());
    let classification = if max <= tol * norm {
        Definiteness::NegativeSemidefinite
    } else if min >= -tol * norm {
        Definiteness::PositiveSemidefinite
    } else {
        Definiteness::Indefinite
    };
    Ok(CrossBlockMatrix {
        entries,
        classification,
        min_eigenvalue: min,
        max_eigenvalue: max,
        spectral_norm: norm,
    })
}

/// Matrix-free Ising Hamiltonian: the `σ_z σ_z` part is a precomputed
/// diagonal, the field part flips one bit per term.
#[derive(Debug, Clone)]
pub struct IsingHamiltonian {
    n_sites: usize,
    field: f64,
    diagonal: Vec<f64>,
}

impl IsingHamiltonian {
    pub fn new(model: &SpinModel) -> Self {
        let n = model.n_sites;
        let pairs: Vec<(usize, usize, f64)> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |k| (i, k)))
            .map(|(i, k)| (basis::site_mask(n, i), basis::site_mask(n, k), model.couplings[(i, k)]))
            .filter(|&(_, _, c)| c != 0.0)
            .collect();
        let energy = |s: usize| {
            pairs
                .iter()
                .map(|&(mi, mk, c)| {
                    if ((s & mi) == 0) == ((s & mk) == 0) {
                        c
                    } else {
                        -c
                    }
                })
                .sum::<f64>()
        };
        let dim = model.dim();
        let diagonal = if dim >= PARALLEL_DIM {
            (0..dim).into_par_iter().map(energy).collect()
        } else {
            (0..dim).map(energy).collect()
        };
        Self {
            n_sites: n,
            field: model.field_b,
            diagonal,
        }
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn field(&self) -> f64 {
        self.field
    }

    /// Diagonal `Σ_{i<j} J_ij z_i z_j` per basis state.
    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    fn row<T: Scalar>(&self, x: &[T], s: usize) -> T {
        let mut acc = x[s].scale(self.diagonal[s]);
        if self.field != 0.0 {
            let mut flips = T::zero();
            for site in 0..self.n_sites {
                flips += x[s ^ basis::site_mask(self.n_sites, site)];
            }
            acc += flips.scale(self.field);
        }
        acc
    }

    /// `⟨v|H|v⟩` for a normalized vector.
    pub fn expectation(&self, v: &[C64]) -> f64 {
        let mut hv = vec![C64::new(0.0, 0.0); v.len()];
        LinearOperator::<C64>::apply(self, v, &mut hv);
        eig::inner(v, &hv).re
    }
}

impl<T: Scalar> LinearOperator<T> for IsingHamiltonian {
    fn dim(&self) -> usize {
        self.diagonal.len()
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        if y.len() >= PARALLEL_DIM {
            y.par_iter_mut()
                .enumerate()
                .for_each(|(s, out)| *out = self.row(x, s));
        } else {
            for (s, out) in y.iter_mut().enumerate() {
                *out = self.row(x, s);
            }
        }
    }
}

/// `H v` without materializing `H`.
pub fn apply_hamiltonian(model: &SpinModel, v: &StateVector) -> Result<Vec<C64>> {
    if v.n_sites() != model.n_sites {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            actual: v.amplitudes().len(),
        });
    }
    let h = model.hamiltonian();
    let mut out = vec![C64::new(0.0, 0.0); model.dim()];
    h.apply(v.amplitudes(), &mut out);
    Ok(out)
}

/// Dense `2^N x 2^N` Hamiltonian; test oracle only.
pub fn dense_hamiltonian(model: &SpinModel) -> DMatrix<f64> {
    let n = model.n_sites;
    let dim = model.dim();
    let mut m = DMatrix::<f64>::zeros(dim, dim);
    for s in 0..dim {
        let mut e = 0.0;
        for i in 0..n {
            for k in i + 1..n {
                e += model.couplings[(i, k)] * basis::z_value(n, i, s) * basis::z_value(n, k, s);
            }
        }
        m[(s, s)] = e;
        for i in 0..n {
            m[(s ^ basis::site_mask(n, i), s)] += model.field_b;
        }
    }
    m
}

#[derive(Debug, Clone)]
pub struct GroundStateOptions {
    pub lanczos: LanczosOptions,
    /// Residual tolerance relative to [`SpinModel::norm_bound`].
    pub relative_tol: f64,
}

impl Default for GroundStateOptions {
    fn default() -> Self {
        Self {
            lanczos: LanczosOptions::default(),
            relative_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GroundState {
    pub energy: f64,
    pub state: StateVector,
    /// Distance to the next level over the whole Hilbert space.
    pub gap: f64,
    pub degenerate: bool,
    pub residual_norm: f64,
}

/// Ground state of the chain.
///
/// For `B != 0` the ground state is non-degenerate and even under `⊗σ_x`, so
/// it is computed inside the even sector; the gap is the distance to the
/// lower of (second even level, lowest odd level). The sector restriction
/// keeps the vector accurate when the two parity sectors are nearly
/// degenerate.
pub fn ground_state(model: &SpinModel, opts: &GroundStateOptions) -> Result<GroundState> {
    let n = model.n_sites;
    let h = model.hamiltonian();
    let mut lopts = opts.lanczos.clone();
    lopts.tol = opts.relative_tol * model.norm_bound().max(1.0);
    lopts.compute_gap = false;
    let all = basis::all_mask(n);
    let even = move |v: &mut [f64]| project_parity(v, all, 1.0);
    let odd = move |v: &mut [f64]| project_parity(v, all, -1.0);

    let (e_even, v_even, r_even) =
        eig::smallest_eigpair_deflated::<f64, _>(&h, &lopts, &[], Some(&even))?;
    let (e_odd, v_odd, r_odd) =
        eig::smallest_eigpair_deflated::<f64, _>(&h, &lopts, &[], Some(&odd))?;
    let (energy, vector, res, other) = if e_even <= e_odd {
        (e_even, v_even, r_even, e_odd)
    } else {
        (e_odd, v_odd, r_odd, e_even)
    };
    let sector: &(dyn Fn(&mut [f64]) + Sync) = if e_even <= e_odd { &even } else { &odd };
    let second = eig::smallest_eigpair_deflated::<f64, _>(&h, &lopts, &[vector.clone()], Some(sector))
        .map(|r| r.0)
        .unwrap_or(f64::INFINITY);
    let gap = (other.min(second) - energy).max(0.0);
    let amps: Vec<C64> = vector.iter().map(|&x| C64::new(x, 0.0)).collect();
    Ok(GroundState {
        energy,
        state: StateVector::from_unnormalized(n, amps)?,
        gap,
        degenerate: gap < eig::degeneracy_threshold(energy),
        residual_norm: res,
    })
}

fn project_parity(v: &mut [f64], all: usize, sign: f64) {
    for s in 0..v.len() {
        let t = s ^ all;
        if s < t {
            let a = 0.5 * (v[s] + sign * v[t]);
            v[s] = a;
            v[t] = sign * a;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eig::dense_eigenvalues;

    #[test]
    fn algebraic_entries() {
        let j = algebraic_couplings(4, 1.0, -1.0).unwrap();
        assert_eq!(j[(0, 2)], -0.5);
        assert!((j[(0, 3)] + 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(j[(1, 1)], 0.0);
        let flat = algebraic_couplings(4, 0.0, -1.0).unwrap();
        for i in 0..4 {
            for k in 0..4 {
                assert_eq!(flat[(i, k)], if i == k { 0.0 } else { -1.0 });
            }
        }
        assert!(algebraic_couplings(5, 1.0, 1.0).is_err());
        assert!(algebraic_couplings(4, -0.5, 1.0).is_err());
    }

    #[test]
    fn j0_examples() {
        let mut j = DMatrix::zeros(3, 3);
        j[(0, 1)] = -1.0;
        j[(1, 0)] = -1.0;
        j[(1, 2)] = -3.0;
        j[(2, 1)] = -3.0;
        assert_eq!(j0_normalization(&j), 2.0);
        for &(n, p, a) in &[(4, 1.0, -1.0), (8, 0.3, 2.5), (10, 2.9, -0.7)] {
            let j = algebraic_couplings(n, p, a).unwrap();
            assert!((j0_normalization(&j) - f64::abs(a)).abs() < 1e-15);
        }
        assert_eq!(j0_normalization(&DMatrix::zeros(4, 4)), 0.0);
    }

    #[test]
    fn cross_block_ferro_n4() {
        let j = algebraic_couplings(4, 1.0, -1.0).unwrap();
        let cb = cross_block(&j, DEFINITENESS_TOL).unwrap();
        assert!((cb.entries[(0, 0)] + 1.0 / 3.0).abs() < 1e-15);
        assert!((cb.entries[(0, 1)] + 0.5).abs() < 1e-15);
        assert!((cb.entries[(1, 1)] + 1.0).abs() < 1e-15);
        assert_eq!(cb.classification, Definiteness::NegativeSemidefinite);
        // det = 1/3 - 1/4 = 1/12, trace = -4/3
        let prod = cb.min_eigenvalue * cb.max_eigenvalue;
        assert!((prod - 1.0 / 12.0).abs() < 1e-14);
        assert!(cb.max_eigenvalue < 0.0);
        assert_eq!(cb.branch(), Some(Branch::Ferro));

        let anti = cross_block(&(-j), DEFINITENESS_TOL).unwrap();
        assert_eq!(anti.classification, Definiteness::PositiveSemidefinite);
        assert_eq!(anti.branch(), Some(Branch::Antiferro));
    }

    #[test]
    fn cross_block_indefinite_and_asymmetric() {
        // 𝒥 = [[1, 2], [2, 1]] has eigenvalues 3 and -1
        let mut j = DMatrix::<f64>::zeros(4, 4);
        let set = |j: &mut DMatrix<f64>, a: usize, b: usize, v: f64| {
            j[(a, b)] = v;
            j[(b, a)] = v;
        };
        set(&mut j, 0, 3, 1.0);
        set(&mut j, 1, 2, 1.0);
        set(&mut j, 0, 2, 2.0);
        set(&mut j, 1, 3, 2.0);
        set(&mut j, 0, 1, -0.5);
        set(&mut j, 2, 3, -0.5);
        let cb = cross_block(&j, DEFINITENESS_TOL).unwrap();
        assert_eq!(cb.classification, Definiteness::Indefinite);
        assert!((cb.min_eigenvalue + 1.0).abs() < 1e-12);
        assert!((cb.max_eigenvalue - 3.0).abs() < 1e-12);
        assert_eq!(cb.branch(), None);

        set(&mut j, 0, 1, -0.4);
        match cross_block(&j, DEFINITENESS_TOL) {
            Err(Error::NotReflectionSymmetric { .. }) => {}
            other => panic!("expected reflection error, got {other:?}"),
        }
    }

    #[test]
    fn two_site_spectra() {
        let mut j = DMatrix::zeros(2, 2);
        j[(0, 1)] = -1.0;
        j[(1, 0)] = -1.0;
        let ising = SpinModel::new(j, 0.0).unwrap();
        let ev = dense_eigenvalues(&eig::materialize::<f64, _>(&ising.hamiltonian()));
        assert_eq!(ev, vec![-1.0, -1.0, 1.0, 1.0]);

        let free = SpinModel::new(DMatrix::zeros(2, 2), 1.0).unwrap();
        let ev = dense_eigenvalues(&eig::materialize::<f64, _>(&free.hamiltonian()));
        for (a, b) in ev.iter().zip([-2.0, 0.0, 0.0, 2.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn applicator_matches_dense_on_basis_vectors() {
        for n in [2usize, 4, 6, 8] {
            let model = SpinModel::algebraic(n, 1.3, -0.8, 0.7).unwrap();
            let dense = dense_hamiltonian(&model);
            let op = eig::materialize::<f64, _>(&model.hamiltonian());
            assert_eq!(op, dense, "N = {n}");
        }
    }

    #[test]
    fn ground_energy_matches_dense() {
        let model = SpinModel::algebraic(4, 1.0, -1.0, 1.0).unwrap();
        let gs = model.ground_state().unwrap();
        let dense = dense_eigenvalues(&dense_hamiltonian(&model));
        assert!((gs.energy - dense[0]).abs() < 1e-10);
        assert!((gs.gap - (dense[1] - dense[0])).abs() < 1e-8);
        assert!(!gs.degenerate);
    }

    #[test]
    fn zero_field_ferro_is_degenerate() {
        let model = SpinModel::algebraic(6, 1.0, -1.0, 0.0).unwrap();
        let gs = model.ground_state().unwrap();
        assert!(gs.degenerate);
        let res: eig::EigResult<f64> =
            eig::smallest_eigpair(&model.hamiltonian(), &LanczosOptions::default()).unwrap();
        assert!(res.degenerate);
    }

    #[test]
    fn rejects_bad_models() {
        let mut j = DMatrix::zeros(4, 4);
        j[(0, 1)] = 1.0;
        assert!(matches!(SpinModel::new(j.clone(), 1.0), Err(Error::AsymmetricCouplings { .. })));
        j[(1, 0)] = 1.0;
        j[(2, 2)] = 0.5;
        assert!(SpinModel::new(j, 1.0).is_err());
        assert!(matches!(SpinModel::new(DMatrix::zeros(3, 3), 1.0), Err(Error::OddSites(3))));
    }
}
