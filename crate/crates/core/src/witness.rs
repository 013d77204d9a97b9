//! Bell reference states, the overlap bound, the preparation circuit `R` and
//! the two-parameter Hamiltonian witness.
//!
//! `|Φ⟩` pairs site `i` with site `N-1-i` (0-based) in `(|00⟩+|11⟩)` Bell
//! pairs. Unnormalized it has unit entries on its support and
//! `⟨Φ|Φ⟩ = 2^{N/2}`; every "raw" value below uses that scale, so
//! `log₂(raw)` is a lower bound on the log-negativity.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::basis;
use crate::eig::{self, LanczosOptions, LinearOperator};
use crate::error::{Error, Result};
use crate::model::{GroundState, IsingHamiltonian, SpinModel};
use crate::sdp::SdpCertificate;
use crate::states::{DensityOperator, StateVector};

/// Largest dimension for which witness eigenvalues use the dense solver.
const DENSE_DIM: usize = 256;

/// `w1` is searched in `[-W1_RANGE / J0, W1_RANGE / J0]` by default.
pub const W1_RANGE: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    /// `|Φ⟩`.
    Ferro,
    /// `|Φ'⟩ = σ_x^{⊗N/2} ⊗ 1 |Φ⟩`.
    Antiferro,
}

impl std::fmt::Display for Branch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Branch::Ferro => "ferro",
            Branch::Antiferro => "antiferro",
        })
    }
}

impl std::str::FromStr for Branch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ferro" => Ok(Branch::Ferro),
            "antiferro" => Ok(Branch::Antiferro),
            _ => Err(Error::InvalidArgument(format!("unknown branch `{s}`"))),
        }
    }
}

fn check_even(n_sites: usize) -> Result<()> {
    if n_sites < 2 || n_sites % 2 != 0 {
        return Err(Error::OddSites(n_sites));
    }
    Ok(())
}

/// Basis indices where the unnormalized `|Φ⟩` has amplitude 1.
fn ferro_support(n_sites: usize) -> Vec<usize> {
    (0..basis::dim(n_sites))
        .filter(|&s| {
            (0..n_sites / 2).all(|i| {
                let a = s & basis::site_mask(n_sites, i) != 0;
                let b = s & basis::site_mask(n_sites, n_sites - 1 - i) != 0;
                a == b
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct BellReference {
    n_sites: usize,
    branch: Branch,
    support: Vec<usize>,
    normalized: StateVector,
}

impl BellReference {
    pub fn new(n_sites: usize, branch: Branch) -> Result<Self> {
        check_even(n_sites)?;
        let flip = match branch {
            Branch::Ferro => 0,
            Branch::Antiferro => basis::first_half_mask(n_sites),
        };
        let mut support: Vec<usize> = ferro_support(n_sites).into_iter().map(|s| s ^ flip).collect();
        support.sort_unstable();
        let amp = C64::new(2f64.powf(-(n_sites as f64) / 4.0), 0.0);
        let mut amps = vec![C64::new(0.0, 0.0); basis::dim(n_sites)];
        for &s in &support {
            amps[s] = amp;
        }
        Ok(Self {
            n_sites,
            branch,
            support,
            normalized: StateVector::from_unnormalized(n_sites, amps)?,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn branch(&self) -> Branch {
        self.branch
    }

    pub fn normalized(&self) -> &StateVector {
        &self.normalized
    }

    /// `2^{N/4}`, the norm of the unnormalized reference.
    pub fn scale(&self) -> f64 {
        2f64.powf(self.n_sites as f64 / 4.0)
    }

    /// Indices of the nonzero entries (all equal to 1 unnormalized).
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    /// `y += c |Φ⟩⟨Φ| x` with the unnormalized reference.
    pub(crate) fn apply_projector_raw<T: eig::Scalar>(&self, c: f64, x: &[T], y: &mut [T]) {
        let mut sum = T::zero();
        for &s in &self.support {
            sum += x[s];
        }
        let add = sum.scale(c);
        for &s in &self.support {
            y[s] += add;
        }
    }
}

/// `log₂(raw)` clipped at zero; non-positive raw values certify nothing.
pub fn bits_from_raw(raw: f64) -> f64 {
    if raw > 1.0 {
        raw.log2()
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Overlap,
    Witness,
    Sdp,
}

#[derive(Debug, Clone, Serialize)]
pub struct WitnessParams {
    pub w0: f64,
    pub w1: f64,
    pub include_parity: bool,
    pub branch: Branch,
    pub couplings_used: Vec<Vec<f64>>,
    pub field_used: f64,
    /// Smallest Ritz value before the residual correction `w0 = θ - ‖r‖`.
    pub ritz_value: f64,
    pub ritz_residual: f64,
}

/// Whether the overlap bound is expected to equal the log-negativity.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", content = "reason", rename_all = "kebab-case")]
pub enum EqualityStatus {
    /// Non-degenerate ground state of a model whose cross-block matrix
    /// selects this branch.
    Expected,
    NotGuaranteed(String),
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Certificate {
    Overlap { branch: Branch },
    Witness(WitnessParams),
    Sdp(SdpCertificate),
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub bound_bits: f64,
    pub method: Method,
    pub raw_value: f64,
    pub certificate: Certificate,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub equality: Option<EqualityStatus>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub provenance: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl BoundReport {
    pub(crate) fn new(method: Method, raw_value: f64, certificate: Certificate) -> Self {
        Self {
            bound_bits: bits_from_raw(raw_value),
            method,
            raw_value,
            certificate,
            equality: None,
            provenance: None,
            warnings: Vec::new(),
        }
    }

    pub fn with_provenance(mut self, p: impl Into<String>) -> Self {
        self.provenance = Some(p.into());
        self
    }
}

#[derive(Debug, Clone, Copy)]
pub enum StateRef<'a> {
    Pure(&'a StateVector),
    Mixed(&'a DensityOperator),
}

impl<'a> From<&'a StateVector> for StateRef<'a> {
    fn from(v: &'a StateVector) -> Self {
        StateRef::Pure(v)
    }
}

impl<'a> From<&'a DensityOperator> for StateRef<'a> {
    fn from(r: &'a DensityOperator) -> Self {
        StateRef::Mixed(r)
    }
}

impl StateRef<'_> {
    pub fn n_sites(&self) -> usize {
        match self {
            StateRef::Pure(v) => v.n_sites(),
            StateRef::Mixed(r) => r.n_sites(),
        }
    }
}

/// `σ_x` on every site selected by `mask`, applied to a pure state.
pub fn flip_sites(psi: &StateVector, mask: usize) -> StateVector {
    let amps = psi.amplitudes();
    let out: Vec<C64> = (0..amps.len()).map(|s| amps[s ^ mask]).collect();
    StateVector::from_unnormalized(psi.n_sites(), out).expect("permutation keeps the norm")
}

/// `X ρ X` with `X = σ_x` on every site selected by `mask`.
pub fn flip_sites_mixed(rho: &DensityOperator, mask: usize) -> DensityOperator {
    let m = rho.matrix();
    let flipped = DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| m[(r ^ mask, c ^ mask)]);
    DensityOperator::new_unchecked(rho.n_sites(), flipped)
}

fn ferro_raw_overlap(state: StateRef<'_>, support: &[usize]) -> f64 {
    match state {
        StateRef::Pure(v) => {
            let a = v.amplitudes();
            support.iter().map(|&s| a[s]).sum::<C64>().norm_sqr()
        }
        StateRef::Mixed(r) => {
            let m = r.matrix();
            let mut acc = C64::new(0.0, 0.0);
            for &s in support {
                for &t in support {
                    acc += m[(s, t)];
                }
            }
            acc.re
        }
    }
}

/// `2^{N/2} ⟨φ|ρ|φ⟩` for the normalized reference of `branch`.
pub fn bell_overlap_raw<'a>(state: impl Into<StateRef<'a>>, branch: Branch) -> Result<f64> {
    let state = state.into();
    let n = state.n_sites();
    check_even(n)?;
    let support = ferro_support(n);
    Ok(match (branch, state) {
        (Branch::Ferro, s) => ferro_raw_overlap(s, &support),
        (Branch::Antiferro, StateRef::Pure(v)) => {
            let f = flip_sites(v, basis::first_half_mask(n));
            ferro_raw_overlap(StateRef::Pure(&f), &support)
        }
        (Branch::Antiferro, StateRef::Mixed(r)) => {
            let f = flip_sites_mixed(r, basis::first_half_mask(n));
            ferro_raw_overlap(StateRef::Mixed(&f), &support)
        }
    })
}

/// Overlap bound `log₂ tr[|Φ⟩⟨Φ| ρ]`, valid for any state.
pub fn bell_overlap<'a>(state: impl Into<StateRef<'a>>, branch: Branch) -> Result<BoundReport> {
    let raw = bell_overlap_raw(state, branch)?;
    Ok(BoundReport::new(
        Method::Overlap,
        raw,
        Certificate::Overlap { branch },
    ))
}

/// Overlap bound for a computed ground state, annotated with whether the
/// bound is expected to be tight.
pub fn ground_state_overlap(
    model: &SpinModel,
    gs: &GroundState,
    branch: Branch,
) -> Result<BoundReport> {
    let mut report = bell_overlap(&gs.state, branch)?;
    let mut reasons = Vec::new();
    if gs.degenerate {
        reasons.push(format!("ground state is degenerate (gap {:e})", gs.gap));
    }
    match model.cross_block() {
        Ok(cb) => match cb.branch() {
            Some(b) if b == branch => {}
            Some(b) => reasons.push(format!("cross-block matrix selects the {b} branch")),
            None => reasons.push("cross-block matrix is indefinite".into()),
        },
        Err(e) => reasons.push(e.to_string()),
    }
    report.equality = Some(if reasons.is_empty() {
        EqualityStatus::Expected
    } else {
        for r in &reasons {
            log::warn!("overlap bound not guaranteed tight: {r}");
        }
        report.warnings = reasons.clone();
        EqualityStatus::NotGuaranteed(reasons.join("; "))
    });
    Ok(report)
}

/// Branch selected by the model's cross-block matrix, if any.
pub fn qualifying_branch(model: &SpinModel) -> Option<Branch> {
    model.cross_block().ok().and_then(|cb| cb.branch())
}

fn hadamard(amps: &mut [C64], mask: usize) {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    for s in 0..amps.len() {
        if s & mask == 0 {
            let (a, b) = (amps[s], amps[s | mask]);
            amps[s] = (a + b) * h;
            amps[s | mask] = (a - b) * h;
        }
    }
}

fn cnot(amps: &mut [C64], control: usize, target: usize) {
    for s in 0..amps.len() {
        if s & control != 0 && s & target == 0 {
            amps.swap(s, s | target);
        }
    }
}

/// `R = Π_i CNOT(i → N-1-i) H_i` over the first half, so `R|0…0⟩ = |φ⟩`.
pub fn circuit_r(psi: &StateVector) -> Result<StateVector> {
    let n = psi.n_sites();
    check_even(n)?;
    let mut amps = psi.amplitudes().to_vec();
    for i in 0..n / 2 {
        hadamard(&mut amps, basis::site_mask(n, i));
        cnot(&mut amps, basis::site_mask(n, i), basis::site_mask(n, n - 1 - i));
    }
    StateVector::from_unnormalized(n, amps)
}

/// `R†`: the gates of [`circuit_r`] in reverse order.
pub fn circuit_r_inverse(psi: &StateVector) -> Result<StateVector> {
    let n = psi.n_sites();
    check_even(n)?;
    let mut amps = psi.amplitudes().to_vec();
    for i in (0..n / 2).rev() {
        cnot(&mut amps, basis::site_mask(n, i), basis::site_mask(n, n - 1 - i));
        hadamard(&mut amps, basis::site_mask(n, i));
    }
    StateVector::from_unnormalized(n, amps)
}

pub fn all_zero_probability(psi: &StateVector) -> f64 {
    psi.amplitudes()[0].norm_sqr()
}

/// Probability of reading all zeros after undoing the reference circuit;
/// the antiferro branch first flips the first half.
pub fn measured_overlap_probability(psi: &StateVector, branch: Branch) -> Result<f64> {
    let n = psi.n_sites();
    check_even(n)?;
    let prepared = match branch {
        Branch::Ferro => psi.clone(),
        Branch::Antiferro => flip_sites(psi, basis::first_half_mask(n)),
    };
    Ok(all_zero_probability(&circuit_r_inverse(&prepared)?))
}

/// Expectations entering the witness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WitnessData {
    pub energy: f64,
    pub parity_x: f64,
}

impl WitnessData {
    pub fn from_state<'a>(model: &SpinModel, state: impl Into<StateRef<'a>>) -> Result<Self> {
        let state = state.into();
        if state.n_sites() != model.n_sites() {
            return Err(Error::DimensionMismatch {
                expected: model.dim(),
                actual: basis::dim(state.n_sites()),
            });
        }
        let h = model.hamiltonian();
        let all = basis::all_mask(model.n_sites());
        Ok(match state {
            StateRef::Pure(v) => {
                let a = v.amplitudes();
                let parity = (0..a.len()).map(|s| a[s].conj() * a[s ^ all]).sum::<C64>().re;
                Self {
                    energy: h.expectation(a),
                    parity_x: parity,
                }
            }
            StateRef::Mixed(r) => Self {
                energy: mixed_energy(&h, r),
                parity_x: (0..r.dim()).map(|s| r.matrix()[(s ^ all, s)].re).sum(),
            },
        })
    }
}

/// `tr[H ρ]`.
pub fn mixed_energy(h: &IsingHamiltonian, rho: &DensityOperator) -> f64 {
    let m = rho.matrix();
    let n = h.n_sites();
    let mut e = 0.0;
    for s in 0..m.nrows() {
        e += h.diagonal()[s] * m[(s, s)].re;
        if h.field() != 0.0 {
            for i in 0..n {
                e += h.field() * m[(s ^ basis::site_mask(n, i), s)].re;
            }
        }
    }
    e
}

/// `|Φ⟩⟨Φ| - [⊗σ_x] - w1 H` as a real operator.
struct WitnessOperator<'a> {
    reference: &'a BellReference,
    hamiltonian: &'a IsingHamiltonian,
    w1: f64,
    include_parity: bool,
}

impl LinearOperator<f64> for WitnessOperator<'_> {
    fn dim(&self) -> usize {
        LinearOperator::<f64>::dim(self.hamiltonian)
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.hamiltonian.apply(x, y);
        for v in y.iter_mut() {
            *v *= -self.w1;
        }
        if self.include_parity {
            let all = basis::all_mask(self.hamiltonian.n_sites());
            for (s, v) in y.iter_mut().enumerate() {
                *v -= x[s ^ all];
            }
        }
        self.reference.apply_projector_raw(1.0, x, y);
    }
}

/// Smallest eigenvalue of the witness operator as `(θ, ‖r‖)`; `θ - ‖r‖` is
/// a lower bound on it.
fn witness_min_eigenvalue(
    model: &SpinModel,
    reference: &BellReference,
    w1: f64,
    include_parity: bool,
    opts: &LanczosOptions,
) -> Result<(f64, f64)> {
    let h = model.hamiltonian();
    let op = WitnessOperator {
        reference,
        hamiltonian: &h,
        w1,
        include_parity,
    };
    if model.dim() <= DENSE_DIM {
        let m = eig::materialize(&op);
        return Ok((eig::dense_eigenvalues(&m)[0], 0.0));
    }
    let scale = reference.scale().powi(2) + 1.0 + w1.abs() * model.norm_bound();
    let mut lopts = opts.clone();
    lopts.tol = lopts.tol.min(1e-12 * scale).max(1e-14 * scale);
    lopts.compute_gap = false;
    let (theta, _, res) = eig::smallest_eigpair_deflated::<f64, _>(&op, &lopts, &[], None)?;
    Ok((theta, res))
}

/// Bound from `W = w0 + [⊗σ_x] + w1 H ⪯ |Φ⟩⟨Φ|` with `w0` the smallest
/// eigenvalue of `|Φ⟩⟨Φ| - [⊗σ_x] - w1 H`; valid for any state.
pub fn witness_bound(
    model_guess: &SpinModel,
    measured: &WitnessData,
    w1: f64,
    include_parity: bool,
    branch: Branch,
) -> Result<BoundReport> {
    witness_bound_with(model_guess, measured, w1, include_parity, branch, &LanczosOptions::default())
}

pub fn witness_bound_with(
    model_guess: &SpinModel,
    measured: &WitnessData,
    w1: f64,
    include_parity: bool,
    branch: Branch,
    opts: &LanczosOptions,
) -> Result<BoundReport> {
    if !w1.is_finite() {
        return Err(Error::InvalidArgument(format!("w1 must be finite, got {w1}")));
    }
    let reference = BellReference::new(model_guess.n_sites(), branch)?;
    let (theta, res) = witness_min_eigenvalue(model_guess, &reference, w1, include_parity, opts)?;
    let w0 = theta - res;
    let parity = if include_parity { measured.parity_x } else { 0.0 };
    let raw = w0 + parity + w1 * measured.energy;
    let c = model_guess.couplings();
    let params = WitnessParams {
        w0,
        w1,
        include_parity,
        branch,
        couplings_used: (0..c.nrows()).map(|i| c.row(i).iter().copied().collect()).collect(),
        field_used: model_guess.field_b(),
        ritz_value: theta,
        ritz_residual: res,
    };
    Ok(BoundReport::new(Method::Witness, raw, Certificate::Witness(params)))
}

/// Parity term by default only in the symmetry-broken regime `|B| < J0`.
pub fn default_include_parity(model: &SpinModel) -> bool {
    model.field_b().abs() < model.j0()
}

#[derive(Debug, Clone)]
pub struct W1Optimum {
    pub w1: f64,
    pub report: BoundReport,
    /// Raw value at every probe, in probe order.
    pub probes: Vec<(f64, f64)>,
    /// The probe budget ran out before the search converged.
    pub budget_exhausted: bool,
}

/// Default search interval `[-W1_RANGE / J0, W1_RANGE / J0]`.
pub fn default_w1_interval(model: &SpinModel) -> (f64, f64) {
    let j0 = model.j0();
    let r = if j0 > 0.0 { W1_RANGE / j0 } else { W1_RANGE };
    (-r, r)
}

/// Maximizes the witness bound over `w1`.
///
/// The raw value is concave in `w1` (a smallest eigenvalue of an affine
/// family plus a linear term), so golden-section search applies. The probe
/// sequence does not depend on `budget`; the result is the best of the first
/// `budget` probes, so a larger budget never returns a smaller bound.
pub fn optimize_w1(
    model_guess: &SpinModel,
    measured: &WitnessData,
    include_parity: bool,
    branch: Branch,
    interval: (f64, f64),
    budget: usize,
) -> Result<W1Optimum> {
    let (a, b) = interval;
    if !(a.is_finite() && b.is_finite() && a <= b) {
        return Err(Error::InvalidArgument(format!("invalid w1 interval [{a}, {b}]")));
    }
    if budget == 0 {
        return Err(Error::InvalidArgument("probe budget must be at least 1".into()));
    }
    let opts = LanczosOptions::default();
    let mut probes: Vec<(f64, BoundReport)> = Vec::new();
    let eval = |w1: f64, probes: &mut Vec<(f64, BoundReport)>| -> Result<Option<f64>> {
        if probes.len() >= budget {
            return Ok(None);
        }
        let r = witness_bound_with(model_guess, measured, w1, include_parity, branch, &opts)?;
        let raw = r.raw_value;
        probes.push((w1, r));
        Ok(Some(raw))
    };

    let xtol = 1e-7 * (b - a).max(1e-300);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut exhausted = false;
    let (mut lo, mut hi) = (a, b);
    'search: {
        if b - a <= xtol {
            exhausted = eval(0.5 * (a + b), &mut probes)?.is_none();
            break 'search;
        }
        let mut x1 = hi - g * (hi - lo);
        let mut x2 = lo + g * (hi - lo);
        let Some(mut f1) = eval(x1, &mut probes)? else { exhausted = true; break 'search };
        let Some(mut f2) = eval(x2, &mut probes)? else { exhausted = true; break 'search };
        while hi - lo > xtol {
            if f1 >= f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - g * (hi - lo);
                let Some(f) = eval(x1, &mut probes)? else { exhausted = true; break 'search };
                f1 = f;
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + g * (hi - lo);
                let Some(f) = eval(x2, &mut probes)? else { exhausted = true; break 'search };
                f2 = f;
            }
        }
        // local grid around the bracket, including both interval ends
        let mid = 0.5 * (lo + hi);
        for x in [lo, mid, hi, a, b] {
            if eval(x, &mut probes)?.is_none() {
                exhausted = true;
                break 'search;
            }
        }
    }
    let best = probes
        .iter()
        .enumerate()
        .max_by(|(i, x), (j, y)| x.1.raw_value.total_cmp(&y.1.raw_value).then(j.cmp(i)))
        .map(|(i, _)| i)
        .expect("at least one probe");
    let trace: Vec<(f64, f64)> = probes.iter().map(|(w, r)| (*w, r.raw_value)).collect();
    let (w1, mut report) = probes.swap_remove(best);
    if exhausted {
        report
            .warnings
            .push("probe budget exhausted; best probe so far returned".into());
    }
    Ok(W1Optimum {
        w1,
        report,
        probes: trace,
        budget_exhausted: exhausted,
    })
}

/// Default probe budget for [`optimize_w1`].
pub const DEFAULT_BUDGET: usize = 80;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{log_negativity, partial_transpose_matrix, DensityOperator};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_pure(n: usize, rng: &mut impl Rng) -> StateVector {
        let amps = (0..basis::dim(n))
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        StateVector::from_unnormalized(n, amps).unwrap()
    }

    fn random_mixed(n: usize, rank: usize, rng: &mut impl Rng) -> DensityOperator {
        let states: Vec<_> = (0..rank).map(|_| random_pure(n, rng)).collect();
        let w: Vec<f64> = (0..rank).map(|_| rng.gen_range(0.0..1.0)).collect();
        DensityOperator::mixture(&states, &w).unwrap()
    }

    #[test]
    fn reference_overlap_values() {
        for n in [2usize, 4, 6] {
            let phi = BellReference::new(n, Branch::Ferro).unwrap();
            let r = bell_overlap(phi.normalized(), Branch::Ferro).unwrap();
            assert!((r.raw_value - 2f64.powi(n as i32 / 2)).abs() < 1e-12);
            assert!((r.bound_bits - n as f64 / 2.0).abs() < 1e-12);
            let plus = StateVector::plus_state(n).unwrap();
            let r = bell_overlap(&plus, Branch::Ferro).unwrap();
            assert!((r.raw_value - 1.0).abs() < 1e-12);
            assert!(r.bound_bits.abs() < 1e-12);
            // ⊗σ_x fixes |Φ⟩
            let f = flip_sites(phi.normalized(), basis::all_mask(n));
            assert_eq!(f.amplitudes(), phi.normalized().amplitudes());
        }
    }

    #[test]
    fn raw_reference_partial_transpose_is_a_swap() {
        for n in [2usize, 4, 6] {
            let phi = BellReference::new(n, Branch::Ferro).unwrap();
            let dim = basis::dim(n);
            let mut m = DMatrix::<C64>::zeros(dim, dim);
            for &s in phi.support() {
                for &t in phi.support() {
                    m[(s, t)] = C64::new(1.0, 0.0);
                }
            }
            let ev = eig::dense_eigenvalues(&partial_transpose_matrix(n, &m).unwrap());
            for e in ev {
                assert!((e.abs() - 1.0).abs() < 1e-12, "eigenvalue {e}");
            }
        }
    }

    #[test]
    fn circuit_prepares_reference() {
        for n in [2usize, 4, 6, 8] {
            let zero = StateVector::basis_state(n, 0).unwrap();
            let out = circuit_r(&zero).unwrap();
            let phi = BellReference::new(n, Branch::Ferro).unwrap();
            assert!(out.overlap(phi.normalized()).norm_sqr() >= 1.0 - 1e-12);
            assert!((measured_overlap_probability(phi.normalized(), Branch::Ferro).unwrap() - 1.0).abs() < 1e-12);
            let back = circuit_r_inverse(&out).unwrap();
            assert!((all_zero_probability(&back) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn measured_probability_matches_overlap() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for branch in [Branch::Ferro, Branch::Antiferro] {
            for _ in 0..20 {
                let psi = random_pure(6, &mut rng);
                let p = measured_overlap_probability(&psi, branch).unwrap();
                let raw = bell_overlap_raw(&psi, branch).unwrap();
                assert!((8.0 * p - raw).abs() < 1e-10);
                let phi = BellReference::new(6, branch).unwrap();
                assert!((psi.overlap(phi.normalized()).norm_sqr() * 8.0 - raw).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn parity_witness_without_energy_term() {
        let model = SpinModel::algebraic(4, 1.0, -1.0, 1.0).unwrap();
        let data = WitnessData {
            energy: 0.0,
            parity_x: 1.0,
        };
        let r = witness_bound(&model, &data, 0.0, true, Branch::Ferro).unwrap();
        let Certificate::Witness(p) = &r.certificate else { panic!() };
        assert!((p.w0 + 1.0).abs() < 1e-12);
    }

    #[test]
    fn pure_and_mixed_routes_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let model = SpinModel::algebraic(4, 1.0, -1.0, 0.7).unwrap();
        let psi = random_pure(4, &mut rng);
        let rho = psi.to_density().unwrap();
        for b in [Branch::Ferro, Branch::Antiferro] {
            let a = bell_overlap_raw(&psi, b).unwrap();
            let m = bell_overlap_raw(&rho, b).unwrap();
            assert!((a - m).abs() < 1e-12);
        }
        let d1 = WitnessData::from_state(&model, &psi).unwrap();
        let d2 = WitnessData::from_state(&model, &rho).unwrap();
        assert!((d1.energy - d2.energy).abs() < 1e-12);
        assert!((d1.parity_x - d2.parity_x).abs() < 1e-12);
    }

    #[test]
    fn witness_sound_on_random_mixed_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for n in [4usize, 6] {
            let model = SpinModel::algebraic(n, 1.0, -1.0, 0.8).unwrap();
            for _ in 0..10 {
                let rank = rng.gen_range(1..4);
                let rho = random_mixed(n, rank, &mut rng);
                let exact = log_negativity(&rho).unwrap();
                let data = WitnessData::from_state(&model, &rho).unwrap();
                let w1 = rng.gen_range(-5.0..5.0);
                for parity in [true, false] {
                    let r = witness_bound(&model, &data, w1, parity, Branch::Ferro).unwrap();
                    assert!(r.bound_bits <= exact + 1e-8);
                    assert!(r.raw_value <= 2f64.powf(exact) + 1e-8);
                }
            }
        }
    }

    #[test]
    fn branch_covariance_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let rho = random_mixed(4, 2, &mut rng);
        let flipped = flip_sites_mixed(&rho, basis::first_half_mask(4));
        assert_eq!(
            bell_overlap_raw(&rho, Branch::Antiferro).unwrap(),
            bell_overlap_raw(&flipped, Branch::Ferro).unwrap()
        );
    }

    #[test]
    fn optimization_monotone_in_budget() {
        let model = SpinModel::algebraic(6, 1.0, -1.0, 0.8).unwrap();
        let gs = model.ground_state().unwrap();
        let data = WitnessData::from_state(&model, &gs.state).unwrap();
        let iv = default_w1_interval(&model);
        let mut last = f64::NEG_INFINITY;
        for budget in [1usize, 2, 4, 8, 16, 32, 64] {
            let r = optimize_w1(&model, &data, true, Branch::Ferro, iv, budget).unwrap();
            assert!(r.report.raw_value >= last);
            last = r.report.raw_value;
        }
        let full = optimize_w1(&model, &data, true, Branch::Ferro, iv, 1000).unwrap();
        assert!(!full.budget_exhausted);
        for &(_, raw) in &full.probes {
            assert!(full.report.raw_value >= raw);
        }
        let exact = crate::states::log_negativity_pure(&gs.state).unwrap();
        assert!(full.report.bound_bits > 0.0 && full.report.bound_bits <= exact + 1e-8);
    }

    #[test]
    fn strong_field_bound_is_small_and_sound() {
        let model = SpinModel::algebraic(6, 1.0, -1.0, 10.0).unwrap();
        let gs = model.ground_state().unwrap();
        let data = WitnessData::from_state(&model, &gs.state).unwrap();
        let exact = crate::states::log_negativity_pure(&gs.state).unwrap();
        let iv = default_w1_interval(&model);
        for parity in [true, false] {
            let r = optimize_w1(&model, &data, parity, Branch::Ferro, iv, 200).unwrap();
            assert!(r.report.bound_bits <= exact + 1e-9);
            assert!(r.report.bound_bits < 0.2);
        }
    }

    #[test]
    fn reference_data_without_energy_information() {
        let model = SpinModel::algebraic(4, 1.0, -1.0, 1.0).unwrap();
        let phi = BellReference::new(4, Branch::Ferro).unwrap();
        let data = WitnessData::from_state(&model, phi.normalized()).unwrap();
        let iv = default_w1_interval(&model);
        let r = optimize_w1(&model, &data, true, Branch::Ferro, iv, 200).unwrap();
        assert!(r.report.bound_bits >= 0.0 && r.report.bound_bits < 1e-6);
    }
}
