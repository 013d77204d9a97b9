//! Effective Ising couplings of a linear ion crystal driven near its
//! transverse motional modes.
//!
//! Equilibrium positions and mode shapes are computed in dimensionless units:
//! lengths in units of the Coulomb length `ℓ = (e²/(4πε₀ M ν_z²))^{1/3}` and
//! squared frequencies in units of `ν_z²`. The physical prefactor
//! `ħk²/(4M)` is applied once at the end.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::eig;
use crate::error::{Error, Result};

const HBAR: f64 = 1.054_571_817e-34;
const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
const VACUUM_PERMITTIVITY: f64 = 8.854_187_8128e-12;
const ATOMIC_MASS: f64 = 1.660_539_066_60e-27;

/// Trap and drive parameters. Frequencies are angular (rad/s), the mass is in
/// kg and the wavevector difference in 1/m.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IonTrapSpec {
    pub n_ions: usize,
    pub rabi_frequencies: Vec<f64>,
    pub wavevector_diff: f64,
    pub ion_mass: f64,
    pub detuning: f64,
    pub transverse_trap_freq: f64,
    pub axial_trap_freq: f64,
    /// Minimum allowed `|μ - ω_m|`.
    pub resonance_tolerance: f64,
}

impl IonTrapSpec {
    /// ¹⁷¹Yb⁺ chain with counter-propagating 355 nm Raman beams at 90°,
    /// `ω_t = 2π·4.8 MHz`, `ν_z = 2π·0.45 MHz`, uniform `Ω = 2π·1.1 MHz`,
    /// and `μ` set `offset_hz` (ordinary frequency) above the centre-of-mass
    /// mode.
    pub fn yb_chain(n_ions: usize, offset_hz: f64) -> Result<Self> {
        let two_pi = 2.0 * std::f64::consts::PI;
        let mut spec = Self {
            n_ions,
            rabi_frequencies: vec![two_pi * 1.1e6; n_ions],
            wavevector_diff: std::f64::consts::SQRT_2 * two_pi / 355e-9,
            ion_mass: 170.936_323 * ATOMIC_MASS,
            detuning: 0.0,
            transverse_trap_freq: two_pi * 4.8e6,
            axial_trap_freq: two_pi * 0.45e6,
            resonance_tolerance: two_pi * 1.0,
        };
        spec.detuning = spec.com_frequency()? + two_pi * offset_hz;
        Ok(spec)
    }

    pub fn modes(&self) -> Result<TransverseModes> {
        let u = equilibrium_positions(self.n_ions)?;
        transverse_modes(&u, self.transverse_trap_freq / self.axial_trap_freq)
    }

    /// Highest transverse mode (centre of mass), rad/s.
    pub fn com_frequency(&self) -> Result<f64> {
        let modes = self.modes()?;
        Ok(self.axial_trap_freq * modes.frequencies.iter().cloned().fold(0.0, f64::max))
    }

    fn validate(&self) -> Result<()> {
        if self.n_ions < 1 {
            return Err(Error::InvalidArgument("at least one ion required".into()));
        }
        if self.rabi_frequencies.len() != self.n_ions {
            return Err(Error::DimensionMismatch {
                expected: self.n_ions,
                actual: self.rabi_frequencies.len(),
            });
        }
        for (name, v) in [
            ("axial trap frequency", self.axial_trap_freq),
            ("transverse trap frequency", self.transverse_trap_freq),
            ("ion mass", self.ion_mass),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Coulomb length `(e²/(4πε₀ M ν_z²))^{1/3}` in metres.
pub fn coulomb_length(ion_mass: f64, axial_trap_freq: f64) -> f64 {
    let k = ELEMENTARY_CHARGE * ELEMENTARY_CHARGE / (4.0 * std::f64::consts::PI * VACUUM_PERMITTIVITY);
    (k / (ion_mass * axial_trap_freq * axial_trap_freq)).cbrt()
}

fn gradient(u: &[f64]) -> DVector<f64> {
    let n = u.len();
    DVector::from_fn(n, |i, _| {
        let mut g = u[i];
        for (k, &uk) in u.iter().enumerate() {
            if k != i {
                let d = u[i] - uk;
                g -= d.signum() / (d * d);
            }
        }
        g
    })
}

fn hessian(u: &[f64]) -> DMatrix<f64> {
    let n = u.len();
    let mut h = DMatrix::zeros(n, n);
    for i in 0..n {
        h[(i, i)] = 1.0;
        for k in 0..n {
            if k != i {
                let c = 2.0 / (u[i] - u[k]).abs().powi(3);
                h[(i, i)] += c;
                h[(i, k)] = -c;
            }
        }
    }
    h
}

fn energy(u: &[f64]) -> f64 {
    let mut e = 0.5 * u.iter().map(|x| x * x).sum::<f64>();
    for i in 0..u.len() {
        for k in i + 1..u.len() {
            e += 1.0 / (u[i] - u[k]).abs();
        }
    }
    e
}

/// Axial equilibrium positions in Coulomb lengths, ascending.
///
/// Damped Newton iteration on the potential gradient starting from uniform
/// spacing; converged when the gradient norm drops below `1e-12 · N²`. The result
/// is mirror-symmetrized, `u[N-1-i] = -u[i]`.
pub fn equilibrium_positions(n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidArgument("at least one ion required".into()));
    }
    if n == 1 {
        return Ok(vec![0.0]);
    }
    let spacing = 2.018 / (n as f64).powf(0.559);
    let mut u: Vec<f64> = (0..n)
        .map(|i| (i as f64 - 0.5 * (n - 1) as f64) * spacing)
        .collect();
    const MAX_ITER: usize = 200;
    let tol = 1e-12 * (n * n) as f64;
    let mut residual = gradient(&u).norm();
    for _ in 0..MAX_ITER {
        if residual < tol {
            break;
        }
        let g = gradient(&u);
        let step = hessian(&u)
            .lu()
            .solve(&(-&g))
            .ok_or_else(|| Error::InvalidArgument("singular equilibrium Hessian".into()))?;
        let e0 = energy(&u);
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = u.iter().zip(step.iter()).map(|(a, b)| a + t * b).collect();
            let ordered = trial.windows(2).all(|w| w[1] > w[0]);
            if ordered && (energy(&trial) <= e0 + 1e-4 * t * g.dot(&step) || t < 1e-10) {
                u = trial;
                break;
            }
            t *= 0.5;
        }
        residual = gradient(&u).norm();
    }
    if residual >= tol {
        return Err(Error::EquilibriumNotConverged {
            iterations: MAX_ITER,
            residual,
        });
    }
    for i in 0..n / 2 {
        let a = 0.5 * (u[n - 1 - i] - u[i]);
        u[i] = -a;
        u[n - 1 - i] = a;
    }
    if n % 2 == 1 {
        u[n / 2] = 0.0;
    }
    Ok(u)
}

#[derive(Debug, Clone)]
pub struct TransverseModes {
    /// `ω_m / ν_z`, ascending.
    pub frequencies: Vec<f64>,
    /// Orthonormal mode vectors, column `m` is `b_{·,m}`.
    pub vectors: DMatrix<f64>,
}

/// Transverse normal modes for trap ratio `β = ω_t / ν_z`.
pub fn transverse_modes(positions: &[f64], beta: f64) -> Result<TransverseModes> {
    let n = positions.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = beta * beta;
        for j in 0..n {
            if j != i {
                let c = 1.0 / (positions[i] - positions[j]).abs().powi(3);
                k[(i, i)] -= c;
                k[(i, j)] = c;
            }
        }
    }
    let (values, vectors) = eig::dense_eigh(&k);
    if values[0] <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "linear chain is unstable for ω_t/ν_z = {beta} (lowest squared mode {})",
            values[0]
        )));
    }
    Ok(TransverseModes {
        frequencies: values.iter().map(|v| v.sqrt()).collect(),
        vectors,
    })
}

/// `J_ij = Ω_i Ω_j ħk²/(4M) Σ_m b_im b_jm / (μ² - ω_m²)` in rad/s, zero diagonal.
pub fn ion_trap_couplings(spec: &IonTrapSpec) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let n = spec.n_ions;
    let modes = spec.modes()?;
    let omegas: Vec<f64> = modes
        .frequencies
        .iter()
        .map(|f| f * spec.axial_trap_freq)
        .collect();
    for (m, &w) in omegas.iter().enumerate() {
        if (spec.detuning - w).abs() <= spec.resonance_tolerance {
            return Err(Error::Resonance {
                mu: spec.detuning,
                mode: m,
                omega: w,
                gap: spec.resonance_tolerance,
            });
        }
    }
    let prefactor = HBAR * spec.wavevector_diff * spec.wavevector_diff / (4.0 * spec.ion_mass);
    let mu2 = spec.detuning * spec.detuning;
    let mut j = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in a + 1..n {
            let s: f64 = (0..n)
                .map(|m| modes.vectors[(a, m)] * modes.vectors[(b, m)] / (mu2 - omegas[m] * omegas[m]))
                .sum();
            let v = spec.rabi_frequencies[a] * spec.rabi_frequencies[b] * prefactor * s;
            j[(a, b)] = v;
            j[(b, a)] = v;
        }
    }
    Ok(j)
}
