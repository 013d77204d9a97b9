//! Field ramps under the Lindblad master equation
//!
//! ```text
//! dρ/dt = -i[H(t), ρ] + Σ_i Σ_α (L ρ L† - ½{L†L, ρ})
//! ```
//!
//! with per-site spontaneous emission `√γ_se σ_∓` and dephasing `√γ_dph σ_z`,
//! integrated by fixed-step RK4 on the dense density matrix.

use std::io::BufRead;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis;
use crate::error::{Error, Result};
use crate::model::{IsingHamiltonian, SpinModel};
use crate::mpo::{mpo_error_bounds_range, MpoErrorBounds};
use crate::sdp::{measure_expectations, sdp_lower_bound, ObservableSet, SdpOptions};
use crate::states::{
    block_entropy, log_negativity, read_snapshot, DensityOperator, Snapshot, SnapshotState,
    StateVector,
};
use crate::witness::{
    bell_overlap, default_include_parity, default_w1_interval, optimize_w1, qualifying_branch,
    Branch, WitnessData, DEFAULT_BUDGET,
};

/// Largest chain for mixed-state dynamics.
pub const MAX_SITES: usize = 10;
/// Trace drift that aborts a run.
pub const MAX_TRACE_DRIFT: f64 = 1e-6;

const ZERO: C64 = C64::new(0.0, 0.0);
const PARALLEL_DIM: usize = 64;

/// `B(t) = b_final · 2^{r (t0 - t) / t0} · J0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RampSchedule {
    /// Final field in units of `J0`.
    pub b_final: f64,
    /// Dimensionless ramp rate; `B(0) / B(t0) = 2^r`.
    pub rate: f64,
    /// Total ramp time in units of `1/J0`.
    pub t0: f64,
}

impl Default for RampSchedule {
    fn default() -> Self {
        Self {
            b_final: 1.1,
            rate: 4.25,
            // 0.6 ms at J0 = 2π · 3.3 kHz
            t0: 0.6e-3 * 2.0 * std::f64::consts::PI * 3.3e3,
        }
    }
}

impl RampSchedule {
    pub fn field(&self, t: f64, j0: f64) -> f64 {
        self.b_final * 2f64.powf(self.rate * (self.t0 - t) / self.t0) * j0
    }

    fn validate(&self) -> Result<()> {
        if !(self.t0 > 0.0 && self.t0.is_finite() && self.rate.is_finite() && self.b_final.is_finite()) {
            return Err(Error::InvalidArgument(format!("invalid ramp schedule {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseRates {
    pub gamma_se: f64,
    pub gamma_dph: f64,
}

impl NoiseRates {
    pub fn new(gamma_se: f64, gamma_dph: f64) -> Result<Self> {
        let r = Self { gamma_se, gamma_dph };
        r.validate()?;
        Ok(r)
    }

    fn validate(&self) -> Result<()> {
        if !(self.gamma_se >= 0.0 && self.gamma_dph >= 0.0)
            || !self.gamma_se.is_finite()
            || !self.gamma_dph.is_finite()
        {
            return Err(Error::InvalidArgument(format!("noise rates must be non-negative, got {self:?}")));
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.gamma_se == 0.0 && self.gamma_dph == 0.0
    }
}

/// Jump operator of spontaneous emission.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmissionJump {
    /// `σ_- = |1⟩⟨0|`, lowering `σ_z`.
    #[default]
    Lower,
    /// `σ_+ = |0⟩⟨1|`, raising `σ_z`.
    Raise,
}

impl EmissionJump {
    /// Bit value the jump takes a site from.
    fn source_bit(self) -> bool {
        matches!(self, EmissionJump::Raise)
    }
}

/// Generator at one instant, acting on row-major `dim x dim` matrices.
struct Generator<'a> {
    n: usize,
    diagonal: &'a [f64],
    field: f64,
    rates: NoiseRates,
    jump: EmissionJump,
}

impl Generator<'_> {
    fn row(&self, rho: &[C64], a: usize, out: &mut [C64]) {
        let n = self.n;
        let dim = out.len();
        let src = self.jump.source_bit();
        let bit = |s: usize, i: usize| s & basis::site_mask(n, i) != 0;
        for (b, o) in out.iter_mut().enumerate() {
            let r = rho[a * dim + b];
            let mut flips = ZERO;
            if self.field != 0.0 {
                for i in 0..n {
                    let m = basis::site_mask(n, i);
                    flips += rho[(a ^ m) * dim + b] - rho[a * dim + (b ^ m)];
                }
            }
            let comm = r * (self.diagonal[a] - self.diagonal[b]) + flips * self.field;
            let mut d = C64::new(comm.im, -comm.re);
            if self.rates.gamma_dph != 0.0 {
                let differing = ((a ^ b) & basis::all_mask(n)).count_ones() as f64;
                d -= r * (2.0 * self.rates.gamma_dph * differing);
            }
            if self.rates.gamma_se != 0.0 {
                let mut acc = ZERO;
                for i in 0..n {
                    let m = basis::site_mask(n, i);
                    // L ρ L†: both indices carry the target bit
                    if bit(a, i) != src && bit(b, i) != src {
                        acc += rho[(a ^ m) * dim + (b ^ m)];
                    }
                    // L†L projects on the source bit
                    let k = (bit(a, i) == src) as u8 + (bit(b, i) == src) as u8;
                    acc -= r * (0.5 * k as f64);
                }
                d += acc * self.rates.gamma_se;
            }
            *o = d;
        }
    }

    fn apply(&self, rho: &[C64], out: &mut [C64]) {
        let dim = basis::dim(self.n);
        if dim >= PARALLEL_DIM {
            out.par_chunks_mut(dim)
                .enumerate()
                .for_each(|(a, row)| self.row(rho, a, row));
        } else {
            for (a, row) in out.chunks_mut(dim).enumerate() {
                self.row(rho, a, row);
            }
        }
    }
}

fn to_row_major(m: &DMatrix<C64>) -> Vec<C64> {
    let dim = m.nrows();
    let mut v = vec![ZERO; dim * dim];
    for a in 0..dim {
        for b in 0..dim {
            v[a * dim + b] = m[(a, b)];
        }
    }
    v
}

fn from_row_major(v: &[C64], dim: usize) -> DMatrix<C64> {
    DMatrix::from_row_slice(dim, dim, v)
}

fn check_model(model: &SpinModel) -> Result<()> {
    if model.n_sites() > MAX_SITES {
        return Err(Error::InvalidArgument(format!(
            "mixed-state dynamics supports at most {MAX_SITES} sites, got {}",
            model.n_sites()
        )));
    }
    Ok(())
}

/// `-i[H(t), ρ] + D[ρ]` with `H(t)` built from the couplings of `model` and
/// the field `B(t)` of `schedule`.
pub fn lindblad_rhs(
    rho: &DensityOperator,
    t: f64,
    model: &SpinModel,
    schedule: &RampSchedule,
    rates: &NoiseRates,
    jump: EmissionJump,
) -> Result<DMatrix<C64>> {
    check_model(model)?;
    if rho.n_sites() != model.n_sites() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            actual: rho.dim(),
        });
    }
    let h = model.with_field(0.0).hamiltonian();
    let generator = Generator {
        n: model.n_sites(),
        diagonal: h.diagonal(),
        field: schedule.field(t, model.j0()),
        rates: *rates,
        jump,
    };
    let v = to_row_major(rho.matrix());
    let mut out = vec![ZERO; v.len()];
    generator.apply(&v, &mut out);
    Ok(from_row_major(&out, rho.dim()))
}

/// Ground state of the initial field term `B(0) Σ σ_x`.
pub fn initial_state(n_sites: usize, b0: f64) -> Result<StateVector> {
    if b0 >= 0.0 {
        StateVector::minus_state(n_sites)
    } else {
        StateVector::plus_state(n_sites)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorOptions {
    pub n_steps: usize,
    pub jump: EmissionJump,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            n_steps: 4000,
            jump: EmissionJump::Lower,
        }
    }
}

/// Fixed-step RK4 integrator of a ramp; time is `step · dt` exactly, so a
/// run restored from a checkpoint continues bit-for-bit.
pub struct RampIntegrator {
    n_sites: usize,
    zz: IsingHamiltonian,
    j0: f64,
    schedule: RampSchedule,
    rates: NoiseRates,
    opts: IntegratorOptions,
    step: usize,
    rho: Vec<C64>,
    k: [Vec<C64>; 4],
    tmp: Vec<C64>,
}

impl RampIntegrator {
    pub fn new(
        model: &SpinModel,
        schedule: RampSchedule,
        rates: NoiseRates,
        opts: IntegratorOptions,
    ) -> Result<Self> {
        let psi = initial_state(model.n_sites(), schedule.field(0.0, model.j0()))?;
        let dim = psi.dim();
        let mut rho = vec![ZERO; dim * dim];
        let a = psi.amplitudes();
        for i in 0..dim {
            for j in 0..dim {
                rho[i * dim + j] = a[i] * a[j].conj();
            }
        }
        Self::from_parts(model, schedule, rates, opts, 0, rho)
    }

    fn from_parts(
        model: &SpinModel,
        schedule: RampSchedule,
        rates: NoiseRates,
        opts: IntegratorOptions,
        step: usize,
        rho: Vec<C64>,
    ) -> Result<Self> {
        check_model(model)?;
        schedule.validate()?;
        rates.validate()?;
        if opts.n_steps == 0 {
            return Err(Error::InvalidArgument("number of steps must be positive".into()));
        }
        let j0 = model.j0();
        if !(j0 > 0.0) {
            return Err(Error::InvalidArgument("couplings have J0 = 0; cannot set field units".into()));
        }
        let len = rho.len();
        Ok(Self {
            n_sites: model.n_sites(),
            zz: model.with_field(0.0).hamiltonian(),
            j0,
            schedule,
            rates,
            opts,
            step,
            rho,
            k: [vec![ZERO; len], vec![ZERO; len], vec![ZERO; len], vec![ZERO; len]],
            tmp: vec![ZERO; len],
        })
    }

    /// Restores a run from a snapshot written by [`RampIntegrator::snapshot`].
    pub fn resume<R: BufRead>(
        model: &SpinModel,
        schedule: RampSchedule,
        rates: NoiseRates,
        opts: IntegratorOptions,
        reader: R,
    ) -> Result<Self> {
        let snap = read_snapshot(reader)?;
        if snap.n_sites != model.n_sites() {
            return Err(Error::InvalidState(format!(
                "snapshot has {} sites, model has {}",
                snap.n_sites,
                model.n_sites()
            )));
        }
        let step: usize = snap
            .meta
            .get("step")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::InvalidState("snapshot lacks a step counter".into()))?;
        if step > opts.n_steps {
            return Err(Error::InvalidState(format!(
                "snapshot step {step} is beyond the run length {}",
                opts.n_steps
            )));
        }
        let rho = match snap.state {
            SnapshotState::Mixed(m) => to_row_major(&m),
            SnapshotState::Pure(_) => {
                return Err(Error::InvalidState("ramp snapshots must be mixed".into()))
            }
        };
        Self::from_parts(model, schedule, rates, opts, step, rho)
    }

    pub fn dt(&self) -> f64 {
        self.schedule.t0 / self.opts.n_steps as f64
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn n_steps(&self) -> usize {
        self.opts.n_steps
    }

    pub fn is_done(&self) -> bool {
        self.step >= self.opts.n_steps
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.dt()
    }

    pub fn field(&self) -> f64 {
        self.schedule.field(self.time(), self.j0)
    }

    pub fn dim(&self) -> usize {
        basis::dim(self.n_sites)
    }

    pub fn trace_drift(&self) -> f64 {
        let dim = self.dim();
        let tr: C64 = (0..dim).map(|a| self.rho[a * dim + a]).sum();
        (tr - C64::new(1.0, 0.0)).norm()
    }

    /// Current matrix; not renormalized, drift is part of the data.
    pub fn matrix(&self) -> DMatrix<C64> {
        from_row_major(&self.rho, self.dim())
    }

    pub fn state(&self) -> DensityOperator {
        DensityOperator::new_unchecked(self.n_sites, self.matrix())
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot::mixed(self.n_sites, self.matrix())
            .with_meta("step", self.step)
            .with_meta("n_steps", self.opts.n_steps)
            .with_meta("time", format!("{:e}", self.time()))
            .with_meta("gamma_se", format!("{:e}", self.rates.gamma_se))
            .with_meta("gamma_dph", format!("{:e}", self.rates.gamma_dph))
    }

    fn generator(&self, t: f64) -> Generator<'_> {
        Generator {
            n: self.n_sites,
            diagonal: self.zz.diagonal(),
            field: self.schedule.field(t, self.j0),
            rates: self.rates,
            jump: self.opts.jump,
        }
    }

    /// One RK4 step followed by Hermitian symmetrization.
    pub fn advance(&mut self) -> Result<()> {
        if self.is_done() {
            return Ok(());
        }
        let dt = self.dt();
        let t = self.time();
        let dim = self.dim();
        let mut k = std::mem::take(&mut self.k);
        let mut tmp = std::mem::take(&mut self.tmp);
        self.generator(t).apply(&self.rho, &mut k[0]);
        for (x, (r, d)) in tmp.iter_mut().zip(self.rho.iter().zip(&k[0])) {
            *x = r + d * (0.5 * dt);
        }
        self.generator(t + 0.5 * dt).apply(&tmp, &mut k[1]);
        for (x, (r, d)) in tmp.iter_mut().zip(self.rho.iter().zip(&k[1])) {
            *x = r + d * (0.5 * dt);
        }
        self.generator(t + 0.5 * dt).apply(&tmp, &mut k[2]);
        for (x, (r, d)) in tmp.iter_mut().zip(self.rho.iter().zip(&k[2])) {
            *x = r + d * dt;
        }
        self.generator(t + dt).apply(&tmp, &mut k[3]);
        for (i, r) in self.rho.iter_mut().enumerate() {
            *r += (k[0][i] + (k[1][i] + k[2][i]) * 2.0 + k[3][i]) * (dt / 6.0);
        }
        for a in 0..dim {
            for b in a..dim {
                let h = (self.rho[a * dim + b] + self.rho[b * dim + a].conj()) * 0.5;
                self.rho[a * dim + b] = h;
                self.rho[b * dim + a] = h.conj();
            }
        }
        self.k = k;
        self.tmp = tmp;
        self.step += 1;
        let drift = self.trace_drift();
        if drift > MAX_TRACE_DRIFT || !drift.is_finite() {
            return Err(Error::TraceDrift {
                drift,
                time: self.time(),
                dt,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrajectoryPoint {
    pub step: usize,
    pub time: f64,
    pub field: f64,
    pub trace_drift: f64,
    pub state: DensityOperator,
}

/// Runs a full ramp, recording the state every `sample_every` steps and at
/// the final time.
pub fn integrate_ramp(
    model: &SpinModel,
    schedule: RampSchedule,
    rates: NoiseRates,
    opts: IntegratorOptions,
    sample_every: usize,
) -> Result<Vec<TrajectoryPoint>> {
    let mut run = RampIntegrator::new(model, schedule, rates, opts)?;
    let every = sample_every.max(1);
    let mut out = Vec::new();
    let record = |run: &RampIntegrator| TrajectoryPoint {
        step: run.step_index(),
        time: run.time(),
        field: run.field(),
        trace_drift: run.trace_drift(),
        state: run.state(),
    };
    out.push(record(&run));
    while !run.is_done() {
        run.advance()?;
        if run.step_index() % every == 0 || run.is_done() {
            out.push(record(&run));
        }
    }
    Ok(out)
}

/// Pure-state RK4 propagation of the same ramp without noise; reference for
/// the noiseless density-matrix run.
pub fn propagate_pure(
    model: &SpinModel,
    schedule: RampSchedule,
    n_steps: usize,
) -> Result<StateVector> {
    schedule.validate()?;
    let n = model.n_sites();
    let j0 = model.j0();
    let zz = model.with_field(0.0).hamiltonian();
    let mut psi = initial_state(n, schedule.field(0.0, j0))?.into_amplitudes();
    let dt = schedule.t0 / n_steps as f64;
    let rhs = |t: f64, x: &[C64]| -> Vec<C64> {
        let b = schedule.field(t, j0);
        (0..x.len())
            .map(|s| {
                let mut h = x[s] * zz.diagonal()[s];
                for i in 0..n {
                    h += x[s ^ basis::site_mask(n, i)] * b;
                }
                C64::new(h.im, -h.re)
            })
            .collect()
    };
    let axpy = |x: &[C64], k: &[C64], c: f64| -> Vec<C64> {
        x.iter().zip(k).map(|(a, b)| a + b * c).collect()
    };
    for step in 0..n_steps {
        let t = step as f64 * dt;
        let k1 = rhs(t, &psi);
        let k2 = rhs(t + 0.5 * dt, &axpy(&psi, &k1, 0.5 * dt));
        let k3 = rhs(t + 0.5 * dt, &axpy(&psi, &k2, 0.5 * dt));
        let k4 = rhs(t + dt, &axpy(&psi, &k3, dt));
        for i in 0..psi.len() {
            psi[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (dt / 6.0);
        }
    }
    StateVector::from_unnormalized(n, psi)
}

/// Entanglement diagnostics of one sample.
#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    pub log_negativity: f64,
    pub block_entropy: f64,
    pub overlap_bound: f64,
    pub witness_bound: f64,
    pub sdp_bound: f64,
    pub mpo: Vec<MpoErrorBounds>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiagnosticOptions {
    /// MPO bounds are reported for `D = 1..=max_bond_dimension`.
    pub max_bond_dimension: usize,
    pub witness_budget: usize,
    pub sdp: bool,
}

impl Default for DiagnosticOptions {
    fn default() -> Self {
        Self {
            max_bond_dimension: 4,
            witness_budget: DEFAULT_BUDGET,
            sdp: true,
        }
    }
}

/// Diagnostics of `rho` against `model` at the field of the sample. The
/// bounds use the branch selected by the couplings, ferro when none is.
/// The SDP uses the observables `1`, `H` and the x-parity.
pub fn diagnostics(
    model: &SpinModel,
    rho: &DensityOperator,
    opts: &DiagnosticOptions,
) -> Result<Diagnostics> {
    let branch = qualifying_branch(model).unwrap_or(Branch::Ferro);
    let data = WitnessData::from_state(model, rho)?;
    let witness = optimize_w1(
        model,
        &data,
        default_include_parity(model),
        branch,
        default_w1_interval(model),
        opts.witness_budget,
    )?;
    let sdp_bound = if opts.sdp {
        let set = ObservableSet::energy_parity(model)?;
        let values = measure_expectations(rho, &set)?;
        let sdp_opts = SdpOptions {
            branch,
            ..SdpOptions::default()
        };
        sdp_lower_bound(&set, &values, &sdp_opts)?.bound_bits
    } else {
        f64::NAN
    };
    Ok(Diagnostics {
        log_negativity: log_negativity(rho)?,
        block_entropy: block_entropy(rho)?,
        overlap_bound: bell_overlap(rho, branch)?.bound_bits,
        witness_bound: witness.report.bound_bits,
        sdp_bound,
        mpo: mpo_error_bounds_range(rho, opts.max_bond_dimension)?,
    })
}
