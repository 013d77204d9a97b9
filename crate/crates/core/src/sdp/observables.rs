//! Observables, their expectations and the measurement-file grammar.
//!
//! Grammar of an observable spec (site indices are 1-based):
//!
//! - `I`: identity
//! - `H`: the model Hamiltonian
//! - `PARITY_X`: `⊗σ_x` on every site
//! - `BELL`, `BELL_AF`: `|Φ⟩⟨Φ|`, `|Φ'⟩⟨Φ'|` at the unnormalized scale
//! - Pauli strings as letter/index pairs, `Z 1 Z 2`, `X 3`, `Y 1 X 4`
//! - compact Pauli strings, `ZZ 1 2`, `XYZ 1 2 3`
//!
//! Pauli letters are `σ_x`, `σ_y`, `σ_z` with `σ_z|0⟩ = |0⟩`.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::basis;
use crate::error::{Error, Result};
use crate::model::{IsingHamiltonian, SpinModel};
use crate::states::DensityOperator;
use crate::witness::{BellReference, Branch, StateRef};

#[derive(Debug, Clone)]
enum Kind {
    Identity,
    /// `P|s⟩ = i^{n_y} (-1)^{|s ∧ phase|} |s ⊕ flip⟩`.
    Pauli { flip: usize, phase: usize, n_y: u32 },
    Hamiltonian { h: Arc<IsingHamiltonian>, norm: f64 },
    Bell(Arc<BellReference>),
}

#[derive(Debug, Clone)]
pub struct Observable {
    name: String,
    n_sites: usize,
    kind: Kind,
    scale: f64,
}

fn i_pow(k: u32) -> C64 {
    match k % 4 {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, 1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, -1.0),
    }
}

impl Observable {
    pub fn identity(n_sites: usize) -> Self {
        Self {
            name: "I".into(),
            n_sites,
            kind: Kind::Identity,
            scale: 1.0,
        }
    }

    pub fn parity_x(n_sites: usize) -> Self {
        Self {
            name: "PARITY_X".into(),
            n_sites,
            kind: Kind::Pauli {
                flip: basis::all_mask(n_sites),
                phase: 0,
                n_y: 0,
            },
            scale: 1.0,
        }
    }

    pub fn hamiltonian(model: &SpinModel) -> Self {
        Self {
            name: "H".into(),
            n_sites: model.n_sites(),
            kind: Kind::Hamiltonian {
                h: Arc::new(model.hamiltonian()),
                norm: model.norm_bound(),
            },
            scale: 1.0,
        }
    }

    pub fn bell(n_sites: usize, branch: Branch) -> Result<Self> {
        Ok(Self {
            name: match branch {
                Branch::Ferro => "BELL".into(),
                Branch::Antiferro => "BELL_AF".into(),
            },
            n_sites,
            kind: Kind::Bell(Arc::new(BellReference::new(n_sites, branch)?)),
            scale: 1.0,
        })
    }

    /// Product of single-site Paulis; `ops` pairs a letter with a 0-based site.
    pub fn pauli(n_sites: usize, ops: &[(char, usize)]) -> Result<Self> {
        let mut sorted = ops.to_vec();
        sorted.sort_by_key(|&(_, s)| s);
        let (mut flip, mut phase, mut n_y) = (0usize, 0usize, 0u32);
        let mut name = Vec::new();
        for (k, &(letter, site)) in sorted.iter().enumerate() {
            if site >= n_sites {
                return Err(Error::InvalidArgument(format!(
                    "site index {} out of range 1..={n_sites}",
                    site + 1
                )));
            }
            if k > 0 && sorted[k - 1].1 == site {
                return Err(Error::InvalidArgument(format!("site {} repeated", site + 1)));
            }
            let m = basis::site_mask(n_sites, site);
            match letter {
                'X' => flip |= m,
                'Y' => {
                    flip |= m;
                    phase |= m;
                    n_y += 1;
                }
                'Z' => phase |= m,
                _ => return Err(Error::InvalidArgument(format!("unknown Pauli letter `{letter}`"))),
            }
            name.push(format!("{letter} {}", site + 1));
        }
        if sorted.is_empty() {
            return Err(Error::InvalidArgument("empty Pauli string".into()));
        }
        Ok(Self {
            name: name.join(" "),
            n_sites,
            kind: Kind::Pauli { flip, phase, n_y },
            scale: 1.0,
        })
    }

    /// Same operator multiplied by `factor`.
    pub fn scaled(mut self, factor: f64) -> Self {
        self.scale *= factor;
        if factor != 1.0 {
            self.name = format!("{factor}*{}", self.name);
        }
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn is_identity(&self) -> bool {
        matches!(self.kind, Kind::Identity)
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Operator norm, or an upper bound on it for `H`.
    pub fn operator_norm(&self) -> f64 {
        self.scale.abs()
            * match &self.kind {
                Kind::Identity | Kind::Pauli { .. } => 1.0,
                Kind::Hamiltonian { norm, .. } => *norm,
                Kind::Bell(r) => r.scale().powi(2),
            }
    }

    /// `y += w A x`.
    pub fn apply_add(&self, w: f64, x: &[C64], y: &mut [C64]) {
        let w = w * self.scale;
        match &self.kind {
            Kind::Identity => {
                for (yi, xi) in y.iter_mut().zip(x) {
                    *yi += xi * w;
                }
            }
            Kind::Pauli { flip, phase, n_y } => {
                let c = i_pow(*n_y) * w;
                for (s, xs) in x.iter().enumerate() {
                    let sign = if (s & phase).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                    y[s ^ flip] += c * sign * xs;
                }
            }
            Kind::Hamiltonian { h, .. } => {
                let n = h.n_sites();
                for (s, xs) in x.iter().enumerate() {
                    y[s] += xs * (w * h.diagonal()[s]);
                    if h.field() != 0.0 {
                        for i in 0..n {
                            y[s ^ basis::site_mask(n, i)] += xs * (w * h.field());
                        }
                    }
                }
            }
            Kind::Bell(r) => r.apply_projector_raw(w, x, y),
        }
    }

    /// `m += w A`.
    pub fn add_dense(&self, w: f64, m: &mut DMatrix<C64>) {
        let w = w * self.scale;
        let dim = m.nrows();
        match &self.kind {
            Kind::Identity => {
                for s in 0..dim {
                    m[(s, s)] += w;
                }
            }
            Kind::Pauli { flip, phase, n_y } => {
                let c = i_pow(*n_y) * w;
                for s in 0..dim {
                    let sign = if (s & phase).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                    m[(s ^ flip, s)] += c * sign;
                }
            }
            Kind::Hamiltonian { h, .. } => {
                let n = h.n_sites();
                for s in 0..dim {
                    m[(s, s)] += w * h.diagonal()[s];
                    if h.field() != 0.0 {
                        for i in 0..n {
                            m[(s ^ basis::site_mask(n, i), s)] += w * h.field();
                        }
                    }
                }
            }
            Kind::Bell(r) => {
                for &s in r.support() {
                    for &t in r.support() {
                        m[(s, t)] += w;
                    }
                }
            }
        }
    }

    /// `⟨v|A|v⟩` (real part) for any vector `v`.
    pub fn quadratic_form(&self, v: &[C64]) -> f64 {
        let s = match &self.kind {
            Kind::Identity => v.iter().map(|z| z.norm_sqr()).sum(),
            Kind::Pauli { flip, phase, n_y } => {
                let c = i_pow(*n_y);
                v.iter()
                    .enumerate()
                    .map(|(s, vs)| {
                        let sign = if (s & phase).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                        (v[s ^ flip].conj() * c * vs * sign).re
                    })
                    .sum()
            }
            Kind::Bell(r) => r.support().iter().map(|&s| v[s]).sum::<C64>().norm_sqr(),
            Kind::Hamiltonian { h, .. } => {
                let n = h.n_sites();
                v.iter()
                    .enumerate()
                    .map(|(s, vs)| {
                        let mut acc = h.diagonal()[s] * vs.norm_sqr();
                        if h.field() != 0.0 {
                            for i in 0..n {
                                acc += h.field() * (v[s ^ basis::site_mask(n, i)].conj() * vs).re;
                            }
                        }
                        acc
                    })
                    .sum()
            }
        };
        s * self.scale
    }

    /// `tr[A ρ]`.
    pub fn expectation_mixed(&self, rho: &DMatrix<C64>) -> f64 {
        let dim = rho.nrows();
        let s = match &self.kind {
            Kind::Identity => rho.trace().re,
            Kind::Pauli { flip, phase, n_y } => {
                let c = i_pow(*n_y);
                (0..dim)
                    .map(|t| {
                        let sign = if (t & phase).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                        (c * sign * rho[(t, t ^ flip)]).re
                    })
                    .sum()
            }
            Kind::Hamiltonian { h, .. } => {
                let rho = DensityOperator::new_unchecked(self.n_sites, rho.clone());
                crate::witness::mixed_energy(h, &rho)
            }
            Kind::Bell(r) => {
                let mut acc = C64::new(0.0, 0.0);
                for &s in r.support() {
                    for &t in r.support() {
                        acc += rho[(s, t)];
                    }
                }
                acc.re
            }
        };
        s * self.scale
    }

    pub fn expectation<'a>(&self, state: impl Into<StateRef<'a>>) -> Result<f64> {
        let state = state.into();
        if state.n_sites() != self.n_sites {
            return Err(Error::DimensionMismatch {
                expected: basis::dim(self.n_sites),
                actual: basis::dim(state.n_sites()),
            });
        }
        Ok(match state {
            StateRef::Pure(v) => self.quadratic_form(v.amplitudes()),
            StateRef::Mixed(r) => self.expectation_mixed(r.matrix()),
        })
    }
}

#[derive(Debug, Clone)]
pub struct ObservableSet {
    n_sites: usize,
    observables: Vec<Observable>,
}

impl ObservableSet {
    pub fn new(n_sites: usize) -> Self {
        Self {
            n_sites,
            observables: Vec::new(),
        }
    }

    /// Identity, `σ_α^i`, `σ_α^i σ_α^j` (`i < j`) for `α ∈ {x, y, z}`, and
    /// `⊗σ_x`.
    pub fn default_pauli(n_sites: usize) -> Result<Self> {
        let mut set = Self::new(n_sites);
        set.push(Observable::identity(n_sites))?;
        for a in ['X', 'Y', 'Z'] {
            for i in 0..n_sites {
                set.push(Observable::pauli(n_sites, &[(a, i)])?)?;
            }
        }
        for a in ['X', 'Y', 'Z'] {
            for i in 0..n_sites {
                for j in i + 1..n_sites {
                    set.push(Observable::pauli(n_sites, &[(a, i), (a, j)])?)?;
                }
            }
        }
        set.push(Observable::parity_x(n_sites))?;
        Ok(set)
    }

    /// `{1, H, ⊗σ_x}`.
    pub fn energy_parity(model: &SpinModel) -> Result<Self> {
        let n = model.n_sites();
        let mut set = Self::new(n);
        set.push(Observable::identity(n))?;
        set.push(Observable::hamiltonian(model))?;
        set.push(Observable::parity_x(n))?;
        Ok(set)
    }

    pub fn push(&mut self, obs: Observable) -> Result<()> {
        if obs.n_sites != self.n_sites {
            return Err(Error::DimensionMismatch {
                expected: self.n_sites,
                actual: obs.n_sites,
            });
        }
        if self.index_of(obs.name()).is_some() {
            return Err(Error::InvalidArgument(format!("observable {} listed twice", obs.name())));
        }
        self.observables.push(obs);
        Ok(())
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn len(&self) -> usize {
        self.observables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observables.is_empty()
    }

    pub fn observables(&self) -> &[Observable] {
        &self.observables
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.observables.iter().position(|o| o.name == name)
    }

    pub fn identity_index(&self) -> Option<usize> {
        self.observables.iter().position(|o| o.is_identity())
    }

    /// Every observable multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            n_sites: self.n_sites,
            observables: self.observables.iter().map(|o| o.clone().scaled(factor)).collect(),
        }
    }
}

/// A named measured expectation value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectationRecord {
    #[serde(rename = "observable")]
    pub name: String,
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

pub fn measure_expectations<'a>(
    state: impl Into<StateRef<'a>>,
    set: &ObservableSet,
) -> Result<Vec<ExpectationRecord>> {
    let state = state.into();
    set.observables
        .iter()
        .map(|o| {
            Ok(ExpectationRecord {
                name: o.name.clone(),
                value: o.expectation(state)?,
                sigma: None,
            })
        })
        .collect()
}

/// Parses one observable spec; the error message is meant to be prefixed with
/// a location by the caller.
pub fn parse_observable(
    spec: &str,
    n_sites: usize,
    model: Option<&SpinModel>,
) -> std::result::Result<Observable, String> {
    let tokens: Vec<&str> = spec.split_whitespace().collect();
    let Some(&head) = tokens.first() else {
        return Err("empty observable".into());
    };
    let named = |o: Result<Observable>| o.map_err(|e| e.to_string());
    match (head, tokens.len()) {
        ("I", 1) => return Ok(Observable::identity(n_sites)),
        ("PARITY_X", 1) => return Ok(Observable::parity_x(n_sites)),
        ("BELL", 1) => return named(Observable::bell(n_sites, Branch::Ferro)),
        ("BELL_AF", 1) => return named(Observable::bell(n_sites, Branch::Antiferro)),
        ("H", 1) => {
            return match model {
                Some(m) if m.n_sites() == n_sites => Ok(Observable::hamiltonian(m)),
                Some(m) => Err(format!("model has {} sites, data has {n_sites}", m.n_sites())),
                None => Err("observable `H` requires a model".into()),
            }
        }
        _ => {}
    }
    let is_letters = |t: &str| !t.is_empty() && t.chars().all(|c| matches!(c, 'X' | 'Y' | 'Z'));
    let parse_index = |t: &str| -> std::result::Result<usize, String> {
        let k: usize = t
            .parse()
            .map_err(|_| format!("expected a site index, found `{t}`"))?;
        if k == 0 || k > n_sites {
            return Err(format!("site index {k} out of range 1..={n_sites}"));
        }
        Ok(k - 1)
    };
    if !is_letters(head) {
        return Err(format!("unknown observable token `{head}`"));
    }
    let mut ops = Vec::new();
    if head.len() > 1 {
        // compact form: letters then indices; indices are checked first
        let idx: Vec<usize> = tokens[1..]
            .iter()
            .map(|t| parse_index(t))
            .collect::<std::result::Result<_, _>>()?;
        if idx.len() != head.len() {
            return Err(format!(
                "`{head}` needs {} site indices, found {}",
                head.len(),
                idx.len()
            ));
        }
        ops.extend(head.chars().zip(idx));
    } else {
        let mut it = tokens.iter();
        while let Some(&letter) = it.next() {
            if !(is_letters(letter) && letter.len() == 1) {
                return Err(format!("expected a Pauli letter, found `{letter}`"));
            }
            let Some(&index) = it.next() else {
                return Err(format!("`{letter}` is missing its site index"));
            };
            ops.push((letter.chars().next().unwrap_or('X'), parse_index(index)?));
        }
    }
    named(Observable::pauli(n_sites, &ops))
}

/// 1-based line of the `k`-th occurrence of `"observable"` in `text`.
fn line_of_record(text: &str, k: usize) -> usize {
    let mut seen = 0;
    for (i, line) in text.lines().enumerate() {
        let hits = line.matches("\"observable\"").count();
        if seen + hits > k {
            return i + 1;
        }
        seen += hits;
    }
    0
}

/// Parses a measurement file (a JSON list of records) into an observable set
/// and matching records with canonical names. The identity with value 1 is
/// added when absent, so the set always carries the trace constraint.
pub fn parse_measurements(
    text: &str,
    n_sites: usize,
    model: Option<&SpinModel>,
) -> Result<(ObservableSet, Vec<ExpectationRecord>)> {
    let raw: Vec<ExpectationRecord> = serde_json::from_str(text)?;
    let mut set = ObservableSet::new(n_sites);
    let mut records = Vec::with_capacity(raw.len() + 1);
    for (k, rec) in raw.into_iter().enumerate() {
        let line = line_of_record(text, k);
        let obs = parse_observable(&rec.name, n_sites, model)
            .map_err(|message| Error::Parse { line, message })?;
        if !rec.value.is_finite() {
            return Err(Error::Parse {
                line,
                message: format!("value of {} is not finite", rec.name),
            });
        }
        let norm = obs.operator_norm();
        if rec.value.abs() > norm * (1.0 + 1e-12) {
            return Err(Error::InconsistentMeasurement {
                name: rec.name,
                value: rec.value,
                norm,
            });
        }
        if obs.is_identity() && (rec.value - obs.scale()).abs() > 1e-9 {
            return Err(Error::InconsistentMeasurement {
                name: rec.name,
                value: rec.value,
                norm: 1.0,
            });
        }
        let name = obs.name().to_string();
        set.push(obs).map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        records.push(ExpectationRecord {
            name,
            value: rec.value,
            sigma: rec.sigma,
        });
    }
    if set.identity_index().is_none() {
        set.push(Observable::identity(n_sites))?;
        records.push(ExpectationRecord {
            name: "I".into(),
            value: 1.0,
            sigma: None,
        });
    }
    Ok((set, records))
}
