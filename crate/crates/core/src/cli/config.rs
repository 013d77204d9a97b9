use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dynamics::{DiagnosticOptions, EmissionJump, NoiseRates, RampSchedule};
use crate::error::{Error, Result};
use crate::model::{algebraic_couplings, ion_trap_couplings, IonTrapSpec, SpinModel};
use crate::witness::Branch;

/// Coupling source of the chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    /// `J_ij = amplitude / |i-j|^p`.
    Algebraic {
        n_sites: usize,
        #[serde(default = "default_p")]
        p: f64,
        #[serde(default = "default_amplitude")]
        amplitude: f64,
    },
    /// Ytterbium chain with the detuning `detuning_offset_hz` above the
    /// centre-of-mass mode.
    IonTrap {
        n_ions: usize,
        #[serde(default = "default_offset")]
        detuning_offset_hz: f64,
    },
    Explicit { couplings: Vec<Vec<f64>> },
}

fn default_p() -> f64 {
    1.0
}

fn default_amplitude() -> f64 {
    -1.0
}

fn default_offset() -> f64 {
    117.6e3
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::Algebraic {
            n_sites: 8,
            p: default_p(),
            amplitude: default_amplitude(),
        }
    }
}

impl ModelConfig {
    pub fn n_sites(&self) -> usize {
        match self {
            ModelConfig::Algebraic { n_sites, .. } => *n_sites,
            ModelConfig::IonTrap { n_ions, .. } => *n_ions,
            ModelConfig::Explicit { couplings } => couplings.len(),
        }
    }

    pub fn couplings(&self) -> Result<DMatrix<f64>> {
        match self {
            ModelConfig::Algebraic { n_sites, p, amplitude } => algebraic_couplings(*n_sites, *p, *amplitude),
            ModelConfig::IonTrap {
                n_ions,
                detuning_offset_hz,
            } => ion_trap_couplings(&IonTrapSpec::yb_chain(*n_ions, *detuning_offset_hz)?),
            ModelConfig::Explicit { couplings } => {
                let n = couplings.len();
                if let Some(row) = couplings.iter().find(|r| r.len() != n) {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        actual: row.len(),
                    });
                }
                Ok(DMatrix::from_fn(n, n, |i, j| couplings[i][j]))
            }
        }
    }

    /// Model with the field given in units of its own `J0`.
    pub fn build(&self, b_over_j0: f64) -> Result<SpinModel> {
        let m = SpinModel::new(self.couplings()?, 0.0)?;
        let j0 = m.j0();
        Ok(m.with_field(b_over_j0 * j0))
    }

    /// Name of the secondary scan axis, if the model has one.
    pub fn axis_name(&self) -> Option<&'static str> {
        match self {
            ModelConfig::Algebraic { .. } => Some("p"),
            ModelConfig::IonTrap { .. } => Some("mu_offset_hz"),
            ModelConfig::Explicit { .. } => None,
        }
    }

    pub fn axis_value(&self) -> Option<f64> {
        match self {
            ModelConfig::Algebraic { p, .. } => Some(*p),
            ModelConfig::IonTrap {
                detuning_offset_hz, ..
            } => Some(*detuning_offset_hz),
            ModelConfig::Explicit { .. } => None,
        }
    }

    /// Copy with the secondary axis set to `value`.
    pub fn with_axis(&self, value: f64) -> Result<Self> {
        let mut out = self.clone();
        match &mut out {
            ModelConfig::Algebraic { p, .. } => *p = value,
            ModelConfig::IonTrap {
                detuning_offset_hz, ..
            } => *detuning_offset_hz = value,
            ModelConfig::Explicit { .. } => {
                return Err(Error::InvalidArgument(
                    "explicit couplings have no secondary scan axis".into(),
                ))
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanOutput {
    Exact,
    Overlap,
    Witness,
    Sdp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanConfig {
    /// Fields in units of `J0`.
    pub fields: Vec<f64>,
    /// Values of the model's secondary axis; empty keeps the model value.
    pub axis: Vec<f64>,
    pub outputs: Vec<ScanOutput>,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            fields: (1..=20).map(|k| 0.1 * k as f64).collect(),
            axis: Vec::new(),
            outputs: vec![ScanOutput::Exact, ScanOutput::Overlap],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WitnessScanConfig {
    pub fields: Vec<f64>,
    /// Uniform relative coupling perturbation, in percent.
    pub perturbation_pct: f64,
    pub trials: usize,
    pub budget: usize,
}

impl Default for WitnessScanConfig {
    fn default() -> Self {
        Self {
            fields: (1..=10).map(|k| 0.2 * k as f64).collect(),
            perturbation_pct: 2.0,
            trials: 50,
            budget: crate::witness::DEFAULT_BUDGET,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RampConfig {
    pub schedule: RampSchedule,
    /// Rates in units of `J0`; one trajectory per entry.
    pub noise: Vec<NoiseRates>,
    pub n_steps: usize,
    pub sample_every: usize,
    /// Steps between checkpoints; 0 disables them.
    pub checkpoint_every: usize,
    pub jump: EmissionJump,
    pub diagnostics: DiagnosticOptions,
}

impl Default for RampConfig {
    fn default() -> Self {
        let levels = [0.0, 0.005, 0.02];
        Self {
            schedule: RampSchedule::default(),
            noise: levels
                .iter()
                .flat_map(|&se| levels.iter().map(move |&dph| NoiseRates {
                    gamma_se: se,
                    gamma_dph: dph,
                }))
                .collect(),
            n_steps: 4000,
            sample_every: 200,
            checkpoint_every: 1000,
            jump: EmissionJump::Lower,
            diagnostics: DiagnosticOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundMethod {
    Witness,
    Sdp,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundConfig {
    pub method: BoundMethod,
    /// Branch of the reference state; chosen from the model when absent.
    pub branch: Option<Branch>,
    /// Field of the model guess in units of `J0`.
    pub field: f64,
}

impl Default for BoundConfig {
    fn default() -> Self {
        Self {
            method: BoundMethod::Both,
            branch: None,
            field: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppendixConfig {
    pub n_half_max: usize,
    pub p_values: Vec<f64>,
}

impl Default for AppendixConfig {
    fn default() -> Self {
        Self {
            n_half_max: 20,
            p_values: (0..13).map(|k| 0.25 * k as f64).collect(),
        }
    }
}

/// Contents of a `--config` file. Every section is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub model: ModelConfig,
    pub scan: ScanConfig,
    pub witness_scan: WitnessScanConfig,
    pub ramp: RampConfig,
    pub bound_from_data: BoundConfig,
    pub appendix: AppendixConfig,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}
