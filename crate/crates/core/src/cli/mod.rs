//! Batch pipelines behind the `entbound` binary. Every command writes its
//! tables into an output directory; rows come out in grid order whatever
//! order the worker pool finishes them in.

pub mod config;

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{diagnostics, IntegratorOptions, NoiseRates, RampIntegrator};
use crate::error::{Error, Result};
use crate::model::{validate_appendix_positivity, SpinModel};
use crate::sdp::{
    measure_expectations, parse_measurements, sdp_lower_bound, ObservableSet, SdpOptions,
};
use crate::states::{log_negativity_pure, write_snapshot};
use crate::witness::{
    default_include_parity, default_w1_interval, ground_state_overlap, optimize_w1,
    qualifying_branch, Branch, BoundReport, EqualityStatus, WitnessData, DEFAULT_BUDGET,
};

pub use config::{
    AppendixConfig, BoundConfig, BoundMethod, Config, ModelConfig, RampConfig, ScanConfig,
    ScanOutput, WitnessScanConfig,
};

/// 17 significant digits; NaN and missing values are blank.
pub fn format_number(x: Option<f64>) -> String {
    match x {
        Some(v) if !v.is_nan() => format!("{:.16e}", v + 0.0),
        _ => String::new(),
    }
}

fn num(x: f64) -> String {
    format_number(Some(x))
}

fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

fn branch_or_ferro(model: &SpinModel) -> Branch {
    qualifying_branch(model).unwrap_or(Branch::Ferro)
}

pub const SCAN_FILE: &str = "scan.csv";

/// Ground-state sweep over fields and the model's secondary axis.
pub fn cmd_scan(model: &ModelConfig, scan: &ScanConfig, out: &Path) -> Result<PathBuf> {
    let axis_name = model.axis_name().unwrap_or("axis");
    let axis: Vec<Option<f64>> = if scan.axis.is_empty() {
        vec![model.axis_value()]
    } else {
        scan.axis.iter().map(|&v| Some(v)).collect()
    };
    let points: Vec<(Option<f64>, f64)> = if scan.fields.is_empty() {
        Vec::new()
    } else {
        axis.iter()
            .flat_map(|&a| scan.fields.iter().map(move |&b| (a, b)))
            .collect()
    };
    let rows = points
        .par_iter()
        .map(|&(a, b)| {
            let cfg = match a {
                Some(v) if Some(v) != model.axis_value() => model.with_axis(v)?,
                _ => model.clone(),
            };
            scan_row(&cfg, a, b, &scan.outputs)
        })
        .collect::<Result<Vec<_>>>()?;
    let header: Vec<String> = [
        "n_sites",
        axis_name,
        "b_over_j0",
        "j0",
        "energy",
        "gap",
        "degenerate",
        "branch",
        "e_ln",
        "bound_overlap",
        "equality_residual",
        "bound_witness",
        "bound_sdp",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let path = out.join(SCAN_FILE);
    write_csv(&path, &header, &rows)?;
    Ok(path)
}

fn scan_row(cfg: &ModelConfig, axis: Option<f64>, b: f64, outputs: &[ScanOutput]) -> Result<Vec<String>> {
    let model = cfg.build(b)?;
    let gs = model.ground_state()?;
    let branch = branch_or_ferro(&model);
    let wants = |o: ScanOutput| outputs.contains(&o);
    let e_ln = if wants(ScanOutput::Exact) {
        Some(log_negativity_pure(&gs.state)?)
    } else {
        None
    };
    let overlap = if wants(ScanOutput::Overlap) || wants(ScanOutput::Exact) {
        Some(ground_state_overlap(&model, &gs, branch)?)
    } else {
        None
    };
    let residual = match (&overlap, e_ln) {
        (Some(r), Some(e)) if !gs.degenerate && r.equality == Some(EqualityStatus::Expected) => {
            Some((r.bound_bits - e).abs())
        }
        _ => None,
    };
    let witness = if wants(ScanOutput::Witness) {
        let data = WitnessData::from_state(&model, &gs.state)?;
        let opt = optimize_w1(
            &model,
            &data,
            default_include_parity(&model),
            branch,
            default_w1_interval(&model),
            DEFAULT_BUDGET,
        )?;
        Some(opt.report.bound_bits)
    } else {
        None
    };
    let sdp = if wants(ScanOutput::Sdp) {
        let set = ObservableSet::energy_parity(&model)?;
        let data = measure_expectations(&gs.state, &set)?;
        let opts = SdpOptions {
            branch,
            ..SdpOptions::default()
        };
        Some(sdp_lower_bound(&set, &data, &opts)?.bound_bits)
    } else {
        None
    };
    Ok(vec![
        model.n_sites().to_string(),
        format_number(axis),
        num(b),
        num(model.j0()),
        num(gs.energy),
        num(gs.gap),
        gs.degenerate.to_string(),
        branch.to_string(),
        format_number(e_ln),
        format_number(if wants(ScanOutput::Overlap) {
            overlap.map(|r| r.bound_bits)
        } else {
            None
        }),
        format_number(if wants(ScanOutput::Overlap) { residual } else { None }),
        format_number(witness),
        format_number(sdp),
    ])
}

pub const WITNESS_SCAN_FILE: &str = "witness_scan.csv";

/// Seed of one perturbation trial.
pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    seed ^ (trial as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

/// Couplings scaled entrywise by `1 + pct/100 · u`, `u` uniform in
/// `[-1, 1]`, one draw per pair.
pub fn perturb_couplings(j: &DMatrix<f64>, pct: f64, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = j.clone();
    let n = j.nrows();
    for i in 0..n {
        for k in i + 1..n {
            let u: f64 = rng.gen_range(-1.0..=1.0);
            let v = j[(i, k)] * (1.0 + pct / 100.0 * u);
            out[(i, k)] = v;
            out[(k, i)] = v;
        }
    }
    out
}

/// Witness bounds built from the nominal couplings, evaluated on ground
/// states of randomly perturbed couplings.
pub fn cmd_witness_scan(
    model: &ModelConfig,
    cfg: &WitnessScanConfig,
    seed: u64,
    out: &Path,
) -> Result<PathBuf> {
    if !(cfg.perturbation_pct >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "perturbation must be a non-negative percentage, got {}",
            cfg.perturbation_pct
        )));
    }
    if cfg.trials == 0 {
        return Err(Error::InvalidArgument("at least one trial is required".into()));
    }
    let points: Vec<(f64, usize)> = cfg
        .fields
        .iter()
        .flat_map(|&b| (0..cfg.trials).map(move |t| (b, t)))
        .collect();
    let rows = points
        .par_iter()
        .map(|&(b, trial)| {
            let nominal = model.build(b)?;
            let s = trial_seed(seed, trial);
            let actual = SpinModel::new(
                perturb_couplings(nominal.couplings(), cfg.perturbation_pct, s),
                nominal.field_b(),
            )?;
            let gs = actual.ground_state()?;
            let exact = log_negativity_pure(&gs.state)?;
            let data = WitnessData::from_state(&nominal, &gs.state)?;
            let branch = branch_or_ferro(&nominal);
            let bound = |parity: bool| -> Result<f64> {
                Ok(optimize_w1(&nominal, &data, parity, branch, default_w1_interval(&nominal), cfg.budget)?
                    .report
                    .bound_bits)
            };
            Ok(vec![
                num(b),
                trial.to_string(),
                s.to_string(),
                num(exact),
                num(bound(true)?),
                num(bound(false)?),
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    let header: Vec<String> = [
        "b_over_j0",
        "trial",
        "trial_seed",
        "e_ln",
        "bound_with_parity",
        "bound_without_parity",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let path = out.join(WITNESS_SCAN_FILE);
    write_csv(&path, &header, &rows)?;
    Ok(path)
}

/// File stem of the trajectory with the given rates (in units of `J0`).
pub fn ramp_stem(rates: &NoiseRates) -> String {
    format!("ramp_se{}_dph{}", rates.gamma_se, rates.gamma_dph)
}

pub fn ramp_header(max_d: usize) -> Vec<String> {
    let mut h: Vec<String> = [
        "step",
        "t",
        "B",
        "trace_drift",
        "E_ln",
        "S_block",
        "bound_overlap",
        "bound_witness",
        "bound_sdp",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    h.extend((1..=max_d).map(|d| format!("eps_lower_D{d}")));
    h.extend((1..=max_d).map(|d| format!("eps_upper_D{d}")));
    h
}

/// One trajectory per noise entry, each into its own CSV. With `resume`, a
/// trajectory restarts from its checkpoint and keeps the rows written up to
/// it.
pub fn cmd_ramp(model: &ModelConfig, cfg: &RampConfig, out: &Path, resume: bool) -> Result<Vec<PathBuf>> {
    let base = model.build(0.0)?;
    cfg.noise
        .par_iter()
        .map(|rates| run_trajectory(&base, cfg, rates, out, resume))
        .collect()
}

fn run_trajectory(
    model: &SpinModel,
    cfg: &RampConfig,
    relative: &NoiseRates,
    out: &Path,
    resume: bool,
) -> Result<PathBuf> {
    let j0 = model.j0();
    let rates = NoiseRates::new(relative.gamma_se * j0, relative.gamma_dph * j0)?;
    let stem = ramp_stem(relative);
    let csv_path = out.join(format!("{stem}.csv"));
    let ckpt_path = out.join(format!("{stem}.ckpt"));
    let opts = IntegratorOptions {
        n_steps: cfg.n_steps,
        jump: cfg.jump,
    };
    let header = ramp_header(cfg.diagnostics.max_bond_dimension);

    let mut kept = String::new();
    let mut run = if resume && ckpt_path.exists() {
        let run = RampIntegrator::resume(
            model,
            cfg.schedule,
            rates,
            opts,
            BufReader::new(File::open(&ckpt_path)?),
        )?;
        let old = fs::read_to_string(&csv_path)?;
        let mut lines = old.lines();
        if lines.next() != Some(header.join(",").as_str()) {
            return Err(Error::InvalidState(format!(
                "{} does not match the configured columns",
                csv_path.display()
            )));
        }
        for line in lines {
            let step: usize = line
                .split(',')
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::InvalidState(format!("malformed row in {}", csv_path.display())))?;
            if step <= run.step_index() {
                kept.push_str(line);
                kept.push('\n');
            }
        }
        log::info!("{stem}: resuming at step {}", run.step_index());
        run
    } else {
        RampIntegrator::new(model, cfg.schedule, rates, opts)?
    };

    let mut w = BufWriter::new(File::create(&csv_path)?);
    writeln!(w, "{}", header.join(","))?;
    w.write_all(kept.as_bytes())?;
    let every = cfg.sample_every.max(1);
    let row = |run: &RampIntegrator| -> Result<String> {
        let rho = run.state();
        let d = diagnostics(&model.with_field(run.field()), &rho, &cfg.diagnostics)?;
        let mut r = vec![
            run.step_index().to_string(),
            num(run.time()),
            num(run.field()),
            num(run.trace_drift()),
            num(d.log_negativity),
            num(d.block_entropy),
            num(d.overlap_bound),
            num(d.witness_bound),
            num(d.sdp_bound),
        ];
        r.extend(d.mpo.iter().map(|m| num(m.lower)));
        r.extend(d.mpo.iter().map(|m| num(m.upper)));
        Ok(r.join(","))
    };
    if kept.is_empty() {
        writeln!(w, "{}", row(&run)?)?;
    }
    while !run.is_done() {
        run.advance()?;
        let step = run.step_index();
        if step % every == 0 || run.is_done() {
            writeln!(w, "{}", row(&run)?)?;
        }
        if cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0 {
            w.flush()?;
            let tmp = out.join(format!("{stem}.ckpt.tmp"));
            write_snapshot(BufWriter::new(File::create(&tmp)?), &run.snapshot())?;
            fs::rename(&tmp, &ckpt_path)?;
        }
    }
    w.flush()?;
    Ok(csv_path)
}

pub const BOUND_FILE: &str = "bound.json";

#[derive(Debug, Serialize)]
pub struct DataBoundOutput {
    pub seed: u64,
    pub n_sites: usize,
    pub observables: Vec<String>,
    pub reports: Vec<BoundReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Lower bounds from a measurement file. The witness needs an `H` entry
/// and a model guess; the SDP uses every listed observable.
pub fn bound_from_data(
    text: &str,
    n_sites: usize,
    model: Option<&SpinModel>,
    cfg: &BoundConfig,
    seed: u64,
) -> Result<DataBoundOutput> {
    let model = model.filter(|m| m.n_sites() == n_sites);
    let (set, data) = parse_measurements(text, n_sites, model)?;
    let branch = cfg
        .branch
        .or_else(|| model.and_then(qualifying_branch))
        .unwrap_or(Branch::Ferro);
    let value = |name: &str| {
        set.index_of(name).map(|i| data[i].value)
    };
    let mut reports = Vec::new();
    let mut warnings = Vec::new();
    if matches!(cfg.method, BoundMethod::Witness | BoundMethod::Both) {
        match (model, value("H")) {
            (Some(m), Some(energy)) => {
                let parity = value("PARITY_X");
                let data = WitnessData {
                    energy,
                    parity_x: parity.unwrap_or(0.0),
                };
                let opt = optimize_w1(m, &data, parity.is_some(), branch, default_w1_interval(m), DEFAULT_BUDGET)?;
                reports.push(opt.report);
            }
            (None, _) => warnings.push("witness skipped: no model guess for this chain length".into()),
            (_, None) => warnings.push("witness skipped: no `H` measurement".into()),
        }
    }
    if matches!(cfg.method, BoundMethod::Sdp | BoundMethod::Both) {
        let opts = SdpOptions {
            branch,
            ..SdpOptions::default()
        };
        reports.push(sdp_lower_bound(&set, &data, &opts)?);
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(DataBoundOutput {
        seed,
        n_sites,
        observables: set.observables().iter().map(|o| o.name().to_string()).collect(),
        reports,
        warnings,
    })
}

pub fn cmd_bound_from_data(
    data_path: &Path,
    n_sites: usize,
    model: Option<&SpinModel>,
    cfg: &BoundConfig,
    seed: u64,
    out: &Path,
) -> Result<PathBuf> {
    let text = fs::read_to_string(data_path)?;
    let result = bound_from_data(&text, n_sites, model, cfg, seed)?;
    let path = out.join(BOUND_FILE);
    let mut w = BufWriter::new(File::create(&path)?);
    serde_json::to_writer_pretty(&mut w, &result)?;
    writeln!(w)?;
    w.flush()?;
    Ok(path)
}

pub const APPENDIX_FILE: &str = "appendix.csv";

pub fn cmd_validate_appendix(cfg: &AppendixConfig, out: &Path) -> Result<PathBuf> {
    let points: Vec<(usize, f64)> = (1..=cfg.n_half_max)
        .flat_map(|n| cfg.p_values.iter().map(move |&p| (n, p)))
        .collect();
    let rows = points
        .par_iter()
        .map(|&(n, p)| {
            let r = validate_appendix_positivity(n, p)?;
            Ok(vec![
                r.n_half.to_string(),
                num(r.p),
                num(r.d_min_eigenvalue),
                num(r.d_min_pivot),
                r.d_positive_definite.to_string(),
                num(r.neg_cross_block_min_eigenvalue),
                num(r.cross_block_norm),
                r.cross_block_nsd.to_string(),
                num(r.tau),
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    let header: Vec<String> = [
        "n_half",
        "p",
        "d_min_eigenvalue",
        "d_min_pivot",
        "d_positive_definite",
        "neg_cross_block_min_eigenvalue",
        "cross_block_norm",
        "cross_block_nsd",
        "tau",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let path = out.join(APPENDIX_FILE);
    write_csv(&path, &header, &rows)?;
    Ok(path)
}
