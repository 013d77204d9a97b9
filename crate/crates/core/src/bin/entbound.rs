use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use entbound::cli::{self, BoundMethod, Config, ModelConfig, ScanOutput};
use entbound::dynamics::NoiseRates;
use entbound::witness::Branch;

const DEFAULT_SEED: u64 = 1;

#[derive(Parser)]
#[command(name = "entbound", version, about = "Exact log-negativity and certified entanglement bounds for Ising chains")]
struct Cli {
    /// JSON configuration file; flags take precedence over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; all cores by default.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(flatten)]
    model: ModelArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ModelArgs {
    /// Chain length of the configured model.
    #[arg(long, global = true)]
    n_sites: Option<usize>,
    /// Decay exponent of algebraic couplings.
    #[arg(long, global = true)]
    p: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Ground-state sweep over fields and the model's secondary axis.
    Scan {
        /// Fields in units of J0.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        fields: Option<Vec<f64>>,
        /// Values of p (algebraic) or the detuning offset in Hz (ion trap).
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        axis: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        outputs: Option<Vec<OutputArg>>,
    },
    /// Witness bounds on ground states of randomly perturbed couplings.
    WitnessScan {
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        fields: Option<Vec<f64>>,
        /// Coupling perturbation in percent.
        #[arg(long)]
        pct: Option<f64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Noisy field ramp with per-sample entanglement diagnostics.
    Ramp {
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        sample_every: Option<usize>,
        #[arg(long)]
        checkpoint_every: Option<usize>,
        #[arg(long)]
        rate: Option<f64>,
        #[arg(long)]
        t0: Option<f64>,
        #[arg(long)]
        b_final: Option<f64>,
        /// Single run with these rates (units of J0) instead of the grid.
        #[arg(long)]
        gamma_se: Option<f64>,
        #[arg(long)]
        gamma_dph: Option<f64>,
        /// Skip the SDP column.
        #[arg(long)]
        no_sdp: bool,
        /// Continue each trajectory from its checkpoint.
        #[arg(long)]
        resume: bool,
    },
    /// Certified bounds from a JSON list of measured expectation values.
    BoundFromData {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        method: Option<MethodArg>,
        #[arg(long)]
        branch: Option<BranchArg>,
        /// Field of the model guess in units of J0.
        #[arg(long, allow_negative_numbers = true)]
        field: Option<f64>,
    },
    /// Numerical checks of the cross-block definiteness criterion.
    ValidateAppendix {
        #[arg(long)]
        n_half_max: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        p_values: Option<Vec<f64>>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputArg {
    Exact,
    Overlap,
    Witness,
    Sdp,
}

impl From<OutputArg> for ScanOutput {
    fn from(o: OutputArg) -> Self {
        match o {
            OutputArg::Exact => ScanOutput::Exact,
            OutputArg::Overlap => ScanOutput::Overlap,
            OutputArg::Witness => ScanOutput::Witness,
            OutputArg::Sdp => ScanOutput::Sdp,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Witness,
    Sdp,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum BranchArg {
    Ferro,
    Antiferro,
}

fn apply_model_args(model: &mut ModelConfig, args: &ModelArgs) -> entbound::Result<()> {
    match model {
        ModelConfig::Algebraic { n_sites, p, .. } => {
            if let Some(n) = args.n_sites {
                *n_sites = n;
            }
            if let Some(v) = args.p {
                *p = v;
            }
        }
        ModelConfig::IonTrap { n_ions, .. } => {
            if let Some(n) = args.n_sites {
                *n_ions = n;
            }
            if args.p.is_some() {
                return Err(entbound::Error::InvalidArgument("--p applies to algebraic couplings only".into()));
            }
        }
        ModelConfig::Explicit { couplings } => {
            if args.n_sites.is_some_and(|n| n != couplings.len()) || args.p.is_some() {
                return Err(entbound::Error::InvalidArgument(
                    "--n-sites and --p cannot change explicit couplings".into(),
                ));
            }
        }
    }
    Ok(())
}

fn run(cli: Cli) -> entbound::Result<()> {
    let mut config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    let seed = cli.seed.or(config.seed).unwrap_or(DEFAULT_SEED);
    log::info!("seed {seed}");
    if let Some(t) = cli.threads.or(config.threads) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| entbound::Error::InvalidArgument(e.to_string()))?;
    }
    apply_model_args(&mut config.model, &cli.model)?;
    std::fs::create_dir_all(&cli.out)?;
    let out = cli.out.as_path();

    let written = match cli.command {
        Command::Scan { fields, axis, outputs } => {
            let mut scan = config.scan;
            if let Some(f) = fields {
                scan.fields = f;
            }
            if let Some(a) = axis {
                scan.axis = a;
            }
            if let Some(o) = outputs {
                scan.outputs = o.into_iter().map(Into::into).collect();
            }
            vec![cli::cmd_scan(&config.model, &scan, out)?]
        }
        Command::WitnessScan {
            fields,
            pct,
            trials,
            budget,
        } => {
            let mut ws = config.witness_scan;
            if let Some(f) = fields {
                ws.fields = f;
            }
            if let Some(p) = pct {
                ws.perturbation_pct = p;
            }
            if let Some(t) = trials {
                ws.trials = t;
            }
            if let Some(b) = budget {
                ws.budget = b;
            }
            vec![cli::cmd_witness_scan(&config.model, &ws, seed, out)?]
        }
        Command::Ramp {
            steps,
            sample_every,
            checkpoint_every,
            rate,
            t0,
            b_final,
            gamma_se,
            gamma_dph,
            no_sdp,
            resume,
        } => {
            let mut ramp = config.ramp;
            if let Some(s) = steps {
                ramp.n_steps = s;
            }
            if let Some(s) = sample_every {
                ramp.sample_every = s;
            }
            if let Some(c) = checkpoint_every {
                ramp.checkpoint_every = c;
            }
            if let Some(r) = rate {
                ramp.schedule.rate = r;
            }
            if let Some(t) = t0 {
                ramp.schedule.t0 = t;
            }
            if let Some(b) = b_final {
                ramp.schedule.b_final = b;
            }
            if gamma_se.is_some() || gamma_dph.is_some() {
                ramp.noise = vec![NoiseRates::new(gamma_se.unwrap_or(0.0), gamma_dph.unwrap_or(0.0))?];
            }
            if no_sdp {
                ramp.diagnostics.sdp = false;
            }
            cli::cmd_ramp(&config.model, &ramp, out, resume)?
        }
        Command::BoundFromData {
            data,
            method,
            branch,
            field,
        } => {
            let mut bc = config.bound_from_data;
            if let Some(m) = method {
                bc.method = match m {
                    MethodArg::Witness => BoundMethod::Witness,
                    MethodArg::Sdp => BoundMethod::Sdp,
                    MethodArg::Both => BoundMethod::Both,
                };
            }
            if let Some(b) = branch {
                bc.branch = Some(match b {
                    BranchArg::Ferro => Branch::Ferro,
                    BranchArg::Antiferro => Branch::Antiferro,
                });
            }
            if let Some(f) = field {
                bc.field = f;
            }
            let model = config.model.build(bc.field).ok();
            let n = config.model.n_sites();
            vec![cli::cmd_bound_from_data(&data, n, model.as_ref(), &bc, seed, out)?]
        }
        Command::ValidateAppendix { n_half_max, p_values } => {
            let mut ac = config.appendix;
            if let Some(n) = n_half_max {
                ac.n_half_max = n;
            }
            if let Some(p) = p_values {
                ac.p_values = p;
            }
            vec![cli::cmd_validate_appendix(&ac, out)?]
        }
    };
    for path in written {
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
