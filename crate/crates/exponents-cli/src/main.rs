//! `exponents` — error-exponent curves, sweeps and random-binning
//! simulations for channels with encoder side information.

use clap::{Args, Parser, Subcommand};
use exponents_cli::{
    request_from_config, run_curve, run_sim, run_sweep, CliError, CurveRequest, Family, Format,
    Kind, SimRequest, SweepRequest, SweepVar,
};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "exponents",
    version,
    about = "Error exponents for the dirty-paper and finite-alphabet side-information channels"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dirty-paper exponent curve over a rate grid.
    DpcCurve(DpcCurveArgs),
    /// Zero-rate dirty-paper sweep over alpha or the interference variance.
    DpcSweep(SweepArgs),
    /// Side-information exponent curve over a rate grid.
    GpCurve(GpCurveArgs),
    /// Monte Carlo simulation of the random-binning scheme.
    GpSim(SimArgs),
}

#[derive(Args)]
struct CommonOut {
    /// Output file path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format: csv or json.
    #[arg(long)]
    format: Option<String>,
    /// Add unclamped exponent columns.
    #[arg(long)]
    raw: bool,
    /// Convert rates and exponents to bits on output.
    #[arg(long)]
    bits: bool,
    /// JSON config file; explicit flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct DpcCurveArgs {
    #[arg(long = "P")]
    power: Option<f64>,
    #[arg(long = "Q")]
    interference: Option<f64>,
    #[arg(long)]
    sigma2: Option<f64>,
    /// Fixed design parameter alpha (mutually exclusive with optimization).
    #[arg(long, conflicts_with = "optimize_alpha")]
    alpha: Option<f64>,
    /// Maximize each exponent over alpha in [0, 1].
    #[arg(long)]
    optimize_alpha: bool,
    /// Fixed interference-shell variance.
    #[arg(long, conflicts_with = "gaussian_interference")]
    qhat: Option<f64>,
    /// Gaussian interference: minimize over q_hat with a divergence penalty.
    #[arg(long)]
    gaussian_interference: bool,
    #[arg(long)]
    rate_start: Option<f64>,
    #[arg(long)]
    rate_stop: Option<f64>,
    #[arg(long)]
    rate_step: Option<f64>,
    /// Comma-separated subset of rc,trc,ex.
    #[arg(long)]
    kinds: Option<String>,
    #[command(flatten)]
    out: CommonOut,
}

#[derive(Args)]
struct SweepArgs {
    /// Swept variable: alpha or q.
    #[arg(long)]
    sweep_var: Option<String>,
    #[arg(long)]
    grid_start: Option<f64>,
    #[arg(long)]
    grid_stop: Option<f64>,
    #[arg(long)]
    grid_step: Option<f64>,
    /// Rate the sweep is evaluated at (default 0).
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long = "P")]
    power: Option<f64>,
    #[arg(long = "Q")]
    interference: Option<f64>,
    #[arg(long)]
    sigma2: Option<f64>,
    #[arg(long)]
    kinds: Option<String>,
    #[command(flatten)]
    out: CommonOut,
}

#[derive(Args)]
struct GpCurveArgs {
    /// Probability of the clean state of the default binary channel.
    #[arg(long)]
    p_state: Option<f64>,
    /// Auxiliary alphabet size.
    #[arg(long)]
    aux_alphabet: Option<usize>,
    #[arg(long)]
    rate_start: Option<f64>,
    #[arg(long)]
    rate_stop: Option<f64>,
    #[arg(long)]
    rate_step: Option<f64>,
    #[arg(long)]
    kinds: Option<String>,
    #[command(flatten)]
    out: CommonOut,
}

#[derive(Args)]
struct SimArgs {
    #[arg(long)]
    p_state: Option<f64>,
    /// Rate in nats.
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated blocklengths, e.g. 8,12,16.
    #[arg(long)]
    n_list: Option<String>,
    /// Binning slack epsilon.
    #[arg(long)]
    epsilon: Option<f64>,
    #[command(flatten)]
    out: CommonOut,
}

fn parse_format(s: &str) -> Result<Format, CliError> {
    match s {
        "csv" => Ok(Format::Csv),
        "json" => Ok(Format::Json),
        other => Err(CliError::Usage(format!("unknown format '{other}'"))),
    }
}

fn dpc_curve_request(args: &DpcCurveArgs) -> Result<CurveRequest, CliError> {
    let mut req: CurveRequest = match &args.out.config {
        Some(path) => request_from_config(path)?,
        None => CurveRequest {
            family: Family::Dpc,
            kinds: vec![Kind::Rc, Kind::Trc, Kind::Ex],
            rate_start: 0.0,
            rate_stop: 0.6,
            rate_step: 0.01,
            power: 10.0,
            interference: 1.0,
            noise_var: 1.0,
            alpha: None,
            q_hat: None,
            gaussian_interference: false,
            p_state: 0.7,
            gp_channel: None,
            aux_alphabet: None,
            out: PathBuf::from("dpc_curve.csv"),
            format: Format::Csv,
            raw: false,
            bits: false,
        },
    };
    req.family = Family::Dpc;
    if let Some(v) = args.power {
        req.power = v;
    }
    if let Some(v) = args.interference {
        req.interference = v;
    }
    if let Some(v) = args.sigma2 {
        req.noise_var = v;
    }
    if let Some(v) = args.alpha {
        req.alpha = Some(v);
    }
    if args.optimize_alpha {
        req.alpha = None;
    }
    if let Some(v) = args.qhat {
        req.q_hat = Some(v);
    }
    if args.gaussian_interference {
        req.gaussian_interference = true;
        req.q_hat = None;
    }
    if let Some(v) = args.rate_start {
        req.rate_start = v;
    }
    if let Some(v) = args.rate_stop {
        req.rate_stop = v;
    }
    if let Some(v) = args.rate_step {
        req.rate_step = v;
    }
    if let Some(s) = &args.kinds {
        req.kinds = Kind::parse_list(s)?;
    }
    if let Some(p) = &args.out.out {
        req.out = p.clone();
    }
    if let Some(f) = &args.out.format {
        req.format = parse_format(f)?;
    }
    if args.out.raw {
        req.raw = true;
    }
    if args.out.bits {
        req.bits = true;
    }
    Ok(req)
}

fn gp_curve_request(args: &GpCurveArgs) -> Result<CurveRequest, CliError> {
    let mut req: CurveRequest = match &args.out.config {
        Some(path) => request_from_config(path)?,
        None => CurveRequest {
            family: Family::Gp,
            kinds: vec![Kind::Rc],
            rate_start: 0.0,
            rate_stop: 0.5,
            rate_step: 0.01,
            power: 10.0,
            interference: 1.0,
            noise_var: 1.0,
            alpha: None,
            q_hat: None,
            gaussian_interference: false,
            p_state: 0.7,
            gp_channel: None,
            aux_alphabet: None,
            out: PathBuf::from("gp_curve.csv"),
            format: Format::Csv,
            raw: false,
            bits: false,
        },
    };
    req.family = Family::Gp;
    if let Some(v) = args.p_state {
        req.p_state = v;
    }
    if let Some(v) = args.aux_alphabet {
        req.aux_alphabet = Some(v);
    }
    if let Some(v) = args.rate_start {
        req.rate_start = v;
    }
    if let Some(v) = args.rate_stop {
        req.rate_stop = v;
    }
    if let Some(v) = args.rate_step {
        req.rate_step = v;
    }
    if let Some(s) = &args.kinds {
        req.kinds = Kind::parse_list(s)?;
    }
    if let Some(p) = &args.out.out {
        req.out = p.clone();
    }
    if let Some(f) = &args.out.format {
        req.format = parse_format(f)?;
    }
    if args.out.raw {
        req.raw = true;
    }
    if args.out.bits {
        req.bits = true;
    }
    Ok(req)
}

fn sweep_request(args: &SweepArgs) -> Result<SweepRequest, CliError> {
    let mut req: SweepRequest = match &args.out.config {
        Some(path) => request_from_config(path)?,
        None => SweepRequest {
            sweep_var: SweepVar::Alpha,
            grid_start: 0.01,
            grid_stop: 1.0,
            grid_step: 0.01,
            rate: 0.0,
            kinds: vec![Kind::Rc, Kind::Trc],
            power: 10.0,
            interference: 1.0,
            noise_var: 1.0,
            out: PathBuf::from("dpc_sweep.csv"),
            format: Format::Csv,
            raw: false,
            bits: false,
        },
    };
    if let Some(s) = &args.sweep_var {
        req.sweep_var = match s.as_str() {
            "alpha" => SweepVar::Alpha,
            "q" => SweepVar::Q,
            "p-state" | "p_state" => SweepVar::PState,
            other => return Err(CliError::Usage(format!("unknown sweep variable '{other}'"))),
        };
        // figure-matching default grids per variable
        if args.grid_start.is_none() && args.grid_stop.is_none() && args.grid_step.is_none() {
            match req.sweep_var {
                SweepVar::Alpha => {
                    req.grid_start = 0.01;
                    req.grid_stop = 1.0;
                    req.grid_step = 0.01;
                }
                SweepVar::Q => {
                    req.grid_start = 0.0;
                    req.grid_stop = 1.0;
                    req.grid_step = 0.04;
                }
                SweepVar::PState => {
                    req.grid_start = 0.1;
                    req.grid_stop = 0.9;
                    req.grid_step = 0.1;
                }
            }
        }
    }
    if let Some(v) = args.grid_start {
        req.grid_start = v;
    }
    if let Some(v) = args.grid_stop {
        req.grid_stop = v;
    }
    if let Some(v) = args.grid_step {
        req.grid_step = v;
    }
    if let Some(v) = args.rate {
        req.rate = v;
    }
    if let Some(v) = args.power {
        req.power = v;
    }
    if let Some(v) = args.interference {
        req.interference = v;
    }
    if let Some(v) = args.sigma2 {
        req.noise_var = v;
    }
    if let Some(s) = &args.kinds {
        req.kinds = Kind::parse_list(s)?;
    }
    if let Some(p) = &args.out.out {
        req.out = p.clone();
    }
    if let Some(f) = &args.out.format {
        req.format = parse_format(f)?;
    }
    if args.out.raw {
        req.raw = true;
    }
    if args.out.bits {
        req.bits = true;
    }
    Ok(req)
}

fn sim_request(args: &SimArgs) -> Result<SimRequest, CliError> {
    let mut req: SimRequest = match &args.out.config {
        Some(path) => request_from_config(path)?,
        None => SimRequest {
            p_state: 0.7,
            gp_channel: None,
            design: None,
            rate: 0.2,
            trials: 10_000,
            seed: 1,
            n_list: vec![8, 12, 16],
            epsilon: 0.05,
            out: PathBuf::from("gp_sim.json"),
        },
    };
    if let Some(v) = args.p_state {
        req.p_state = v;
    }
    if let Some(v) = args.rate {
        req.rate = v;
    }
    if let Some(v) = args.trials {
        req.trials = v;
    }
    if let Some(v) = args.seed {
        req.seed = v;
    }
    if let Some(list) = &args.n_list {
        req.n_list = list
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<usize>()
                    .map_err(|_| CliError::Usage(format!("bad blocklength '{p}'")))
            })
            .collect::<Result<_, _>>()?;
    }
    if let Some(v) = args.epsilon {
        req.epsilon = v;
    }
    if let Some(p) = &args.out.out {
        req.out = p.clone();
    }
    Ok(req)
}

fn run() -> Result<(), CliError> {
    let cli = Cli::parse();
    match &cli.command {
        Command::DpcCurve(args) => run_curve(&dpc_curve_request(args)?),
        Command::GpCurve(args) => run_curve(&gp_curve_request(args)?),
        Command::DpcSweep(args) => run_sweep(&sweep_request(args)?),
        Command::GpSim(args) => run_sim(&sim_request(args)?),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            match e {
                CliError::Usage(_) => ExitCode::from(2),
                CliError::Runtime(_) => ExitCode::FAILURE,
            }
        }
    }
}
