//! Request execution behind the `exponents` CLI: curve and sweep emission as
//! CSV or JSON, and the Monte Carlo simulator reports.
//!
//! Rates and exponents are in nats everywhere; `bits: true` converts on
//! output only. Curve files clamp exponents at zero (plot semantics); the
//! unclamped values appear as extra columns under `raw: true`. JSON reports
//! embed the effective request under `"config"`, so a report fed back
//! through `--config` reproduces the same CSV byte for byte. Files are
//! written to a temporary sibling and renamed into place.

use exponents::curves::{self, DesignPolicy};
use exponents::dpc::{DpcChannel, DpcDesign, Interference};
use exponents::gp::{GpChannel, GpDesign, GpGrids, RateNats};
use exponents::gpsim::{self, SimConfig};
use exponents::info::{Axis, Conditional, JointDistribution};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Errors split by exit code: usage problems exit 2, runtime problems 1.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<exponents::Error> for CliError {
    fn from(e: exponents::Error) -> Self {
        match e {
            exponents::Error::InvalidArgument(m) | exponents::Error::Config(m) => {
                CliError::Usage(m)
            }
            exponents::Error::Infeasible(m) => CliError::Runtime(m),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Dpc,
    Gp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Rc,
    Trc,
    Ex,
}

impl Kind {
    pub fn parse_list(s: &str) -> CliResult<Vec<Kind>> {
        let mut kinds = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            kinds.push(match part {
                "rc" => Kind::Rc,
                "trc" => Kind::Trc,
                "ex" => Kind::Ex,
                other => return Err(CliError::Usage(format!("unknown kind '{other}'"))),
            });
        }
        if kinds.is_empty() {
            return Err(CliError::Usage("at least one kind is required".into()));
        }
        Ok(kinds)
    }

    fn column(self) -> &'static str {
        match self {
            Kind::Rc => "E_rc",
            Kind::Trc => "E_trc",
            Kind::Ex => "E_ex",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

/// Finite-alphabet channel spec: state prior and `w[x][s][y]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GpChannelSpec {
    pub p_s: Vec<f64>,
    pub w_y_given_xs: Vec<Vec<Vec<f64>>>,
}

/// Code-design spec: `q_u_given_s[s][u]` and `q_x_given_us[u][s][x]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GpDesignSpec {
    pub q_u_given_s: Vec<Vec<f64>>,
    pub q_x_given_us: Vec<Vec<Vec<f64>>>,
}

fn default_power() -> f64 {
    10.0
}
fn default_interference() -> f64 {
    1.0
}
fn default_noise() -> f64 {
    1.0
}
fn default_p_state() -> f64 {
    0.7
}
fn default_format() -> Format {
    Format::Csv
}

/// One exponent-curve run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveRequest {
    pub family: Family,
    pub kinds: Vec<Kind>,
    pub rate_start: f64,
    pub rate_stop: f64,
    pub rate_step: f64,
    #[serde(default = "default_power")]
    pub power: f64,
    #[serde(default = "default_interference")]
    pub interference: f64,
    #[serde(default = "default_noise")]
    pub noise_var: f64,
    /// Fixed design parameter; absent means optimize over alpha.
    #[serde(default)]
    pub alpha: Option<f64>,
    /// Fixed shell variance; absent means the interference variance.
    #[serde(default)]
    pub q_hat: Option<f64>,
    /// Gaussian interference: minimize over q_hat with a divergence penalty.
    #[serde(default)]
    pub gaussian_interference: bool,
    #[serde(default = "default_p_state")]
    pub p_state: f64,
    /// Full channel spec; overrides `p_state` when present.
    #[serde(default)]
    pub gp_channel: Option<GpChannelSpec>,
    /// Auxiliary alphabet size for the side-information exponents.
    #[serde(default)]
    pub aux_alphabet: Option<usize>,
    pub out: PathBuf,
    #[serde(default = "default_format")]
    pub format: Format,
    #[serde(default)]
    pub raw: bool,
    #[serde(default)]
    pub bits: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVar {
    Alpha,
    Q,
    PState,
}

/// Zero-rate (by default) sweep over a design or channel parameter.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepRequest {
    pub sweep_var: SweepVar,
    pub grid_start: f64,
    pub grid_stop: f64,
    pub grid_step: f64,
    #[serde(default)]
    pub rate: f64,
    pub kinds: Vec<Kind>,
    #[serde(default = "default_power")]
    pub power: f64,
    #[serde(default = "default_interference")]
    pub interference: f64,
    #[serde(default = "default_noise")]
    pub noise_var: f64,
    pub out: PathBuf,
    #[serde(default = "default_format")]
    pub format: Format,
    #[serde(default)]
    pub raw: bool,
    #[serde(default)]
    pub bits: bool,
}

/// Monte Carlo simulation run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimRequest {
    #[serde(default = "default_p_state")]
    pub p_state: f64,
    #[serde(default)]
    pub gp_channel: Option<GpChannelSpec>,
    #[serde(default)]
    pub design: Option<GpDesignSpec>,
    pub rate: f64,
    pub trials: u64,
    pub seed: u64,
    pub n_list: Vec<usize>,
    #[serde(default = "default_sim_epsilon")]
    pub epsilon: f64,
    pub out: PathBuf,
}

fn default_sim_epsilon() -> f64 {
    0.05
}

const LN_2: f64 = std::f64::consts::LN_2;

/// `%.9g`-style formatting: nine significant digits.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let exp = x.abs().log10().floor() as i32;
    if (-4..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.8e}")
    }
}

fn write_atomic(path: &Path, contents: &str) -> CliResult<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let tmp = match dir {
        Some(d) => d.join(format!(
            ".{}.tmp{}",
            path.file_name().and_then(|n| n.to_str()).unwrap_or("out"),
            std::process::id()
        )),
        None => PathBuf::from(format!(".exponents.tmp{}", std::process::id())),
    };
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn gp_channel_from(spec: Option<&GpChannelSpec>, p_state: f64) -> CliResult<GpChannel<f64>> {
    match spec {
        None => Ok(GpChannel::binary_clean_or_stuck(p_state)?),
        Some(spec) => {
            let ns = spec.p_s.len();
            let nx = spec.w_y_given_xs.len();
            if nx == 0 || spec.w_y_given_xs.iter().any(|per_x| per_x.len() != ns) {
                return Err(CliError::Usage(
                    "w_y_given_xs must be indexed [x][s][y] with one row per state".into(),
                ));
            }
            let ny = spec.w_y_given_xs[0][0].len();
            let mut rows = Vec::with_capacity(nx * ns * ny);
            for per_x in &spec.w_y_given_xs {
                for row in per_x {
                    if row.len() != ny {
                        return Err(CliError::Usage("ragged channel rows".into()));
                    }
                    rows.extend_from_slice(row);
                }
            }
            let p_s = JointDistribution::new(&[(Axis::S, ns)], spec.p_s.clone())?;
            let w = Conditional::new(&[(Axis::X, nx), (Axis::S, ns)], (Axis::Y, ny), rows)?;
            Ok(GpChannel::new(p_s, w)?)
        }
    }
}

fn gp_design_from(
    spec: Option<&GpDesignSpec>,
    ch: &GpChannel<f64>,
    epsilon: f64,
) -> CliResult<GpDesign<f64>> {
    match spec {
        Some(spec) => {
            let ns = spec.q_u_given_s.len();
            let nu = spec.q_u_given_s.first().map_or(0, Vec::len);
            let u_rows: Vec<f64> = spec.q_u_given_s.iter().flatten().copied().collect();
            let q_u = Conditional::new(&[(Axis::S, ns)], (Axis::U, nu), u_rows)?;
            let nx = spec
                .q_x_given_us
                .first()
                .and_then(|per_u| per_u.first())
                .map_or(0, Vec::len);
            let x_rows: Vec<f64> = spec
                .q_x_given_us
                .iter()
                .flatten()
                .flatten()
                .copied()
                .collect();
            let q_x = Conditional::new(&[(Axis::U, nu), (Axis::S, ns)], (Axis::X, nx), x_rows)?;
            Ok(GpDesign::new(q_u, q_x, epsilon)?)
        }
        None => {
            // clean/stuck default channel has a known capacity design; any
            // other channel falls back to the random-coding optimum
            if ch.ns() == 2 && ch.nx() == 2 && ch.ny() == 2 {
                Ok(GpDesign::binary_stuck_matched(epsilon)?)
            } else {
                let mut d = exponents::gp::rc_optimal_design(ch, &GpGrids::reduced())?;
                d.epsilon = epsilon;
                Ok(d)
            }
        }
    }
}

/// Curve record: rate plus the requested exponents, clamped and raw.
#[derive(Debug, Clone, Serialize)]
struct Record {
    x: f64,
    clamped: Vec<f64>,
    raw: Vec<f64>,
}

fn csv_table(x_name: &str, kinds: &[Kind], records: &[Record], raw: bool, bits: bool) -> String {
    let scale = if bits { 1.0 / LN_2 } else { 1.0 };
    let mut out = String::new();
    out.push_str(x_name);
    for k in kinds {
        out.push(',');
        out.push_str(k.column());
    }
    if raw {
        for k in kinds {
            out.push(',');
            out.push_str(k.column());
            out.push_str("_raw");
        }
    }
    out.push_str("\r\n");
    for r in records {
        let _ = write!(out, "{}", fmt_sig(r.x * scale));
        for v in &r.clamped {
            let _ = write!(out, ",{}", fmt_sig(v * scale));
        }
        if raw {
            for v in &r.raw {
                let _ = write!(out, ",{}", fmt_sig(v * scale));
            }
        }
        out.push_str("\r\n");
    }
    out
}

fn json_report<C: Serialize>(
    config: &C,
    x_name: &str,
    kinds: &[Kind],
    records: &[Record],
    bits: bool,
    policy: &str,
) -> String {
    let scale = if bits { 1.0 / LN_2 } else { 1.0 };
    let recs: Vec<serde_json::Value> = records
        .iter()
        .map(|r| {
            let mut obj = serde_json::Map::new();
            obj.insert(x_name.into(), (r.x * scale).into());
            for (k, v) in kinds.iter().zip(&r.clamped) {
                obj.insert(k.column().to_lowercase(), (v * scale).into());
            }
            for (k, v) in kinds.iter().zip(&r.raw) {
                obj.insert(format!("{}_raw", k.column().to_lowercase()), (v * scale).into());
            }
            serde_json::Value::Object(obj)
        })
        .collect();
    let report = serde_json::json!({
        "tool": { "name": "exponents", "version": env!("CARGO_PKG_VERSION") },
        "units": if bits { "bits" } else { "nats" },
        "design_policy": policy,
        "optimizer": {
            "alpha_search": "0.04-step grid plus golden polish (0.10-step under Gaussian interference); sweeps use the explicit requested grid",
            "qs_resolution": "1/64 refined to 1/512",
            "note": "side-information TRC/expurgated bounds restrict the per-state-type design family to one shared conditional law; values are lower bounds",
        },
        "config": config,
        "records": recs,
    });
    serde_json::to_string_pretty(&report).expect("report serializes")
}

/// Compute and write one curve; returns the emitted records for callers
/// that post-process (sweep argmax printing, tests).
pub fn run_curve(req: &CurveRequest) -> CliResult<()> {
    if req.kinds.is_empty() {
        return Err(CliError::Usage("at least one kind is required".into()));
    }
    if !(req.rate_step > 0.0) || req.rate_start > req.rate_stop {
        return Err(CliError::Usage("need rate_step > 0 and rate_start <= rate_stop".into()));
    }
    let rates = curves::rate_grid(req.rate_start, req.rate_stop, req.rate_step);
    let (records, policy) = match req.family {
        Family::Dpc => {
            let ch = DpcChannel::new(req.power, req.interference, req.noise_var)?;
            let policy = match req.alpha {
                Some(alpha) => {
                    let q_hat = req.q_hat.unwrap_or(req.interference);
                    DesignPolicy::Fixed(DpcDesign::new(alpha, q_hat)?)
                }
                None => DesignPolicy::Optimized(if req.gaussian_interference {
                    Interference::Gaussian
                } else {
                    Interference::Spherical
                }),
            };
            let points = curves::dpc_curve(&ch, &rates, policy);
            let records: Vec<Record> = points
                .iter()
                .map(|p| {
                    let all = [p.exponents.rc, p.exponents.trc, p.exponents.ex];
                    let pick = |k: &Kind| match k {
                        Kind::Rc => all[0],
                        Kind::Trc => all[1],
                        Kind::Ex => all[2],
                    };
                    Record {
                        x: p.rate,
                        clamped: req.kinds.iter().map(|k| pick(k).max(0.0)).collect(),
                        raw: req.kinds.iter().map(pick).collect(),
                    }
                })
                .collect();
            let policy = match policy {
                DesignPolicy::Fixed(d) => format!("fixed alpha={}, q_hat={}", d.alpha, d.q_hat),
                DesignPolicy::Optimized(Interference::Spherical) => {
                    "optimized alpha, spherical interference (q_hat = Q)".into()
                }
                DesignPolicy::Optimized(Interference::Gaussian) => {
                    "optimized alpha, Gaussian interference (q_hat minimized)".into()
                }
            };
            (records, policy)
        }
        Family::Gp => {
            let ch = gp_channel_from(req.gp_channel.as_ref(), req.p_state)?;
            let mut grids = GpGrids::default();
            if let Some(u) = req.aux_alphabet {
                grids.aux_alphabet = u;
            }
            let need_rc = req.kinds.contains(&Kind::Rc);
            let need_pair = req.kinds.iter().any(|k| matches!(k, Kind::Trc | Kind::Ex));
            let rc = if need_rc {
                curves::gp_rc_curve(&ch, &rates, &grids)?
            } else {
                Vec::new()
            };
            let pair = if need_pair {
                curves::gp_pairwise_curve(&ch, &rates, &grids)?
            } else {
                Vec::new()
            };
            let records: Vec<Record> = rates
                .iter()
                .enumerate()
                .map(|(i, &r)| {
                    let pick = |k: &Kind| match k {
                        Kind::Rc => rc[i],
                        Kind::Trc => pair[i].0,
                        Kind::Ex => pair[i].1,
                    };
                    Record {
                        x: r,
                        clamped: req.kinds.iter().map(|k| pick(k).max(0.0)).collect(),
                        raw: req.kinds.iter().map(pick).collect(),
                    }
                })
                .collect();
            (records, "side-information exponents; TRC/expurgated are shared-design lower bounds".to_string())
        }
    };
    let contents = match req.format {
        Format::Csv => csv_table("R", &req.kinds, &records, req.raw, req.bits),
        Format::Json => json_report(req, "r", &req.kinds, &records, req.bits, &policy),
    };
    write_atomic(&req.out, &contents)?;
    Ok(())
}

/// Run a sweep, write the table, and print the per-kind argmax.
pub fn run_sweep(req: &SweepRequest) -> CliResult<()> {
    if req.kinds.is_empty() {
        return Err(CliError::Usage("at least one kind is required".into()));
    }
    if !(req.grid_step > 0.0) || req.grid_start > req.grid_stop {
        return Err(CliError::Usage("need grid_step > 0 and grid_start <= grid_stop".into()));
    }
    let grid = curves::rate_grid(req.grid_start, req.grid_stop, req.grid_step);
    let records: Vec<Record> = match req.sweep_var {
        SweepVar::Alpha => {
            let ch = DpcChannel::new(req.power, req.interference, req.noise_var)?;
            let sweep = curves::dpc_alpha_sweep(&ch, req.rate, &grid);
            sweep
                .iter()
                .map(|(a, e)| {
                    let pick = |k: &Kind| match k {
                        Kind::Rc => e.rc,
                        Kind::Trc => e.trc,
                        Kind::Ex => e.ex,
                    };
                    Record {
                        x: *a,
                        clamped: req.kinds.iter().map(|k| pick(k).max(0.0)).collect(),
                        raw: req.kinds.iter().map(pick).collect(),
                    }
                })
                .collect()
        }
        SweepVar::Q => {
            let sweep = curves::dpc_q_sweep(req.power, req.noise_var, req.rate, &grid)?;
            sweep
                .iter()
                .map(|(q, opts)| {
                    let pick = |k: &Kind| match k {
                        Kind::Rc => opts[0].value,
                        Kind::Trc => opts[1].value,
                        Kind::Ex => opts[2].value,
                    };
                    Record {
                        x: *q,
                        clamped: req.kinds.iter().map(|k| pick(k).max(0.0)).collect(),
                        raw: req.kinds.iter().map(pick).collect(),
                    }
                })
                .collect()
        }
        SweepVar::PState => {
            let grids = GpGrids::default();
            let include_pairwise = req.kinds.iter().any(|k| matches!(k, Kind::Trc | Kind::Ex));
            let sweep = curves::gp_p_sweep(&grid, req.rate, &grids, include_pairwise)?;
            sweep
                .iter()
                .map(|(p, rc, pair)| {
                    let pick = |k: &Kind| match k {
                        Kind::Rc => *rc,
                        Kind::Trc => pair.map(|x| x.0).unwrap_or(f64::NAN),
                        Kind::Ex => pair.map(|x| x.1).unwrap_or(f64::NAN),
                    };
                    Record {
                        x: *p,
                        clamped: req.kinds.iter().map(|k| pick(k).max(0.0)).collect(),
                        raw: req.kinds.iter().map(pick).collect(),
                    }
                })
                .collect()
        }
    };
    for (i, k) in req.kinds.iter().enumerate() {
        let best = records
            .iter()
            .max_by(|a, b| a.raw[i].partial_cmp(&b.raw[i]).unwrap_or(std::cmp::Ordering::Equal));
        if let Some(best) = best {
            println!(
                "argmax {} at {} = {} (value {})",
                k.column(),
                var_name(req.sweep_var),
                fmt_sig(best.x),
                fmt_sig(best.raw[i])
            );
        }
    }
    let contents = match req.format {
        Format::Csv => csv_table("x", &req.kinds, &records, req.raw, req.bits),
        Format::Json => json_report(req, "x", &req.kinds, &records, req.bits, var_name(req.sweep_var)),
    };
    write_atomic(&req.out, &contents)?;
    Ok(())
}

fn var_name(v: SweepVar) -> &'static str {
    match v {
        SweepVar::Alpha => "alpha",
        SweepVar::Q => "Q",
        SweepVar::PState => "p_state",
    }
}

/// Run the simulator for each blocklength and write the JSON report.
pub fn run_sim(req: &SimRequest) -> CliResult<()> {
    if req.n_list.is_empty() {
        return Err(CliError::Usage("need at least one blocklength".into()));
    }
    let ch = gp_channel_from(req.gp_channel.as_ref(), req.p_state)?;
    let design = gp_design_from(req.design.as_ref(), &ch, req.epsilon)?;
    let mut results = Vec::new();
    for &n in &req.n_list {
        let cfg = SimConfig::new(n, RateNats::new(req.rate)?, req.trials, req.seed, design.clone())?;
        let report = gpsim::estimate_error(&cfg, &ch)?;
        results.push(serde_json::json!({
            "n": n,
            "p_err": report.p_err,
            "ci_halfwidth": report.ci_halfwidth,
            "trials": report.trials,
            "errors": report.errors,
            "encoder_failures": report.failures.encoder_failures,
            "decoder_ties": report.failures.decoder_ties,
        }));
    }
    let report = serde_json::json!({
        "tool": { "name": "exponents", "version": env!("CARGO_PKG_VERSION") },
        "decoder": {
            "metric": "empirical mutual information minus binning rate",
            "tie_break": "lexicographic on (state type, bin, codeword); ties are flagged",
        },
        "config": req,
        "results": results,
    });
    write_atomic(&req.out, &serde_json::to_string_pretty(&report).expect("serializes"))?;
    Ok(())
}

/// Extract a request from a config file that may be either a bare request
/// or a previously emitted report (which embeds one under `"config"`).
pub fn request_from_config<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("invalid JSON in {}: {e}", path.display())))?;
    let payload = value.get("config").cloned().unwrap_or(value);
    serde_json::from_value(payload)
        .map_err(|e| CliError::Usage(format!("invalid request in {}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digit_formatting() {
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(1.008109137), "1.00810914");
        assert_eq!(fmt_sig(0.430814828), "0.430814828");
        assert_eq!(fmt_sig(-1.1e-16), "-1.10000000e-16");
        assert_eq!(fmt_sig(123456789.0), "123456789");
    }

    #[test]
    fn kind_list_parsing() {
        assert_eq!(
            Kind::parse_list("rc,trc,ex").unwrap(),
            vec![Kind::Rc, Kind::Trc, Kind::Ex]
        );
        assert!(Kind::parse_list("").is_err());
        assert!(Kind::parse_list("bogus").is_err());
    }

    #[test]
    fn csv_shape() {
        let records = vec![Record {
            x: 0.0,
            clamped: vec![1.0, 2.0],
            raw: vec![1.0, 2.0],
        }];
        let table = csv_table("R", &[Kind::Rc, Kind::Trc], &records, false, false);
        assert_eq!(table, "R,E_rc,E_trc\r\n0,1.00000000,2.00000000\r\n");
    }
}
