//! Monte Carlo simulator of the variable-rate random-binning scheme with the
//! penalized maximum-mutual-information decoder, at small blocklength.
//!
//! One binned codebook is drawn per achievable state type; the encoder picks
//! a codeword of the right conditional type inside the message's bin and
//! transmits an input drawn from the conditional type class. The decoder
//! scans every codebook and maximizes empirical mutual information minus the
//! codebook's binning rate. Everything is deterministic given the base seed:
//! codebooks derive per-type streams from it and trial `i` reseeds with
//! `base_seed + i`, so trials can run on any number of workers.

use crate::error::{Error, Result};
use crate::gp::{GpChannel, GpDesign, RateNats};
use crate::info::mi_from_counts;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

const MAX_CODEWORDS_PER_TYPE: u64 = 1 << 20;
const METRIC_TIE_EPS: f64 = 1e-12;

/// Simulation parameters.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub n: usize,
    pub rate: RateNats<f64>,
    pub trials: u64,
    pub base_seed: u64,
    pub design: GpDesign<f64>,
}

impl SimConfig {
    pub fn new(
        n: usize,
        rate: RateNats<f64>,
        trials: u64,
        base_seed: u64,
        design: GpDesign<f64>,
    ) -> Result<Self> {
        if !(4..=20).contains(&n) {
            return Err(Error::Config(format!("blocklength must be in [4, 20], got {n}")));
        }
        if trials == 0 {
            return Err(Error::Config("need at least one trial".into()));
        }
        Ok(SimConfig {
            n,
            rate,
            trials,
            base_seed,
            design,
        })
    }
}

/// Binned codebook of one state type.
#[derive(Debug, Clone)]
pub struct StateTypeBook {
    /// Symbol counts of the state type (sums to `n`).
    pub s_counts: Vec<usize>,
    /// Rounded conditional type: `cond_counts[s][u]` sums to `s_counts[s]`.
    pub cond_counts: Vec<Vec<usize>>,
    /// Codeword composition over `U` (column sums of `cond_counts`).
    pub u_counts: Vec<usize>,
    /// Binning rate of this type: rounded `I(S;U)` plus the design slack.
    pub rate_qs: f64,
    /// Codewords per bin, `ceil(e^{n rate_qs})`.
    pub bin_size: usize,
    /// All codewords, bin-major: `codewords[(m*bin_size + k)*n ..][..n]`.
    pub codewords: Vec<u8>,
    /// Bit-mask rendition of each codeword when `|U| = 2`.
    pub masks: Option<Vec<u64>>,
}

/// Per-state-type binned codebooks.
#[derive(Debug, Clone)]
pub struct SimCodebook {
    pub n: usize,
    /// Number of bins `M = ceil(e^{nR})`, shared by all types.
    pub m_bins: usize,
    pub books: Vec<StateTypeBook>,
}

/// Outcome of one encoding attempt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EncodeOutcome {
    Sent { u: Vec<u8>, x: Vec<u8> },
    /// The bin holds no codeword of the required conditional type; counted
    /// as an error by the estimator.
    Failure,
}

/// Full record of a single trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub message: usize,
    pub state: Vec<u8>,
    pub codeword: Option<Vec<u8>>,
    pub input: Option<Vec<u8>>,
    pub output: Option<Vec<u8>>,
    pub decoded: Option<usize>,
    pub encoder_failure: bool,
    pub decoder_tie: bool,
}

impl TrialRecord {
    pub fn is_error(&self) -> bool {
        self.encoder_failure || self.decoded != Some(self.message)
    }
}

/// Failure-mode tallies reported alongside the error estimate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FailureCounts {
    pub encoder_failures: u64,
    pub decoder_ties: u64,
}

/// Error estimate with a 95% Wilson interval half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimReport {
    pub p_err: f64,
    pub ci_halfwidth: f64,
    pub trials: u64,
    pub errors: u64,
    pub failures: FailureCounts,
}

/// `ceil(e^t)` with a guard against `e^{ln k}` landing just above `k`.
fn ceil_exp(t: f64) -> u64 {
    let raw = t.exp();
    let near = raw.round();
    if (raw - near).abs() < 1e-9 * near.max(1.0) {
        near as u64
    } else {
        raw.ceil() as u64
    }
}

/// All symbol-count vectors of length `k` summing to `n`.
fn compositions(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![0usize; k];
    fn rec(out: &mut Vec<Vec<usize>>, cur: &mut [usize], axis: usize, left: usize) {
        if axis + 1 == cur.len() {
            cur[axis] = left;
            out.push(cur.to_vec());
            return;
        }
        for c in 0..=left {
            cur[axis] = c;
            rec(out, cur, axis + 1, left - c);
        }
    }
    rec(&mut out, &mut cur, 0, n);
    out
}

/// Largest-remainder rounding of `target * total` to integers summing to
/// `total`; ties resolved by index.
fn round_counts(target: &[f64], total: usize) -> Vec<usize> {
    let mut counts: Vec<usize> = target
        .iter()
        .map(|&t| (t * total as f64).floor() as usize)
        .collect();
    let assigned: usize = counts.iter().sum();
    let mut remainders: Vec<(usize, f64)> = target
        .iter()
        .enumerate()
        .map(|(i, &t)| (i, t * total as f64 - counts[i] as f64))
        .collect();
    remainders.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(&b.0)));
    for k in 0..total.saturating_sub(assigned) {
        counts[remainders[k % remainders.len()].0] += 1;
    }
    counts
}

/// Draw the codebooks for every achievable state type.
pub fn build_codebooks(cfg: &SimConfig, ch: &GpChannel<f64>) -> Result<SimCodebook> {
    let n = cfg.n;
    let ns = ch.ns();
    let nu = cfg.design.q_u_given_s.out_size();
    let m_bins = ceil_exp(n as f64 * cfg.rate.0) as usize;
    let mut books = Vec::new();
    for (type_idx, s_counts) in compositions(n, ns).into_iter().enumerate() {
        let mut cond_counts = Vec::with_capacity(ns);
        for s in 0..ns {
            let row = cfg.design.q_u_given_s.row(&[s]);
            cond_counts.push(round_counts(row, s_counts[s]));
        }
        let mut u_counts = vec![0usize; nu];
        let mut su_counts = vec![0usize; ns * nu];
        for s in 0..ns {
            for u in 0..nu {
                u_counts[u] += cond_counts[s][u];
                su_counts[s * nu + u] = cond_counts[s][u];
            }
        }
        let i_su: f64 = mi_from_counts(&su_counts, ns, nu, n);
        let rate_qs = i_su + cfg.design.epsilon;
        let bin_size = ceil_exp(n as f64 * rate_qs) as usize;
        let total = (m_bins as u64).saturating_mul(bin_size as u64);
        if total > MAX_CODEWORDS_PER_TYPE {
            return Err(Error::Config(format!(
                "codebook for state type {s_counts:?} needs {total} codewords, limit is {MAX_CODEWORDS_PER_TYPE}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.base_seed);
        rng.set_stream(1 + type_idx as u64);
        let mut template: Vec<u8> = Vec::with_capacity(n);
        for (u, &c) in u_counts.iter().enumerate() {
            template.extend(std::iter::repeat(u as u8).take(c));
        }
        let mut codewords = Vec::with_capacity(m_bins * bin_size * n);
        let mut masks = if nu == 2 && n <= 64 {
            Some(Vec::with_capacity(m_bins * bin_size))
        } else {
            None
        };
        let mut word = template.clone();
        for _ in 0..m_bins * bin_size {
            word.copy_from_slice(&template);
            word.shuffle(&mut rng);
            if let Some(masks) = masks.as_mut() {
                let mut mask = 0u64;
                for (t, &sym) in word.iter().enumerate() {
                    mask |= u64::from(sym) << t;
                }
                masks.push(mask);
            }
            codewords.extend_from_slice(&word);
        }
        books.push(StateTypeBook {
            s_counts,
            cond_counts,
            u_counts,
            rate_qs,
            bin_size,
            codewords,
            masks,
        });
    }
    Ok(SimCodebook {
        n,
        m_bins,
        books,
    })
}

fn state_counts(s: &[u8], ns: usize) -> Vec<usize> {
    let mut counts = vec![0usize; ns];
    for &sym in s {
        counts[sym as usize] += 1;
    }
    counts
}

/// Pick a codeword of the correct conditional type inside bin `m`
/// (1-based), then draw the channel input from its conditional type class.
pub fn encode(
    m: usize,
    s: &[u8],
    codebook: &SimCodebook,
    cfg: &SimConfig,
    rng: &mut ChaCha8Rng,
) -> EncodeOutcome {
    let ns = cfg.design.q_u_given_s.given()[0].1;
    let nu = cfg.design.q_u_given_s.out_size();
    let nx = cfg.design.q_x_given_us.out_size();
    let n = codebook.n;
    let counts = state_counts(s, ns);
    let book = codebook
        .books
        .iter()
        .find(|b| b.s_counts == counts)
        .expect("every state type has a codebook");

    // candidates: codewords in the bin whose joint type with s is the
    // rounded conditional type
    let mut candidates = Vec::new();
    let bin_base = (m - 1) * book.bin_size;
    let mut su = vec![0usize; ns * nu];
    for k in 0..book.bin_size {
        let cw = &book.codewords[(bin_base + k) * n..(bin_base + k + 1) * n];
        for v in su.iter_mut() {
            *v = 0;
        }
        for (t, &u) in cw.iter().enumerate() {
            su[s[t] as usize * nu + u as usize] += 1;
        }
        let matches = (0..ns).all(|sy| (0..nu).all(|u| su[sy * nu + u] == book.cond_counts[sy][u]));
        if matches {
            candidates.push(k);
        }
    }
    if candidates.is_empty() {
        return EncodeOutcome::Failure;
    }
    let pick = candidates[rng.random_range(0..candidates.len())];
    let u = book.codewords[(bin_base + pick) * n..(bin_base + pick + 1) * n].to_vec();

    // x uniform over the conditional type class given (s, u): per (s, u)
    // group, round the design row to counts and place a shuffled multiset
    let mut x = vec![0u8; n];
    for sy in 0..ns {
        for uv in 0..nu {
            let positions: Vec<usize> = (0..n)
                .filter(|&t| s[t] as usize == sy && u[t] as usize == uv)
                .collect();
            if positions.is_empty() {
                continue;
            }
            let row = cfg.design.q_x_given_us.row(&[uv, sy]);
            let counts = round_counts(row, positions.len());
            let mut symbols: Vec<u8> = Vec::with_capacity(positions.len());
            for (xv, &c) in counts.iter().enumerate().take(nx) {
                symbols.extend(std::iter::repeat(xv as u8).take(c));
            }
            symbols.shuffle(rng);
            for (&pos, &sym) in positions.iter().zip(symbols.iter()) {
                x[pos] = sym;
            }
        }
    }
    EncodeOutcome::Sent { u, x }
}

/// Penalized-MMI decoding: maximize the empirical mutual information of
/// `(u, y)` minus the binning rate of the codebook the candidate came from.
/// Ties break lexicographically on (state-type index, bin, codeword index);
/// the flag reports a cross-bin tie at the maximum.
pub fn decode(y: &[u8], codebook: &SimCodebook, design: &GpDesign<f64>) -> (usize, bool) {
    let n = codebook.n;
    let nu = design.q_u_given_s.out_size();
    let ny_alphabet = 1 + y.iter().map(|&v| v as usize).max().unwrap_or(0);
    let ny = ny_alphabet.max(2);
    let mut best_metric = f64::NEG_INFINITY;
    let mut best_bin = 1usize;
    let mut tie = false;

    let y_mask: u64 = if ny == 2 && n <= 64 {
        y.iter()
            .enumerate()
            .fold(0u64, |acc, (t, &v)| acc | (u64::from(v) << t))
    } else {
        0
    };
    let y1 = y.iter().filter(|&&v| v == 1).count();

    let mut counts = vec![0usize; nu * ny];
    for book in &codebook.books {
        // fast path: binary U and Y reduce the joint type to one overlap count
        if let (Some(masks), true, 2) = (&book.masks, ny == 2, nu) {
            let m1 = book.u_counts[1];
            let max_n11 = m1.min(y1);
            let mut table = Vec::with_capacity(max_n11 + 1);
            for n11 in 0..=max_n11 {
                if m1 < n11 || y1 < n11 || n + n11 < m1 + y1 {
                    table.push(f64::NEG_INFINITY);
                    continue;
                }
                let c = [n - m1 - y1 + n11, y1 - n11, m1 - n11, n11];
                let mi: f64 = mi_from_counts(&c, 2, 2, n);
                table.push(mi - book.rate_qs);
            }
            for m in 0..codebook.m_bins {
                for k in 0..book.bin_size {
                    let n11 = (masks[m * book.bin_size + k] & y_mask).count_ones() as usize;
                    let metric = table[n11];
                    if metric > best_metric + METRIC_TIE_EPS {
                        best_metric = metric;
                        best_bin = m + 1;
                        tie = false;
                    } else if metric > best_metric - METRIC_TIE_EPS && m + 1 != best_bin {
                        tie = true;
                    }
                }
            }
            continue;
        }
        for m in 0..codebook.m_bins {
            for k in 0..book.bin_size {
                let cw = &book.codewords[(m * book.bin_size + k) * n..(m * book.bin_size + k + 1) * n];
                for c in counts.iter_mut() {
                    *c = 0;
                }
                for (t, &u) in cw.iter().enumerate() {
                    counts[u as usize * ny + y[t] as usize] += 1;
                }
                let mi: f64 = mi_from_counts(&counts, nu, ny, n);
                let metric = mi - book.rate_qs;
                if metric > best_metric + METRIC_TIE_EPS {
                    best_metric = metric;
                    best_bin = m + 1;
                    tie = false;
                } else if metric > best_metric - METRIC_TIE_EPS && m + 1 != best_bin {
                    tie = true;
                }
            }
        }
    }
    (best_bin, tie)
}

fn sample_from(dist: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let draw: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in dist.iter().enumerate() {
        acc += p;
        if draw < acc {
            return i;
        }
    }
    dist.len() - 1
}

/// Run one seeded trial end to end.
pub fn run_trial(
    cfg: &SimConfig,
    ch: &GpChannel<f64>,
    codebook: &SimCodebook,
    trial: u64,
) -> TrialRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.base_seed.wrapping_add(trial));
    let n = cfg.n;
    let message = rng.random_range(1..=codebook.m_bins);
    let p_s = ch.p_s().probs();
    let state: Vec<u8> = (0..n).map(|_| sample_from(p_s, &mut rng) as u8).collect();
    match encode(message, &state, codebook, cfg, &mut rng) {
        EncodeOutcome::Failure => TrialRecord {
            message,
            state,
            codeword: None,
            input: None,
            output: None,
            decoded: None,
            encoder_failure: true,
            decoder_tie: false,
        },
        EncodeOutcome::Sent { u, x } => {
            let y: Vec<u8> = (0..n)
                .map(|t| {
                    let row = ch.w().row(&[x[t] as usize, state[t] as usize]);
                    sample_from(row, &mut rng) as u8
                })
                .collect();
            let (decoded, tie) = decode(&y, codebook, &cfg.design);
            TrialRecord {
                message,
                state,
                codeword: Some(u),
                input: Some(x),
                output: Some(y),
                decoded: Some(decoded),
                encoder_failure: false,
                decoder_tie: tie,
            }
        }
    }
}

/// Estimate the error probability over seeded independent trials.
pub fn estimate_error(cfg: &SimConfig, ch: &GpChannel<f64>) -> Result<SimReport> {
    if cfg.trials < 100 {
        return Err(Error::Config(format!(
            "need at least 100 trials for an estimate, got {}",
            cfg.trials
        )));
    }
    let codebook = build_codebooks(cfg, ch)?;
    let (errors, enc_failures, ties) = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let rec = run_trial(cfg, ch, &codebook, trial);
            (
                u64::from(rec.is_error()),
                u64::from(rec.encoder_failure),
                u64::from(rec.decoder_tie),
            )
        })
        .reduce(
            || (0u64, 0u64, 0u64),
            |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2),
        );
    let n = cfg.trials as f64;
    let p_hat = errors as f64 / n;
    let z = 1.959_963_984_540_054f64;
    let halfwidth =
        z / (1.0 + z * z / n) * (p_hat * (1.0 - p_hat) / n + z * z / (4.0 * n * n)).sqrt();
    Ok(SimReport {
        p_err: p_hat,
        ci_halfwidth: halfwidth,
        trials: cfg.trials,
        errors,
        failures: FailureCounts {
            encoder_failures: enc_failures,
            decoder_ties: ties,
        },
    })
}
