//! Error exponents of finite-alphabet channels with encoder side information.
//!
//! The random-coding exponent is the exact min-max-min over the state type,
//! the code design and the output channel; the TRC and expurgated exponents
//! are pairwise-analysis lower bounds built on the `e0`/`e1`/`e2` chain of
//! the pairwise module. The outer maximization over per-state-type designs is
//! restricted to a single conditional law applied uniformly across state
//! types, which keeps every reported TRC/expurgated value a valid lower
//! bound; gp-curve metadata records this restriction.

mod inner;
mod pairwise;

pub use pairwise::{e0_pairwise, e1_pairwise, e2_pairwise};

use crate::error::{Error, Result};
use crate::info::{Axis, Conditional, JointDistribution};
use crate::numkit::{self, OptConfig, SearchMode, SimplexGrid};
use crate::scalar::{real, Scalar};
use inner::{design_max, kl_vec, RcProblem};
use rayon::prelude::*;

/// Alphabet sizes of the state, auxiliary, input and output variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Alphabets {
    pub s: usize,
    pub u: usize,
    pub x: usize,
    pub y: usize,
}

impl Alphabets {
    pub const MAX_JOINT_CELLS: usize = 4096;

    pub fn new(s: usize, u: usize, x: usize, y: usize) -> Result<Self> {
        if s == 0 || u == 0 || x == 0 || y == 0 {
            return Err(Error::arg("alphabet sizes must be positive"));
        }
        let cells = s
            .checked_mul(u)
            .and_then(|c| c.checked_mul(x))
            .and_then(|c| c.checked_mul(y))
            .unwrap_or(usize::MAX);
        if cells > Self::MAX_JOINT_CELLS {
            return Err(Error::arg(format!(
                "joint alphabet has {cells} cells, limit is {}",
                Self::MAX_JOINT_CELLS
            )));
        }
        Ok(Alphabets { s, u, x, y })
    }
}

impl Default for Alphabets {
    fn default() -> Self {
        Alphabets {
            s: 2,
            u: 2,
            x: 2,
            y: 2,
        }
    }
}

/// Coding rate in nats per symbol.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct RateNats<T>(pub T);

impl<T: Scalar> RateNats<T> {
    pub fn new(nats: T) -> Result<Self> {
        if !nats.is_finite() || nats < T::zero() {
            return Err(Error::arg(format!("rate must be finite and >= 0, got {nats}")));
        }
        Ok(RateNats(nats))
    }
}

/// State prior and channel law `W(y | x, s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GpChannel<T> {
    p_s: JointDistribution<T>,
    w: Conditional<T>,
    ns: usize,
    nx: usize,
    ny: usize,
}

impl<T: Scalar> GpChannel<T> {
    pub fn new(p_s: JointDistribution<T>, w: Conditional<T>) -> Result<Self> {
        if p_s.axes() != [Axis::S] {
            return Err(Error::arg("state prior must be a distribution over S"));
        }
        let ns = p_s.sizes()[0];
        let given = w.given();
        if given.len() != 2 || given[0].0 != Axis::X || given[1].0 != Axis::S {
            return Err(Error::arg("channel law must condition on (X, S)"));
        }
        if given[1].1 != ns {
            return Err(Error::arg("channel state alphabet disagrees with the prior"));
        }
        if w.out().0 != Axis::Y {
            return Err(Error::arg("channel law must output Y"));
        }
        let nx = given[0].1;
        let ny = w.out().1;
        Ok(GpChannel { p_s, w, ns, nx, ny })
    }

    pub fn p_s(&self) -> &JointDistribution<T> {
        &self.p_s
    }

    pub fn w(&self) -> &Conditional<T> {
        &self.w
    }

    pub fn ns(&self) -> usize {
        self.ns
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    /// Channel law reindexed as `w[(s*nx + x)*ny + y]`.
    pub(crate) fn w_flat(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.ns * self.nx * self.ny];
        for x in 0..self.nx {
            for s in 0..self.ns {
                let row = self.w.row(&[x, s]);
                out[(s * self.nx + x) * self.ny..(s * self.nx + x + 1) * self.ny]
                    .copy_from_slice(row);
            }
        }
        out
    }

    /// Binary channel that copies its input when `S = 0` and is stuck at
    /// output 0 when `S = 1`; `p_clean` is the probability of the clean state.
    pub fn binary_clean_or_stuck(p_clean: T) -> Result<Self> {
        let p_s = JointDistribution::new(&[(Axis::S, 2)], vec![p_clean, T::one() - p_clean])?;
        let one = T::one();
        let zero = T::zero();
        // rows in (x, s) order
        let rows = vec![
            one, zero, // x=0, s=0: y = 0
            one, zero, // x=0, s=1: stuck at 0
            zero, one, // x=1, s=0: y = 1
            one, zero, // x=1, s=1: stuck at 0
        ];
        let w = Conditional::new(&[(Axis::X, 2), (Axis::S, 2)], (Axis::Y, 2), rows)?;
        GpChannel::new(p_s, w)
    }
}

/// Code design: auxiliary-codeword law, input law and the binning slack.
#[derive(Debug, Clone, PartialEq)]
pub struct GpDesign<T> {
    pub q_u_given_s: Conditional<T>,
    pub q_x_given_us: Conditional<T>,
    pub epsilon: T,
}

impl<T: Scalar> GpDesign<T> {
    pub fn new(
        q_u_given_s: Conditional<T>,
        q_x_given_us: Conditional<T>,
        epsilon: T,
    ) -> Result<Self> {
        if q_u_given_s.out().0 != Axis::U || q_x_given_us.out().0 != Axis::X {
            return Err(Error::arg("design laws must output U and X"));
        }
        if epsilon < T::zero() || epsilon > real(0.2) {
            return Err(Error::arg(format!("epsilon must lie in [0, 0.2], got {epsilon}")));
        }
        Ok(GpDesign {
            q_u_given_s,
            q_x_given_us,
            epsilon,
        })
    }

    /// Capacity-achieving design for the binary clean/stuck channel:
    /// `U` uniform on the clean state, pinned to the stuck symbol otherwise,
    /// and `X = U`.
    pub fn binary_stuck_matched(epsilon: T) -> Result<Self> {
        let half: T = real(0.5);
        let q_u = Conditional::new(
            &[(Axis::S, 2)],
            (Axis::U, 2),
            vec![half, half, T::one(), T::zero()],
        )?;
        let q_x = Conditional::new(
            &[(Axis::U, 2), (Axis::S, 2)],
            (Axis::X, 2),
            vec![
                T::one(),
                T::zero(), // u=0, s=0
                T::one(),
                T::zero(), // u=0, s=1
                T::zero(),
                T::one(), // u=1, s=0
                T::zero(),
                T::one(), // u=1, s=1
            ],
        )?;
        GpDesign::new(q_u, q_x, epsilon)
    }
}

/// Resolutions of the nested simplex searches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GpGrids {
    /// Auxiliary alphabet size `|U|`.
    pub aux_alphabet: usize,
    /// Points per axis for the state-type simplex.
    pub qs_resolution: usize,
    /// Local refinement rounds of the state-type search (halving steps).
    pub qs_refine_rounds: usize,
    /// Per-state-symbol resolution of the design enumeration.
    pub design_resolution: usize,
    pub design_refine_rounds: usize,
    /// Coarse design candidates kept for refinement.
    pub design_finalists: usize,
    /// State-type resolution of the pairwise (TRC/expurgated) search.
    pub pairwise_qs_resolution: usize,
    /// Resolution of the codeword-coupling enumeration.
    pub coupling_resolution: usize,
    /// Shared-design candidates tried for the pairwise bounds.
    pub pairwise_designs: usize,
}

impl Default for GpGrids {
    fn default() -> Self {
        GpGrids {
            aux_alphabet: 2,
            qs_resolution: 64,
            qs_refine_rounds: 3,
            design_resolution: 4,
            design_refine_rounds: 6,
            design_finalists: 3,
            pairwise_qs_resolution: 8,
            coupling_resolution: 8,
            pairwise_designs: 3,
        }
    }
}

impl GpGrids {
    /// Coarser settings for quick runs and property tests.
    pub fn reduced() -> Self {
        GpGrids {
            aux_alphabet: 2,
            qs_resolution: 32,
            qs_refine_rounds: 2,
            design_resolution: 4,
            design_refine_rounds: 4,
            design_finalists: 2,
            pairwise_qs_resolution: 4,
            coupling_resolution: 6,
            pairwise_designs: 2,
        }
    }

    fn validate(&self, ch: &GpChannel<impl Scalar>) -> Result<Alphabets> {
        Alphabets::new(ch.ns(), self.aux_alphabet, ch.nx(), ch.ny())
    }
}

/// Variable-rate binning rate `R(Q_S) = I(S;U) + epsilon` for a state type.
pub fn binning_rate<T: Scalar>(q_s: &JointDistribution<T>, design: &GpDesign<T>) -> Result<T> {
    let qs = q_s.marginal(&[Axis::S])?;
    Ok(binning_rate_slice(qs.probs(), design))
}

pub(crate) fn binning_rate_slice<T: Scalar>(q_s: &[T], design: &GpDesign<T>) -> T {
    let nu = design.q_u_given_s.out_size();
    let mut q_u = vec![T::zero(); nu];
    for (s, &ps) in q_s.iter().enumerate() {
        let row = design.q_u_given_s.row(&[s]);
        for u in 0..nu {
            q_u[u] = q_u[u] + ps * row[u];
        }
    }
    let mut i_su = T::zero();
    for (s, &ps) in q_s.iter().enumerate() {
        if ps <= T::zero() {
            continue;
        }
        let row = design.q_u_given_s.row(&[s]);
        for u in 0..nu {
            if row[u] > T::zero() {
                i_su = i_su + ps * row[u] * (row[u] / q_u[u]).ln();
            }
        }
    }
    i_su + design.epsilon
}

/// Penalized-MMI decoder metric `I(U;Y) - R(Q_S)`.
pub fn decoder_metric<T: Scalar>(
    q_uy: &JointDistribution<T>,
    q_s: &JointDistribution<T>,
    design: &GpDesign<T>,
) -> Result<T> {
    Ok(q_uy.mutual_information(Axis::U, Axis::Y)? - binning_rate(q_s, design)?)
}

fn qs_search_cfg<T: Scalar>(grids: &GpGrids) -> OptConfig<T> {
    OptConfig {
        refine_rounds: grids.qs_refine_rounds,
        refine_factor: real(0.5),
        ..OptConfig::default()
    }
}

/// Exact random-coding exponent: min over the state type of the prior
/// divergence plus the best design's convex inner minimum.
pub fn gp_random_coding_exponent<T: Scalar>(
    rate: RateNats<T>,
    ch: &GpChannel<T>,
    grids: &GpGrids,
) -> Result<T> {
    let ab = grids.validate(ch)?;
    let w = ch.w_flat();
    let p_s: Vec<T> = ch.p_s.probs().to_vec();
    let pr = RcProblem {
        ns: ab.s,
        nu: ab.u,
        nx: ab.x,
        ny: ab.y,
        w: &w,
        rate: rate.0,
    };
    let objective = |qs: &[T]| -> T {
        let d = kl_vec(qs, &p_s);
        if !d.is_finite() {
            return T::infinity();
        }
        d + design_max(&pr, qs, grids).1
    };
    let grid = SimplexGrid::new(ab.s, grids.qs_resolution)?;
    let (_, value) = numkit::search_simplex(objective, grid, &qs_search_cfg::<T>(grids), SearchMode::Min);
    Ok(value)
}

/// Best design of the exact random-coding problem at the true state prior,
/// split into its `U|S` and `X|(U,S)` factors. Used to seed the pairwise
/// bounds and as the default simulator design.
pub fn rc_optimal_design<T: Scalar>(ch: &GpChannel<T>, grids: &GpGrids) -> Result<GpDesign<T>> {
    let ab = grids.validate(ch)?;
    let w = ch.w_flat();
    let p_s: Vec<T> = ch.p_s.probs().to_vec();
    let pr = RcProblem {
        ns: ab.s,
        nu: ab.u,
        nx: ab.x,
        ny: ab.y,
        w: &w,
        rate: T::zero(),
    };
    let (rows, _) = design_max(&pr, &p_s, grids);
    split_design(&rows, ab)
}

fn split_design<T: Scalar>(rows: &[T], ab: Alphabets) -> Result<GpDesign<T>> {
    let (ns, nu, nx) = (ab.s, ab.u, ab.x);
    let mut u_rows = vec![T::zero(); ns * nu];
    let mut x_rows = vec![T::zero(); nu * ns * nx];
    for s in 0..ns {
        for u in 0..nu {
            let mut pu = T::zero();
            for x in 0..nx {
                pu = pu + rows[s * nu * nx + u * nx + x];
            }
            u_rows[s * nu + u] = pu;
            let dst = &mut x_rows[(u * ns + s) * nx..(u * ns + s + 1) * nx];
            if pu > T::zero() {
                for x in 0..nx {
                    dst[x] = rows[s * nu * nx + u * nx + x] / pu;
                }
            } else {
                let unif = T::one() / T::from_usize(nx).unwrap();
                for x in 0..nx {
                    dst[x] = unif;
                }
            }
        }
    }
    let q_u = Conditional::new(&[(Axis::S, ns)], (Axis::U, nu), u_rows)?;
    let q_x = Conditional::new(&[(Axis::U, nu), (Axis::S, ns)], (Axis::X, nx), x_rows)?;
    GpDesign::new(q_u, q_x, T::zero())
}

fn uniform_design<T: Scalar>(ab: Alphabets) -> Result<GpDesign<T>> {
    let u_unif = T::one() / T::from_usize(ab.u).unwrap();
    let x_unif = T::one() / T::from_usize(ab.x).unwrap();
    let q_u = Conditional::new(
        &[(Axis::S, ab.s)],
        (Axis::U, ab.u),
        vec![u_unif; ab.s * ab.u],
    )?;
    let q_x = Conditional::new(
        &[(Axis::U, ab.u), (Axis::S, ab.s)],
        (Axis::X, ab.x),
        vec![x_unif; ab.u * ab.s * ab.x],
    )?;
    GpDesign::new(q_u, q_x, T::zero())
}

fn copy_design<T: Scalar>(ab: Alphabets) -> Result<GpDesign<T>> {
    let u_unif = T::one() / T::from_usize(ab.u).unwrap();
    let q_u = Conditional::new(
        &[(Axis::S, ab.s)],
        (Axis::U, ab.u),
        vec![u_unif; ab.s * ab.u],
    )?;
    let mut x_rows = vec![T::zero(); ab.u * ab.s * ab.x];
    for u in 0..ab.u {
        for s in 0..ab.s {
            x_rows[(u * ab.s + s) * ab.x + (u % ab.x)] = T::one();
        }
    }
    let q_x = Conditional::new(&[(Axis::U, ab.u), (Axis::S, ab.s)], (Axis::X, ab.x), x_rows)?;
    GpDesign::new(q_u, q_x, T::zero())
}

struct PairEntry<T> {
    d_qs: T,
    r_qs: T,
    r_qs_prime: T,
    i_uu: T,
    e2: T,
}

/// Precomputed table of every `(state type, competitor type, coupling)`
/// cell; the rate enters only through the final filter and affine terms, so
/// one table serves a whole rate grid.
fn pairwise_table<T: Scalar>(
    ch: &GpChannel<T>,
    design: &GpDesign<T>,
    grids: &GpGrids,
) -> Vec<PairEntry<T>> {
    let ns = ch.ns();
    let nu = design.q_u_given_s.out_size();
    let qs_points = numkit::simplex_points::<T>(ns, grids.pairwise_qs_resolution);
    let p_s: Vec<T> = ch.p_s.probs().to_vec();
    let pairs: Vec<(usize, usize)> = (0..qs_points.len())
        .flat_map(|i| (0..qs_points.len()).map(move |j| (i, j)))
        .collect();
    pairs
        .par_iter()
        .flat_map_iter(|&(i, j)| {
            let qs = &qs_points[i];
            let qsp = &qs_points[j];
            let d_qs = kl_vec(qs, &p_s);
            let r_qs = binning_rate_slice(qs, design);
            let r_qsp = binning_rate_slice(qsp, design);
            let theta0 = r_qsp - r_qs;
            let q_u = u_marginal(qs, design, nu);
            let q_v = u_marginal(qsp, design, nu);
            let mut entries = Vec::new();
            if d_qs.is_finite() {
                for coupling in couplings(&q_u, &q_v, grids.coupling_resolution) {
                    let i_uu = mi_flat(&coupling, nu, nu);
                    let e2 = pairwise::e2_flat(&coupling, nu, nu, qs, ch, design, theta0);
                    entries.push(PairEntry {
                        d_qs,
                        r_qs,
                        r_qs_prime: r_qsp,
                        i_uu,
                        e2,
                    });
                }
            }
            entries.into_iter()
        })
        .collect()
}

fn u_marginal<T: Scalar>(qs: &[T], design: &GpDesign<T>, nu: usize) -> Vec<T> {
    let mut q_u = vec![T::zero(); nu];
    for (s, &p) in qs.iter().enumerate() {
        let row = design.q_u_given_s.row(&[s]);
        for u in 0..nu {
            q_u[u] = q_u[u] + p * row[u];
        }
    }
    q_u
}

fn mi_flat<T: Scalar>(q: &[T], nu: usize, nv: usize) -> T {
    let mut pu = vec![T::zero(); nu];
    let mut pv = vec![T::zero(); nv];
    for u in 0..nu {
        for v in 0..nv {
            pu[u] = pu[u] + q[u * nv + v];
            pv[v] = pv[v] + q[u * nv + v];
        }
    }
    let mut mi = T::zero();
    for u in 0..nu {
        for v in 0..nv {
            let p = q[u * nv + v];
            if p > T::zero() {
                mi = mi + p * (p / (pu[u] * pv[v])).ln();
            }
        }
    }
    if mi < T::zero() {
        T::zero()
    } else {
        mi
    }
}

/// Couplings of two marginals on a grid: the product coupling plus
/// rectangle-basis corrections enumerated within their feasibility bounds.
fn couplings<T: Scalar>(q_u: &[T], q_v: &[T], res: usize) -> Vec<Vec<T>> {
    let nu = q_u.len();
    let nv = q_v.len();
    let mut base = vec![T::zero(); nu * nv];
    for u in 0..nu {
        for v in 0..nv {
            base[u * nv + v] = q_u[u] * q_v[v];
        }
    }
    let dims = (nu - 1) * (nv - 1);
    if dims == 0 {
        return vec![base];
    }
    let res = if dims > 4 { 2 } else { res.max(1) };
    // per-dimension bounds from the four cells each rectangle touches
    let mut bounds = Vec::with_capacity(dims);
    for a in 0..nu - 1 {
        for b in 0..nv - 1 {
            let hi = if base[a * nv + (nv - 1)] < base[(nu - 1) * nv + b] {
                base[a * nv + (nv - 1)]
            } else {
                base[(nu - 1) * nv + b]
            };
            let lo = if base[a * nv + b] < base[(nu - 1) * nv + (nv - 1)] {
                -base[a * nv + b]
            } else {
                -base[(nu - 1) * nv + (nv - 1)]
            };
            bounds.push((lo, hi));
        }
    }
    let mut out = vec![base.clone()];
    let mut coeffs = vec![T::zero(); dims];
    enumerate_couplings(&base, q_u.len(), q_v.len(), &bounds, res, 0, &mut coeffs, &mut out);
    out
}

#[allow(clippy::too_many_arguments)]
fn enumerate_couplings<T: Scalar>(
    base: &[T],
    nu: usize,
    nv: usize,
    bounds: &[(T, T)],
    res: usize,
    dim: usize,
    coeffs: &mut Vec<T>,
    out: &mut Vec<Vec<T>>,
) {
    if dim == bounds.len() {
        if coeffs.iter().all(|c| *c == T::zero()) {
            return; // base already included
        }
        let mut cand = base.to_vec();
        for (k, &c) in coeffs.iter().enumerate() {
            if c == T::zero() {
                continue;
            }
            let a = k / (nv - 1);
            let b = k % (nv - 1);
            cand[a * nv + b] = cand[a * nv + b] + c;
            cand[a * nv + (nv - 1)] = cand[a * nv + (nv - 1)] - c;
            cand[(nu - 1) * nv + b] = cand[(nu - 1) * nv + b] - c;
            cand[(nu - 1) * nv + (nv - 1)] = cand[(nu - 1) * nv + (nv - 1)] + c;
        }
        let eps: T = real(-1e-13);
        if cand.iter().all(|&p| p >= eps) {
            for p in cand.iter_mut() {
                if *p < T::zero() {
                    *p = T::zero();
                }
            }
            out.push(cand);
        }
        return;
    }
    let (lo, hi) = bounds[dim];
    for k in 0..=res {
        let t = T::from_usize(k).unwrap() / T::from_usize(res).unwrap();
        coeffs[dim] = lo + (hi - lo) * t;
        enumerate_couplings(base, nu, nv, bounds, res, dim + 1, coeffs, out);
    }
}

/// TRC and expurgated lower bounds at a set of rates, sharing one pairwise
/// table per design candidate (the rate enters only affinely).
pub fn gp_pairwise_curve<T: Scalar>(
    rates: &[T],
    ch: &GpChannel<T>,
    grids: &GpGrids,
) -> Result<Vec<(T, T)>> {
    let ab = grids.validate(ch)?;
    let mut designs: Vec<GpDesign<T>> = Vec::new();
    designs.push(rc_optimal_design(ch, grids)?);
    designs.push(copy_design(ab)?);
    designs.push(uniform_design(ab)?);
    designs.truncate(grids.pairwise_designs.max(1));

    let mut best: Vec<(T, T)> = vec![(T::neg_infinity(), T::neg_infinity()); rates.len()];
    for design in &designs {
        let table = pairwise_table(ch, design, grids);
        for (k, &rate) in rates.iter().enumerate() {
            let mut trc = T::infinity();
            let mut ex = T::infinity();
            for e in &table {
                let value = e.d_qs + e.e2 + e.i_uu - rate - e.r_qs_prime;
                let budget = e.r_qs + e.r_qs_prime;
                if e.i_uu <= rate + rate + budget && value < trc {
                    trc = value;
                }
                if e.i_uu <= rate + budget && value < ex {
                    ex = value;
                }
            }
            if trc > best[k].0 {
                best[k] = (trc, ex);
            }
        }
    }
    Ok(best)
}

/// TRC-exponent lower bound at one rate.
pub fn gp_trc_exponent<T: Scalar>(
    rate: RateNats<T>,
    ch: &GpChannel<T>,
    grids: &GpGrids,
) -> Result<T> {
    Ok(gp_pairwise_curve(&[rate.0], ch, grids)?[0].0)
}

/// Expurgated-exponent lower bound at one rate.
pub fn gp_expurgated_exponent<T: Scalar>(
    rate: RateNats<T>,
    ch: &GpChannel<T>,
    grids: &GpGrids,
) -> Result<T> {
    Ok(gp_pairwise_curve(&[rate.0], ch, grids)?[0].1)
}
