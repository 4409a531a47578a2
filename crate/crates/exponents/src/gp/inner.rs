//! Inner solvers for the random-coding exponent.
//!
//! For a fixed state type and design, the innermost problem is convex: a
//! conditional-divergence term plus a hinged mutual-information term,
//! minimized over the output-channel conditional. The hinge is handled by
//! linearization: `[t]_+ = max over lambda in [0,1] of lambda*t`, so the
//! value is the concave maximum over `lambda` of smooth tilted problems,
//! each solved by a damped multiplicative fixed point seeded from the true
//! channel. Every evaluated `lambda` yields a certified lower bound; the
//! returned value is the best one after the bisection on the activation
//! condition.
//!
//! The design (one distribution over `(U, X)` per state symbol) is searched
//! by full product-simplex enumeration at a coarse resolution followed by
//! re-centered local passes around the top coarse candidates.

use super::GpGrids;
use crate::numkit::simplex_points;
use crate::scalar::{real, Scalar};
use rayon::prelude::*;

/// Flattened problem data shared across the whole exponent computation.
pub(crate) struct RcProblem<'a, T> {
    pub ns: usize,
    pub nu: usize,
    pub nx: usize,
    pub ny: usize,
    /// Channel law, `w[(s*nx + x)*ny + y]`.
    pub w: &'a [T],
    pub rate: T,
}

pub(crate) struct RcScratch<T> {
    q: Vec<T>,
    q_new: Vec<T>,
    puy: Vec<T>,
    py: Vec<T>,
    pu: Vec<T>,
    m: Vec<T>,
}

impl<T: Scalar> RcScratch<T> {
    pub fn new(pr: &RcProblem<'_, T>) -> Self {
        let rows = pr.ns * pr.nu * pr.nx;
        RcScratch {
            q: vec![T::zero(); rows * pr.ny],
            q_new: vec![T::zero(); rows * pr.ny],
            puy: vec![T::zero(); pr.nu * pr.ny],
            py: vec![T::zero(); pr.ny],
            pu: vec![T::zero(); pr.nu],
            m: vec![T::zero(); rows],
        }
    }
}

impl<'a, T: Scalar> RcProblem<'a, T> {
    #[inline]
    fn row(&self, s: usize, u: usize, x: usize) -> usize {
        (s * self.nu + u) * self.nx + x
    }

    #[inline]
    fn w_row(&self, s: usize, x: usize) -> &'a [T] {
        let base = (s * self.nx + x) * self.ny;
        &self.w[base..base + self.ny]
    }

    /// `I(U;S) + R`, the hinge threshold; depends only on the weighting.
    fn hinge_threshold(&self, m: &[T]) -> T {
        let mut psu = vec![T::zero(); self.ns * self.nu];
        for s in 0..self.ns {
            for u in 0..self.nu {
                let mut acc = T::zero();
                for x in 0..self.nx {
                    acc = acc + m[self.row(s, u, x)];
                }
                psu[s * self.nu + u] = acc;
            }
        }
        let mut ps = vec![T::zero(); self.ns];
        let mut pu = vec![T::zero(); self.nu];
        for s in 0..self.ns {
            for u in 0..self.nu {
                ps[s] = ps[s] + psu[s * self.nu + u];
                pu[u] = pu[u] + psu[s * self.nu + u];
            }
        }
        let mut i_us = T::zero();
        for s in 0..self.ns {
            for u in 0..self.nu {
                let p = psu[s * self.nu + u];
                if p > T::zero() {
                    i_us = i_us + p * (p / (ps[s] * pu[u])).ln();
                }
            }
        }
        i_us + self.rate
    }

    fn aggregates(&self, m: &[T], q: &[T], puy: &mut [T], py: &mut [T]) {
        for v in puy.iter_mut() {
            *v = T::zero();
        }
        for v in py.iter_mut() {
            *v = T::zero();
        }
        for s in 0..self.ns {
            for u in 0..self.nu {
                for x in 0..self.nx {
                    let r = self.row(s, u, x);
                    let mr = m[r];
                    if mr <= T::zero() {
                        continue;
                    }
                    let qr = &q[r * self.ny..(r + 1) * self.ny];
                    for (y, &qy) in qr.iter().enumerate() {
                        puy[u * self.ny + y] = puy[u * self.ny + y] + mr * qy;
                    }
                }
            }
        }
        for u in 0..self.nu {
            for y in 0..self.ny {
                py[y] = py[y] + puy[u * self.ny + y];
            }
        }
    }

    /// Divergence-from-channel and mutual-information pieces at `q`.
    fn objective(&self, m: &[T], q: &[T], puy: &[T], py: &[T], pu: &[T]) -> (T, T) {
        let mut d = T::zero();
        for s in 0..self.ns {
            for x in 0..self.nx {
                let wr = self.w_row(s, x);
                for u in 0..self.nu {
                    let r = self.row(s, u, x);
                    let mr = m[r];
                    if mr <= T::zero() {
                        continue;
                    }
                    let qr = &q[r * self.ny..(r + 1) * self.ny];
                    for y in 0..self.ny {
                        let qy = qr[y];
                        if qy > T::zero() {
                            d = d + mr * qy * (qy / wr[y]).ln();
                        }
                    }
                }
            }
        }
        let mut mi = T::zero();
        for u in 0..self.nu {
            for y in 0..self.ny {
                let p = puy[u * self.ny + y];
                if p > T::zero() {
                    mi = mi + p * (p / (pu[u] * py[y])).ln();
                }
            }
        }
        (d, mi)
    }

    /// Minimize `D + lambda * I` over the conditional by damped tilted
    /// updates; `sc.q` is the warm start and holds the minimizer on return.
    fn solve_tilted(&self, m: &[T], lambda: T, sc: &mut RcScratch<T>) -> (T, T) {
        let tiny: T = real(1e-13);
        let mut best = (T::infinity(), T::zero(), T::zero());
        let mut prev_f = T::infinity();
        for _ in 0..60 {
            self.aggregates(m, &sc.q, &mut sc.puy, &mut sc.py);
            let (d, mi) = self.objective(m, &sc.q, &sc.puy, &sc.py, &sc.pu);
            let f = d + lambda * mi;
            if f < best.0 {
                best = (f, d, mi);
            }
            if (prev_f - f).abs() <= tiny * (T::one() + f.abs()) {
                break;
            }
            prev_f = f;
            // q_new(y|s,u,x) ~ w(y|x,s) * (P(u,y)/(P(u)P(y)))^{-lambda}
            for s in 0..self.ns {
                for x in 0..self.nx {
                    let wr = self.w_row(s, x);
                    for u in 0..self.nu {
                        let r = self.row(s, u, x);
                        if m[r] <= T::zero() {
                            continue;
                        }
                        let out = &mut sc.q_new[r * self.ny..(r + 1) * self.ny];
                        let mut norm = T::zero();
                        for y in 0..self.ny {
                            let wy = wr[y];
                            let v = if wy > T::zero() {
                                let ratio = sc.puy[u * self.ny + y] / (sc.pu[u] * sc.py[y]);
                                wy * (-lambda * ratio.ln()).exp()
                            } else {
                                T::zero()
                            };
                            out[y] = v;
                            norm = norm + v;
                        }
                        for y in 0..self.ny {
                            out[y] = out[y] / norm;
                        }
                    }
                }
            }
            // geometric damping: halfway between old and new in log space
            for s in 0..self.ns {
                for x in 0..self.nx {
                    for u in 0..self.nu {
                        let r = self.row(s, u, x);
                        if m[r] <= T::zero() {
                            continue;
                        }
                        let old = &sc.q[r * self.ny..(r + 1) * self.ny];
                        let new = &sc.q_new[r * self.ny..(r + 1) * self.ny];
                        let mut norm = T::zero();
                        let mut blended = [T::zero(); 16];
                        let tmp: &mut [T] = if self.ny <= 16 {
                            &mut blended[..self.ny]
                        } else {
                            sc.py.as_mut_slice()
                        };
                        for y in 0..self.ny {
                            let v = (old[y] * new[y]).sqrt();
                            tmp[y] = v;
                            norm = norm + v;
                        }
                        let dst = &mut sc.q[r * self.ny..(r + 1) * self.ny];
                        for y in 0..self.ny {
                            dst[y] = tmp[y] / norm;
                        }
                    }
                }
            }
        }
        (best.1, best.2)
    }

    fn reset_to_channel(&self, m: &[T], sc: &mut RcScratch<T>) {
        for s in 0..self.ns {
            for x in 0..self.nx {
                let wr = self.w_row(s, x);
                for u in 0..self.nu {
                    let r = self.row(s, u, x);
                    if m[r] <= T::zero() {
                        continue;
                    }
                    sc.q[r * self.ny..(r + 1) * self.ny].copy_from_slice(wr);
                }
            }
        }
        for u in 0..self.nu {
            let mut acc = T::zero();
            for s in 0..self.ns {
                for x in 0..self.nx {
                    acc = acc + m[self.row(s, u, x)];
                }
            }
            sc.pu[u] = acc;
        }
    }

    /// The convex inner minimum
    /// `min over Q of { D(Q || W | m) + [I(U;Y) - I(U;S) - R]_+ }`.
    pub(crate) fn inner_min(&self, m: &[T], sc: &mut RcScratch<T>) -> T {
        let c = self.hinge_threshold(m);
        self.reset_to_channel(m, sc);
        self.aggregates(m, &sc.q, &mut sc.puy, &mut sc.py);
        let (_, i_w) = self.objective(m, &sc.q, &sc.puy, &sc.py, &sc.pu);
        if i_w <= c {
            // hinge inactive at the unpenalized optimum Q = W
            return T::zero();
        }
        let one = T::one();
        let (d1, i1) = self.solve_tilted(m, one, sc);
        if i1 >= c {
            return d1 + (i1 - c);
        }
        let mut best_g = d1 + (i1 - c);
        if best_g < T::zero() {
            best_g = T::zero();
        }
        let mut lo = T::zero();
        let mut hi = one;
        for _ in 0..22 {
            let mid = (lo + hi) * real(0.5);
            let (d, mi) = self.solve_tilted(m, mid, sc);
            let g = d + mid * (mi - c);
            if g > best_g {
                best_g = g;
            }
            if mi > c {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        best_g
    }

    /// Objective of one design candidate at state type `qs`.
    pub(crate) fn design_value(&self, qs: &[T], rows: &[T], sc: &mut RcScratch<T>) -> T {
        let d = self.nu * self.nx;
        for s in 0..self.ns {
            for c in 0..d {
                sc.m[s * d + c] = qs[s] * rows[s * d + c];
            }
        }
        let m = std::mem::take(&mut sc.m);
        let v = self.inner_min(&m, sc);
        sc.m = m;
        v
    }
}

/// Integer offsets in `{-1,0,1}^dim` summing to zero (origin included).
fn unit_offsets(dim: usize) -> Vec<Vec<i32>> {
    let mut out = vec![vec![0i32; dim]];
    let mut cur = vec![0i32; dim];
    fn rec(out: &mut Vec<Vec<i32>>, cur: &mut [i32], axis: usize, sum: i32) {
        if axis + 1 == cur.len() {
            let last = -sum;
            if last.abs() <= 1 {
                cur[axis] = last;
                if cur.iter().any(|&d| d != 0) {
                    out.push(cur.to_vec());
                }
            }
            return;
        }
        for d in -1..=1 {
            cur[axis] = d;
            rec(out, cur, axis + 1, sum + d);
        }
    }
    rec(&mut out, &mut cur, 0, 0);
    out
}

/// Largest per-row resolution whose product enumeration stays below a cap.
fn auto_resolution(dim: usize, ns: usize, want: usize, cap: usize) -> usize {
    let mut res = want.max(1);
    loop {
        let per_row = n_compositions(res, dim);
        let total = per_row.saturating_pow(ns as u32);
        if total <= cap || res == 1 {
            return res;
        }
        res -= 1;
    }
}

fn n_compositions(res: usize, dim: usize) -> usize {
    // C(res + dim - 1, dim - 1)
    let mut num = 1usize;
    for k in 1..dim {
        num = num.saturating_mul(res + k) / k;
    }
    num
}

/// Maximize the inner minimum over the design, one `(U, X)` distribution per
/// state symbol. Returns `(rows, value)` for the best design found.
pub(crate) fn design_max<T: Scalar>(
    pr: &RcProblem<'_, T>,
    qs: &[T],
    grids: &GpGrids,
) -> (Vec<T>, T) {
    let d = pr.nu * pr.nx;
    let res = auto_resolution(d, pr.ns, grids.design_resolution, 30_000);
    let per_row = simplex_points::<T>(d, res);
    let n_per = per_row.len();
    let total = n_per.pow(pr.ns as u32);

    let values: Vec<T> = (0..total)
        .into_par_iter()
        .map_init(
            || RcScratch::new(pr),
            |sc, mut idx| {
                let mut rows = vec![T::zero(); pr.ns * d];
                for s in 0..pr.ns {
                    let k = idx % n_per;
                    idx /= n_per;
                    rows[s * d..(s + 1) * d].copy_from_slice(&per_row[k]);
                }
                pr.design_value(qs, &rows, sc)
            },
        )
        .collect();

    let mut order: Vec<usize> = (0..total).collect();
    order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap_or(std::cmp::Ordering::Equal));
    let finalists = grids.design_finalists.max(1).min(total);

    let offsets = unit_offsets(d);
    let n_off = offsets.len();
    let mut best_rows = Vec::new();
    let mut best_value = T::neg_infinity();
    for &start in order.iter().take(finalists) {
        let mut rows = vec![T::zero(); pr.ns * d];
        let mut idx = start;
        for s in 0..pr.ns {
            let k = idx % n_per;
            idx /= n_per;
            rows[s * d..(s + 1) * d].copy_from_slice(&per_row[k]);
        }
        let mut value = values[start];
        let mut step: T = T::one() / T::from_usize(res).unwrap() * real(0.5);
        for _ in 0..grids.design_refine_rounds {
            let center = rows.clone();
            let n_cand = n_off.pow(pr.ns as u32);
            let round: Vec<(T, usize)> = (0..n_cand)
                .into_par_iter()
                .map_init(
                    || (RcScratch::new(pr), vec![T::zero(); pr.ns * d]),
                    |(sc, cand), code| {
                        let mut c = code;
                        let mut ok = true;
                        'outer: for s in 0..pr.ns {
                            let off = &offsets[c % n_off];
                            c /= n_off;
                            for j in 0..d {
                                let v = center[s * d + j] + step * T::from_i32(off[j]).unwrap();
                                if v < T::zero() {
                                    ok = false;
                                    break 'outer;
                                }
                                cand[s * d + j] = v;
                            }
                        }
                        if !ok {
                            return (T::neg_infinity(), code);
                        }
                        (pr.design_value(qs, cand, sc), code)
                    },
                )
                .collect();
            let mut best_round = (value, usize::MAX);
            for &(v, code) in &round {
                if v > best_round.0 {
                    best_round = (v, code);
                }
            }
            if best_round.1 != usize::MAX {
                value = best_round.0;
                let mut c = best_round.1;
                for s in 0..pr.ns {
                    let off = &offsets[c % n_off];
                    c /= n_off;
                    for j in 0..d {
                        rows[s * d + j] = rows[s * d + j] + step * T::from_i32(off[j]).unwrap();
                    }
                }
            }
            step = step * real(0.5);
        }
        if value > best_value {
            best_value = value;
            best_rows = rows;
        }
    }
    (best_rows, best_value)
}

/// `D(qs || p_s)` with `+inf` on support violation.
pub(crate) fn kl_vec<T: Scalar>(qs: &[T], ps: &[T]) -> T {
    let mut d = T::zero();
    for (&q, &p) in qs.iter().zip(ps.iter()) {
        if q > T::zero() {
            if p <= T::zero() {
                return T::infinity();
            }
            d = d + q * (q / p).ln();
        }
    }
    d
}
