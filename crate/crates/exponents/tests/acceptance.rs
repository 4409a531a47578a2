//! Acceptance suite: every published anchor and structural property the
//! artifact commits to, one test per criterion. Each test prints a PASS line
//! with the measured values (visible under `--nocapture`); a failed
//! assertion is the FAIL line. Criteria serialize on a global lock so that
//! their runtime bounds measure only their own work.

use exponents::curves::{self, DesignPolicy};
use exponents::dpc::{
    self, DpcChannel, DpcDesign, ExponentKind, Interference,
};
use exponents::gp::{
    self, e0_pairwise, e1_pairwise, e2_pairwise, GpChannel, GpDesign, GpGrids, RateNats,
};
use exponents::gpsim::{self, SimConfig};
use exponents::info::{Axis, Conditional, JointDistribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Mutex;
use std::time::Instant;

static SERIAL: Mutex<()> = Mutex::new(());

fn serialize() -> std::sync::MutexGuard<'static, ()> {
    // a failed criterion must not poison the others
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn channel() -> DpcChannel<f64> {
    DpcChannel::new(10.0, 1.0, 1.0).unwrap()
}

#[test]
fn criterion_1_dpc_zero_rate_anchors() {
    let _guard = serialize();
    let start = Instant::now();
    let ch = channel();

    let mut matches = Vec::new();
    let mut report = String::new();
    for (name, interference) in [
        ("spherical", Interference::Spherical),
        ("gaussian", Interference::Gaussian),
    ] {
        let rc = dpc::dpc_exponent_optimized(0.0, &ch, ExponentKind::RandomCoding, interference);
        let trc = dpc::dpc_exponent_optimized(0.0, &ch, ExponentKind::Trc, interference);
        let ex = dpc::dpc_exponent_optimized(0.0, &ch, ExponentKind::Expurgated, interference);
        let ok = (rc.value - 1.008).abs() <= 0.02
            && (trc.value - 1.889).abs() <= 0.02
            && (ex.value - 1.889).abs() <= 0.02;
        report.push_str(&format!(
            "{name}: E_rc(0)={:.5}, E_trc(0)={:.5}, E_ex(0)={:.5} -> {} | ",
            rc.value,
            trc.value,
            ex.value,
            if ok { "matches" } else { "no match" }
        ));
        if ok {
            matches.push(name);
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(
        !matches.is_empty(),
        "criterion 1: FAIL - no interference interpretation matches ({report})"
    );
    assert!(elapsed <= 120.0, "criterion 1: FAIL - runtime {elapsed:.1}s > 120s");
    println!(
        "criterion 1: PASS - matching interpretation(s): {matches:?}; {report}runtime {elapsed:.1}s"
    );
}

#[test]
fn criterion_2_dpc_low_rate_curve() {
    let _guard = serialize();
    let start = Instant::now();
    let ch = channel();
    let rates = curves::rate_grid(0.0, 0.6, 0.01);
    assert_eq!(rates.len(), 61);
    let points = curves::dpc_curve(&ch, &rates, DesignPolicy::Optimized(Interference::Spherical));

    let at = |r: f64| {
        points
            .iter()
            .find(|p| (p.rate - r).abs() < 1e-9)
            .expect("rate on grid")
    };
    let p01 = at(0.1);
    assert!(
        (p01.exponents.rc - 0.908).abs() <= 0.01,
        "criterion 2: FAIL - E_rc(0.1) = {}",
        p01.exponents.rc
    );
    assert!(
        (p01.exponents.trc - 1.10).abs() <= 0.02,
        "criterion 2: FAIL - E_trc(0.1) = {}",
        p01.exponents.trc
    );
    assert!(
        (p01.exponents.ex - 1.31).abs() <= 0.02,
        "criterion 2: FAIL - E_ex(0.1) = {}",
        p01.exponents.ex
    );
    for w in points.windows(2) {
        assert!(
            w[1].exponents.rc <= w[0].exponents.rc + 1e-6,
            "criterion 2: FAIL - E_rc increases between R={} and R={}",
            w[0].rate,
            w[1].rate
        );
    }
    for p in points.iter().filter(|p| p.rate >= 0.45 - 1e-9) {
        let spread = (p.exponents.ex - p.exponents.rc).abs();
        assert!(
            spread <= 0.01,
            "criterion 2: FAIL - curves apart by {spread} at R = {}",
            p.rate
        );
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed <= 600.0, "criterion 2: FAIL - runtime {elapsed:.1}s > 600s");
    println!(
        "criterion 2: PASS - at R=0.1: rc={:.4}, trc={:.4}, ex={:.4}; curves coincide for R>=0.45; runtime {elapsed:.1}s",
        p01.exponents.rc, p01.exponents.trc, p01.exponents.ex
    );
}

#[test]
fn criterion_3_dpc_alpha_sweep() {
    let _guard = serialize();
    let ch = channel();
    let alphas: Vec<f64> = (1..=100).map(|i| i as f64 / 100.0).collect();
    let sweep = curves::dpc_alpha_sweep(&ch, 0.0, &alphas);

    let argmax = |pick: &dyn Fn(&dpc::DpcExponents<f64>) -> f64| {
        let mut best = (alphas[0], f64::NEG_INFINITY);
        for (a, e) in &sweep {
            if pick(e) > best.1 {
                best = (*a, pick(e));
            }
        }
        best
    };
    let (a_rc, v_rc) = argmax(&|e| e.rc);
    let (a_trc, v_trc) = argmax(&|e| e.trc);
    assert!(
        (a_rc - 0.90).abs() <= 0.03,
        "criterion 3: FAIL - argmax alpha for rc = {a_rc}"
    );
    assert!(
        (v_rc - 1.00811).abs() <= 0.01,
        "criterion 3: FAIL - rc value at argmax = {v_rc}"
    );
    assert!(
        (a_trc - 0.38).abs() <= 0.03,
        "criterion 3: FAIL - argmax alpha for trc = {a_trc}"
    );
    assert!(
        (v_trc - 1.88873).abs() <= 0.01,
        "criterion 3: FAIL - trc value at argmax = {v_trc}"
    );
    let a_cap = dpc::capacity_alpha(&ch);
    println!(
        "criterion 3: PASS - argmax_alpha rc: {a_rc:.2} (value {v_rc:.5}), trc: {a_trc:.2} (value {v_trc:.5}); capacity alpha = {a_cap:.4}"
    );
}

#[test]
fn criterion_4_dpc_interference_sweep() {
    let _guard = serialize();
    let qs: Vec<f64> = (0..=25).map(|i| i as f64 * 0.04).collect();
    let sweep = curves::dpc_q_sweep(10.0, 1.0, 0.0, &qs).unwrap();

    let trc0 = sweep[0].1[1].value;
    let trc1 = sweep.last().unwrap().1[1].value;
    assert!((trc0 - 2.50).abs() <= 0.02, "criterion 4: FAIL - E_trc(0) at Q=0: {trc0}");
    assert!(
        (trc1 - 1.8887).abs() <= 0.02,
        "criterion 4: FAIL - E_trc(0) at Q=1: {trc1}"
    );
    for w in sweep.windows(2) {
        assert!(
            w[1].1[1].value <= w[0].1[1].value + 1e-6,
            "criterion 4: FAIL - E_trc not decreasing between Q={} and Q={}",
            w[0].0,
            w[1].0
        );
    }
    let mut rc_lo = f64::INFINITY;
    let mut rc_hi = f64::NEG_INFINITY;
    for (q, opt) in &sweep {
        let rc = opt[0].value;
        rc_lo = rc_lo.min(rc);
        rc_hi = rc_hi.max(rc);
        assert!(
            (1.0079..=1.0082).contains(&rc),
            "criterion 4: FAIL - E_rc(0) = {rc} at Q = {q} outside [1.0079, 1.0082]"
        );
    }
    println!(
        "criterion 4: PASS - E_trc(0): {trc0:.4} at Q=0 down to {trc1:.4} at Q=1, monotone; E_rc(0) in [{rc_lo:.6}, {rc_hi:.6}]"
    );
}

#[test]
fn criterion_5_dpc_structural_properties() {
    let _guard = serialize();
    let ch = channel();
    let mut rng = ChaCha8Rng::seed_from_u64(20260809);

    // ordering at 200 random (rate, alpha, q_hat) tuples
    let tuples: Vec<(f64, f64, f64)> = (0..200)
        .map(|_| {
            (
                rng.random_range(0.0..0.6),
                rng.random_range(0.0..=1.0),
                rng.random_range(0.2..5.0),
            )
        })
        .collect();
    use rayon::prelude::*;
    let results: Vec<_> = tuples
        .par_iter()
        .map(|&(r, a, qh)| {
            let d = DpcDesign::new(a, qh).unwrap();
            (r, a, qh, dpc::dpc_exponents_all(r, &ch, &d))
        })
        .collect();
    for (r, a, qh, e) in &results {
        assert!(
            e.rc <= e.trc && e.trc <= e.ex,
            "criterion 5: FAIL - ordering violated at (R={r}, alpha={a}, q_hat={qh}): {e:?}"
        );
    }

    // exact TRC = expurgated tie at zero rate
    for _ in 0..20 {
        let a = rng.random_range(0.0..=1.0);
        let qh = rng.random_range(0.2..5.0);
        let d = DpcDesign::new(a, qh).unwrap();
        let e = dpc::dpc_exponents_all(0.0, &ch, &d);
        assert!(
            e.trc == e.ex,
            "criterion 5: FAIL - E_trc(0) != E_ex(0) at alpha={a}, q_hat={qh}"
        );
    }

    // pairwise supremum dominates the p = q closed form at 1000 tuples
    for _ in 0..1000 {
        let a = rng.random_range(0.0..=1.0);
        let qh = rng.random_range(0.2..5.0);
        let r = rng.random_range(0.0..0.6);
        let rho = rng.random_range(-0.95..0.95);
        let varrho = rng.random_range(-0.95..0.95);
        let d = DpcDesign::new(a, qh).unwrap();
        let sup = dpc::sup_pq(r, &ch, &d, rho, varrho);
        let simple = dpc::simplified_pairwise(r, &ch, &d, rho, varrho);
        assert!(
            sup >= simple || (sup.is_infinite() && simple.is_infinite()),
            "criterion 5: FAIL - sup {sup} < simplified {simple}"
        );
    }

    // T versus a brute-force tau grid at 1000 pairs
    for _ in 0..1000 {
        let g = rng.random_range(0.01..10.0);
        let h = g + rng.random_range(0.0..10.0);
        let mut brute = f64::NEG_INFINITY;
        for i in 0..100_000 {
            let t = i as f64 / 100_000.0;
            brute = brute.max((g * t - h * t * t) / (1.0 - t * t));
        }
        let v = dpc::t_function(g, h);
        assert!(
            (v - brute).abs() <= 1e-6,
            "criterion 5: FAIL - T({g},{h}) = {v} vs brute {brute}"
        );
    }
    println!(
        "criterion 5: PASS - ordering at 200 tuples, zero-rate tie exact, sup >= simplified at 1000 tuples, T within 1e-6 of brute force at 1000 pairs"
    );
}

#[test]
fn criterion_6_gp_random_coding_anchors() {
    let _guard = serialize();
    let grids = GpGrids::default();
    let rates = curves::rate_grid(0.0, 0.5, 0.01);
    let anchors: [(f64, f64); 3] = [(0.7, 0.431), (0.5, 0.288), (0.3, 0.163)];
    let mut report = String::new();
    for (p, expect) in anchors {
        let start = Instant::now();
        let ch = GpChannel::binary_clean_or_stuck(p).unwrap();
        let curve = curves::gp_rc_curve(&ch, &rates, &grids).unwrap();
        let elapsed = start.elapsed().as_secs_f64();
        assert!(
            elapsed <= 900.0,
            "criterion 6: FAIL - curve for p={p} took {elapsed:.0}s > 900s"
        );

        let e0 = curve[0];
        assert!(
            (e0 - expect).abs() <= 0.01,
            "criterion 6: FAIL - E_rc(0) = {e0} at p={p}, expected {expect}"
        );

        for w in curve.windows(2) {
            assert!(
                w[1] <= w[0] + 1e-6,
                "criterion 6: FAIL - E_rc not nonincreasing at p={p}"
            );
        }
        assert!(
            curve.iter().all(|&v| v >= -1e-9),
            "criterion 6: FAIL - negative exponent beyond float noise at p={p}"
        );

        // low-rate affine slope of -1
        for (k, &r) in rates.iter().enumerate() {
            if r > 0.1 + 1e-9 {
                break;
            }
            let drift = (curve[k] - e0) + r;
            assert!(
                drift.abs() <= 5e-3,
                "criterion 6: FAIL - slope drift {drift} at R={r}, p={p}"
            );
        }

        // zero crossing within 0.01 of the capacity p ln 2
        let crossing = rates
            .iter()
            .zip(curve.iter())
            .find(|(_, &v)| v < 1e-3)
            .map(|(&r, _)| r)
            .expect("curve must cross 1e-3");
        let capacity = p * std::f64::consts::LN_2;
        assert!(
            (crossing - capacity).abs() <= 0.01 + 1e-9,
            "criterion 6: FAIL - zero crossing {crossing} vs capacity {capacity} at p={p}"
        );
        report.push_str(&format!(
            "p={p}: E_rc(0)={e0:.4}, crossing {crossing:.2} (capacity {capacity:.3}), {elapsed:.0}s; "
        ));
    }
    println!("criterion 6: PASS - {report}");
}

// ---------------------------------------------------------------------------
// criterion 7: pairwise bounds - nesting plus an exhaustive-grid oracle for
// the e0/e1/e2 chain on random binary instances
// ---------------------------------------------------------------------------

const ORACLE_RES: usize = 32;
const ORACLE_TOL: f64 = 0.02;

fn random_conditional(
    rng: &mut ChaCha8Rng,
    given: &[(Axis, usize)],
    out: (Axis, usize),
) -> Conditional<f64> {
    let n_rows: usize = given.iter().map(|&(_, n)| n).product();
    let mut rows = Vec::with_capacity(n_rows * out.1);
    for _ in 0..n_rows {
        let raw: Vec<f64> = (0..out.1).map(|_| 0.1 + rng.random::<f64>()).collect();
        let s: f64 = raw.iter().sum();
        rows.extend(raw.into_iter().map(|v| v / s));
    }
    Conditional::new(given, out, rows).unwrap()
}

fn random_instance_channel(rng: &mut ChaCha8Rng) -> (GpChannel<f64>, GpDesign<f64>) {
    let p0 = rng.random_range(0.2..0.8);
    let p_s = JointDistribution::new(&[(Axis::S, 2)], vec![p0, 1.0 - p0]).unwrap();
    let w = random_conditional(rng, &[(Axis::X, 2), (Axis::S, 2)], (Axis::Y, 2));
    let ch = GpChannel::new(p_s, w).unwrap();
    let q_u = random_conditional(rng, &[(Axis::S, 2)], (Axis::U, 2));
    let q_x = random_conditional(rng, &[(Axis::U, 2), (Axis::S, 2)], (Axis::X, 2));
    let design = GpDesign::new(q_u, q_x, 0.0).unwrap();
    (ch, design)
}

fn random_sparse_joint(
    rng: &mut ChaCha8Rng,
    axes: &[(Axis, usize)],
    support: usize,
) -> JointDistribution<f64> {
    let cells: usize = axes.iter().map(|&(_, n)| n).product();
    let mut idx: Vec<usize> = (0..cells).collect();
    for i in (1..cells).rev() {
        let j = rng.random_range(0..=i);
        idx.swap(i, j);
    }
    let mut probs = vec![0.0; cells];
    let mut total = 0.0;
    for &cell in idx.iter().take(support) {
        let m = 0.1 + rng.random::<f64>();
        probs[cell] = m;
        total += m;
    }
    for p in probs.iter_mut() {
        *p /= total;
    }
    JointDistribution::new(axes, probs).unwrap()
}

fn own_binning_rate(q_s: &[f64], design: &GpDesign<f64>) -> f64 {
    let nu = design.q_u_given_s.out_size();
    let mut qu = vec![0.0; nu];
    for (s, &p) in q_s.iter().enumerate() {
        for (u, &c) in design.q_u_given_s.row(&[s]).iter().enumerate() {
            qu[u] += p * c;
        }
    }
    let mut i = 0.0;
    for (s, &p) in q_s.iter().enumerate() {
        for (u, &c) in design.q_u_given_s.row(&[s]).iter().enumerate() {
            if p * c > 0.0 {
                i += p * c * (c / qu[u]).ln();
            }
        }
    }
    i + design.epsilon
}

/// Exhaustive 1/32-grid minimization over the output conditionals of the
/// support rows of a sparse pairwise instance.
fn oracle_e0(
    j: &JointDistribution<f64>,
    q_s_prime: &[f64],
    ch: &GpChannel<f64>,
    design: &GpDesign<f64>,
) -> f64 {
    let probs = j.probs();
    let q_s: Vec<f64> = {
        let m = j.marginal(&[Axis::S]).unwrap();
        m.probs().to_vec()
    };
    let theta0 = own_binning_rate(q_s_prime, design) - own_binning_rate(&q_s, design);
    // support rows as (u, v, s, x, mass)
    let mut rows = Vec::new();
    for u in 0..2 {
        for v in 0..2 {
            for s in 0..2 {
                for x in 0..2 {
                    let m = probs[((u * 2 + v) * 2 + s) * 2 + x];
                    if m > 0.0 {
                        rows.push((u, v, s, x, m));
                    }
                }
            }
        }
    }
    assert!(rows.len() <= 4, "oracle instances must stay sparse");
    let mut best = f64::INFINITY;
    let n_grid = ORACLE_RES + 1;
    let total = n_grid.pow(rows.len() as u32);
    let mut t = vec![0.0f64; rows.len()];
    for code in 0..total {
        let mut c = code;
        for tv in t.iter_mut() {
            *tv = (c % n_grid) as f64 / ORACLE_RES as f64;
            c /= n_grid;
        }
        // divergence and aggregates
        let mut d = 0.0;
        let mut puy = [[0.0f64; 2]; 2];
        let mut pvy = [[0.0f64; 2]; 2];
        let mut py = [0.0f64; 2];
        let mut pu = [0.0f64; 2];
        let mut pv = [0.0f64; 2];
        for (k, &(u, v, s, x, m)) in rows.iter().enumerate() {
            let w1 = ch.w().row(&[x, s])[1];
            let w0 = 1.0 - w1;
            let t1 = t[k];
            let t0 = 1.0 - t1;
            if t1 > 0.0 {
                if w1 <= 0.0 {
                    d = f64::INFINITY;
                } else {
                    d += m * t1 * (t1 / w1).ln();
                }
            }
            if t0 > 0.0 {
                if w0 <= 0.0 {
                    d = f64::INFINITY;
                } else {
                    d += m * t0 * (t0 / w0).ln();
                }
            }
            puy[u][1] += m * t1;
            puy[u][0] += m * t0;
            pvy[v][1] += m * t1;
            pvy[v][0] += m * t0;
            py[1] += m * t1;
            py[0] += m * t0;
            pu[u] += m;
            pv[v] += m;
        }
        if !d.is_finite() {
            continue;
        }
        let mi = |pxy: &[[f64; 2]; 2], px: &[f64; 2]| -> f64 {
            let mut acc = 0.0;
            for a in 0..2 {
                for y in 0..2 {
                    if pxy[a][y] > 0.0 {
                        acc += pxy[a][y] * (pxy[a][y] / (px[a] * py[y])).ln();
                    }
                }
            }
            acc
        };
        let gap = mi(&pvy, &pv) - mi(&puy, &pu);
        if gap - theta0 >= -1e-9 && d < best {
            best = d;
        }
    }
    best
}

/// Exhaustive grid over the pinned competitor-input conditionals, with the
/// already-validated `e0` below.
fn oracle_e1(
    j: &JointDistribution<f64>,
    q_s_prime: &JointDistribution<f64>,
    ch: &GpChannel<f64>,
    design: &GpDesign<f64>,
) -> f64 {
    let probs = j.probs().to_vec(); // (u, v, s)
    let mut pus = [[0.0f64; 2]; 2];
    for u in 0..2 {
        for v in 0..2 {
            for s in 0..2 {
                pus[u][s] += probs[(u * 2 + v) * 2 + s];
            }
        }
    }
    // free rows: for each (u, s) group, all present v's except the last
    let mut free = Vec::new(); // (u, v, s, weight)
    let mut solved = Vec::new(); // (u, v, s, weight, target_index)
    for u in 0..2 {
        for s in 0..2 {
            let present: Vec<usize> = (0..2)
                .filter(|&v| probs[(u * 2 + v) * 2 + s] > 0.0)
                .collect();
            for (k, &v) in present.iter().enumerate() {
                let w = probs[(u * 2 + v) * 2 + s] / pus[u][s];
                if k + 1 == present.len() {
                    solved.push((u, v, s, w));
                } else {
                    free.push((u, v, s, w));
                }
            }
        }
    }
    assert!(free.len() <= 2, "oracle e1 instances must stay sparse");
    let n_grid = ORACLE_RES + 1;
    let total = n_grid.pow(free.len() as u32);
    let mut best = f64::INFINITY;
    let mut t_free = vec![0.0f64; free.len()];
    for code in 0..total {
        let mut c = code;
        for tv in t_free.iter_mut() {
            *tv = (c % n_grid) as f64 / ORACLE_RES as f64;
            c /= n_grid;
        }
        // assemble the full table t(x=1 | u, v, s)
        let mut table = [[[0.0f64; 2]; 2]; 2]; // [u][v][s]
        let mut ok = true;
        for (k, &(u, v, s, _)) in free.iter().enumerate() {
            table[u][v][s] = t_free[k];
        }
        for &(u, v, s, w_last) in &solved {
            let d1 = design.q_x_given_us.row(&[u, s])[1];
            let used: f64 = free
                .iter()
                .enumerate()
                .filter(|(_, &(fu, _, fs, _))| fu == u && fs == s)
                .map(|(k, &(_, _, _, w))| w * t_free[k])
                .sum();
            let t_last = (d1 - used) / w_last;
            if !(-1e-9..=1.0 + 1e-9).contains(&t_last) {
                ok = false;
                break;
            }
            table[u][v][s] = t_last.clamp(0.0, 1.0);
        }
        if !ok {
            continue;
        }
        // objective: I(U';X|US) + e0 on the composed joint
        let mut cmi = 0.0;
        for u in 0..2 {
            for s in 0..2 {
                if pus[u][s] <= 0.0 {
                    continue;
                }
                let mut pv = [0.0f64; 2];
                let mut px = [0.0f64; 2];
                let mut pvx = [[0.0f64; 2]; 2];
                for v in 0..2 {
                    let m = probs[(u * 2 + v) * 2 + s];
                    let t1 = table[u][v][s];
                    pv[v] += m;
                    px[1] += m * t1;
                    px[0] += m * (1.0 - t1);
                    pvx[v][1] += m * t1;
                    pvx[v][0] += m * (1.0 - t1);
                }
                for v in 0..2 {
                    for x in 0..2 {
                        if pvx[v][x] > 0.0 {
                            cmi += pvx[v][x] * ((pvx[v][x] * pus[u][s]) / (pv[v] * px[x])).ln();
                        }
                    }
                }
            }
        }
        let joint = JointDistribution::from_fn(
            &[(Axis::U, 2), (Axis::UPrime, 2), (Axis::S, 2), (Axis::X, 2)],
            |idx| {
                let m = probs[(idx[0] * 2 + idx[1]) * 2 + idx[2]];
                let t1 = table[idx[0]][idx[1]][idx[2]];
                m * if idx[3] == 1 { t1 } else { 1.0 - t1 }
            },
        )
        .unwrap();
        let e0 = e0_pairwise(&joint, q_s_prime, ch, design).unwrap();
        let v = cmi.max(0.0) + e0;
        if v < best {
            best = v;
        }
    }
    best
}

/// Exhaustive grid over the pinned state conditionals, with the validated
/// `e1` below.
fn oracle_e2(
    q_uu: &JointDistribution<f64>,
    q_s: &[f64],
    q_s_prime: &JointDistribution<f64>,
    ch: &GpChannel<f64>,
    design: &GpDesign<f64>,
) -> f64 {
    let probs = q_uu.probs().to_vec();
    let present: Vec<usize> = (0..4).filter(|&r| probs[r] > 0.0).collect();
    let (free, last) = present.split_at(present.len() - 1);
    assert!(free.len() <= 2, "oracle e2 instances must stay sparse");
    let n_grid = ORACLE_RES + 1;
    let total = n_grid.pow(free.len() as u32);
    let mut best = f64::INFINITY;
    let mut t_free = vec![0.0f64; free.len()];
    for code in 0..total {
        let mut c = code;
        for tv in t_free.iter_mut() {
            *tv = (c % n_grid) as f64 / ORACLE_RES as f64;
            c /= n_grid;
        }
        let used: f64 = free
            .iter()
            .enumerate()
            .map(|(k, &r)| probs[r] * t_free[k])
            .sum();
        let t_last = (q_s[1] - used) / probs[last[0]];
        if !(-1e-9..=1.0 + 1e-9).contains(&t_last) {
            continue;
        }
        let mut table = [0.0f64; 4]; // t(s=1 | u, v)
        for (k, &r) in free.iter().enumerate() {
            table[r] = t_free[k];
        }
        table[last[0]] = t_last.clamp(0.0, 1.0);

        // I(S; U' | U)
        let mut cmi = 0.0;
        for u in 0..2 {
            let mut pu = 0.0;
            let mut pv = [0.0f64; 2];
            let mut ps = [0.0f64; 2];
            let mut pvs = [[0.0f64; 2]; 2];
            for v in 0..2 {
                let m = probs[u * 2 + v];
                let t1 = table[u * 2 + v];
                pu += m;
                pv[v] += m;
                ps[1] += m * t1;
                ps[0] += m * (1.0 - t1);
                pvs[v][1] += m * t1;
                pvs[v][0] += m * (1.0 - t1);
            }
            if pu <= 0.0 {
                continue;
            }
            for v in 0..2 {
                for s in 0..2 {
                    if pvs[v][s] > 0.0 {
                        cmi += pvs[v][s] * ((pvs[v][s] * pu) / (pv[v] * ps[s])).ln();
                    }
                }
            }
        }
        let joint = JointDistribution::from_fn(
            &[(Axis::U, 2), (Axis::UPrime, 2), (Axis::S, 2)],
            |idx| {
                let m = probs[idx[0] * 2 + idx[1]];
                let t1 = table[idx[0] * 2 + idx[1]];
                m * if idx[2] == 1 { t1 } else { 1.0 - t1 }
            },
        )
        .unwrap();
        let e1 = e1_pairwise(&joint, q_s_prime, ch, design).unwrap();
        let v = cmi.max(0.0) + e1;
        if v < best {
            best = v;
        }
    }
    best
}

fn assert_close_or_both_infinite(implv: f64, oracle: f64, what: &str) {
    if oracle.is_infinite() || implv.is_infinite() {
        assert!(
            oracle.is_infinite() && implv.is_infinite(),
            "criterion 7: FAIL - {what}: impl {implv} vs oracle {oracle}"
        );
    } else {
        assert!(
            (implv - oracle).abs() <= ORACLE_TOL,
            "criterion 7: FAIL - {what}: impl {implv} vs oracle {oracle}"
        );
    }
}

#[test]
fn criterion_7_gp_pairwise_properties() {
    let _guard = serialize();

    // nesting: expurgated >= TRC at every grid rate
    let ch = GpChannel::binary_clean_or_stuck(0.7).unwrap();
    let mut grids = GpGrids::reduced();
    grids.pairwise_qs_resolution = 4;
    grids.coupling_resolution = 6;
    grids.pairwise_designs = 2;
    let rates: [f64; 4] = [0.0, 0.05, 0.1, 0.2];
    let curve = gp::gp_pairwise_curve(&rates, &ch, &grids).unwrap();
    for (k, &(trc, ex)) in curve.iter().enumerate() {
        assert!(
            ex >= trc - 1e-12,
            "criterion 7: FAIL - ex {ex} < trc {trc} at R = {}",
            rates[k]
        );
        assert!(trc.is_finite(), "criterion 7: FAIL - trc infinite at R = {}", rates[k]);
        // the pairwise analysis is tight only at low rates; at positive
        // rates the restricted-design lower bound may dip below zero and is
        // flagged rather than failed
        if rates[k] == 0.0 {
            assert!(trc >= -1e-9, "criterion 7: FAIL - trc {trc} < 0 at R = 0");
        } else if trc < -1e-9 {
            println!(
                "criterion 7: note - trc lower bound {trc:.4} < 0 at R = {} (bound loses tightness with rate; curves clamp at zero)",
                rates[k]
            );
        }
    }
    let rc0 = gp::gp_random_coding_exponent(RateNats(0.0), &ch, &GpGrids::reduced()).unwrap();
    println!(
        "criterion 7: note - at R=0: trc lower bound {:.4}, ex {:.4}, rc {:.4} (comparison reported, not asserted)",
        curve[0].0, curve[0].1, rc0
    );

    // e0/e1/e2 chain against the exhaustive binary-grid oracle
    let mut rng = ChaCha8Rng::seed_from_u64(777);
    for i in 0..8 {
        let (ch, design) = random_instance_channel(&mut rng);
        let j = random_sparse_joint(
            &mut rng,
            &[(Axis::U, 2), (Axis::UPrime, 2), (Axis::S, 2), (Axis::X, 2)],
            4,
        );
        let qsp_raw = rng.random_range(0.2..0.8);
        let q_s_prime =
            JointDistribution::new(&[(Axis::S, 2)], vec![qsp_raw, 1.0 - qsp_raw]).unwrap();
        let implv = e0_pairwise(&j, &q_s_prime, &ch, &design).unwrap();
        let oracle = oracle_e0(&j, q_s_prime.probs(), &ch, &design);
        assert_close_or_both_infinite(implv, oracle, &format!("e0 instance {i}"));
    }
    for i in 0..6 {
        let (ch, design) = random_instance_channel(&mut rng);
        let j = random_sparse_joint(
            &mut rng,
            &[(Axis::U, 2), (Axis::UPrime, 2), (Axis::S, 2)],
            3,
        );
        let qsp_raw = rng.random_range(0.2..0.8);
        let q_s_prime =
            JointDistribution::new(&[(Axis::S, 2)], vec![qsp_raw, 1.0 - qsp_raw]).unwrap();
        let implv = e1_pairwise(&j, &q_s_prime, &ch, &design).unwrap();
        let oracle = oracle_e1(&j, &q_s_prime, &ch, &design);
        assert_close_or_both_infinite(implv, oracle, &format!("e1 instance {i}"));
    }
    for i in 0..6 {
        let (ch, design) = random_instance_channel(&mut rng);
        let q_uu = random_sparse_joint(&mut rng, &[(Axis::U, 2), (Axis::UPrime, 2)], 3);
        let q1 = rng.random_range(0.2..0.8);
        let q_s = JointDistribution::new(&[(Axis::S, 2)], vec![1.0 - q1, q1]).unwrap();
        let qsp_raw = rng.random_range(0.2..0.8);
        let q_s_prime =
            JointDistribution::new(&[(Axis::S, 2)], vec![qsp_raw, 1.0 - qsp_raw]).unwrap();
        let implv = e2_pairwise(&q_uu, &q_s, &q_s_prime, &ch, &design).unwrap();
        let oracle = oracle_e2(&q_uu, q_s.probs(), &q_s_prime, &ch, &design);
        assert_close_or_both_infinite(implv, oracle, &format!("e2 instance {i}"));
    }
    println!(
        "criterion 7: PASS - nesting holds on the rate grid; e0/e1/e2 within {ORACLE_TOL} nats of the 1/{ORACLE_RES}-grid oracle on 20 instances"
    );
}

#[test]
fn criterion_8_simulator_properties() {
    let _guard = serialize();
    let ch = GpChannel::binary_clean_or_stuck(0.7).unwrap();
    let design = GpDesign::binary_stuck_matched(0.05).unwrap();

    let mut p_errs = Vec::new();
    for n in [8usize, 12, 16] {
        let cfg = SimConfig::new(n, RateNats(0.2), 10_000, 1, design.clone()).unwrap();
        let report = gpsim::estimate_error(&cfg, &ch).unwrap();
        // bit-exact reproducibility
        let again = gpsim::estimate_error(&cfg, &ch).unwrap();
        assert_eq!(report, again, "criterion 8: FAIL - run not reproducible at n={n}");
        p_errs.push((n, report.p_err, report.failures));
    }
    assert!(
        p_errs[0].1 > p_errs[1].1 && p_errs[1].1 > p_errs[2].1,
        "criterion 8: FAIL - p_err not strictly decreasing: {p_errs:?}"
    );

    // M = 1: the decoder can only output the true message
    let p_s = JointDistribution::new(&[(Axis::S, 1)], vec![1.0]).unwrap();
    let w = Conditional::new(
        &[(Axis::X, 2), (Axis::S, 1)],
        (Axis::Y, 2),
        vec![1.0, 0.0, 0.0, 1.0],
    )
    .unwrap();
    let clean = GpChannel::new(p_s, w).unwrap();
    let q_u = Conditional::new(&[(Axis::S, 1)], (Axis::U, 2), vec![0.5, 0.5]).unwrap();
    let q_x = Conditional::new(
        &[(Axis::U, 2), (Axis::S, 1)],
        (Axis::X, 2),
        vec![1.0, 0.0, 0.0, 1.0],
    )
    .unwrap();
    let single_design = GpDesign::new(q_u, q_x, 0.0).unwrap();
    let cfg = SimConfig::new(8, RateNats(0.0), 1_000, 3, single_design).unwrap();
    let report = gpsim::estimate_error(&cfg, &clean).unwrap();
    assert_eq!(report.p_err, 0.0, "criterion 8: FAIL - M=1 config has p_err > 0");

    println!(
        "criterion 8: PASS - p_err decreasing over n: {:?}; reproducible bitwise; M=1 gives p_err = 0",
        p_errs
            .iter()
            .map(|(n, p, _)| format!("n={n}: {p:.4}"))
            .collect::<Vec<_>>()
    );
}
