//! Deterministic derivative-free optimization primitives.
//!
//! Everything here is coarse-grid search followed by iterative refinement
//! around the incumbent. Several of the objectives fed into these routines
//! are non-smooth or have disconnected feasible sets (hinge terms, positive
//! semidefiniteness boundaries), so robustness is preferred over the faster
//! purely local methods. A terminal golden-section polish recovers high
//! accuracy on the smooth instances.

use crate::error::{Error, Result};
use crate::scalar::{fmax, real, Scalar};

/// Closed interval with finite endpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval<T> {
    pub lo: T,
    pub hi: T,
}

impl<T: Scalar> Interval<T> {
    pub fn new(lo: T, hi: T) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return Err(Error::arg(format!("invalid interval [{lo}, {hi}]")));
        }
        Ok(Interval { lo, hi })
    }

    pub fn width(&self) -> T {
        self.hi - self.lo
    }

    fn clamp(&self, x: T) -> T {
        if x < self.lo {
            self.lo
        } else if x > self.hi {
            self.hi
        } else {
            x
        }
    }
}

/// Budget and tolerances for the grid-refinement searches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptConfig<T> {
    /// Points per axis in the coarse pass.
    pub coarse_steps: usize,
    /// Number of re-centered refinement passes.
    pub refine_rounds: usize,
    /// Window shrink factor per refinement round, in (0, 1).
    pub refine_factor: T,
    /// Target bracket width for the terminal 1-D polish.
    pub tol: T,
    /// Amount by which open interval endpoints are pulled inward.
    pub boundary_margin: T,
}

impl<T: Scalar> Default for OptConfig<T> {
    fn default() -> Self {
        OptConfig {
            coarse_steps: 64,
            refine_rounds: 4,
            refine_factor: real(1.0 / 3.0),
            tol: real(1e-7),
            boundary_margin: real(1e-9),
        }
    }
}

impl<T: Scalar> OptConfig<T> {
    pub fn with_steps(mut self, steps: usize) -> Self {
        self.coarse_steps = steps;
        self
    }

    pub fn with_rounds(mut self, rounds: usize) -> Self {
        self.refine_rounds = rounds;
        self
    }
}

fn grid_point<T: Scalar>(lo: T, hi: T, i: usize, n: usize) -> T {
    if n <= 1 {
        return (lo + hi) * real(0.5);
    }
    let t = T::from_usize(i).unwrap() / T::from_usize(n - 1).unwrap();
    lo + (hi - lo) * t
}

/// Minimize `f` on `iv`. Endpoints are pulled inward by
/// `cfg.boundary_margin`, so `f` may diverge at the boundary itself.
///
/// Returns the incumbent `(argmin, min)` after coarse search, refinement and
/// a golden-section polish. Fails if the interval is invalid or `f` is
/// non-finite at every probed point.
pub fn minimize_1d<T, F>(f: F, iv: Interval<T>, cfg: &OptConfig<T>) -> Result<(T, T)>
where
    T: Scalar,
    F: Fn(T) -> T,
{
    let iv = Interval::new(iv.lo, iv.hi)?;
    let margin = cfg.boundary_margin;
    let (lo, hi) = if iv.width() > margin + margin {
        (iv.lo + margin, iv.hi - margin)
    } else {
        let mid = (iv.lo + iv.hi) * real(0.5);
        (mid, mid)
    };
    if lo >= hi {
        let v = f(lo);
        if !v.is_finite() && v != T::infinity() {
            return Err(Error::infeasible("objective non-finite on degenerate interval"));
        }
        return Ok((lo, v));
    }
    let eff = Interval { lo, hi };

    let n = cfg.coarse_steps.max(2) + 1;
    let mut best_x = T::nan();
    let mut best = T::infinity();
    let mut any_finite = false;
    let scan = |a: T, b: T, best_x: &mut T, best: &mut T, any: &mut bool| {
        for i in 0..n {
            let x = grid_point(a, b, i, n);
            let v = f(x);
            if v.is_finite() {
                *any = true;
                if v < *best || (!best_x.is_finite() && v <= *best) {
                    *best = v;
                    *best_x = x;
                }
            }
        }
    };
    scan(eff.lo, eff.hi, &mut best_x, &mut best, &mut any_finite);
    if !any_finite {
        return Err(Error::infeasible("objective non-finite on entire coarse grid"));
    }

    let mut half = eff.width() * real(0.5);
    for _ in 0..cfg.refine_rounds {
        half = half * cfg.refine_factor;
        let a = eff.clamp(best_x - half);
        let b = eff.clamp(best_x + half);
        scan(a, b, &mut best_x, &mut best, &mut any_finite);
    }

    // Golden-section polish inside the final grid cell.
    let step = fmax(half / T::from_usize(n - 1).unwrap() * real(2.0), cfg.tol);
    let (gx, gv) = golden_min(&f, eff.clamp(best_x - step), eff.clamp(best_x + step), cfg.tol);
    if gv < best {
        Ok((gx, gv))
    } else {
        Ok((best_x, best))
    }
}

/// Golden-section descent on `[a, b]` down to bracket width `tol`.
/// Tolerates `+inf` objective values (they simply lose comparisons).
fn golden_min<T: Scalar, F: Fn(T) -> T>(f: &F, mut a: T, mut b: T, tol: T) -> (T, T) {
    let resp: T = real(2.0 - 1.618_033_988_749_895);
    let mut x1 = a + resp * (b - a);
    let mut x2 = b - resp * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while (b - a) > tol {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = a + resp * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = b - resp * (b - a);
            f2 = f(x2);
        }
    }
    if f1 < f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Maximize `f` over the box under a feasibility predicate.
///
/// Returns `((lo0, lo1), -inf)` when no probed point is feasible with a
/// finite value; callers translate the sentinel to their domain meaning.
pub fn maximize_2d<T, F, P>(
    f: F,
    boxx: (Interval<T>, Interval<T>),
    feasible: P,
    cfg: &OptConfig<T>,
) -> ((T, T), T)
where
    T: Scalar,
    F: Fn(T, T) -> T,
    P: Fn(T, T) -> bool,
{
    let (bx, by) = boxx;
    let n = cfg.coarse_steps.max(2) + 1;
    let mut best = T::neg_infinity();
    let mut arg = (bx.lo, by.lo);
    let scan = |x0: T, x1: T, y0: T, y1: T, arg: &mut (T, T), best: &mut T| {
        for i in 0..n {
            let x = grid_point(x0, x1, i, n);
            for j in 0..n {
                let y = grid_point(y0, y1, j, n);
                if !feasible(x, y) {
                    continue;
                }
                let v = f(x, y);
                if v.is_finite() && v > *best {
                    *best = v;
                    *arg = (x, y);
                }
            }
        }
    };
    scan(bx.lo, bx.hi, by.lo, by.hi, &mut arg, &mut best);
    if best == T::neg_infinity() {
        return ((bx.lo, by.lo), best);
    }
    let mut hx = bx.width() * real(0.5);
    let mut hy = by.width() * real(0.5);
    for _ in 0..cfg.refine_rounds {
        hx = hx * cfg.refine_factor;
        hy = hy * cfg.refine_factor;
        let (cx, cy) = arg;
        scan(
            bx.clamp(cx - hx),
            bx.clamp(cx + hx),
            by.clamp(cy - hy),
            by.clamp(cy + hy),
            &mut arg,
            &mut best,
        );
    }
    (arg, best)
}

/// Whether a simplex search minimizes or maximizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchMode {
    Min,
    Max,
}

/// Regular grid on the probability simplex.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimplexGrid {
    pub dim: usize,
    /// Points per axis: coordinates are multiples of `1/resolution`.
    pub resolution: usize,
}

impl SimplexGrid {
    pub fn new(dim: usize, resolution: usize) -> Result<Self> {
        if dim == 0 || resolution == 0 {
            return Err(Error::arg("simplex grid needs dim >= 1 and resolution >= 1"));
        }
        Ok(SimplexGrid { dim, resolution })
    }
}

/// All points of the simplex whose coordinates are multiples of
/// `1/resolution`, in lexicographic order of their integer compositions.
pub fn simplex_points<T: Scalar>(dim: usize, resolution: usize) -> Vec<Vec<T>> {
    let mut out = Vec::new();
    let mut counts = vec![0usize; dim];
    fill_compositions(&mut out, &mut counts, 0, resolution, resolution);
    out
}

fn fill_compositions<T: Scalar>(
    out: &mut Vec<Vec<T>>,
    counts: &mut [usize],
    axis: usize,
    remaining: usize,
    resolution: usize,
) {
    if axis + 1 == counts.len() {
        counts[axis] = remaining;
        let denom = T::from_usize(resolution).unwrap();
        out.push(counts.iter().map(|&c| T::from_usize(c).unwrap() / denom).collect());
        return;
    }
    for c in 0..=remaining {
        counts[axis] = c;
        fill_compositions(out, counts, axis + 1, remaining - c, resolution);
    }
}

/// Integer offset vectors in `{-radius..radius}^dim` summing to zero,
/// excluding the origin. Moving along them keeps a point on the simplex
/// hyperplane; negative coordinates are rejected by the caller.
fn sum_zero_offsets(dim: usize, radius: i32) -> Vec<Vec<i32>> {
    let mut out = Vec::new();
    let mut cur = vec![0i32; dim];
    fn rec(out: &mut Vec<Vec<i32>>, cur: &mut [i32], axis: usize, sum: i32, radius: i32) {
        if axis + 1 == cur.len() {
            let last = -sum;
            if last.abs() <= radius {
                cur[axis] = last;
                if cur.iter().any(|&d| d != 0) {
                    out.push(cur.to_vec());
                }
            }
            return;
        }
        for d in -radius..=radius {
            cur[axis] = d;
            rec(out, cur, axis + 1, sum + d, radius);
        }
    }
    rec(&mut out, &mut cur, 0, 0, radius);
    out
}

/// Optimize `f` over the probability simplex: full enumeration at the grid
/// resolution, then `cfg.refine_rounds` local passes re-centered on the
/// incumbent with the step shrunk by `cfg.refine_factor` and candidates
/// clipped to the simplex.
pub fn search_simplex<T, F>(
    f: F,
    grid: SimplexGrid,
    cfg: &OptConfig<T>,
    mode: SearchMode,
) -> (Vec<T>, T)
where
    T: Scalar,
    F: Fn(&[T]) -> T,
{
    let sign = match mode {
        SearchMode::Min => T::one(),
        SearchMode::Max => -T::one(),
    };
    let mut best = T::infinity();
    let mut arg = vec![T::zero(); grid.dim];
    for point in simplex_points::<T>(grid.dim, grid.resolution) {
        let v = sign * f(&point);
        if v < best {
            best = v;
            arg = point;
        }
    }
    if grid.dim > 1 {
        let offsets = sum_zero_offsets(grid.dim, 2);
        let mut step = T::one() / T::from_usize(grid.resolution).unwrap();
        let mut cand = vec![T::zero(); grid.dim];
        for _ in 0..cfg.refine_rounds {
            step = step * cfg.refine_factor;
            let center = arg.clone();
            for off in &offsets {
                let mut ok = true;
                for (c, (&x, &d)) in cand.iter_mut().zip(center.iter().zip(off.iter())) {
                    *c = x + step * T::from_i32(d).unwrap();
                    if *c < T::zero() {
                        ok = false;
                        break;
                    }
                }
                if !ok {
                    continue;
                }
                let v = sign * f(&cand);
                if v < best {
                    best = v;
                    arg = cand.clone();
                }
            }
        }
    }
    (arg, sign * best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg() -> OptConfig<f64> {
        OptConfig::default()
    }

    #[test]
    fn minimize_quadratic() {
        let (x, v) = minimize_1d(|x| (x - 2.0) * (x - 2.0), Interval::new(0.0, 5.0).unwrap(), &cfg())
            .unwrap();
        assert!((x - 2.0).abs() < 1e-6, "argmin {x}");
        assert!(v.abs() < 1e-12, "min {v}");
    }

    #[test]
    fn minimize_monotone_hits_margin() {
        let (x, v) = minimize_1d(|x| x, Interval::new(-1.0, 1.0).unwrap(), &cfg()).unwrap();
        assert!((x - (-1.0 + 1e-9)).abs() < 1e-10, "argmin {x}");
        assert!((v - x).abs() < 1e-15);
    }

    #[test]
    fn minimize_boundary_blowup() {
        // diverges at both endpoints; margin keeps evaluations finite
        let (x, v) = minimize_1d(
            |x: f64| -(1.0 - x * x).ln(),
            Interval::new(-1.0, 1.0).unwrap(),
            &cfg(),
        )
        .unwrap();
        assert!(x.abs() < 1e-6, "argmin {x}");
        assert!(v.abs() < 1e-10, "min {v}");
    }

    #[test]
    fn minimize_invalid_interval() {
        assert!(matches!(
            minimize_1d(|x: f64| x, Interval { lo: 1.0, hi: 0.0 }, &cfg()),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn minimize_all_infeasible() {
        assert!(matches!(
            minimize_1d(|_| f64::INFINITY, Interval::new(0.0, 1.0).unwrap(), &cfg()),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn maximize_paraboloid() {
        let iv = Interval::new(0.0, 1.0).unwrap();
        let ((p, q), v) = maximize_2d(|x, y| -x * x - y * y, (iv, iv), |_, _| true, &cfg());
        assert!(p.abs() < 1e-6 && q.abs() < 1e-6, "argmax ({p}, {q})");
        assert!(v.abs() < 1e-10);
    }

    #[test]
    fn maximize_corner_under_constraint() {
        let iv = Interval::new(0.0, 1.0).unwrap();
        let ((p, q), v) = maximize_2d(|x, y| x + y, (iv, iv), |x, y| x <= y, &cfg());
        assert!((v - 2.0).abs() < 1e-9, "max {v}");
        assert!((p - 1.0).abs() < 1e-9 && (q - 1.0).abs() < 1e-9);
    }

    #[test]
    fn maximize_product_on_slice() {
        // max of p*q on p + q <= 2 inside [0,2]^2; Lagrange gives (1,1) -> 1,
        // cross-checked by the brute grid below.
        let iv = Interval::new(0.0, 2.0).unwrap();
        let mut brute = f64::NEG_INFINITY;
        for i in 0..=400 {
            for j in 0..=400 {
                let (x, y) = (i as f64 / 200.0, j as f64 / 200.0);
                if x + y <= 2.0 {
                    brute = brute.max(x * y);
                }
            }
        }
        let (_, v) = maximize_2d(|x, y| x * y, (iv, iv), |x, y| x + y <= 2.0, &cfg());
        assert!((v - 1.0).abs() < 1e-6, "max {v} (brute {brute})");
        assert!(v + 1e-9 >= brute);
    }

    #[test]
    fn maximize_infeasible_sentinel() {
        let iv = Interval::new(0.0, 1.0).unwrap();
        let (_, v) = maximize_2d(|x, y| x + y, (iv, iv), |_, _| false, &cfg());
        assert_eq!(v, f64::NEG_INFINITY);
    }

    #[test]
    fn simplex_grid_points_are_distributions() {
        for point in simplex_points::<f64>(4, 7) {
            assert!(point.iter().all(|&p| p >= 0.0));
            let s: f64 = point.iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
        assert_eq!(simplex_points::<f64>(2, 64).len(), 65);
    }

    #[test]
    fn simplex_entropy_max_is_uniform() {
        let ent = |p: &[f64]| -> f64 {
            p.iter().map(|&x| if x > 0.0 { -x * x.ln() } else { 0.0 }).sum()
        };
        let grid = SimplexGrid::new(2, 64).unwrap();
        let (arg, v) = search_simplex(ent, grid, &cfg(), SearchMode::Max);
        assert!((arg[0] - 0.5).abs() < 1e-3);
        assert!((v - std::f64::consts::LN_2).abs() < 1e-6);
    }

    #[test]
    fn simplex_kl_min_is_target() {
        let target = [0.3, 0.7];
        let kl = |p: &[f64]| -> f64 {
            p.iter()
                .zip(target.iter())
                .map(|(&a, &b)| if a > 0.0 { a * (a / b).ln() } else { 0.0 })
                .sum()
        };
        let grid = SimplexGrid::new(2, 64).unwrap();
        let (arg, v) = search_simplex(kl, grid, &cfg(), SearchMode::Min);
        assert!((arg[0] - 0.3).abs() < 2e-3, "argmin {arg:?}");
        assert!(v < 1e-5, "min {v}");
    }

    #[test]
    fn simplex_linear_min_on_face() {
        let grid = SimplexGrid::new(3, 16).unwrap();
        let (arg, v) = search_simplex(|p: &[f64]| p[0], grid, &cfg(), SearchMode::Min);
        assert!(v.abs() < 1e-12);
        assert!(arg[0].abs() < 1e-12);
    }

    #[test]
    fn deterministic_repeat() {
        let iv = Interval::new(-3.0, 7.0).unwrap();
        let f = |x: f64| (x * 1.3).sin() + 0.1 * x * x;
        let a = minimize_1d(f, iv, &cfg()).unwrap();
        let b = minimize_1d(f, iv, &cfg()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn f32_instantiation_works() {
        let iv = Interval::<f32>::new(0.0, 5.0).unwrap();
        let cfg = OptConfig::<f32> {
            tol: 1e-4,
            boundary_margin: 1e-6,
            ..OptConfig::default()
        };
        let (x, _) = minimize_1d(|x| (x - 2.0) * (x - 2.0), iv, &cfg).unwrap();
        assert!((x - 2.0).abs() < 1e-2);
    }

    proptest! {
        // Against a golden-section reference with 10x the budget on random
        // convex quadratics, the incumbent must land within 10*tol.
        #[test]
        fn convex_matches_golden_reference(
            center in -5.0f64..5.0,
            scale in 0.1f64..10.0,
            lo in -10.0f64..-6.0,
            hi in 6.0f64..10.0,
        ) {
            let f = move |x: f64| scale * (x - center) * (x - center);
            let cfg = cfg();
            let iv = Interval::new(lo, hi).unwrap();
            let (_, got) = minimize_1d(f, iv, &cfg).unwrap();
            let (_, reference) = golden_min(&f, lo, hi, cfg.tol / 10.0);
            prop_assert!(got <= reference + 10.0 * cfg.tol,
                "got {got}, reference {reference}");
        }

        // Incumbent objective never worsens as the refinement budget grows
        // (checked on convex objectives, where the terminal polish bracket
        // always contains the minimizer).
        #[test]
        fn refinement_monotone(rounds in 0usize..6, seedx in -2.0f64..2.0, w in 0.1f64..4.0) {
            let f = move |x: f64| w * (x - seedx) * (x - seedx) + (x - seedx).abs();
            let iv = Interval::new(-3.0, 3.0).unwrap();
            let base = OptConfig { refine_rounds: rounds, ..cfg() };
            let more = OptConfig { refine_rounds: rounds + 1, ..cfg() };
            let (_, v0) = minimize_1d(f, iv, &base).unwrap();
            let (_, v1) = minimize_1d(f, iv, &more).unwrap();
            prop_assert!(v1 <= v0 + 1e-6, "v1 {v1} > v0 {v0}");
        }
    }
}
