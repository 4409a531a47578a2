//! Finite-alphabet probability tensors and information measures.
//!
//! [`JointDistribution`] is a flat tensor over a declared tuple of labeled
//! axes; marginalization, extension by a conditional law, entropies, mutual
//! informations and divergences are all computed with the `0 ln 0 = 0`
//! convention. Divergences return `+inf` on absolute-continuity failure.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Axis labels for the random variables appearing in this crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    S,
    SPrime,
    U,
    UPrime,
    X,
    Y,
}

impl std::fmt::Display for Axis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Axis::S => "s",
            Axis::SPrime => "s'",
            Axis::U => "u",
            Axis::UPrime => "u'",
            Axis::X => "x",
            Axis::Y => "y",
        };
        f.write_str(name)
    }
}

const SUM_TOL: f64 = 1e-12;

/// Probability tensor over an ordered tuple of finite alphabets.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution<T> {
    axes: Vec<Axis>,
    sizes: Vec<usize>,
    probs: Vec<T>,
}

impl<T: Scalar> JointDistribution<T> {
    /// Build from row-major probabilities (last axis fastest).
    pub fn new(axes: &[(Axis, usize)], probs: Vec<T>) -> Result<Self> {
        let mut seen = Vec::new();
        for &(a, n) in axes {
            if n == 0 {
                return Err(Error::arg(format!("axis {a} has empty alphabet")));
            }
            if seen.contains(&a) {
                return Err(Error::arg(format!("duplicate axis {a}")));
            }
            seen.push(a);
        }
        let cells: usize = axes.iter().map(|&(_, n)| n).product();
        if probs.len() != cells {
            return Err(Error::arg(format!(
                "expected {cells} probabilities, got {}",
                probs.len()
            )));
        }
        let mut sum = T::zero();
        for &p in &probs {
            if !p.is_finite() || p < -T::from_f64(SUM_TOL).unwrap() {
                return Err(Error::arg(format!("invalid probability entry {p}")));
            }
            sum = sum + p;
        }
        if (sum - T::one()).abs() > T::from_f64(SUM_TOL).unwrap() {
            return Err(Error::arg(format!("probabilities sum to {sum}, not 1")));
        }
        let probs = probs
            .into_iter()
            .map(|p| if p < T::zero() { T::zero() } else { p })
            .collect();
        Ok(JointDistribution {
            axes: axes.iter().map(|&(a, _)| a).collect(),
            sizes: axes.iter().map(|&(_, n)| n).collect(),
            probs,
        })
    }

    /// Tabulate from a function of the multi-index.
    pub fn from_fn(axes: &[(Axis, usize)], f: impl Fn(&[usize]) -> T) -> Result<Self> {
        let sizes: Vec<usize> = axes.iter().map(|&(_, n)| n).collect();
        let cells: usize = sizes.iter().product();
        let mut probs = Vec::with_capacity(cells);
        let mut idx = vec![0usize; sizes.len()];
        for _ in 0..cells {
            probs.push(f(&idx));
            increment(&mut idx, &sizes);
        }
        Self::new(axes, probs)
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn axis_size(&self, axis: Axis) -> Result<usize> {
        self.axis_pos(axis).map(|i| self.sizes[i])
    }

    fn axis_pos(&self, axis: Axis) -> Result<usize> {
        self.axes
            .iter()
            .position(|&a| a == axis)
            .ok_or_else(|| Error::arg(format!("axis {axis} not present")))
    }

    /// Marginal onto `keep`, in the order given.
    pub fn marginal(&self, keep: &[Axis]) -> Result<JointDistribution<T>> {
        let positions: Vec<usize> = keep
            .iter()
            .map(|&a| self.axis_pos(a))
            .collect::<Result<_>>()?;
        let out_sizes: Vec<usize> = positions.iter().map(|&p| self.sizes[p]).collect();
        let out_cells: usize = out_sizes.iter().product();
        let mut out = vec![T::zero(); out_cells];
        let mut idx = vec![0usize; self.sizes.len()];
        for &p in &self.probs {
            let mut o = 0usize;
            for (k, &pos) in positions.iter().enumerate() {
                o = o * out_sizes[k] + idx[pos];
            }
            out[o] = out[o] + p;
            increment(&mut idx, &self.sizes);
        }
        let axes: Vec<(Axis, usize)> = keep.iter().cloned().zip(out_sizes).collect();
        JointDistribution::new(&axes, normalize_tiny(out))
    }

    /// Append an axis distributed according to `cond`, whose conditioning
    /// axes must all be present.
    pub fn extend(&self, cond: &Conditional<T>) -> Result<JointDistribution<T>> {
        let positions: Vec<usize> = cond
            .given
            .iter()
            .map(|&(a, n)| {
                let p = self.axis_pos(a)?;
                if self.sizes[p] != n {
                    return Err(Error::arg(format!("axis {a} size mismatch")));
                }
                Ok(p)
            })
            .collect::<Result<_>>()?;
        if self.axes.contains(&cond.out.0) {
            return Err(Error::arg(format!("axis {} already present", cond.out.0)));
        }
        let out_n = cond.out.1;
        let mut probs = Vec::with_capacity(self.probs.len() * out_n);
        let mut idx = vec![0usize; self.sizes.len()];
        for &p in &self.probs {
            let mut row = 0usize;
            for (k, &pos) in positions.iter().enumerate() {
                row = row * cond.given[k].1 + idx[pos];
            }
            let r = cond.row_at(row);
            for &c in r {
                probs.push(p * c);
            }
            increment(&mut idx, &self.sizes);
        }
        let mut axes: Vec<(Axis, usize)> = self
            .axes
            .iter()
            .cloned()
            .zip(self.sizes.iter().cloned())
            .collect();
        axes.push(cond.out);
        JointDistribution::new(&axes, probs)
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> T {
        let mut h = T::zero();
        for &p in &self.probs {
            if p > T::zero() {
                h = h - p * p.ln();
            }
        }
        h
    }

    /// Mutual information `I(A;B)` in nats.
    pub fn mutual_information(&self, a: Axis, b: Axis) -> Result<T> {
        let ab = self.marginal(&[a, b])?;
        let ha = ab.marginal(&[a])?.entropy();
        let hb = ab.marginal(&[b])?.entropy();
        Ok(ha + hb - ab.entropy())
    }

    /// Conditional mutual information `I(A;B|C)` in nats.
    pub fn conditional_mutual_information(&self, a: Axis, b: Axis, c: Axis) -> Result<T> {
        let abc = self.marginal(&[a, b, c])?;
        let hac = abc.marginal(&[a, c])?.entropy();
        let hbc = abc.marginal(&[b, c])?.entropy();
        let hc = abc.marginal(&[c])?.entropy();
        Ok(hac + hbc - abc.entropy() - hc)
    }

    /// `D(self || other)` over identical axes; `+inf` when `self` puts mass
    /// where `other` has none.
    pub fn kl_divergence(&self, other: &JointDistribution<T>) -> Result<T> {
        if self.axes != other.axes || self.sizes != other.sizes {
            return Err(Error::arg("KL divergence needs identical axes"));
        }
        let mut d = T::zero();
        for (&p, &q) in self.probs.iter().zip(other.probs.iter()) {
            if p > T::zero() {
                if q <= T::zero() {
                    return Ok(T::infinity());
                }
                d = d + p * (p / q).ln();
            }
        }
        Ok(d)
    }
}

fn increment(idx: &mut [usize], sizes: &[usize]) {
    for axis in (0..idx.len()).rev() {
        idx[axis] += 1;
        if idx[axis] < sizes[axis] {
            return;
        }
        idx[axis] = 0;
    }
}

fn normalize_tiny<T: Scalar>(mut v: Vec<T>) -> Vec<T> {
    for x in &mut v {
        if *x < T::zero() {
            *x = T::zero();
        }
    }
    v
}

/// Conditional law `out | given`, rows indexed row-major over the given
/// axes with the output symbol fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Conditional<T> {
    given: Vec<(Axis, usize)>,
    out: (Axis, usize),
    rows: Vec<T>,
}

impl<T: Scalar> Conditional<T> {
    pub fn new(given: &[(Axis, usize)], out: (Axis, usize), rows: Vec<T>) -> Result<Self> {
        let n_rows: usize = given.iter().map(|&(_, n)| n).product();
        if rows.len() != n_rows * out.1 {
            return Err(Error::arg(format!(
                "expected {} row entries, got {}",
                n_rows * out.1,
                rows.len()
            )));
        }
        for r in 0..n_rows {
            let row = &rows[r * out.1..(r + 1) * out.1];
            let mut sum = T::zero();
            for &p in row {
                if !p.is_finite() || p < -T::from_f64(SUM_TOL).unwrap() {
                    return Err(Error::arg(format!("invalid conditional entry {p}")));
                }
                sum = sum + p;
            }
            if (sum - T::one()).abs() > T::from_f64(1e-9).unwrap() {
                return Err(Error::arg(format!("conditional row {r} sums to {sum}")));
            }
        }
        Ok(Conditional {
            given: given.to_vec(),
            out,
            rows: normalize_tiny(rows),
        })
    }

    pub fn given(&self) -> &[(Axis, usize)] {
        &self.given
    }

    pub fn out(&self) -> (Axis, usize) {
        self.out
    }

    pub fn out_size(&self) -> usize {
        self.out.1
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len() / self.out.1
    }

    pub fn row_at(&self, row: usize) -> &[T] {
        &self.rows[row * self.out.1..(row + 1) * self.out.1]
    }

    /// Row for a multi-index over the given axes, in declaration order.
    pub fn row(&self, idx: &[usize]) -> &[T] {
        let mut r = 0usize;
        for (k, &(_, n)) in self.given.iter().enumerate() {
            debug_assert!(idx[k] < n);
            r = r * n + idx[k];
        }
        self.row_at(r)
    }

}

/// Weighted divergence `D(q || w | weighting)` between two conditional laws
/// with identical shapes; the weighting is a joint over the given axes.
pub fn conditional_kl<T: Scalar>(
    q: &Conditional<T>,
    w: &Conditional<T>,
    weighting: &JointDistribution<T>,
) -> Result<T> {
    if q.given.len() != w.given.len()
        || q.given
            .iter()
            .zip(w.given.iter())
            .any(|(&(_, a), &(_, b))| a != b)
        || q.out.1 != w.out.1
    {
        return Err(Error::arg("conditional shapes differ"));
    }
    let weight_axes: Vec<Axis> = q.given.iter().map(|&(a, _)| a).collect();
    let weights = weighting.marginal(&weight_axes)?;
    let mut d = T::zero();
    for (row, &wt) in weights.probs().iter().enumerate() {
        if wt <= T::zero() {
            continue;
        }
        let qr = q.row_at(row);
        let wr = w.row_at(row);
        for (&qp, &wp) in qr.iter().zip(wr.iter()) {
            if qp > T::zero() {
                if wp <= T::zero() {
                    return Ok(T::infinity());
                }
                d = d + wt * qp * (qp / wp).ln();
            }
        }
    }
    Ok(d)
}

/// Mutual information of a counts matrix (joint type of a sequence pair).
pub fn mi_from_counts<T: Scalar>(counts: &[usize], rows: usize, cols: usize, total: usize) -> T {
    debug_assert_eq!(counts.len(), rows * cols);
    debug_assert_eq!(counts.iter().sum::<usize>(), total);
    let n = T::from_usize(total).unwrap();
    let mut row_sum = vec![0usize; rows];
    let mut col_sum = vec![0usize; cols];
    for r in 0..rows {
        for c in 0..cols {
            row_sum[r] += counts[r * cols + c];
            col_sum[c] += counts[r * cols + c];
        }
    }
    let mut mi = T::zero();
    for r in 0..rows {
        for c in 0..cols {
            let k = counts[r * cols + c];
            if k > 0 {
                let p = T::from_usize(k).unwrap() / n;
                let pr = T::from_usize(row_sum[r]).unwrap() / n;
                let pc = T::from_usize(col_sum[c]).unwrap() / n;
                mi = mi + p * (p / (pr * pc)).ln();
            }
        }
    }
    if mi < T::zero() {
        T::zero()
    } else {
        mi
    }
}
