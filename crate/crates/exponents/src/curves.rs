//! Rate curves and parameter sweeps over the exponent computations.
//!
//! Grid points are independent; they are evaluated in parallel and reduced
//! in index order, so results do not depend on scheduling.

use crate::dpc::{
    self, DpcChannel, DpcDesign, DpcExponents, ExponentKind, Interference, OptimizedExponent,
};
use crate::error::Result;
use crate::gp::{self, GpChannel, GpGrids, RateNats};
use crate::scalar::Scalar;
use rayon::prelude::*;

/// How the dirty-paper design is chosen at each grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DesignPolicy<T> {
    Fixed(DpcDesign<T>),
    Optimized(Interference),
}

/// Evenly spaced grid, inclusive of both ends (within half a step).
pub fn rate_grid<T: Scalar>(start: T, stop: T, step: T) -> Vec<T> {
    let n = ((stop - start) / step)
        .round()
        .to_usize()
        .unwrap_or(0);
    (0..=n).map(|i| start + step * T::from_usize(i).unwrap()).collect()
}

/// One rate point of a dirty-paper curve: unclamped exponents and, when the
/// design is optimized, the per-kind maximizers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpcCurvePoint<T> {
    pub rate: T,
    pub exponents: DpcExponents<T>,
    pub optimizers: Option<[OptimizedExponent<T>; 3]>,
}

pub fn dpc_curve<T: Scalar>(
    ch: &DpcChannel<T>,
    rates: &[T],
    policy: DesignPolicy<T>,
) -> Vec<DpcCurvePoint<T>> {
    rates
        .par_iter()
        .map(|&rate| match policy {
            DesignPolicy::Fixed(design) => DpcCurvePoint {
                rate,
                exponents: dpc::dpc_exponents_all(rate, ch, &design),
                optimizers: None,
            },
            DesignPolicy::Optimized(interference) => {
                let opt = dpc::dpc_optimized_all(rate, ch, interference);
                DpcCurvePoint {
                    rate,
                    exponents: DpcExponents {
                        rc: opt[0].value,
                        trc: opt[1].value,
                        ex: opt[2].value,
                    },
                    optimizers: Some(opt),
                }
            }
        })
        .collect()
}

/// Zero-rate (or fixed-rate) exponents as a function of `alpha` with
/// `q_hat` pinned to the interference variance.
pub fn dpc_alpha_sweep<T: Scalar>(
    ch: &DpcChannel<T>,
    rate: T,
    alphas: &[T],
) -> Vec<(T, DpcExponents<T>)> {
    alphas
        .par_iter()
        .map(|&alpha| {
            let design = DpcDesign {
                alpha,
                q_hat: ch.interference,
            };
            (alpha, dpc::dpc_exponents_all(rate, ch, &design))
        })
        .collect()
}

/// Optimized exponents as a function of the interference variance.
pub fn dpc_q_sweep<T: Scalar>(
    power: T,
    noise_var: T,
    rate: T,
    interferences: &[T],
) -> Result<Vec<(T, [OptimizedExponent<T>; 3])>> {
    interferences
        .par_iter()
        .map(|&q| {
            let ch = DpcChannel::new(power, q, noise_var)?;
            Ok((q, dpc::dpc_optimized_all(rate, &ch, Interference::Spherical)))
        })
        .collect()
}

/// Random-coding exponents of a side-information channel over a rate grid.
pub fn gp_rc_curve<T: Scalar>(ch: &GpChannel<T>, rates: &[T], grids: &GpGrids) -> Result<Vec<T>> {
    rates
        .par_iter()
        .map(|&r| gp::gp_random_coding_exponent(RateNats::new(r)?, ch, grids))
        .collect()
}

/// TRC/expurgated lower bounds over a rate grid (table shared across rates).
pub fn gp_pairwise_curve<T: Scalar>(
    ch: &GpChannel<T>,
    rates: &[T],
    grids: &GpGrids,
) -> Result<Vec<(T, T)>> {
    gp::gp_pairwise_curve(rates, ch, grids)
}

/// Zero-rate random-coding exponent of the binary clean/stuck channel as a
/// function of the clean-state probability.
pub fn gp_p_sweep<T: Scalar>(
    ps: &[T],
    rate: T,
    grids: &GpGrids,
    include_pairwise: bool,
) -> Result<Vec<(T, T, Option<(T, T)>)>> {
    ps.par_iter()
        .map(|&p| {
            let ch = GpChannel::binary_clean_or_stuck(p)?;
            let rc = gp::gp_random_coding_exponent(RateNats::new(rate)?, &ch, grids)?;
            let pair = if include_pairwise {
                Some(gp::gp_pairwise_curve(&[rate], &ch, grids)?[0])
            } else {
                None
            };
            Ok((p, rc, pair))
        })
        .collect()
}

/// Exponent kinds in curve-column order.
pub const KIND_ORDER: [ExponentKind; 3] = [
    ExponentKind::RandomCoding,
    ExponentKind::Trc,
    ExponentKind::Expurgated,
];
