//! Error exponents for channels with state known non-causally at the encoder.
//!
//! Two channel families are covered:
//!
//! * the Gaussian dirty-paper channel, where random-coding, typical-random-code
//!   and expurgated exponents reduce to nested scalar optimizations over
//!   correlation and Chernoff-surrogate variables ([`dpc`]);
//! * finite-alphabet channels with encoder side information, where the same
//!   three exponents are information-measure optimization problems over
//!   probability simplices ([`gp`]).
//!
//! A Monte Carlo simulator of the variable-rate random-binning scheme with the
//! penalized maximum-mutual-information decoder ([`gpsim`]) provides a
//! small-blocklength cross-check of the finite-alphabet exponents.
//!
//! Core numerics are generic over the scalar type through [`scalar::Scalar`]
//! (any `num_traits::Float` with a few extras); `f64` aliases for the main
//! types live at the crate root. All rates and exponents are in nats.

pub mod curves;
pub mod dpc;
mod error;
pub mod gp;
pub mod gpsim;
pub mod info;
pub mod numkit;
pub mod scalar;

pub use error::{Error, Result};

/// `f64` instantiations of the generic core types.
pub type Interval64 = numkit::Interval<f64>;
pub type OptConfig64 = numkit::OptConfig<f64>;
pub type Joint64 = info::JointDistribution<f64>;
pub type Conditional64 = info::Conditional<f64>;
pub type DpcChannel64 = dpc::DpcChannel<f64>;
pub type DpcDesign64 = dpc::DpcDesign<f64>;
pub type GpChannel64 = gp::GpChannel<f64>;
pub type GpDesign64 = gp::GpDesign<f64>;
pub type RateNats64 = gp::RateNats<f64>;
