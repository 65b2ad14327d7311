//! Estimation of the autocorrelation matrix of an IRS-cascaded channel from
//! scalar received-power measurements, and IRS reflection design from the
//! estimate.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod error;
pub mod estimator;
pub mod experiment;
pub mod measurement;
pub mod numerics;
pub mod reflection;
pub mod rng;
pub mod sdp;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/measurement.md")]
    mod measurement {}
    #[doc = include_str!("../../../book/src/estimation.md")]
    mod estimation {}
    #[doc = include_str!("../../../book/src/reflection.md")]
    mod reflection {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
