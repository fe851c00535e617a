//! Weighting and estimation engine for stratified multistage household surveys.
//!
//! The pipeline mirrors how a cross-sectional survey weight is built in practice:
//!
//! 1. [`frame`] holds the population frame (city, stratum, neighborhood, tract,
//!    household, woman) and can generate seeded synthetic populations.
//! 2. [`design`] turns stage counts into inclusion probabilities and base weights.
//! 3. [`adjust`] trims, rakes and scales the base weights, then corrects for
//!    item-section nonresponse with a weighted logit propensity.
//! 4. [`pool`] combines a refreshment sample with the retained panel sample.
//! 5. [`estimate`] produces design-based prevalences with linearized variances.
//! 6. [`sim`] draws samples from synthetic frames and checks the whole chain
//!    against known truth, by Monte Carlo or exact enumeration.

// `!(x > 0.0)` style checks are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adjust;
pub mod design;
pub mod domain;
pub mod error;
pub mod estimate;
pub mod frame;
pub mod glm;
pub mod pool;
pub mod rng;
pub mod sim;
pub mod stats;

pub use error::{Error, Result};
