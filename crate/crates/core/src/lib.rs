//! Training mathematics for DETR-style detectors trained with dense one-to-one
//! matching and a matchability-aware classification loss.
//!
//! The numeric core ([`geometry`], [`losses`], [`schedule`], [`matching`]) is
//! generic over [`Real`] so it runs in `f32` or `f64`; the data-handling layers
//! ([`densify`], [`simharness`], [`toytrain`], [`cli`]) work in `f64`.

// `!(x > 0)` style checks are there to reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod densify;
pub mod error;
pub mod geometry;
pub mod losses;
pub mod matching;
pub mod scalar;
pub mod schedule;
pub mod simharness;
pub mod toytrain;

pub use error::{Error, Result};
pub use scalar::Real;

pub type BBox64 = geometry::BBox<f64>;
pub type BBox32 = geometry::BBox<f32>;
pub type Target64 = matching::Target<f64>;
pub type Prediction64 = matching::Prediction<f64>;
pub type LossParams64 = losses::LossParams<f64>;
pub type CostWeights64 = matching::CostWeights<f64>;
pub type ScheduleConfig64 = schedule::ScheduleConfig<f64>;
