//! Two-layer networks with non-negative output weights: how small training
//! error alone pins down the outer norm ‖a‖₁, and everything needed to
//! check that numerically — trainers over random features, ε-nets of
//! Euclidean balls, distribution-constant estimators, closed-form bound
//! formulas, the fat-shattering generalization machinery, the signed
//! cancellation counterexample, and seeded Monte-Carlo campaigns tying it
//! together.
//!
//! The mathematical core (activations, networks, the counterexample) is
//! generic over the scalar via num-traits; estimators and campaigns run on
//! `f64`.

// negated comparisons are the NaN-rejecting validation idiom here; index
// loops over symmetric matrices read better than iterator chains
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]
#![allow(clippy::manual_is_multiple_of)]

pub mod activations;
pub mod bounds;
pub mod counterexample;
pub mod data;
pub mod epsnet;
pub mod error;
pub mod experiments;
pub mod network;
pub mod trainer;
pub mod util;

pub use activations::ActivationKind;
pub use error::{Error, Result};
pub use network::TwoLayerNet;

/// The concrete network type every estimator and trainer produces.
pub type Net = TwoLayerNet<f64>;
/// Single-precision instantiation of the generic core.
pub type Net32 = TwoLayerNet<f32>;
