//! Closed-loop robustness analysis by density propagation and optimal transport.
//!
//! The numerics are generic over [`scalar::Real`] (`f32` or `f64`); the
//! aliases below fix the scalar to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod controller;
pub mod error;
pub mod harness;
pub mod liouville;
pub mod model;
pub mod sampling;
pub mod scalar;
pub mod transport;
pub mod trim;

pub use error::{Error, Result};

pub type State = model::LongitudinalState<f64>;
pub type Input = model::ControlInput<f64>;
pub type Params = model::AircraftParams<f64>;
pub type Tables = model::AeroTables<f64>;
pub type F16 = model::Plant<f64>;
pub type Sample = liouville::WeightedSample<f64>;
pub type Snapshot = liouville::EnsembleSnapshot<f64>;
pub type Distribution = transport::DiscreteDistribution<f64>;
pub type Plan = transport::TransportPlan<f64>;
pub type Domain = sampling::BoxDomain<f64>;
