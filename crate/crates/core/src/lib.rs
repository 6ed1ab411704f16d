//! Spiking reservoir computing with leaky integrate-and-fire neurons.
//!
//! The pipeline is: generate a chaotic benchmark series ([`timeseries`]),
//! encode it one-hot onto input neurons ([`encoding`]), drive a spiking
//! network ([`topology`], [`engine`], [`neuron`]), collect per-window spike
//! counts, and fit a linear readout by pseudoinverse ([`readout`]).
//! [`metalearn`] searches over network structure by simulated annealing and
//! [`experiment`] wires everything to JSON configs and on-disk artifacts.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the fixed-point
//! neuron path is integer-exact. The `*64` aliases below are the `f64`
//! instantiations used by the experiment runner.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod encoding;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod metalearn;
pub mod neuron;
pub mod pipeline;
pub mod readout;
pub mod scalar;
pub mod timeseries;
pub mod topology;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use topology::{Edge, EdgeClass, ReservoirNetwork, Synapse};

pub type TimeSeries64 = timeseries::TimeSeries<f64>;
pub type TimeSeries32 = timeseries::TimeSeries<f32>;
pub type StateMatrix64 = engine::StateMatrix<f64>;
pub type StateMatrix32 = engine::StateMatrix<f32>;
pub type ReadoutModel64 = readout::ReadoutModel<f64>;
pub type ReadoutModel32 = readout::ReadoutModel<f32>;
pub type ContinuousLifParams64 = neuron::ContinuousLifParams<f64>;
pub type ContinuousSimConfig64 = engine::ContinuousSimConfig<f64>;
pub type SimulationConfig64 = engine::SimulationConfig<f64>;
pub type EncodingConfig64 = encoding::EncodingConfig<f64>;

pub type EvalPipeline64 = pipeline::EvalPipeline<f64>;
