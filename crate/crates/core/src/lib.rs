//! Simulation of a single-photon source feeding a reconfigurable linear
//! optical circuit, with detection and time-correlation analysis.
//!
//! The pipeline is: [`emitter`] produces photon emission times, [`netlist`]
//! and [`circuit`] turn a circuit description into a transition matrix,
//! [`detection`] routes photons to detectors and applies detector effects,
//! and [`analysis`] builds coincidence histograms and fringe visibilities.
//! [`experiment`] wires these together from a TOML config and [`export`]
//! writes the results.

pub mod analysis;
pub mod circuit;
pub mod detection;
pub mod emitter;
pub mod experiment;
pub mod export;
pub mod netlist;
pub mod rng;

pub use analysis::{cross_correlate, CorrelationHistogram, FringeResult, Normalization};
pub use circuit::{chip_unitary, output_distribution, OutputDistribution, TransitionMatrix};
pub use detection::{propagate, ChannelParams, DetectorParams, DetectorRecord};
pub use emitter::{emit_stream, EmissionStream, EmitterParams};
pub use experiment::{ExperimentConfig, ExperimentError};
pub use netlist::{elaborate, parse_netlist, CircuitSpec, ParamBinding};
