//! Pipeline engine for animal digital twins built from multi-rate sensor data.
//!
//! The crate covers the whole chain: merging sensor streams onto a common
//! grid ([`ingest`]), quality checking ([`quality`]), train/test splitting
//! ([`split`]), regression models ([`model`]), reports ([`report`]) and the
//! provenance-recording runner that executes a manifest of those steps
//! ([`runner`]). [`synth`] generates scenarios with planted ground truth.

pub mod components;
pub mod digest;
pub mod ingest;
pub mod model;
mod par;
pub mod quality;
pub mod report;
pub mod rng;
pub mod runner;
pub mod sensors;
pub mod split;
pub mod stats;
pub mod synth;
pub mod timeseries;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
