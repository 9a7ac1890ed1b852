//! Commuter mode choice, charging demand and grid capacity scenarios.

pub mod api;
pub mod config;
pub mod demo;
pub mod eligibility;
pub mod energy;
pub mod grid;
pub mod mode;
pub mod pipeline;
pub mod population;
pub mod report;
mod rng;
pub mod sampler;

pub use mode::{Category, Mode};
