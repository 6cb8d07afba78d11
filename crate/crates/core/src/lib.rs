//! Hybrid MPM fluid-solid simulation with a learned pressure warm start.
//!
//! The physical path runs APIC transfers on a staggered grid and solves a
//! symmetric four-block pressure system (solid, fluid, slip-boundary and
//! interface unknowns). The learned path encodes padded pressure volumes,
//! rolls a ConvLSTM forward in latent space and decodes a pressure guess,
//! which an iterative solver then refines to the physical tolerance.

pub mod dataset;
pub mod error;
pub mod fields;
pub mod grid;
pub mod hybrid;
pub mod metrics;
pub mod mpm;
pub mod nn;
pub mod normalize;
pub mod particles;
pub mod pressure;
pub mod solvers;
pub mod sparse;

pub use error::{Error, Result};
