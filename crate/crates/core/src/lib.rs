//! Simulation and optimization toolkit for multi-element visible-light
//! communication: Lambertian channel modeling with wall reflections,
//! LED partitioning and SIR/SINR metrics, bulb design search, and a
//! round-based LOS association protocol simulator.

pub mod channel;
pub mod config;
pub mod error;
pub mod geometry;
pub mod metrics;
pub mod optimizer;
pub mod partition;
pub mod protocol;
pub mod rng;
pub mod vec;

pub use error::{Error, Result};
pub use vec::{Vec2, Vec3};
