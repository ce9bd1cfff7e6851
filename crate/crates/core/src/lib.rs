//! Particle-based skyrmion depinning dynamics.

pub mod bessel;
pub mod contour;
pub mod dataset;
pub mod dynamics;
pub mod error;
pub mod forces;
pub mod order;
pub mod params;
pub mod render;
pub mod report;
pub mod sweep;
pub mod trajio;
pub mod vec2;

pub use error::{Error, Result};

/// Recorded in every output's provenance block.
pub const CODE_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));
