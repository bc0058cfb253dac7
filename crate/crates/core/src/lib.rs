//! Rotation-equivariant semantic segmentation of LiDAR scans on the sphere.
//!
//! A scan is projected to an equiangular grid on S², lifted to SO(3) by a
//! spherical correlation, processed by SO(3) convolutions in the spectral
//! domain, and collapsed back to per-cell class logits.

pub mod cli;
pub mod data;
pub mod error;
pub mod harmonics;
pub mod linalg;
pub mod loss_metrics;
pub mod nn;
pub mod projection;
pub mod spectral_ops;
pub mod sphere;

pub use error::{Error, Result};
