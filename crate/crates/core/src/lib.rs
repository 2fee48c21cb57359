//! Decoupling, restoration and simulation of objects in Gaussian-splat scenes.

pub mod carve;
pub mod error;
pub mod knn;
pub mod math;
pub mod meshing;
pub mod metrics;
pub mod mpm;
pub mod poisson;
mod par;
pub mod pipeline;
pub mod raster;
pub mod sh;
pub mod splat;
pub mod synth;
pub mod tsdf;

pub use error::{Error, Result};
