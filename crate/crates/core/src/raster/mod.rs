//! CPU front-to-back alpha-blending splatter.
//!
//! Kernels are projected with the EWA affine approximation, binned into
//! square tiles, sorted by view depth (ties by kernel index) and blended
//! per pixel as `q(p) = sum q_i a_i prod_{j<i} (1 - a_j)`.

mod blend;
mod image;
mod project;
mod render;

pub use blend::{blend_quantity, Blended, Splats};
pub use image::{dilate_mask, read_float_raster, read_ppm, write_float_raster, write_pgm, write_ppm, RasterImage};
pub use project::{project_kernel, Projected};
pub use render::{kernel_colors, 
    render_color, render_opacity_silhouette, render_projected_mask, render_unbiased_depth,
    view_normal_and_distance,
};

/// Rasterizer constants. The defaults follow the usual splatting choices.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RasterConfig {
    /// Tile edge in pixels.
    pub tile: usize,
    /// Blending stops once transmittance falls below this (0 disables).
    pub min_transmittance: f64,
    /// Added to the diagonal of every projected covariance, in px^2.
    pub cov_floor: f64,
    /// Kernels at or behind this view depth are skipped.
    pub near: f64,
    /// Footprint cutoff in standard deviations.
    pub cutoff_sigma: f64,
}

impl Default for RasterConfig {
    fn default() -> Self {
        Self {
            tile: 16,
            min_transmittance: 1e-4,
            cov_floor: 0.3,
            near: 1e-4,
            cutoff_sigma: 3.0,
        }
    }
}
