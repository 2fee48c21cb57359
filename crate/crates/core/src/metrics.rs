//! Geometric and photometric evaluation metrics.

use crate::error::{Error, Result};
use crate::knn::KdTree;
use crate::math::Vec3;
use crate::par;
use crate::raster::RasterImage;

/// PSNR reported for identical images.
pub const PSNR_IDENTICAL: f64 = 99.0;

fn mean_nearest_sq(from: &[Vec3], tree: &KdTree) -> f64 {
    let d = par::map_slice(from, |p| tree.nearest(p).map_or(0.0, |n| n.dist2));
    d.iter().sum::<f64>() / from.len() as f64
}

/// Symmetric Chamfer distance: mean squared nearest-neighbor distance from
/// `a` to `b` plus the same from `b` to `a`.
pub fn chamfer_distance(a: &[Vec3], b: &[Vec3]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("Chamfer distance needs two non-empty point sets"));
    }
    Ok(mean_nearest_sq(a, &KdTree::new(b)) + mean_nearest_sq(b, &KdTree::new(a)))
}

/// `10 log10(1 / MSE)` over all channels; [`PSNR_IDENTICAL`] when the images match.
pub fn psnr(a: &RasterImage, b: &RasterImage) -> Result<f64> {
    if !a.same_shape(b) {
        return Err(Error::invalid(format!(
            "PSNR of {}x{}x{} and {}x{}x{} images",
            a.width, a.height, a.channels, b.width, b.height, b.channels
        )));
    }
    if a.values.is_empty() {
        return Err(Error::invalid("PSNR of empty images"));
    }
    let mse = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.values.len() as f64;
    if mse == 0.0 {
        return Ok(PSNR_IDENTICAL);
    }
    Ok((10.0 * (1.0 / mse).log10()).min(PSNR_IDENTICAL))
}

/// `n` points spread over a sphere by the golden-angle spiral.
pub fn fibonacci_sphere(center: &Vec3, radius: f64, n: usize) -> Vec<Vec3> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let a = golden * i as f64;
            center + Vec3::new(r * a.cos(), r * a.sin(), z) * radius
        })
        .collect()
}
