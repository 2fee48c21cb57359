//! Isometric kernels for restored objects and multi-view carving of their
//! opacities with the unilateral negative cross-entropy loss.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::knn::KdTree;
use crate::math::Vec3;
use crate::par;
use crate::raster::{RasterConfig, RasterImage, Splats};
use crate::splat::{rgb_to_sh_dc, Camera, GaussianKernel};

/// Initial opacity of carved kernels.
pub const INITIAL_OPACITY: f64 = 0.1;
const A_MAX: f64 = 1.0 - 1e-7;

/// Radius of the sphere with the volume of a `c`-sized cube.
pub fn isometric_scale(cell: f64) -> f64 {
    cell * (3.0 / (4.0 * std::f64::consts::PI)).cbrt()
}

/// One isotropic kernel per point, sized to the Poisson cell.
pub fn isometric_init(points: &[Vec3], cell: f64) -> Vec<GaussianKernel> {
    let s = isometric_scale(cell);
    points
        .iter()
        .map(|p| GaussianKernel::isotropic(*p, s, INITIAL_OPACITY))
        .collect()
}

/// `exp(-d^2 / (2 h^2))`.
pub fn neighbor_weight(d: f64, h: f64) -> f64 {
    if h > 0.0 {
        (-d * d / (2.0 * h * h)).exp()
    } else {
        1.0
    }
}

/// DC coefficients for `interior` from the `k` nearest colored proxies,
/// Gaussian-weighted with bandwidth equal to the mean neighbor distance.
pub fn interpolate_interior_sh(
    interior: &[Vec3],
    proxy: &[Vec3],
    proxy_colors: &[[f64; 3]],
    k: usize,
) -> Result<Vec<[f64; 3]>> {
    if proxy.is_empty() || proxy.len() != proxy_colors.len() {
        return Err(Error::invalid("need a non-empty proxy set with one color per point"));
    }
    let tree = KdTree::new(proxy);
    Ok(par::map_slice(interior, |p| {
        let nn = tree.knn(p, k.max(1));
        let dists: Vec<f64> = nn.iter().map(|n| n.dist2.sqrt()).collect();
        let h = dists.iter().sum::<f64>() / dists.len() as f64;
        let mut acc = [0.0; 3];
        let mut wsum = 0.0;
        for (n, d) in nn.iter().zip(&dists) {
            let w = neighbor_weight(*d, h);
            for c in 0..3 {
                acc[c] += w * proxy_colors[n.index][c];
            }
            wsum += w;
        }
        acc.map(|a| rgb_to_sh_dc(a / wsum))
    }))
}

/// Sets each kernel's DC term and zeroes every higher coefficient.
pub fn set_view_independent_color(kernels: &mut [GaussianKernel], dc: &[[f64; 3]]) {
    for (k, d) in kernels.iter_mut().zip(dc) {
        k.sh = [[0.0; crate::splat::SH_COEFFS]; 3];
        for c in 0..3 {
            k.sh[c][0] = d[c];
        }
    }
}

fn check_dims(a: &RasterImage, m: &RasterImage) -> Result<()> {
    if a.width != m.width || a.height != m.height {
        return Err(Error::invalid(format!(
            "silhouette is {}x{} but mask is {}x{}",
            a.width, a.height, m.width, m.height
        )));
    }
    Ok(())
}

/// Mean over pixels of `-(1 - M) log(1 - A)`.
pub fn unce_loss(silhouette: &RasterImage, mask: &RasterImage) -> Result<f64> {
    check_dims(silhouette, mask)?;
    let n = silhouette.width * silhouette.height;
    let sum: f64 = (0..n)
        .map(|i| {
            let a = silhouette.values[i * silhouette.channels].min(A_MAX);
            -(1.0 - mask.values[i * mask.channels]) * (1.0 - a).ln()
        })
        .sum();
    Ok(sum / n as f64)
}

/// Loss image `A` and the gradient of the pixel-summed loss.
fn unce_sum_gradient(splats: &Splats, mask: &RasterImage) -> (RasterImage, Vec<f64>) {
    splats.opacity_gradient_where(|x, y| mask.get(x, y, 0) < 1.0, |x, y, a| {
        let m = mask.get(x, y, 0);
        if m >= 1.0 {
            0.0
        } else {
            (1.0 - m) / (1.0 - a.min(A_MAX))
        }
    })
}

/// Gradient of [`unce_loss`] with respect to every kernel opacity.
pub fn unce_gradient_opacity(
    kernels: &[GaussianKernel],
    camera: &Camera,
    mask: &RasterImage,
    cfg: &RasterConfig,
) -> Result<Vec<f64>> {
    if mask.width != camera.width || mask.height != camera.height {
        return Err(Error::invalid("mask size differs from the camera image"));
    }
    let splats = Splats::new(kernels, camera, cfg);
    let (_, mut g) = unce_sum_gradient(&splats, mask);
    let n = (camera.width * camera.height) as f64;
    g.iter_mut().for_each(|v| *v /= n);
    Ok(g)
}

#[derive(Clone, Debug)]
pub struct CarveView {
    pub camera: Camera,
    /// Ground-truth object mask; views without one are skipped.
    pub mask: Option<RasterImage>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CarveConfig {
    pub unce_weight: f64,
    /// Opacity learning rate applied to the pixel-summed gradient.
    pub step: f64,
    pub cull_threshold: f64,
    pub cull_every: usize,
    pub max_iters: usize,
    pub seed: u64,
    pub raster: RasterConfig,
}

impl Default for CarveConfig {
    fn default() -> Self {
        Self {
            unce_weight: 1e-4,
            step: 0.5,
            cull_threshold: 0.05,
            cull_every: 100,
            max_iters: 3000,
            seed: 0,
            raster: RasterConfig::default(),
        }
    }
}

impl CarveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.unce_weight > 0.0 && self.step > 0.0 && self.cull_threshold > 0.0) || self.cull_every == 0 {
            return Err(Error::invalid("carve weights, step, threshold and cull interval must be positive"));
        }
        if self.cull_threshold >= INITIAL_OPACITY {
            return Err(Error::invalid("cull threshold must be below the initial opacity"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct CarveLogEntry {
    pub iteration: usize,
    pub view: usize,
    pub loss: f64,
    pub kernels: usize,
}

#[derive(Clone, Debug, Default)]
pub struct CarveResult {
    pub kernels: Vec<GaussianKernel>,
    /// Indices into the input kernel list of the survivors.
    pub kept: Vec<usize>,
    pub log: Vec<CarveLogEntry>,
    /// Summed validation loss before carving and after every cull.
    pub validation: Vec<f64>,
}

/// Validation loss summed over every view that has a mask, rendered
/// without early termination.
pub fn validation_loss(kernels: &[GaussianKernel], views: &[CarveView], cfg: &RasterConfig) -> Result<f64> {
    let exact = RasterConfig {
        min_transmittance: 0.0,
        ..*cfg
    };
    let mut total = 0.0;
    for v in views {
        if let Some(m) = &v.mask {
            let a = Splats::new(kernels, &v.camera, &exact).silhouette_where(|x, y| m.get(x, y, 0) < 1.0);
            total += unce_loss(&a, m)?;
        }
    }
    Ok(total)
}

/// Gradient descent on opacities against random views, culling
/// low-opacity kernels on a fixed schedule.
pub fn carve(kernels: Vec<GaussianKernel>, views: &[CarveView], cfg: &CarveConfig) -> Result<CarveResult> {
    cfg.validate()?;
    if views.len() < 3 {
        return Err(Error::invalid(format!("carving needs at least 3 views, got {}", views.len())));
    }
    for v in views {
        if let Some(m) = &v.mask {
            if m.width != v.camera.width || m.height != v.camera.height {
                return Err(Error::invalid("mask size differs from its camera"));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut kept: Vec<usize> = (0..kernels.len()).collect();
    let mut kernels = kernels;
    let mut result = CarveResult {
        validation: vec![validation_loss(&kernels, views, &cfg.raster)?],
        ..Default::default()
    };
    let mut cache: Vec<Option<Splats>> = vec![None; views.len()];
    let rate = cfg.step * cfg.unce_weight;
    for it in 1..=cfg.max_iters {
        let vi = rng.gen_range(0..views.len());
        if let Some(mask) = &views[vi].mask {
            let splats = cache[vi].get_or_insert_with(|| Splats::new(&kernels, &views[vi].camera, &cfg.raster));
            for (o, k) in splats.opacity.iter_mut().zip(&kernels) {
                *o = k.opacity;
            }
            let (a, grad) = unce_sum_gradient(splats, mask);
            for (k, g) in kernels.iter_mut().zip(&grad) {
                if *g != 0.0 {
                    k.opacity = (k.opacity - rate * g).clamp(0.0, 1.0);
                }
            }
            result.log.push(CarveLogEntry {
                iteration: it,
                view: vi,
                loss: unce_loss(&a, mask)?,
                kernels: kernels.len(),
            });
        }
        if it % cfg.cull_every == 0 {
            let before = kernels.len();
            let mut next = Vec::with_capacity(before);
            let mut next_kept = Vec::with_capacity(before);
            for (k, id) in kernels.into_iter().zip(kept) {
                if k.opacity > cfg.cull_threshold {
                    next.push(k);
                    next_kept.push(id);
                }
            }
            kernels = next;
            kept = next_kept;
            if kernels.is_empty() {
                return Err(Error::AllCulled);
            }
            if kernels.len() != before {
                cache.iter_mut().for_each(|c| *c = None);
            }
            result.validation.push(validation_loss(&kernels, views, &cfg.raster)?);
            log::debug!("carve iteration {it}: {} kernels, validation {:.4e}", kernels.len(), result.validation.last().unwrap());
        }
    }
    result.kernels = kernels;
    result.kept = kept;
    Ok(result)
}

pub fn write_carve_log<W: Write>(mut w: W, log: &[CarveLogEntry]) -> Result<()> {
    writeln!(w, "iteration,view,loss,kernels")?;
    for e in log {
        writeln!(w, "{},{},{:.9e},{}", e.iteration, e.view, e.loss, e.kernels)?;
    }
    Ok(())
}
