use super::project::{project_kernel, Projected};
use super::{RasterConfig, RasterImage};
use crate::par;
use crate::splat::{Camera, GaussianKernel};

/// Kernels projected into one camera and binned into depth-sorted tiles.
///
/// Opacities live here rather than on the kernels so that optimizers can
/// change them without re-projecting.
#[derive(Clone, Debug)]
pub struct Splats {
    pub width: usize,
    pub height: usize,
    pub cfg: RasterConfig,
    pub projected: Vec<Option<Projected>>,
    pub opacity: Vec<f64>,
    tiles_x: usize,
    tiles_y: usize,
    bins: Vec<Vec<u32>>,
}

/// Blended quantity plus accumulated opacity `A = 1 - prod(1 - a_i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Blended {
    pub value: RasterImage,
    pub alpha: RasterImage,
}

struct Hit {
    pos: u32,
    weight: f64,
    alpha: f64,
}

impl Splats {
    pub fn new(kernels: &[GaussianKernel], camera: &Camera, cfg: &RasterConfig) -> Self {
        let projected = par::map_slice(kernels, |k| project_kernel(k, camera, cfg));
        let opacity = kernels.iter().map(|k| k.opacity).collect();
        Self::from_projected(projected, opacity, camera.width, camera.height, cfg)
    }

    pub fn from_projected(
        projected: Vec<Option<Projected>>,
        opacity: Vec<f64>,
        width: usize,
        height: usize,
        cfg: &RasterConfig,
    ) -> Self {
        assert_eq!(projected.len(), opacity.len());
        let tile = cfg.tile.max(1);
        let tiles_x = width.div_ceil(tile);
        let tiles_y = height.div_ceil(tile);
        let mut bins = vec![Vec::new(); tiles_x * tiles_y];
        for (i, p) in projected.iter().enumerate() {
            let Some(p) = p else { continue };
            let x0 = (p.mean.x - p.radius).ceil().max(0.0);
            let x1 = (p.mean.x + p.radius).floor().min(width as f64 - 1.0);
            let y0 = (p.mean.y - p.radius).ceil().max(0.0);
            let y1 = (p.mean.y + p.radius).floor().min(height as f64 - 1.0);
            if !(x0 <= x1 && y0 <= y1) {
                continue;
            }
            let (tx0, tx1) = (x0 as usize / tile, x1 as usize / tile);
            let (ty0, ty1) = (y0 as usize / tile, y1 as usize / tile);
            for ty in ty0..=ty1 {
                for tx in tx0..=tx1 {
                    bins[ty * tiles_x + tx].push(i as u32);
                }
            }
        }
        par::for_each_mut(&mut bins, |_, bin| {
            // Stable sort keeps index order among equal depths.
            bin.sort_by(|a, b| {
                let da = projected[*a as usize].unwrap().depth;
                let db = projected[*b as usize].unwrap().depth;
                da.total_cmp(&db)
            });
        });
        Self {
            width,
            height,
            cfg: *cfg,
            projected,
            opacity,
            tiles_x,
            tiles_y,
            bins,
        }
    }

    pub fn len(&self) -> usize {
        self.projected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projected.is_empty()
    }

    fn tile_rect(&self, t: usize) -> (usize, usize, usize, usize) {
        let tile = self.cfg.tile.max(1);
        let (tx, ty) = (t % self.tiles_x, t / self.tiles_x);
        let x0 = tx * tile;
        let y0 = ty * tile;
        (x0, y0, (x0 + tile).min(self.width), (y0 + tile).min(self.height))
    }

    /// Walks the sorted bin of tile `t` at pixel `(x, y)`, calling `visit` with
    /// each contributing kernel, its Gaussian weight, alpha and the transmittance
    /// in front of it. Returns the final transmittance.
    #[inline]
    fn walk(&self, bin: &[u32], x: usize, y: usize, mut visit: impl FnMut(usize, u32, f64, f64, f64)) -> f64 {
        let cutoff = -0.5 * self.cfg.cutoff_sigma * self.cfg.cutoff_sigma;
        let (px, py) = (x as f64, y as f64);
        let mut t = 1.0;
        for (pos, &i) in bin.iter().enumerate() {
            let sigma = self.opacity[i as usize];
            if sigma <= 0.0 {
                continue;
            }
            let p = self.projected[i as usize].as_ref().unwrap();
            let power = p.power(px, py);
            if power < cutoff {
                continue;
            }
            let w = power.exp();
            let a = sigma * w;
            visit(pos, i, w, a, t);
            t *= 1.0 - a;
            if t < self.cfg.min_transmittance {
                break;
            }
        }
        t
    }

    /// Accumulated opacity at pixels where `active` holds, 0 elsewhere.
    pub fn silhouette_where<F>(&self, active: F) -> RasterImage
    where
        F: Fn(usize, usize) -> bool + Sync + Send,
    {
        let tiles = par::map_range(self.bins.len(), |t| {
            let (x0, y0, x1, y1) = self.tile_rect(t);
            let bin = &self.bins[t];
            let mut alphas = Vec::with_capacity((x1 - x0) * (y1 - y0));
            for y in y0..y1 {
                for x in x0..x1 {
                    let a = if active(x, y) {
                        1.0 - self.walk(bin, x, y, |_, _, _, _, _| {})
                    } else {
                        0.0
                    };
                    alphas.push(a);
                }
            }
            alphas
        });
        let mut alpha = RasterImage::new(self.width, self.height, 1);
        for (t, alphas) in tiles.into_iter().enumerate() {
            let (x0, y0, x1, y1) = self.tile_rect(t);
            let w = x1 - x0;
            for y in y0..y1 {
                let dst = alpha.index(x0, y, 0);
                alpha.values[dst..dst + w].copy_from_slice(&alphas[(y - y0) * w..(y - y0 + 1) * w]);
            }
        }
        alpha
    }

    /// Front-to-back blend of a per-kernel `C`-vector.
    pub fn blend<const C: usize>(&self, quantity: &[[f64; C]]) -> Blended {
        assert_eq!(quantity.len(), self.len(), "one quantity per kernel");
        let tiles = par::map_range(self.bins.len(), |t| {
            let (x0, y0, x1, y1) = self.tile_rect(t);
            let bin = &self.bins[t];
            let mut vals = Vec::with_capacity((x1 - x0) * (y1 - y0) * C);
            let mut alphas = Vec::with_capacity((x1 - x0) * (y1 - y0));
            for y in y0..y1 {
                for x in x0..x1 {
                    let mut acc = [0.0; C];
                    let t_end = self.walk(bin, x, y, |_, i, _, a, t| {
                        let q = &quantity[i as usize];
                        for c in 0..C {
                            acc[c] += q[c] * a * t;
                        }
                    });
                    vals.extend_from_slice(&acc);
                    alphas.push(1.0 - t_end);
                }
            }
            (vals, alphas)
        });
        let mut value = RasterImage::new(self.width, self.height, C);
        let mut alpha = RasterImage::new(self.width, self.height, 1);
        for (t, (vals, alphas)) in tiles.into_iter().enumerate() {
            let (x0, y0, x1, y1) = self.tile_rect(t);
            let w = x1 - x0;
            for y in y0..y1 {
                let row = y - y0;
                let dst = value.index(x0, y, 0);
                value.values[dst..dst + w * C].copy_from_slice(&vals[row * w * C..(row + 1) * w * C]);
                let dst = alpha.index(x0, y, 0);
                alpha.values[dst..dst + w].copy_from_slice(&alphas[row * w..(row + 1) * w]);
            }
        }
        Blended { value, alpha }
    }

    /// Accumulated opacity `A` and the per-kernel gradient
    /// `sum_p g(p) dA(p)/d sigma_i` for a per-pixel weight `g(x, y, A)`.
    pub fn opacity_gradient<G>(&self, g: G) -> (RasterImage, Vec<f64>)
    where
        G: Fn(usize, usize, f64) -> f64 + Sync + Send,
    {
        self.opacity_gradient_where(|_, _| true, g)
    }

    /// Like [`Splats::opacity_gradient`] but only visits pixels where `active`
    /// holds; skipped pixels report `A = 0` and contribute nothing.
    pub fn opacity_gradient_where<F, G>(&self, active: F, g: G) -> (RasterImage, Vec<f64>)
    where
        F: Fn(usize, usize) -> bool + Sync + Send,
        G: Fn(usize, usize, f64) -> f64 + Sync + Send,
    {
        let tiles = par::map_range(self.bins.len(), |t| {
            let (x0, y0, x1, y1) = self.tile_rect(t);
            let bin = &self.bins[t];
            let mut grad = vec![0.0; bin.len()];
            let mut alphas = Vec::with_capacity((x1 - x0) * (y1 - y0));
            let mut hits: Vec<Hit> = Vec::new();
            for y in y0..y1 {
                for x in x0..x1 {
                    if !active(x, y) {
                        alphas.push(0.0);
                        continue;
                    }
                    hits.clear();
                    let t_end = self.walk(bin, x, y, |pos, _, w, a, _| {
                        hits.push(Hit {
                            pos: pos as u32,
                            weight: w,
                            alpha: a,
                        })
                    });
                    let a_px = 1.0 - t_end;
                    alphas.push(a_px);
                    let gp = g(x, y, a_px);
                    if gp == 0.0 || hits.is_empty() {
                        continue;
                    }
                    // prod_{j != i} (1 - a_j) from prefix and suffix products.
                    let mut prefix = Vec::with_capacity(hits.len());
                    let mut acc = 1.0;
                    for h in &hits {
                        prefix.push(acc);
                        acc *= 1.0 - h.alpha;
                    }
                    let mut suffix = 1.0;
                    for (h, pre) in hits.iter().zip(prefix).rev() {
                        grad[h.pos as usize] += gp * h.weight * pre * suffix;
                        suffix *= 1.0 - h.alpha;
                    }
                }
            }
            (alphas, grad)
        });
        let mut alpha = RasterImage::new(self.width, self.height, 1);
        let mut grad = vec![0.0; self.len()];
        for (t, (alphas, tile_grad)) in tiles.into_iter().enumerate() {
            let (x0, y0, x1, y1) = self.tile_rect(t);
            let w = x1 - x0;
            for y in y0..y1 {
                let dst = alpha.index(x0, y, 0);
                alpha.values[dst..dst + w].copy_from_slice(&alphas[(y - y0) * w..(y - y0 + 1) * w]);
            }
            for (pos, v) in tile_grad.into_iter().enumerate() {
                grad[self.bins[t][pos] as usize] += v;
            }
        }
        (alpha, grad)
    }

    #[doc(hidden)]
    pub fn tile_count(&self) -> (usize, usize) {
        (self.tiles_x, self.tiles_y)
    }
}

/// Blends a per-kernel quantity into `camera`.
pub fn blend_quantity<const C: usize>(
    kernels: &[GaussianKernel],
    camera: &Camera,
    quantity: &[[f64; C]],
    cfg: &RasterConfig,
) -> Blended {
    Splats::new(kernels, camera, cfg).blend(quantity)
}
