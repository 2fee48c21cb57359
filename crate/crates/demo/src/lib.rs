//! wasm-bindgen exports for `www/index.html`.

use gsdecouple::math::Vec3;
use gsdecouple::metrics::{chamfer_distance, fibonacci_sphere};
use gsdecouple::pipeline::surface_shell;
use gsdecouple::raster::{render_color, RasterConfig};
use gsdecouple::sh::{eval_sh, rotate_sh, EulerZyz};
use gsdecouple::splat::{Camera, GaussianKernel, SH_COEFFS};
use gsdecouple::synth::{sphere_on_slab, SynthConfig};
use wasm_bindgen::prelude::*;

/// The synthetic sphere-on-slab scene, built once.
#[wasm_bindgen]
pub struct Demo {
    cfg: SynthConfig,
    kernels: Vec<GaussianKernel>,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new() -> Demo {
        let cfg = SynthConfig::default();
        let kernels = sphere_on_slab(&cfg).kernels;
        Demo { cfg, kernels }
    }

    pub fn kernel_count(&self) -> usize {
        self.kernels.len()
    }

    /// RGBA pixels of an orbit view. With `hide_object` the object label is
    /// dropped, exposing the hole it leaves in the slab.
    pub fn render(&self, azimuth_deg: f64, elevation_deg: f64, width: usize, height: usize, hide_object: bool) -> Vec<u8> {
        let target = self.cfg.sphere_center();
        let (a, e) = (azimuth_deg.to_radians(), elevation_deg.to_radians());
        let eye = target + Vec3::new(e.cos() * a.cos(), e.cos() * a.sin(), e.sin()) * (6.0 * self.cfg.radius);
        let cam = Camera::look_at(eye, target, Vec3::z(), width as f64, width, height);
        let img = if hide_object {
            let kept: Vec<GaussianKernel> =
                self.kernels.iter().filter(|k| k.label != self.cfg.object_label).cloned().collect();
            render_color(&kept, &cam, &RasterConfig::default())
        } else {
            render_color(&self.kernels, &cam, &RasterConfig::default())
        };
        let mut out = Vec::with_capacity(width * height * 4);
        for px in img.values.chunks(3) {
            out.extend(px.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
            out.push(255);
        }
        out
    }
}

impl Default for Demo {
    fn default() -> Self {
        Self::new()
    }
}

/// Rotates a fixed degree-3 color field by ZYZ angles (degrees) and returns
/// the largest `|f'(R d) - f(d)|` over sample directions.
#[wasm_bindgen]
pub fn sh_rotation_error(alpha_deg: f64, beta_deg: f64, gamma_deg: f64) -> f64 {
    let mut sh = [[0.0; SH_COEFFS]; 3];
    for (c, ch) in sh.iter_mut().enumerate() {
        for (i, x) in ch.iter_mut().enumerate() {
            *x = ((i * 7 + c * 3) as f64 * 1.3).sin() / (1.0 + i as f64).sqrt();
        }
    }
    let r = EulerZyz {
        alpha: alpha_deg.to_radians(),
        beta: beta_deg.to_radians(),
        gamma: gamma_deg.to_radians(),
    }
    .to_matrix();
    let Ok(rotated) = rotate_sh(&sh, &r) else {
        return f64::NAN;
    };
    let mut worst: f64 = 0.0;
    for d in fibonacci_sphere(&Vec3::zeros(), 1.0, 200) {
        for c in 0..3 {
            match (eval_sh(&rotated[c], &(r * d)), eval_sh(&sh[c], &d)) {
                (Ok(a), Ok(b)) => worst = worst.max((a - b).abs()),
                _ => return f64::NAN,
            }
        }
    }
    worst
}

/// `sqrt(Chamfer) / cell` between the surface of a voxelized unit sphere
/// and the true sphere.
#[wasm_bindgen]
pub fn sphere_chamfer_cells(cell: f64) -> f64 {
    if !(cell > 0.02 && cell <= 0.5) {
        return f64::NAN;
    }
    let n = (1.0 / cell).ceil() as i32;
    let mut lattice = Vec::new();
    for k in -n..=n {
        for j in -n..=n {
            for i in -n..=n {
                let p = Vec3::new(i as f64, j as f64, k as f64) * cell;
                if p.norm() <= 1.0 {
                    lattice.push(p);
                }
            }
        }
    }
    let shell = surface_shell(&lattice, cell);
    let reference = fibonacci_sphere(&Vec3::zeros(), 1.0, 4000);
    chamfer_distance(&shell, &reference).map_or(f64::NAN, |cd| cd.sqrt() / cell)
}
