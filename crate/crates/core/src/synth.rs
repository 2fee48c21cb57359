//! Synthetic sphere-on-slab splat scene with orbiting cameras.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::math::{quat_from_matrix, rotation_between, Vec3};
use crate::metrics::fibonacci_sphere;
use crate::splat::{save_ply, write_cameras, write_labels, Camera, GaussianKernel, SplatScene};

/// Thickness of a surface kernel relative to its footprint.
const FLATNESS: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub radius: f64,
    /// Sphere center height over the slab top, in radii. Below 1 the sphere
    /// sinks into the slab.
    pub rest_height: f64,
    pub slab_half_width: f64,
    pub slab_depth: f64,
    /// Kernel spacing on the sphere and on the slab.
    pub sphere_spacing: f64,
    pub slab_spacing: f64,
    pub views: usize,
    pub width: usize,
    pub height: usize,
    pub object_label: i32,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            radius: 0.25,
            rest_height: 0.9,
            slab_half_width: 0.5,
            slab_depth: 0.2,
            sphere_spacing: 0.015,
            slab_spacing: 0.02,
            views: 20,
            width: 160,
            height: 120,
            object_label: 1,
        }
    }
}

impl SynthConfig {
    pub fn sphere_center(&self) -> Vec3 {
        Vec3::new(0.0, 0.0, self.rest_height * self.radius)
    }
}

fn surfel(center: Vec3, normal: Vec3, size: f64, rgb: [f64; 3], label: i32) -> GaussianKernel {
    let rot = rotation_between(&Vec3::x(), &normal);
    GaussianKernel::new(center, Vec3::new(size * FLATNESS, size, size), quat_from_matrix(&rot), 0.95)
        .with_rgb(rgb)
        .with_label(label)
}

fn checker(p: &Vec3, period: f64) -> [f64; 3] {
    let parity = ((p.x / period).floor() + (p.y / period).floor()) as i64 & 1;
    if parity == 0 {
        [0.7, 0.7, 0.65]
    } else {
        [0.45, 0.45, 0.5]
    }
}

/// Flat surface kernels over the slab faces. Top-face kernels covered by the
/// sphere are left out, as a capture would never see them.
fn slab_kernels(cfg: &SynthConfig) -> Vec<GaussianKernel> {
    let w = cfg.slab_half_width;
    let d = cfg.slab_depth;
    let step = cfg.slab_spacing;
    let size = 0.6 * step;
    let c = cfg.sphere_center();
    let contact = (cfg.radius * cfg.radius - c.z * c.z).max(0.0).sqrt();
    let n = (2.0 * w / step).round() as usize;
    let nd = (d / step).round().max(1.0) as usize;
    let at = |i: usize, count: usize, lo: f64, hi: f64| lo + (hi - lo) * (i as f64 + 0.5) / count as f64;
    let mut out = Vec::new();
    for j in 0..n {
        for i in 0..n {
            let (x, y) = (at(i, n, -w, w), at(j, n, -w, w));
            let top = Vec3::new(x, y, 0.0);
            if (x * x + y * y).sqrt() > contact {
                out.push(surfel(top, Vec3::z(), size, checker(&top, 0.1), 0));
            }
            out.push(surfel(Vec3::new(x, y, -d), -Vec3::z(), size, [0.3; 3], 0));
        }
    }
    for k in 0..nd {
        let z = at(k, nd, -d, 0.0);
        for i in 0..n {
            let s = at(i, n, -w, w);
            for (p, nrm) in [
                (Vec3::new(s, -w, z), -Vec3::y()),
                (Vec3::new(s, w, z), Vec3::y()),
                (Vec3::new(-w, s, z), -Vec3::x()),
                (Vec3::new(w, s, z), Vec3::x()),
            ] {
                out.push(surfel(p, nrm, size, [0.35, 0.35, 0.4], 0));
            }
        }
    }
    out
}

/// Surface kernels on the part of the sphere above the slab.
fn sphere_kernels(cfg: &SynthConfig) -> Vec<GaussianKernel> {
    let c = cfg.sphere_center();
    let area = 4.0 * std::f64::consts::PI * cfg.radius * cfg.radius;
    let n = (area / (cfg.sphere_spacing * cfg.sphere_spacing)).round() as usize;
    fibonacci_sphere(&c, cfg.radius, n)
        .into_iter()
        .filter(|p| p.z > 0.5 * cfg.sphere_spacing)
        .map(|p| {
            let nrm = (p - c) / cfg.radius;
            let rgb = [0.75 + 0.15 * nrm.x, 0.3 + 0.1 * nrm.z, 0.2];
            surfel(p, nrm, 0.6 * cfg.sphere_spacing, rgb, cfg.object_label)
        })
        .collect()
}

/// Cameras on a golden-angle spiral over the upper hemisphere, aimed at the sphere.
pub fn orbit_cameras(cfg: &SynthConfig) -> Vec<Camera> {
    let target = cfg.sphere_center();
    let dist = 6.0 * cfg.radius;
    let focal = cfg.width as f64;
    (0..cfg.views)
        .map(|i| {
            let a = i as f64 * 2.399963;
            let el = 0.35 + 0.8 * (i as f64 + 0.5) / cfg.views as f64;
            let eye = target + Vec3::new(el.cos() * a.cos(), el.cos() * a.sin(), el.sin()) * dist;
            Camera::look_at(eye, target, Vec3::z(), focal, cfg.width, cfg.height)
        })
        .collect()
}

/// The labelled scene with its cameras.
pub fn sphere_on_slab(cfg: &SynthConfig) -> SplatScene {
    let mut kernels = slab_kernels(cfg);
    kernels.extend(sphere_kernels(cfg));
    SplatScene::new(kernels).with_cameras(orbit_cameras(cfg))
}

/// Paths written by [`write_sphere_on_slab`].
#[derive(Clone, Debug, PartialEq)]
pub struct SynthFiles {
    pub ply: PathBuf,
    pub cameras: PathBuf,
    pub labels: PathBuf,
}

/// Writes `scene.ply`, `cameras.json` and `labels.txt` into `dir`.
pub fn write_sphere_on_slab(dir: &Path, cfg: &SynthConfig) -> Result<SynthFiles> {
    std::fs::create_dir_all(dir).map_err(|e| crate::Error::at_path(dir, e))?;
    let scene = sphere_on_slab(cfg);
    let files = SynthFiles {
        ply: dir.join("scene.ply"),
        cameras: dir.join("cameras.json"),
        labels: dir.join("labels.txt"),
    };
    save_ply(&scene, &files.ply)?;
    write_cameras(&files.cameras, &scene.cameras)?;
    let labels: Vec<i32> = scene.kernels.iter().map(|k| k.label).collect();
    write_labels(&files.labels, &labels)?;
    Ok(files)
}
