use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::Serialize;

use super::config::PipelineConfig;
use super::{stage, Layout};
use crate::error::{Error, Result};
use crate::raster::{render_color, write_ppm, RasterConfig};
use crate::splat::{load_ply, read_cameras, GaussianKernel};

#[derive(Clone, Debug, Default, Serialize)]
pub struct RenderReport {
    pub width: usize,
    pub height: usize,
    pub images: Vec<PathBuf>,
    pub seconds: f64,
}

/// `(frame, pose)` for image `k`: frames and poses advance together and
/// whichever sequence is shorter holds its last entry.
pub fn render_schedule(frames: usize, poses: usize) -> Vec<(usize, usize)> {
    let n = frames.max(poses);
    (0..n).map(|k| (k.min(frames - 1), k.min(poses - 1))).collect()
}

/// Renders every simulated frame composited over the static scene.
pub fn run_render(cfg: &PipelineConfig) -> Result<RenderReport> {
    let layout = Layout::new(cfg);
    let r = &cfg.render;
    let t0 = std::time::Instant::now();
    let (scene_path, cameras) = if layout.aligned_scene.is_file() && layout.aligned_cameras.is_file() {
        (layout.aligned_scene.clone(), stage("load", read_cameras(&layout.aligned_cameras))?)
    } else {
        (layout.scene.clone(), stage("load", cfg.read_cameras())?)
    };
    let scene = stage("load", load_ply(&scene_path))?.kernels;
    let frames = cfg.simulation.frames + 1;
    for f in 0..frames {
        let p = layout.frame(f);
        if !p.is_file() {
            return Err(Error::Stage {
                stage: "render",
                source: Box::new(Error::invalid(format!("missing frame {f} at `{}`", p.display()))),
            });
        }
    }
    std::fs::create_dir_all(&layout.renders).map_err(|e| Error::at_path(&layout.renders, e))?;
    let raster = RasterConfig::default();
    let mut cache: BTreeMap<usize, Vec<GaussianKernel>> = BTreeMap::new();
    let mut rep = RenderReport {
        width: r.width,
        height: r.height,
        ..Default::default()
    };
    for (k, (f, pose)) in render_schedule(frames, r.camera_path.len()).into_iter().enumerate() {
        if !cache.contains_key(&f) {
            cache.clear();
            let mut kernels = scene.clone();
            kernels.extend(stage("render", load_ply(layout.frame(f)))?.kernels);
            cache.insert(f, kernels);
        }
        let cam = cameras[r.camera_path[pose]].resized(r.width, r.height);
        let img = render_color(&cache[&f], &cam, &raster);
        let path = layout.render(k);
        stage("render", write_ppm(&path, &img))?;
        rep.images.push(path);
    }
    rep.seconds = t0.elapsed().as_secs_f64();
    Ok(rep)
}
