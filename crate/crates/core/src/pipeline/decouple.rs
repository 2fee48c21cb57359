use std::collections::BTreeMap;
use std::time::Instant;

use serde::Serialize;

use super::config::PipelineConfig;
use super::{stage, Layout};
use crate::carve::{carve, interpolate_interior_sh, isometric_init, set_view_independent_color, write_carve_log, CarveView};
use crate::error::{Error, Result};
use crate::knn::KdTree;
use crate::math::{bounds, Vec3};
use crate::meshing::{crop_mesh_patch, marching_cubes, mesh_to_gaussians};
use crate::poisson::{
    build_indicator_in, extract_interior_points, resolve_conflicts, ConflictReport, GridFrame, OrientedPointSet,
};
use crate::raster::{render_color, render_opacity_silhouette, render_projected_mask, render_unbiased_depth, RasterConfig, RasterImage};
use crate::splat::{
    default_cleanup_radius, disambiguate_normals, knn_residual_cleanup, load_ply, read_labels, save_ply, split_object,
    transfer_labels, Camera, GaussianKernel, SplatScene,
};
use crate::tsdf::TsdfVolume;

#[derive(Clone, Debug, Default, Serialize)]
pub struct PoissonSummary {
    pub cell: f64,
    pub origin: [f64; 3],
    pub dims: [usize; 3],
    pub object_iterations: usize,
    pub object_residual: f64,
    pub scene_iterations: usize,
    pub scene_residual: f64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct CarveSummary {
    pub initial: usize,
    pub kept: usize,
    pub validation_initial: f64,
    pub validation_final: f64,
}

/// Counts, residuals and wall times of one decouple run.
#[derive(Clone, Debug, Default, Serialize)]
pub struct DecoupleReport {
    pub input_kernels: usize,
    pub object_kernels: usize,
    pub scene_kernels: usize,
    pub cleanup_radius: f64,
    pub cleanup_removed: usize,
    pub proxy_points: usize,
    pub proxy_points_kept: usize,
    pub poisson: PoissonSummary,
    pub conflicts: ConflictReport,
    pub interior_points: usize,
    pub scene_patch_triangles: usize,
    pub scene_patch_kernels: usize,
    pub scene_patch_skipped: usize,
    pub carve: CarveSummary,
    pub restored_object_kernels: usize,
    pub restored_scene_kernels: usize,
    /// Seconds per stage.
    pub timings: BTreeMap<String, f64>,
}

/// Reads the input scene, applies the label sidecar and attaches the cameras.
pub fn load_input(cfg: &PipelineConfig) -> Result<SplatScene> {
    let mut scene = load_ply(&cfg.input)?;
    if let Some(path) = &cfg.labels {
        let labels = read_labels(path)?;
        if labels.len() != scene.len() {
            return Err(Error::config(
                "labels",
                format!("{} labels for {} kernels", labels.len(), scene.len()),
            ));
        }
        for (k, l) in scene.kernels.iter_mut().zip(labels) {
            k.label = l;
        }
    }
    let cameras = cfg.read_cameras()?;
    Ok(scene.with_cameras(cameras))
}

/// Ground-truth style silhouette: pixels where the object alone reaches half opacity.
pub fn object_silhouette(object: &[GaussianKernel], camera: &Camera, raster: &RasterConfig) -> RasterImage {
    let mut a = render_opacity_silhouette(object, camera, raster);
    for v in &mut a.values {
        *v = if *v >= 0.5 { 1.0 } else { 0.0 };
    }
    a
}

struct Timer(BTreeMap<String, f64>, Instant);

impl Timer {
    fn lap(&mut self, name: &str) {
        let now = Instant::now();
        self.0.insert(name.to_string(), (now - self.1).as_secs_f64());
        self.1 = now;
    }
}

/// Object proxy points: masked unbiased-depth fusion, then only zero
/// crossings whose nearest kernel carries the object label survive.
fn proxy_points(
    cfg: &PipelineConfig,
    all: &[GaussianKernel],
    object_ids: &[usize],
    object: &[GaussianKernel],
    cameras: &[Camera],
    raster: &RasterConfig,
) -> Result<(usize, OrientedPointSet, Vec<[f64; 3]>)> {
    let centers: Vec<Vec3> = object.iter().map(|k| k.center).collect();
    let (lo, hi) = bounds(&centers).ok_or(Error::EmptyScene)?;
    let frame = GridFrame::around(&lo, &hi, cfg.tsdf.dims, cfg.tsdf.padding)?;
    let mut vol = TsdfVolume::new(frame, cfg.tsdf.truncation)?;
    for cam in cameras {
        let depth = render_unbiased_depth(all, cam, raster);
        let mask = render_projected_mask(all, object_ids, cam, raster);
        let color = render_color(all, cam, raster);
        vol.integrate_depth(&depth, &mask, cam, Some(&color))?;
    }
    let proxy = vol.extract_proxy_points(&cfg.extract_config());
    let total = proxy.points.len();
    let labels = transfer_labels(&proxy.points.positions, all)?;
    let mut pos = Vec::new();
    let mut nrm = Vec::new();
    let mut col = Vec::new();
    for (i, l) in labels.iter().enumerate() {
        if *l == cfg.object_label {
            pos.push(proxy.points.positions[i]);
            nrm.push(proxy.points.normals[i]);
            col.push(proxy.colors[i]);
        }
    }
    Ok((total, OrientedPointSet::new(pos, nrm)?, col))
}

/// Separates the clicked object from the scene and restores both: the
/// object as a carved solid of interior kernels, the scene with a patch of
/// triangle-bound kernels over the surface the object used to hide.
pub fn run_decouple(cfg: &PipelineConfig) -> Result<DecoupleReport> {
    let layout = Layout::new(cfg);
    let mut t = Timer(BTreeMap::new(), Instant::now());
    let mut rep = DecoupleReport::default();
    let raster = RasterConfig::default();

    let input = stage("load", load_input(cfg))?;
    rep.input_kernels = input.len();
    let (object, scene) = stage("split", split_object(&input.kernels, cfg.object_label))?;
    rep.object_kernels = object.len();
    rep.scene_kernels = scene.len();
    let cameras = input.cameras;
    t.lap("load_split");

    let cleanup = cfg.cleanup_config();
    rep.cleanup_radius = cleanup.radius.unwrap_or_else(|| default_cleanup_radius(&object));
    let scene = knn_residual_cleanup(&scene, &object, cleanup.k, rep.cleanup_radius);
    rep.cleanup_removed = rep.scene_kernels - scene.len();
    if scene.is_empty() {
        return Err(Error::Stage {
            stage: "cleanup",
            source: Box::new(Error::EmptyScene),
        });
    }
    let scene_normals = stage("normals", disambiguate_normals(&scene, &cameras))?;
    t.lap("cleanup_normals");

    let mut all = scene.clone();
    all.extend(object.iter().cloned());
    let object_ids: Vec<usize> = (scene.len()..all.len()).collect();
    let (total, proxy, proxy_colors) = stage("proxy", proxy_points(cfg, &all, &object_ids, &object, &cameras, &raster))?;
    rep.proxy_points = total;
    rep.proxy_points_kept = proxy.len();
    t.lap("proxy");

    let scene_points = stage("poisson", OrientedPointSet::new(scene.iter().map(|k| k.center).collect(), scene_normals))?;
    let mut both = scene_points.positions.clone();
    both.extend(&proxy.positions);
    let (lo, hi) = bounds(&both).ok_or(Error::EmptyScene)?;
    let frame = stage("poisson", GridFrame::around(&lo, &hi, cfg.poisson.dims, cfg.poisson.padding))?;
    let solver = cfg.poisson.solver();
    let (mut object_grid, ostats) = stage("poisson", build_indicator_in(&proxy, &frame, &solver))?;
    let (mut scene_grid, sstats) = stage("poisson", build_indicator_in(&scene_points, &frame, &solver))?;
    rep.poisson = PoissonSummary {
        cell: frame.cell,
        origin: [frame.origin.x, frame.origin.y, frame.origin.z],
        dims: frame.dims,
        object_iterations: ostats.iterations,
        object_residual: ostats.residual,
        scene_iterations: sstats.iterations,
        scene_residual: sstats.residual,
    };
    rep.conflicts = stage("conflicts", resolve_conflicts(&mut scene_grid, &mut object_grid, &cfg.poisson.conflicts()))?;
    let interior = extract_interior_points(&object_grid);
    rep.interior_points = interior.len();
    if interior.is_empty() {
        return Err(Error::Stage {
            stage: "interior",
            source: Box::new(Error::Numerical {
                step: 0,
                detail: "object indicator has no interior cells".into(),
            }),
        });
    }
    t.lap("poisson");

    let mesh = marching_cubes(&scene_grid, 0.5);
    let patch = stage("scene_patch", crop_mesh_patch(&mesh, &interior, cfg.crop_scale))?;
    let (mut patch_kernels, skipped) = mesh_to_gaussians(&patch);
    rep.scene_patch_triangles = patch.triangles.len();
    rep.scene_patch_kernels = patch_kernels.len();
    rep.scene_patch_skipped = skipped;
    let scene_centers: Vec<Vec3> = scene.iter().map(|k| k.center).collect();
    let tree = KdTree::new(&scene_centers);
    for k in &mut patch_kernels {
        let src = &scene[tree.nearest(&k.center).expect("scene is non-empty").index];
        k.sh = src.sh;
        k.label = src.label;
    }
    t.lap("scene_patch");

    let mut init = isometric_init(&interior, frame.cell);
    let dc = stage(
        "interior_color",
        interpolate_interior_sh(&interior, &proxy.positions, &proxy_colors, cfg.carve.color_neighbors),
    )?;
    set_view_independent_color(&mut init, &dc);
    for k in &mut init {
        k.label = cfg.object_label;
    }
    let views: Vec<CarveView> = cameras
        .iter()
        .map(|cam| CarveView {
            camera: cam.clone(),
            mask: Some(object_silhouette(&object, cam, &raster)),
        })
        .collect();
    rep.carve.initial = init.len();
    let carved = stage("carve", carve(init, &views, &cfg.carve_config()))?;
    rep.carve.kept = carved.kernels.len();
    rep.carve.validation_initial = carved.validation.first().copied().unwrap_or(0.0);
    rep.carve.validation_final = carved.validation.last().copied().unwrap_or(0.0);
    t.lap("carve");

    let mut restored_scene = scene;
    restored_scene.extend(patch_kernels);
    rep.restored_object_kernels = carved.kernels.len();
    rep.restored_scene_kernels = restored_scene.len();

    stage("write", layout.create())?;
    stage("write", save_ply(&SplatScene::new(carved.kernels), &layout.object))?;
    stage("write", save_ply(&SplatScene::new(restored_scene), &layout.scene))?;
    stage("write", object_grid.save(layout.dir.join("object_indicator.gsig")))?;
    stage("write", scene_grid.save(layout.dir.join("scene_indicator.gsig")))?;
    let log = std::fs::File::create(layout.dir.join("carve_log.csv")).map_err(Error::from);
    stage("write", log.and_then(|f| write_carve_log(std::io::BufWriter::new(f), &carved.log)))?;
    t.lap("write");
    rep.timings = t.0;
    stage("write", super::write_json(&layout.decouple_report, &rep))?;
    Ok(rep)
}
