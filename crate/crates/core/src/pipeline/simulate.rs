use std::collections::BTreeMap;
use std::time::Instant;

use serde::Serialize;

use super::config::PipelineConfig;
use super::{stage, Layout};
use crate::carve::isometric_scale;
use crate::error::{Error, Result};
use crate::math::{bounds, median, Vec3};
use crate::mpm::{
    advect_gaussians, gravity_align, mark_sticky_nodes, particles_from_kernels, ransac_plane, simulate,
    write_diagnostics, FrameDiagnostics, MpmGrid, MpmState,
};
use crate::splat::{load_ply, save_ply, write_cameras, GaussianKernel, SplatScene};

const MAX_GRID_DIM: usize = 512;

#[derive(Clone, Debug, Default, Serialize)]
pub struct SimulateReport {
    pub particles: usize,
    pub particle_cell: f64,
    pub plane_normal: Option<[f64; 3]>,
    pub plane_inliers: usize,
    pub grid_dims: [usize; 3],
    pub sticky_nodes: usize,
    pub frames: usize,
    pub steps: usize,
    pub clamped: usize,
    pub last: Option<FrameDiagnostics>,
    pub timings: BTreeMap<String, f64>,
}

/// Poisson cell of a restored object, recovered from its isometric kernel size.
pub fn object_cell(object: &[GaussianKernel]) -> Result<f64> {
    let mut s: Vec<f64> = object.iter().map(|k| k.scales.max()).collect();
    let m = median(&mut s).ok_or(Error::EmptyScene)?;
    Ok(m / isometric_scale(1.0))
}

/// Grid covering the object box grown by `padding` on every side.
fn domain(object: &[GaussianKernel], h: f64, padding: f64) -> Result<MpmGrid> {
    let centers: Vec<Vec3> = object.iter().map(|k| k.center).collect();
    let (lo, hi) = bounds(&centers).ok_or(Error::EmptyScene)?;
    let pad = Vec3::repeat(padding + 3.0 * h);
    let origin = lo - pad;
    let ext = hi + pad - origin;
    let mut dims = [0; 3];
    for a in 0..3 {
        dims[a] = ((ext[a] / h).ceil() as usize + 1).max(5);
        if dims[a] > MAX_GRID_DIM {
            return Err(Error::config(
                "simulation.grid_cell",
                format!("grid would need {} nodes along axis {a}; the limit is {MAX_GRID_DIM}", dims[a]),
            ));
        }
    }
    MpmGrid::new(origin, h, dims)
}

/// Gravity alignment, sticky scene boundary and the MPM loop; writes one
/// object snapshot per frame plus the diagnostics table.
pub fn run_simulate(cfg: &PipelineConfig) -> Result<SimulateReport> {
    let layout = Layout::new(cfg);
    let sim = &cfg.simulation;
    let mut rep = SimulateReport::default();
    let mut timings = BTreeMap::new();
    let t0 = Instant::now();

    let object = stage("load", load_ply(&layout.object))?.kernels;
    let scene = stage("load", load_ply(&layout.scene))?.kernels;
    let cameras = stage("load", cfg.read_cameras())?;
    rep.particles = object.len();
    rep.particle_cell = stage("load", object_cell(&object))?;

    let mut joined = object.clone();
    joined.extend(scene.iter().cloned());
    let mut world = SplatScene::new(joined).with_cameras(cameras);
    if sim.align_gravity {
        let centers: Vec<Vec3> = scene.iter().map(|k| k.center).collect();
        let eyes: Vec<Vec3> = world.cameras.iter().map(|c| c.center()).collect();
        let plane = stage("align", ransac_plane(&centers, &cfg.ransac_config()))?.facing(&eyes);
        rep.plane_normal = Some([plane.normal.x, plane.normal.y, plane.normal.z]);
        rep.plane_inliers = plane.inliers;
        world = stage("align", gravity_align(&world, &plane))?;
    }
    let scene_kernels = world.kernels.split_off(object.len());
    let rest = world.kernels;
    timings.insert("load_align".to_string(), t0.elapsed().as_secs_f64());

    let t1 = Instant::now();
    let mut grid = stage("grid", domain(&rest, sim.grid_cell, sim.padding))?;
    let scene_centers: Vec<Vec3> = scene_kernels.iter().map(|k| k.center).collect();
    mark_sticky_nodes(&mut grid, &scene_centers);
    rep.grid_dims = grid.dims;
    rep.sticky_nodes = grid.sticky_count();
    let material = sim.materials[sim.object_material];
    let particles = stage(
        "particles",
        particles_from_kernels(&rest, rep.particle_cell, material.density, sim.object_material),
    )?;
    let mut state = stage("particles", MpmState::new(particles, sim.materials.clone(), grid))?;

    stage("write", layout.create())?;
    std::fs::create_dir_all(&layout.frames).map_err(|e| Error::at_path(&layout.frames, e))?;
    stage("write", save_ply(&SplatScene::new(scene_kernels), &layout.aligned_scene))?;
    stage("write", write_cameras(&layout.aligned_cameras, &world.cameras))?;

    let diag = stage(
        "simulate",
        simulate(&mut state, &sim.sim_config(), &sim.impulses, sim.frames, sim.steps_per_frame, |f, st| {
            let kernels = advect_gaussians(&rest, &st.particles)?;
            save_ply(&SplatScene::new(kernels), layout.frame(f))
        }),
    )?;
    let file = std::fs::File::create(&layout.diagnostics).map_err(|e| Error::at_path(&layout.diagnostics, e));
    stage("write", file.and_then(|f| write_diagnostics(std::io::BufWriter::new(f), &diag)))?;
    timings.insert("simulate".to_string(), t1.elapsed().as_secs_f64());

    rep.frames = sim.frames;
    rep.steps = state.steps;
    rep.clamped = state.clamped;
    rep.last = diag.last().cloned();
    rep.timings = timings;
    stage("write", super::write_json(&layout.simulate_report, &rep))?;
    Ok(rep)
}
