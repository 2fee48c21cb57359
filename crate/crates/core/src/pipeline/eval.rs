use serde::Serialize;

use super::config::PipelineConfig;
use super::simulate::object_cell;
use super::{stage, Layout};
use crate::error::{Error, Result};
use crate::knn::KdTree;
use crate::math::Vec3;
use crate::metrics::{chamfer_distance, fibonacci_sphere, psnr};
use crate::par;
use crate::raster::read_ppm;
use crate::splat::load_ply;

#[derive(Clone, Debug, Default, Serialize)]
pub struct ChamferSummary {
    pub reference: String,
    pub points: usize,
    pub chamfer: f64,
    /// `sqrt(chamfer)` in Poisson cells.
    pub root_in_cells: f64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct EvalReport {
    pub cell: f64,
    pub object_kernels: usize,
    pub surface_kernels: usize,
    pub sphere: Option<ChamferSummary>,
    pub ply: Option<ChamferSummary>,
    pub psnr: Vec<(String, f64)>,
}

/// Points of a cell-center lattice missing at least one of their six
/// lattice neighbors.
pub fn surface_shell(points: &[Vec3], cell: f64) -> Vec<Vec3> {
    let tree = KdTree::new(points);
    let r = 1.05 * cell;
    let keep = par::map_slice(points, |p| tree.within_radius(p, r).len() < 7);
    points.iter().zip(keep).filter(|(_, k)| *k).map(|(p, _)| *p).collect()
}

/// Chamfer distances of the restored object and PSNR of the rendered frames
/// against whichever references the config names.
pub fn run_eval(cfg: &PipelineConfig) -> Result<EvalReport> {
    let layout = Layout::new(cfg);
    let object = stage("load", load_ply(&layout.object))?;
    let centers = object.centers();
    let cell = stage("load", object_cell(&object.kernels))?;
    let shell = surface_shell(&centers, cell);
    let mut rep = EvalReport {
        cell,
        object_kernels: centers.len(),
        surface_kernels: shell.len(),
        ..Default::default()
    };
    if let Some(s) = &cfg.eval.reference_sphere {
        let reference = fibonacci_sphere(&Vec3::from(s.center), s.radius, cfg.eval.sphere_samples);
        let cd = stage("eval", chamfer_distance(&shell, &reference))?;
        rep.sphere = Some(ChamferSummary {
            reference: "sphere surface vs object surface kernels".into(),
            points: shell.len(),
            chamfer: cd,
            root_in_cells: cd.sqrt() / cell,
        });
    }
    if let Some(p) = &cfg.eval.reference_ply {
        let reference = stage("load", load_ply(p))?.centers();
        let cd = stage("eval", chamfer_distance(&centers, &reference))?;
        rep.ply = Some(ChamferSummary {
            reference: p.display().to_string(),
            points: centers.len(),
            chamfer: cd,
            root_in_cells: cd.sqrt() / cell,
        });
    }
    if let Some(dir) = &cfg.eval.reference_images {
        let mut names: Vec<_> = std::fs::read_dir(&layout.renders)
            .map_err(|e| Error::at_path(&layout.renders, e))?
            .filter_map(|e| e.ok())
            .map(|e| e.file_name())
            .filter(|n| n.to_string_lossy().ends_with(".ppm"))
            .collect();
        names.sort();
        for n in names {
            let reference = dir.join(&n);
            if !reference.is_file() {
                continue;
            }
            let a = stage("eval", read_ppm(layout.renders.join(&n)))?;
            let b = stage("eval", read_ppm(&reference))?;
            rep.psnr.push((n.to_string_lossy().into_owned(), stage("eval", psnr(&a, &b))?));
        }
    }
    stage("write", super::write_json(&layout.eval_report, &rep))?;
    Ok(rep)
}
