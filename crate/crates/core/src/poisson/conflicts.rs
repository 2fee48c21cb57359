use super::curvature::mean_curvature;
use super::grid::IndicatorGrid;
use crate::error::{Error, Result};
use crate::knn::KdTree;
use crate::math::{median, Vec3};
use crate::par;

const LOWERED: f64 = 0.49;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Neighborhood {
    Six,
    TwentySix,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConflictConfig {
    /// Curvature-difference threshold; `None` picks it from the data.
    pub tau: Option<f64>,
    pub iterations: usize,
    pub curvature_neighbors: usize,
    pub neighborhood: Neighborhood,
}

impl Default for ConflictConfig {
    fn default() -> Self {
        Self {
            tau: None,
            iterations: 10,
            curvature_neighbors: 16,
            neighborhood: Neighborhood::Six,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, serde::Serialize)]
pub struct ConflictReport {
    pub tau: f64,
    /// Scene surface cells lowered per smoothing iteration.
    pub scene_lowered: Vec<usize>,
    pub object_lowered: usize,
    pub conflict_free: bool,
}

fn neighbors(grid: &IndicatorGrid, idx: usize, hood: Neighborhood) -> Vec<usize> {
    match hood {
        Neighborhood::Six => grid.frame().neighbors6(idx).collect(),
        Neighborhood::TwentySix => grid.frame().neighbors26(idx),
    }
}

/// Gives the scene priority where both fields claim the interior.
///
/// Scene surface cells inside the object whose curvature departs from the
/// nearest clean scene surface by more than `tau` are pushed out (0.49),
/// repeated for the configured iterations. Then every object-interior cell
/// touching scene interior is pushed out. Values are only ever lowered.
pub fn resolve_conflicts(
    scene: &mut IndicatorGrid,
    object: &mut IndicatorGrid,
    cfg: &ConflictConfig,
) -> Result<ConflictReport> {
    if scene.dims != object.dims
        || (scene.origin - object.origin).norm() > 1e-9 * scene.cell.max(1.0)
        || (scene.cell - object.cell).abs() > 1e-12 * scene.cell
    {
        return Err(Error::invalid("scene and object indicators are not co-registered"));
    }
    let mut report = ConflictReport::default();
    let mut tau = cfg.tau;
    for _ in 0..cfg.iterations {
        let surface: Vec<usize> = (0..scene.values.len())
            .filter(|&i| scene.values[i] > 0.5 && scene.values[i] < 0.6)
            .collect();
        let (inter, clean): (Vec<usize>, Vec<usize>) = surface.iter().partition(|&&i| object.values[i] > 0.5);
        let clean: Vec<usize> = clean.into_iter().filter(|&i| object.values[i] < 0.5).collect();
        if inter.is_empty() || clean.is_empty() {
            report.scene_lowered.push(0);
            if tau.is_none() {
                tau = Some(default_tau(scene, &clean, cfg.curvature_neighbors));
            }
            break;
        }
        // Snap cell centers onto the 0.5 level along the field gradient.
        let cells: Vec<usize> = inter.iter().chain(&clean).copied().collect();
        let (pts, normals): (Vec<Vec3>, Vec<Vec3>) = cells.iter().map(|&i| surface_point(scene, i)).unzip();
        let h = mean_curvature(&pts, Some(&normals), cfg.curvature_neighbors);
        let (h_inter, h_clean) = h.values.split_at(inter.len());
        let t = *tau.get_or_insert_with(|| threshold(h_clean, scene.cell));
        let clean_tree = KdTree::new(&pts[inter.len()..]);
        let lower: Vec<usize> = par::map_range(inter.len(), |j| {
            let nearest = clean_tree.nearest(&pts[j]).unwrap().index;
            ((h_inter[j] - h_clean[nearest]).abs() > t).then_some(inter[j])
        })
        .into_iter()
        .flatten()
        .collect();
        for &i in &lower {
            scene.values[i] = LOWERED;
        }
        report.scene_lowered.push(lower.len());
    }
    report.tau = tau.unwrap_or(0.0);

    let snapshot = &scene.values;
    let lower: Vec<bool> = par::map_range(object.values.len(), |i| {
        object.values[i] > 0.5
            && (snapshot[i] > 0.5 || neighbors(scene, i, cfg.neighborhood).iter().any(|&n| snapshot[n] > 0.5))
    });
    for (v, l) in object.values.iter_mut().zip(&lower) {
        if *l {
            *v = LOWERED;
            report.object_lowered += 1;
        }
    }
    report.conflict_free = is_conflict_free(scene, object, cfg.neighborhood);
    Ok(report)
}

fn surface_point(grid: &IndicatorGrid, idx: usize) -> (Vec3, Vec3) {
    let c = grid.cell_center(idx);
    let g = grid.gradient(idx);
    let g2 = g.norm_squared();
    if g2 == 0.0 {
        return (c, Vec3::zeros());
    }
    let step = ((grid.values[idx] - 0.5) / g2) * g;
    let step = if step.norm() > grid.cell { step * (grid.cell / step.norm()) } else { step };
    (c - step, -g / g2.sqrt())
}

/// Three times the median |H|, floored at a radius of curvature of 20 cells.
fn threshold(h_clean: &[f64], cell: f64) -> f64 {
    let mut abs: Vec<f64> = h_clean.iter().map(|v| v.abs()).collect();
    let m = median(&mut abs).unwrap_or(0.0);
    (3.0 * m).max(0.05 / cell)
}

fn default_tau(scene: &IndicatorGrid, clean: &[usize], k: usize) -> f64 {
    let (pts, normals): (Vec<Vec3>, Vec<Vec3>) = clean.iter().map(|&i| surface_point(scene, i)).unzip();
    threshold(&mean_curvature(&pts, Some(&normals), k).values, scene.cell)
}

/// True when no object-interior cell has scene interior at itself or a neighbor.
pub fn is_conflict_free(scene: &IndicatorGrid, object: &IndicatorGrid, hood: Neighborhood) -> bool {
    (0..object.values.len()).all(|i| {
        object.values[i] <= 0.5
            || (scene.values[i] <= 0.5 && neighbors(scene, i, hood).iter().all(|&n| scene.values[n] <= 0.5))
    })
}
