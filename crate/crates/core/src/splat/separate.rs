use super::GaussianKernel;
use crate::error::{Error, Result};
use crate::knn::KdTree;
use crate::math::{median, Vec3};
use crate::par;

/// Partition kernels into the clicked object (`label == click_label`) and the rest.
pub fn split_object(
    kernels: &[GaussianKernel],
    click_label: i32,
) -> Result<(Vec<GaussianKernel>, Vec<GaussianKernel>)> {
    if !kernels.iter().any(|k| k.label == click_label) {
        return Err(Error::UnknownLabel(click_label));
    }
    Ok(kernels.iter().cloned().partition(|k| k.label == click_label))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CleanupConfig {
    pub k: usize,
    /// `None` selects [`default_cleanup_radius`].
    pub radius: Option<f64>,
}

impl Default for CleanupConfig {
    fn default() -> Self {
        Self { k: 8, radius: None }
    }
}

/// Twice the median nearest-neighbor spacing among the object centers.
pub fn default_cleanup_radius(object: &[GaussianKernel]) -> f64 {
    if object.len() < 2 {
        return 0.0;
    }
    let centers: Vec<Vec3> = object.iter().map(|k| k.center).collect();
    let tree = KdTree::new(&centers);
    let mut spacing = par::map_slice(&centers, |c| tree.knn(c, 2)[1].dist2.sqrt());
    2.0 * median(&mut spacing).unwrap_or(0.0)
}

/// Drops scene kernels that sit within `radius` of one of their `k` nearest
/// object centers. Survivors keep their input order.
pub fn knn_residual_cleanup(
    scene: &[GaussianKernel],
    object: &[GaussianKernel],
    k: usize,
    radius: f64,
) -> Vec<GaussianKernel> {
    if object.is_empty() {
        return scene.to_vec();
    }
    let centers: Vec<Vec3> = object.iter().map(|o| o.center).collect();
    let tree = KdTree::new(&centers);
    let r2 = radius * radius;
    let k = k.max(1);
    let keep = par::map_slice(scene, |s| tree.knn(&s.center, k).iter().all(|n| n.dist2 > r2));
    scene
        .iter()
        .zip(keep)
        .filter(|(_, keep)| *keep)
        .map(|(s, _)| s.clone())
        .collect()
}

/// Label of each point's nearest kernel center (lowest kernel index on ties).
pub fn transfer_labels(points: &[Vec3], labeled: &[GaussianKernel]) -> Result<Vec<i32>> {
    if labeled.is_empty() {
        return Err(Error::invalid("label transfer needs at least one labeled kernel"));
    }
    let centers: Vec<Vec3> = labeled.iter().map(|k| k.center).collect();
    let tree = KdTree::new(&centers);
    Ok(par::map_slice(points, |p| {
        labeled[tree.nearest(p).expect("non-empty tree").index].label
    }))
}
