use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::math::{quat_from_matrix, rotation_between, Mat3, Vec3};
use crate::sh::rotate_sh;
use crate::splat::SplatScene;

/// Plane `normal . x = offset` with a point on it.
#[derive(Clone, Debug, PartialEq)]
pub struct Plane {
    pub normal: Vec3,
    pub offset: f64,
    pub centroid: Vec3,
    pub inliers: usize,
}

impl Plane {
    pub fn signed_distance(&self, x: &Vec3) -> f64 {
        self.normal.dot(x) - self.offset
    }

    /// The same plane with its normal flipped if needed so the mean of
    /// `viewpoints` lies on the positive side. Empty input or a mean on
    /// the plane leaves it unchanged.
    pub fn facing(mut self, viewpoints: &[Vec3]) -> Self {
        if viewpoints.is_empty() {
            return self;
        }
        let mean = viewpoints.iter().sum::<Vec3>() / viewpoints.len() as f64;
        if self.signed_distance(&mean) < 0.0 {
            self.normal = -self.normal;
            self.offset = -self.offset;
        }
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RansacConfig {
    pub iterations: usize,
    pub inlier_tol: f64,
    pub seed: u64,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self {
            iterations: 500,
            inlier_tol: 0.01,
            seed: 0,
        }
    }
}

fn count_inliers(points: &[Vec3], n: &Vec3, d: f64, tol: f64) -> usize {
    points.iter().filter(|p| (n.dot(p) - d).abs() <= tol).count()
}

/// Least-squares plane through `points`: centroid and smallest principal axis.
fn fit_plane(points: &[&Vec3]) -> (Vec3, Vec3) {
    let c = points.iter().copied().sum::<Vec3>() / points.len() as f64;
    let mut cov = Mat3::zeros();
    for p in points {
        let d = *p - c;
        cov += d * d.transpose();
    }
    let eig = cov.symmetric_eigen();
    let k = eig.eigenvalues.imin();
    (c, eig.eigenvectors.column(k).normalize())
}

/// RANSAC over 3-point hypotheses, refined by least squares on the inliers of
/// the best one. The normal points toward the side holding more off-plane
/// points, so a ground plane under a scene gets an upward normal.
pub fn ransac_plane(points: &[Vec3], cfg: &RansacConfig) -> Result<Plane> {
    if points.len() < 3 {
        return Err(Error::invalid(format!("plane fit needs at least 3 points, got {}", points.len())));
    }
    if !(cfg.inlier_tol > 0.0) || cfg.iterations == 0 {
        return Err(Error::invalid("RANSAC needs a positive tolerance and at least one iteration"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<(usize, Vec3, f64)> = None;
    let mut attempts = 0;
    let mut tried = 0;
    while tried < cfg.iterations && attempts < cfg.iterations * 20 {
        attempts += 1;
        let a = points[rng.gen_range(0..points.len())];
        let b = points[rng.gen_range(0..points.len())];
        let c = points[rng.gen_range(0..points.len())];
        let n = (b - a).cross(&(c - a));
        let scale = (b - a).norm() * (c - a).norm();
        if !(n.norm() > 1e-12 * scale.max(1e-300)) {
            continue;
        }
        tried += 1;
        let n = n.normalize();
        let d = n.dot(&a);
        let count = count_inliers(points, &n, d, cfg.inlier_tol);
        if best.map_or(true, |(c, _, _)| count > c) {
            best = Some((count, n, d));
        }
    }
    let Some((_, n, d)) = best else {
        return Err(Error::invalid("all RANSAC samples were collinear"));
    };
    let inl: Vec<&Vec3> = points.iter().filter(|p| (n.dot(p) - d).abs() <= cfg.inlier_tol).collect();
    let (centroid, mut normal) = fit_plane(&inl);
    if normal.dot(&n) < 0.0 {
        normal = -normal;
    }
    let offset = normal.dot(&centroid);
    let above = points.iter().filter(|p| normal.dot(p) - offset > cfg.inlier_tol).count();
    let below = points.iter().filter(|p| normal.dot(p) - offset < -cfg.inlier_tol).count();
    let flip = below > above || (below == above && normal[normal.iamax()] < 0.0);
    if flip {
        normal = -normal;
    }
    Ok(Plane {
        normal,
        offset: normal.dot(&centroid),
        centroid,
        inliers: inl.len(),
    })
}

/// Rotates the whole scene about the plane centroid so the plane normal maps
/// to +z. Centers, kernel frames, SH coefficients and cameras all turn together.
pub fn gravity_align(scene: &SplatScene, plane: &Plane) -> Result<SplatScene> {
    let r = rotation_between(&plane.normal, &Vec3::z());
    let pivot = plane.centroid;
    let q = quat_from_matrix(&r);
    let mut out = scene.clone();
    for k in &mut out.kernels {
        k.center = r * (k.center - pivot) + pivot;
        k.rotation = q * k.rotation;
        k.sh = rotate_sh(&k.sh, &r)?;
    }
    out.cameras = scene.cameras.iter().map(|c| c.transformed(&r, &pivot)).collect();
    out.up_axis = Some(Vec3::z());
    Ok(out)
}
