use nalgebra::{Matrix2, Matrix2x3};

use super::RasterConfig;
use crate::math::{Mat3, Vec2};
use crate::splat::{Camera, GaussianKernel};

/// Screen-space footprint of one kernel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Projected {
    pub mean: Vec2,
    pub cov: Matrix2<f64>,
    /// Inverse of `cov`.
    pub conic: Matrix2<f64>,
    pub depth: f64,
    /// Bounding half-extent in pixels at the configured sigma cutoff.
    pub radius: f64,
}

/// EWA projection of a kernel. `None` when the center is at or behind the near plane.
pub fn project_kernel(kernel: &GaussianKernel, camera: &Camera, cfg: &RasterConfig) -> Option<Projected> {
    project_covariance(&kernel.center, &kernel.covariance(), camera, cfg)
}

pub(crate) fn project_covariance(
    center: &crate::math::Vec3,
    cov3: &Mat3,
    camera: &Camera,
    cfg: &RasterConfig,
) -> Option<Projected> {
    let t = camera.to_camera(center);
    if !(t.z > cfg.near) {
        return None;
    }
    let k = &camera.intrinsics;
    let (fx, fy, s) = (k[(0, 0)], k[(1, 1)], k[(0, 1)]);
    let iz = 1.0 / t.z;
    let mean = Vec2::new(
        fx * t.x * iz + s * t.y * iz + k[(0, 2)],
        fy * t.y * iz + k[(1, 2)],
    );
    let j = Matrix2x3::new(
        fx * iz,
        s * iz,
        -(fx * t.x + s * t.y) * iz * iz,
        0.0,
        fy * iz,
        -fy * t.y * iz * iz,
    );
    let w = &camera.rotation;
    let m = j * w;
    let mut cov = m * cov3 * m.transpose();
    cov[(0, 1)] = 0.5 * (cov[(0, 1)] + cov[(1, 0)]);
    cov[(1, 0)] = cov[(0, 1)];
    cov[(0, 0)] += cfg.cov_floor;
    cov[(1, 1)] += cfg.cov_floor;
    let det = cov[(0, 0)] * cov[(1, 1)] - cov[(0, 1)] * cov[(0, 1)];
    if !(det > 0.0) || !det.is_finite() {
        return None;
    }
    let conic = Matrix2::new(cov[(1, 1)], -cov[(0, 1)], -cov[(1, 0)], cov[(0, 0)]) / det;
    let half_tr = 0.5 * (cov[(0, 0)] + cov[(1, 1)]);
    let lmax = half_tr + (half_tr * half_tr - det).max(0.0).sqrt();
    Some(Projected {
        mean,
        cov,
        conic,
        depth: t.z,
        radius: (cfg.cutoff_sigma * lmax.sqrt()).ceil(),
    })
}

impl Projected {
    /// Mahalanobis power `-0.5 d^T conic d` at image point `(x, y)`.
    #[inline]
    pub fn power(&self, x: f64, y: f64) -> f64 {
        let dx = x - self.mean.x;
        let dy = y - self.mean.y;
        -0.5 * (self.conic[(0, 0)] * dx * dx + 2.0 * self.conic[(0, 1)] * dx * dy + self.conic[(1, 1)] * dy * dy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Vec3;

    fn cam() -> Camera {
        Camera::look_at(Vec3::zeros(), Vec3::z(), -Vec3::y(), 400.0, 200, 200)
    }

    #[test]
    fn isotropic_on_axis() {
        let k = GaussianKernel::isotropic(Vec3::new(0.0, 0.0, 3.0), 0.1, 1.0);
        let p = project_kernel(&k, &cam(), &RasterConfig::default()).unwrap();
        assert!((p.cov[(0, 0)] - p.cov[(1, 1)]).abs() < 1e-12);
        assert!(p.cov[(0, 1)].abs() < 1e-12);
        assert!((p.mean - Vec2::new(100.0, 100.0)).norm() < 1e-12);
        assert_eq!(p.depth, 3.0);
    }

    #[test]
    fn footprint_matches_similar_triangles() {
        let (f, s, z) = (400.0, 0.05, 4.0);
        let k = GaussianKernel::isotropic(Vec3::new(0.2, -0.1, z), s, 1.0);
        let p = project_kernel(&k, &cam(), &RasterConfig::default()).unwrap();
        let expected = f * s / z;
        let std = p.cov[(0, 0)].sqrt();
        assert!((std - expected).abs() / expected < 0.05, "{std} vs {expected}");
    }

    #[test]
    fn behind_camera_is_skipped() {
        let k = GaussianKernel::isotropic(Vec3::new(0.0, 0.0, -1.0), 0.1, 1.0);
        assert!(project_kernel(&k, &cam(), &RasterConfig::default()).is_none());
        let on_plane = GaussianKernel::isotropic(Vec3::zeros(), 0.1, 1.0);
        assert!(project_kernel(&on_plane, &cam(), &RasterConfig::default()).is_none());
    }
}
