//! Gaussian-splat data model, PLY I/O, label sidecars, normals, and
//! object/scene separation.

mod camera;
mod labels;
mod normals;
mod ply;
mod separate;

pub use camera::{read_cameras, write_cameras, Camera, CameraRecord};
pub use labels::{read_labels, write_labels};
pub use normals::{disambiguate_normals, flatten_normal_candidates};
pub use ply::{load_ply, read_ply, save_ply, write_ply};
pub use separate::{
    default_cleanup_radius, knn_residual_cleanup, split_object, transfer_labels, CleanupConfig,
};

use nalgebra::UnitQuaternion;

use crate::error::{Error, Result};
use crate::math::{argmin3, Mat3, Vec3};

/// Real SH coefficients per color channel (degrees 0 through 3).
pub const SH_COEFFS: usize = 16;

/// Degree-0 real SH constant `1 / (2 sqrt(pi))`.
pub const SH_C0: f64 = 0.282_094_791_773_878_14;

/// One anisotropic 3D Gaussian.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianKernel {
    pub center: Vec3,
    /// In `[0, 1]`.
    pub opacity: f64,
    pub rotation: UnitQuaternion<f64>,
    /// Per-axis standard deviations in the rotation frame, all `> 0`.
    pub scales: Vec3,
    /// `sh[channel][coefficient]`, coefficients in splat order (degree-major, `m = -l..l`).
    pub sh: [[f64; SH_COEFFS]; 3],
    pub label: i32,
}

impl GaussianKernel {
    pub fn new(center: Vec3, scales: Vec3, rotation: UnitQuaternion<f64>, opacity: f64) -> Self {
        Self {
            center,
            opacity,
            rotation,
            scales,
            sh: [[0.0; SH_COEFFS]; 3],
            label: 0,
        }
    }

    pub fn isotropic(center: Vec3, scale: f64, opacity: f64) -> Self {
        Self::new(center, Vec3::repeat(scale), UnitQuaternion::identity(), opacity)
    }

    pub fn with_label(mut self, label: i32) -> Self {
        self.label = label;
        self
    }

    /// Sets the view-independent color; higher-degree coefficients are untouched.
    pub fn with_rgb(mut self, rgb: [f64; 3]) -> Self {
        self.set_rgb(rgb);
        self
    }

    pub fn set_rgb(&mut self, rgb: [f64; 3]) {
        for (c, v) in rgb.iter().enumerate() {
            self.sh[c][0] = rgb_to_sh_dc(*v);
        }
    }

    pub fn rgb(&self) -> [f64; 3] {
        [0, 1, 2].map(|c| sh_dc_to_rgb(self.sh[c][0]))
    }

    pub fn rotation_matrix(&self) -> Mat3 {
        self.rotation.to_rotation_matrix().into_inner()
    }

    /// `R S S^T R^T`.
    pub fn covariance(&self) -> Mat3 {
        let r = self.rotation_matrix();
        let s2 = Mat3::from_diagonal(&self.scales.component_mul(&self.scales));
        r * s2 * r.transpose()
    }

    /// Index of the smallest scale, lowest index on ties.
    pub fn shortest_axis(&self) -> usize {
        argmin3(&self.scales)
    }

    pub fn is_flat(&self, ratio: f64) -> bool {
        self.scales.min() <= ratio * self.scales.max()
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.center.iter().all(|v| v.is_finite())
            && self.scales.iter().all(|v| v.is_finite())
            && self.opacity.is_finite()
            && self.sh.iter().flatten().all(|v| v.is_finite());
        if !finite {
            return Err(Error::invalid("kernel has non-finite fields"));
        }
        if (self.rotation.quaternion().norm() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("kernel quaternion is not unit length"));
        }
        if self.scales.iter().any(|&s| s <= 0.0) {
            return Err(Error::invalid("kernel scales must be positive"));
        }
        if !(0.0..=1.0).contains(&self.opacity) {
            return Err(Error::invalid("kernel opacity outside [0, 1]"));
        }
        Ok(())
    }
}

pub fn rgb_to_sh_dc(rgb: f64) -> f64 {
    (rgb - 0.5) / SH_C0
}

pub fn sh_dc_to_rgb(dc: f64) -> f64 {
    dc * SH_C0 + 0.5
}

/// Kernels plus the cameras that observed them.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SplatScene {
    pub kernels: Vec<GaussianKernel>,
    pub cameras: Vec<Camera>,
    pub up_axis: Option<Vec3>,
}

impl SplatScene {
    pub fn new(kernels: Vec<GaussianKernel>) -> Self {
        Self {
            kernels,
            ..Default::default()
        }
    }

    pub fn with_cameras(mut self, cameras: Vec<Camera>) -> Self {
        self.cameras = cameras;
        self
    }

    pub fn len(&self) -> usize {
        self.kernels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kernels.is_empty()
    }

    pub fn centers(&self) -> Vec<Vec3> {
        self.kernels.iter().map(|k| k.center).collect()
    }

    /// Sorted, de-duplicated label set.
    pub fn labels(&self) -> Vec<i32> {
        let mut labels: Vec<i32> = self.kernels.iter().map(|k| k.label).collect();
        labels.sort_unstable();
        labels.dedup();
        labels
    }

    pub fn require_cameras(&self) -> Result<()> {
        if self.cameras.is_empty() {
            Err(Error::invalid("operation needs at least one camera"))
        } else {
            Ok(())
        }
    }
}
