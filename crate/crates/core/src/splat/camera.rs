use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{is_rotation, Mat3, Vec2, Vec3};

/// Pinhole camera with a world-to-camera pose. Camera axes follow the
/// OpenCV convention: x right, y down, z forward. Pixel `(u, v)` has its
/// center at image coordinate `(u, v)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Camera {
    pub intrinsics: Mat3,
    pub rotation: Mat3,
    pub translation: Vec3,
    pub width: usize,
    pub height: usize,
}

impl Camera {
    pub fn new(
        intrinsics: Mat3,
        rotation: Mat3,
        translation: Vec3,
        width: usize,
        height: usize,
    ) -> Result<Self> {
        let cam = Self {
            intrinsics,
            rotation,
            translation,
            width,
            height,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<()> {
        let k = &self.intrinsics;
        if k[(1, 0)] != 0.0 || k[(2, 0)] != 0.0 || k[(2, 1)] != 0.0 {
            return Err(Error::invalid("intrinsics must be upper triangular"));
        }
        if !(k[(0, 0)] > 0.0 && k[(1, 1)] > 0.0) || (k[(2, 2)] - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("intrinsics need positive focal lengths and K[2][2] = 1"));
        }
        if !is_rotation(&self.rotation, 1e-6) {
            return Err(Error::invalid("camera rotation is not orthonormal"));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid("camera image has zero size"));
        }
        Ok(())
    }

    /// Camera at `eye` looking at `target`, with principal point at the image center.
    pub fn look_at(eye: Vec3, target: Vec3, up: Vec3, focal: f64, width: usize, height: usize) -> Self {
        let z = (target - eye).normalize();
        let mut x = z.cross(&up);
        if x.norm() < 1e-12 {
            // Looking along `up`; pick any perpendicular.
            let alt = if z.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
            x = z.cross(&alt);
        }
        let x = x.normalize();
        let y = z.cross(&x);
        let rotation = Mat3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]);
        let intrinsics = Mat3::new(
            focal,
            0.0,
            width as f64 / 2.0,
            0.0,
            focal,
            height as f64 / 2.0,
            0.0,
            0.0,
            1.0,
        );
        Self {
            intrinsics,
            rotation,
            translation: -(rotation * eye),
            width,
            height,
        }
    }

    pub fn fx(&self) -> f64 {
        self.intrinsics[(0, 0)]
    }

    pub fn fy(&self) -> f64 {
        self.intrinsics[(1, 1)]
    }

    pub fn center(&self) -> Vec3 {
        -(self.rotation.transpose() * self.translation)
    }

    pub fn to_camera(&self, world: &Vec3) -> Vec3 {
        self.rotation * world + self.translation
    }

    /// Image coordinates and view depth, or `None` behind the near plane.
    pub fn project(&self, world: &Vec3, near: f64) -> Option<(Vec2, f64)> {
        let c = self.to_camera(world);
        if c.z <= near {
            return None;
        }
        let p = self.intrinsics * (c / c.z);
        Some((Vec2::new(p.x, p.y), c.z))
    }

    /// `K^-1 p'` for pixel `(u, v)`: camera-frame ray with unit z.
    pub fn pixel_ray(&self, u: f64, v: f64) -> Vec3 {
        let k = &self.intrinsics;
        let y = (v - k[(1, 2)]) / k[(1, 1)];
        let x = (u - k[(0, 2)] - k[(0, 1)] * y) / k[(0, 0)];
        Vec3::new(x, y, 1.0)
    }

    /// World-space origin and unit direction through pixel `(u, v)`.
    pub fn world_ray(&self, u: f64, v: f64) -> (Vec3, Vec3) {
        let d = self.rotation.transpose() * self.pixel_ray(u, v);
        (self.center(), d.normalize())
    }

    /// Same pose with the image resampled to `width x height`.
    pub fn resized(&self, width: usize, height: usize) -> Self {
        let sx = width as f64 / self.width as f64;
        let sy = height as f64 / self.height as f64;
        let mut k = self.intrinsics;
        k[(0, 0)] *= sx;
        k[(0, 1)] *= sx;
        k[(0, 2)] *= sx;
        k[(1, 1)] *= sy;
        k[(1, 2)] *= sy;
        Self {
            intrinsics: k,
            width,
            height,
            ..self.clone()
        }
    }

    /// Camera for the world transformed by `x -> q (x - pivot) + pivot`.
    pub fn transformed(&self, q: &Mat3, pivot: &Vec3) -> Self {
        let rotation = self.rotation * q.transpose();
        let translation = self.translation + self.rotation * pivot - rotation * pivot;
        Self {
            rotation,
            translation,
            ..self.clone()
        }
    }
}

/// JSON form of a camera: `K`, world-to-camera `R` and `t`, image size.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CameraRecord {
    #[serde(rename = "K")]
    pub k: [[f64; 3]; 3],
    #[serde(rename = "R")]
    pub r: [[f64; 3]; 3],
    pub t: [f64; 3],
    pub width: usize,
    pub height: usize,
}

impl From<&Camera> for CameraRecord {
    fn from(cam: &Camera) -> Self {
        let rows = |m: &Mat3| [0, 1, 2].map(|i| [0, 1, 2].map(|j| m[(i, j)]));
        Self {
            k: rows(&cam.intrinsics),
            r: rows(&cam.rotation),
            t: [cam.translation.x, cam.translation.y, cam.translation.z],
            width: cam.width,
            height: cam.height,
        }
    }
}

impl TryFrom<&CameraRecord> for Camera {
    type Error = Error;

    fn try_from(rec: &CameraRecord) -> Result<Self> {
        let mat = |m: &[[f64; 3]; 3]| Mat3::from_fn(|i, j| m[i][j]);
        Camera::new(
            mat(&rec.k),
            mat(&rec.r),
            Vec3::from(rec.t),
            rec.width,
            rec.height,
        )
    }
}

pub fn read_cameras(path: &std::path::Path) -> Result<Vec<Camera>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::at_path(path, e))?;
    let records: Vec<CameraRecord> = serde_json::from_str(&text)?;
    records.iter().map(Camera::try_from).collect()
}

pub fn write_cameras(path: &std::path::Path, cameras: &[Camera]) -> Result<()> {
    let records: Vec<CameraRecord> = cameras.iter().map(CameraRecord::from).collect();
    let text = serde_json::to_string_pretty(&records)?;
    std::fs::write(path, text).map_err(|e| Error::at_path(path, e))
}
