use super::{Camera, GaussianKernel};
use crate::error::{Error, Result};
use crate::math::Vec3;
use crate::par;

/// The two unit normals along the kernel's shortest axis, `(n, -n)`, where
/// `n` is the corresponding column of the rotation frame.
pub fn flatten_normal_candidates(kernel: &GaussianKernel) -> (Vec3, Vec3) {
    let axis = kernel.shortest_axis();
    let n = kernel.rotation_matrix().column(axis).into_owned().normalize();
    (n, -n)
}

fn sees(camera: &Camera, p: &Vec3) -> bool {
    match camera.project(p, 1e-4) {
        Some((uv, _)) => {
            uv.x >= -0.5
                && uv.y >= -0.5
                && uv.x < camera.width as f64 - 0.5
                && uv.y < camera.height as f64 - 0.5
        }
        None => false,
    }
}

/// Orients each kernel's shortest-axis normal toward the exterior. Every
/// camera that sees the kernel (all cameras if none does) votes for the
/// candidate making an obtuse angle with its viewing direction; the
/// majority wins and exact ties take the candidate facing the first voter.
pub fn disambiguate_normals(kernels: &[GaussianKernel], cameras: &[Camera]) -> Result<Vec<Vec3>> {
    if cameras.is_empty() {
        return Err(Error::invalid("normal disambiguation needs at least one camera"));
    }
    let centers: Vec<Vec3> = cameras.iter().map(Camera::center).collect();
    Ok(par::map_slice(kernels, |k| {
        let (n, neg) = flatten_normal_candidates(k);
        let visible: Vec<usize> = (0..cameras.len()).filter(|&c| sees(&cameras[c], &k.center)).collect();
        let voters: Vec<usize> = if visible.is_empty() {
            (0..cameras.len()).collect()
        } else {
            visible
        };
        let mut for_n = 0usize;
        let mut for_neg = 0usize;
        for &c in &voters {
            let view = k.center - centers[c];
            let d = n.dot(&view);
            if d < 0.0 {
                for_n += 1;
            } else if d > 0.0 {
                for_neg += 1;
            }
        }
        if for_n > for_neg {
            n
        } else if for_neg > for_n {
            neg
        } else if n.dot(&(k.center - centers[voters[0]])) <= 0.0 {
            n
        } else {
            neg
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{UnitQuaternion, Vector3};

    fn flat(center: Vec3, rot: UnitQuaternion<f64>) -> GaussianKernel {
        GaussianKernel::new(center, Vec3::new(1.0, 1.0, 1e-8), rot, 1.0)
    }

    #[test]
    fn identity_flat_kernel_normal_is_z() {
        let (n, m) = flatten_normal_candidates(&flat(Vec3::zeros(), UnitQuaternion::identity()));
        assert_relative_eq!(n, Vec3::z());
        assert_relative_eq!(m, -Vec3::z());
    }

    #[test]
    fn rotated_flat_kernel_normal() {
        let rot = UnitQuaternion::from_axis_angle(&Vector3::x_axis(), std::f64::consts::FRAC_PI_2);
        let (n, _) = flatten_normal_candidates(&flat(Vec3::zeros(), rot));
        assert_relative_eq!(n, Vec3::new(0.0, -1.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn equal_scales_pick_axis_zero() {
        let k = GaussianKernel::isotropic(Vec3::zeros(), 1.0, 1.0);
        let (n, _) = flatten_normal_candidates(&k);
        assert_relative_eq!(n, Vec3::x());
    }

    #[test]
    fn single_camera_above_points_normal_up() {
        let cam = Camera::look_at(Vec3::new(0.0, 0.0, 5.0), Vec3::zeros(), Vec3::y(), 50.0, 64, 64);
        let rot = UnitQuaternion::from_axis_angle(&Vector3::x_axis(), std::f64::consts::PI);
        for k in [flat(Vec3::zeros(), UnitQuaternion::identity()), flat(Vec3::zeros(), rot)] {
            let n = disambiguate_normals(&[k], &[cam.clone()]).unwrap()[0];
            assert_relative_eq!(n, Vec3::z(), epsilon = 1e-12);
        }
    }

    #[test]
    fn hemisphere_cameras_orient_ground_up() {
        let mut cams = Vec::new();
        for i in 0..12 {
            let az = i as f64 * std::f64::consts::TAU / 12.0;
            let el = 0.3 + 0.1 * (i % 4) as f64;
            let eye = Vec3::new(az.cos() * el.cos(), az.sin() * el.cos(), el.sin()) * 6.0;
            cams.push(Camera::look_at(eye, Vec3::zeros(), Vec3::z(), 40.0, 64, 64));
        }
        let rot_down = UnitQuaternion::from_axis_angle(&Vector3::y_axis(), std::f64::consts::PI);
        let ks: Vec<_> = (0..50)
            .map(|i| {
                let p = Vec3::new((i % 10) as f64 * 0.2 - 1.0, (i / 10) as f64 * 0.3 - 0.6, 0.0);
                flat(p, if i % 2 == 0 { rot_down } else { UnitQuaternion::identity() })
            })
            .collect();
        let normals = disambiguate_normals(&ks, &cams).unwrap();
        for n in normals {
            assert_relative_eq!(n, Vec3::z(), epsilon = 1e-12);
        }
    }

    #[test]
    fn opposing_cameras_tie_toward_first() {
        let k = flat(Vec3::zeros(), UnitQuaternion::identity());
        let above = Camera::look_at(Vec3::new(0.0, 0.0, 5.0), Vec3::zeros(), Vec3::y(), 50.0, 64, 64);
        let below = Camera::look_at(Vec3::new(0.0, 0.0, -5.0), Vec3::zeros(), Vec3::y(), 50.0, 64, 64);
        let n = disambiguate_normals(&[k.clone()], &[above.clone(), below.clone()]).unwrap()[0];
        assert_relative_eq!(n, Vec3::z());
        let n = disambiguate_normals(&[k], &[below, above]).unwrap()[0];
        assert_relative_eq!(n, -Vec3::z());
    }

    #[test]
    fn no_cameras_is_an_error() {
        assert!(disambiguate_normals(&[], &[]).is_err());
    }
}
