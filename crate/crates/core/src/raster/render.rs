use super::blend::Splats;
use super::{RasterConfig, RasterImage};
use crate::math::Vec3;
use crate::par;
use crate::sh::sh_basis;
use crate::splat::{Camera, GaussianKernel};

/// Accumulated opacity `A(p) = 1 - prod(1 - a_i)`.
pub fn render_opacity_silhouette(kernels: &[GaussianKernel], camera: &Camera, cfg: &RasterConfig) -> RasterImage {
    let splats = Splats::new(kernels, camera, cfg);
    splats.blend::<0>(&vec![[]; kernels.len()]).alpha
}

/// Binary mask of where the kernels listed in `object_ids` accumulate any opacity,
/// with every other kernel treated as transparent.
pub fn render_projected_mask(
    kernels: &[GaussianKernel],
    object_ids: &[usize],
    camera: &Camera,
    cfg: &RasterConfig,
) -> RasterImage {
    let subset: Vec<GaussianKernel> = object_ids.iter().map(|&i| kernels[i].clone()).collect();
    let mut a = render_opacity_silhouette(&subset, camera, cfg);
    for v in &mut a.values {
        *v = if *v > f64::EPSILON { 1.0 } else { 0.0 };
    }
    a
}

/// Camera-frame normal of a kernel's shortest axis, oriented toward the
/// camera, and the distance `|n . t|` of its tangent plane from the camera.
pub fn view_normal_and_distance(kernel: &GaussianKernel, camera: &Camera) -> (Vec3, f64) {
    let axis = kernel.rotation_matrix().column(kernel.shortest_axis()).into_owned();
    let n = camera.rotation * axis;
    let t = camera.to_camera(&kernel.center);
    let n = if n.dot(&t) > 0.0 { -n } else { n };
    (n, n.dot(&t).abs())
}

/// Ray/plane depth from blended normals and plane distances.
///
/// Channel 0 is the view depth, channel 1 is 1 for valid pixels. Pixels with
/// accumulated opacity below 0.5 or a grazing blended normal are 0 in both.
pub fn render_unbiased_depth(kernels: &[GaussianKernel], camera: &Camera, cfg: &RasterConfig) -> RasterImage {
    let q: Vec<[f64; 4]> = par::map_slice(kernels, |k| {
        let (n, d) = view_normal_and_distance(k, camera);
        [n.x, n.y, n.z, d]
    });
    let blended = Splats::new(kernels, camera, cfg).blend(&q);
    let mut out = RasterImage::new(camera.width, camera.height, 2);
    for y in 0..camera.height {
        for x in 0..camera.width {
            if blended.alpha.get(x, y, 0) < 0.5 {
                continue;
            }
            let p = blended.value.pixel(x, y);
            let n = Vec3::new(p[0], p[1], p[2]);
            let denom = -n.dot(&camera.pixel_ray(x as f64, y as f64));
            if denom.abs() < 1e-8 {
                continue;
            }
            let depth = p[3] / denom;
            if depth > 0.0 && depth.is_finite() {
                out.set(x, y, 0, depth);
                out.set(x, y, 1, 1.0);
            }
        }
    }
    out
}

/// Per-kernel view-dependent RGB for one camera.
pub fn kernel_colors(kernels: &[GaussianKernel], camera: &Camera) -> Vec<[f64; 3]> {
    let eye = camera.center();
    par::map_slice(kernels, |k| {
        let d = k.center - eye;
        let n = d.norm();
        let basis = if n > 0.0 { sh_basis(&(d / n)) } else { sh_basis(&Vec3::z()) };
        let mut rgb = [0.0; 3];
        for (c, out) in rgb.iter_mut().enumerate() {
            let v: f64 = k.sh[c].iter().zip(&basis).map(|(a, b)| a * b).sum();
            *out = (v + 0.5).max(0.0);
        }
        rgb
    })
}

/// RGB render over a black background.
pub fn render_color(kernels: &[GaussianKernel], camera: &Camera, cfg: &RasterConfig) -> RasterImage {
    let colors = kernel_colors(kernels, camera);
    Splats::new(kernels, camera, cfg).blend(&colors).value
}
