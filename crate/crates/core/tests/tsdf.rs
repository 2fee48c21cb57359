use std::time::Instant;

use gsdecouple::math::Vec3;
use gsdecouple::poisson::GridFrame;
use gsdecouple::raster::RasterImage;
use gsdecouple::splat::Camera;
use gsdecouple::tsdf::{ExtractConfig, TsdfVolume};

const R: f64 = 0.5;

fn orbit(n: usize) -> Vec<Camera> {
    (0..n)
        .map(|i| {
            let a = i as f64 * 2.399963;
            let el = 0.9 * (1.0 - 2.0 * (i as f64 + 0.5) / n as f64).asin();
            let eye = Vec3::new(el.cos() * a.cos(), el.sin(), el.cos() * a.sin()) * 2.0;
            Camera::look_at(eye, Vec3::zeros(), Vec3::y(), 120.0, 96, 96)
        })
        .collect()
}

/// View depth of the first ray/sphere hit, from the quadratic.
fn sphere_depth(cam: &Camera) -> RasterImage {
    let mut d = RasterImage::new(cam.width, cam.height, 2);
    let o = cam.center();
    for v in 0..cam.height {
        for u in 0..cam.width {
            let dir = cam.rotation.transpose() * cam.pixel_ray(u as f64, v as f64);
            let (a, b, c) = (dir.dot(&dir), 2.0 * o.dot(&dir), o.dot(&o) - R * R);
            let disc = b * b - 4.0 * a * c;
            if disc >= 0.0 {
                let t = (-b - disc.sqrt()) / (2.0 * a);
                d.set(u, v, 0, t);
                d.set(u, v, 1, 1.0);
            }
        }
    }
    d
}

#[test]
fn sphere_from_orbiting_views() {
    let frame = GridFrame::around(&Vec3::repeat(-R), &Vec3::repeat(R), [48; 3], 0.15).unwrap();
    let mut vol = TsdfVolume::new(frame, None).unwrap();
    let cams = orbit(20);
    let t0 = Instant::now();
    let mut rms = Vec::new();
    for cam in &cams {
        let depth = sphere_depth(cam);
        let mask = depth.channel(1);
        vol.integrate_depth(&depth, &mask, cam, None).unwrap();
        let pts = vol.extract_proxy_points(&ExtractConfig::default());
        if pts.points.is_empty() {
            continue;
        }
        let e2: f64 = pts.points.positions.iter().map(|p| (p.norm() - R).powi(2)).sum::<f64>();
        rms.push(((e2 / pts.points.len() as f64).sqrt(), pts.points.len()));
        for (p, n) in pts.points.positions.iter().zip(&pts.points.normals) {
            assert!(n.dot(&p.normalize()) > 0.5);
        }
    }
    assert!(t0.elapsed().as_secs_f64() < 100.0);
    let (last, count) = *rms.last().unwrap();
    assert!(last < frame.cell, "rms {last} vs cell {}", frame.cell);
    assert!(count > 1000);
    for w in rms.windows(2) {
        assert!(w[1].0 <= w[0].0 + 0.1 * frame.cell, "{rms:?}");
    }
}
