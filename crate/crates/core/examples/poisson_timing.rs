//! Times a 128^3 indicator solve for 10^5 sphere samples.
use std::time::Instant;

use gsdecouple::math::Vec3;
use gsdecouple::poisson::{build_indicator_in, GridFrame, OrientedPointSet, PoissonConfig};

fn main() {
    let n = 100_000;
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let pos: Vec<Vec3> = (0..n)
        .map(|i| {
            let y = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - y * y).sqrt();
            let t = golden * i as f64;
            Vec3::new(r * t.cos(), y, r * t.sin())
        })
        .collect();
    let pts = OrientedPointSet::new(pos.clone(), pos).unwrap();
    let frame = GridFrame::around(&Vec3::repeat(-1.0), &Vec3::repeat(1.0), [128; 3], 0.1).unwrap();
    let t0 = Instant::now();
    let (_, stats) = build_indicator_in(&pts, &frame, &PoissonConfig::default()).unwrap();
    println!("128^3, {n} samples: {:.2} s, {} iterations", t0.elapsed().as_secs_f64(), stats.iterations);
}
