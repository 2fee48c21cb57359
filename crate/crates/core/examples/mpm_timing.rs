//! Wall time of one MLS-MPM step for 10^5 particles on a 64^3 grid.
use std::time::Instant;

use gsdecouple::math::Vec3;
use gsdecouple::mpm::{Material, MaterialModel, MpmGrid, MpmState, Particle, SimConfig};

fn main() {
    let h = 1.0 / 64.0;
    let grid = MpmGrid::new(Vec3::zeros(), h, [64, 64, 64]).unwrap();
    let mat = Material::new(MaterialModel::FixedCorotated, 3e6, 0.3).unwrap();
    let spacing = h / 2.0;
    let mut particles = Vec::new();
    let n = 47;
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                let x = Vec3::new(0.15, 0.15, 0.15) + Vec3::new(i as f64, j as f64, k as f64) * spacing;
                let vol = spacing.powi(3);
                let mut p = Particle::new(x, vol * mat.density, vol, 0, particles.len()).unwrap();
                p.v = Vec3::new(0.1 * (x.y * 9.0).sin(), 0.0, -0.5);
                particles.push(p);
            }
        }
    }
    particles.truncate(100_000);
    let mut st = MpmState::new(particles, vec![mat], grid).unwrap();
    let cfg = SimConfig { dt: 5e-5, ..Default::default() };
    st.step(&cfg).unwrap();
    let steps = 10;
    let t0 = Instant::now();
    for _ in 0..steps {
        st.step(&cfg).unwrap();
    }
    let ms = t0.elapsed().as_secs_f64() * 1e3 / steps as f64;
    println!("{} particles, {:.1} ms per step", st.particles.len(), ms);
    if std::env::args().any(|a| a == "--phases") {
        use gsdecouple::mpm::{g2p, grid_update, p2g};
        let t = Instant::now();
        p2g(&mut st.particles, &st.materials, &mut st.grid, cfg.dt).unwrap();
        let a = t.elapsed();
        let t = Instant::now();
        grid_update(&mut st.grid, cfg.dt, &Vec3::from(cfg.gravity), 2, true);
        let b = t.elapsed();
        let t = Instant::now();
        g2p(&mut st.particles, &st.materials, &st.grid, cfg.dt).unwrap();
        println!("p2g {a:?} grid {b:?} g2p {:?}", t.elapsed());
    }
}
