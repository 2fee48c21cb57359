use gsdecouple::math::Vec3;
use gsdecouple::mpm::{
    mark_sticky_nodes, simulate, FrameDiagnostics, Material, MaterialModel, MpmGrid, MpmState, Particle, SimConfig,
};

const H: f64 = 0.02;
const FLOOR: f64 = 0.1;

fn ball(center: Vec3, radius: f64, spacing: f64, density: f64) -> Vec<Particle> {
    let n = (radius / spacing).ceil() as i64;
    let vol = spacing.powi(3);
    let mut out = Vec::new();
    for k in -n..=n {
        for j in -n..=n {
            for i in -n..=n {
                let d = Vec3::new(i as f64, j as f64, k as f64) * spacing;
                if d.norm() <= radius {
                    out.push(Particle::new(center + d, density * vol, vol, 0, out.len()).unwrap());
                }
            }
        }
    }
    out
}

/// Fixed Corotated sphere (E = 3e6, nu = 0.3) 0.3 m above a sticky sheet.
fn drop_scene() -> MpmState {
    let mut grid = MpmGrid::new(Vec3::zeros(), H, [16, 16, 32]).unwrap();
    let sheet: Vec<Vec3> = (0..64 * 64)
        .map(|i| Vec3::new((i % 64) as f64 * 0.005, (i / 64) as f64 * 0.005, FLOOR))
        .collect();
    mark_sticky_nodes(&mut grid, &sheet);
    let mat = Material::new(MaterialModel::FixedCorotated, 3e6, 0.3).unwrap();
    let radius = 0.08;
    let particles = ball(Vec3::new(0.16, 0.16, FLOOR + radius + 0.3), radius, H / 2.0, mat.density);
    MpmState::new(particles, vec![mat], grid).unwrap()
}

fn run(damping: f64, frames: usize) -> (MpmState, Vec<FrameDiagnostics>) {
    let mut st = drop_scene();
    let cfg = SimConfig { dt: 1e-4, damping, ..Default::default() };
    let diag = simulate(&mut st, &cfg, &[], frames, 200, |_, _| Ok(())).unwrap();
    (st, diag)
}

#[test]
fn undamped_drop_bounces_without_penetrating() {
    let (st, diag) = run(0.0, 60);
    let m0 = diag[0].mass;
    assert!(diag.iter().all(|d| d.mass == m0));
    let pen = diag.iter().map(|d| d.max_penetration).fold(0.0, f64::max);
    assert!(pen <= H, "penetration {pen}");
    // Falls, stops on the sheet, then rebounds with most of its energy.
    let first_peak = diag[..20].iter().map(|d| d.kinetic_energy).fold(0.0, f64::max);
    let contact = diag[..40].iter().map(|d| d.kinetic_energy).fold(f64::INFINITY, f64::min);
    assert!(contact < 0.05 * first_peak);
    assert!(st.particles.iter().all(|p| p.x.z > FLOOR - H));
}

#[test]
fn damped_drop_comes_to_rest() {
    let (st, diag) = run(2.0, 150);
    let peak = diag.iter().map(|d| d.kinetic_energy).fold(0.0, f64::max);
    let last = diag.last().unwrap();
    for d in diag.iter().step_by(10) {
        println!("frame {} ke {:.3e} pen {:.4}", d.frame, d.kinetic_energy, d.max_penetration);
    }
    assert!(diag.iter().all(|d| d.mass == diag[0].mass));
    assert!(last.kinetic_energy < 1e-3 * peak, "{} of {}", last.kinetic_energy, peak);
    assert!(diag.iter().all(|d| d.max_penetration <= H));
    let bottom = st.particles.iter().map(|p| p.x.z).fold(f64::INFINITY, f64::min);
    assert!(bottom > FLOOR - H && bottom < FLOOR + 2.0 * H, "{bottom}");
}
