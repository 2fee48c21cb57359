//! MLS-MPM continuum simulation of decoupled objects against sticky scenes.

mod align;
mod grid;
mod kinematics;
mod material;
mod solver;

pub use align::{gravity_align, ransac_plane, Plane, RansacConfig};
pub use grid::{mark_sticky_nodes, MpmGrid};
pub use kinematics::{advect_gaussians, particles_from_kernels};
pub use material::{
    drucker_prager_return_map, drucker_prager_yield, fixed_corotated_energy, fixed_corotated_pk1, hencky_energy,
    hencky_pk1, rotation_svd, Material, MaterialModel,
};
pub use solver::{clamp_to_margin, g2p, grid_update, p2g, MpmState, Particle, SimConfig};

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::math::Vec3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "shape")]
pub enum Region {
    Sphere { center: [f64; 3], radius: f64 },
    Box { min: [f64; 3], max: [f64; 3] },
}

impl Region {
    pub fn contains(&self, x: &Vec3) -> bool {
        match self {
            Region::Sphere { center, radius } => (x - Vec3::from(*center)).norm() <= *radius,
            Region::Box { min, max } => (0..3).all(|a| x[a] >= min[a] && x[a] <= max[a]),
        }
    }
}

/// Velocity kick applied to every particle in `region` at the start of `frame`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Impulse {
    pub frame: usize,
    pub region: Region,
    pub dv: [f64; 3],
}

/// Adds `dv` to every particle inside `region`; returns how many changed.
pub fn apply_impulse(particles: &mut [Particle], region: &Region, dv: &Vec3) -> usize {
    let mut n = 0;
    for p in particles.iter_mut().filter(|p| region.contains(&p.x)) {
        p.v += dv;
        n += 1;
    }
    n
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FrameDiagnostics {
    pub frame: usize,
    pub mass: f64,
    pub momentum: [f64; 3],
    pub kinetic_energy: f64,
    pub max_penetration: f64,
}

impl FrameDiagnostics {
    pub fn of(frame: usize, state: &MpmState) -> Self {
        let m = state.momentum();
        Self {
            frame,
            mass: state.total_mass(),
            momentum: [m.x, m.y, m.z],
            kinetic_energy: state.kinetic_energy(),
            max_penetration: state.max_penetration(),
        }
    }
}

pub fn write_diagnostics<W: Write>(mut w: W, rows: &[FrameDiagnostics]) -> Result<()> {
    writeln!(w, "frame,mass,momentum_x,momentum_y,momentum_z,kinetic_energy,max_penetration")?;
    for r in rows {
        writeln!(
            w,
            "{},{:e},{:e},{:e},{:e},{:e},{:e}",
            r.frame, r.mass, r.momentum[0], r.momentum[1], r.momentum[2], r.kinetic_energy, r.max_penetration
        )?;
    }
    Ok(())
}

/// Runs `frames` frames of `steps_per_frame` steps, applying each impulse at
/// the start of its frame. `on_frame` sees frame 0 before any step and every
/// frame after its steps.
pub fn simulate(
    state: &mut MpmState,
    cfg: &SimConfig,
    impulses: &[Impulse],
    frames: usize,
    steps_per_frame: usize,
    mut on_frame: impl FnMut(usize, &MpmState) -> Result<()>,
) -> Result<Vec<FrameDiagnostics>> {
    let mut diag = vec![FrameDiagnostics::of(0, state)];
    on_frame(0, state)?;
    for frame in 0..frames {
        for imp in impulses.iter().filter(|i| i.frame == frame) {
            apply_impulse(&mut state.particles, &imp.region, &Vec3::from(imp.dv));
        }
        for _ in 0..steps_per_frame {
            state.step(cfg)?;
        }
        diag.push(FrameDiagnostics::of(frame + 1, state));
        on_frame(frame + 1, state)?;
    }
    Ok(diag)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn particles() -> Vec<Particle> {
        (0..10)
            .map(|i| Particle::new(Vec3::new(0.5 + 0.01 * i as f64, 0.5, 0.5), 0.5 + i as f64, 1e-3, 0, i).unwrap())
            .collect()
    }

    #[test]
    fn impulse_bookkeeping() {
        let mut ps = particles();
        let before = ps.clone();
        let empty = Region::Sphere { center: [9.0; 3], radius: 0.1 };
        assert_eq!(apply_impulse(&mut ps, &empty, &Vec3::x()), 0);
        assert_eq!(ps, before);
        let all = Region::Box { min: [0.0; 3], max: [1.0; 3] };
        assert_eq!(apply_impulse(&mut ps, &all, &Vec3::x()), 10);
        let total: f64 = ps.iter().map(|p| p.mass).sum();
        let gained: Vec3 = ps.iter().map(|p| p.v * p.mass).sum();
        assert!((gained - Vec3::new(total, 0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn impulses_fire_on_their_frame() {
        let grid = MpmGrid::new(Vec3::zeros(), 0.1, [12, 12, 12]).unwrap();
        let mat = Material::new(MaterialModel::FixedCorotated, 1e3, 0.3).unwrap();
        let mut st = MpmState::new(particles(), vec![mat], grid).unwrap();
        let cfg = SimConfig { dt: 1e-4, gravity: [0.0; 3], boundary_band: 0, sticky: false, damping: 0.0 };
        let imp = Impulse { frame: 10, region: Region::Box { min: [0.0; 3], max: [1.0; 3] }, dv: [1.0, 0.0, 0.0] };
        let diag = simulate(&mut st, &cfg, &[imp], 12, 1, |_, _| Ok(())).unwrap();
        assert_eq!(diag.len(), 13);
        for d in &diag[..=10] {
            assert!(d.momentum[0].abs() < 1e-12);
        }
        assert!(diag[11].momentum[0] > 1.0);
        let mut csv = Vec::new();
        write_diagnostics(&mut csv, &diag).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 14);
    }
}
