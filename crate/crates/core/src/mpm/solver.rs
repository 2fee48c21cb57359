use serde::{Deserialize, Serialize};

use super::grid::{MpmGrid, Stencil};
use super::material::Material;
use crate::error::{Error, Result};
use crate::math::{Mat3, Vec3};
use crate::par;

#[derive(Clone, Debug, PartialEq)]
pub struct Particle {
    pub x: Vec3,
    pub v: Vec3,
    pub mass: f64,
    pub volume: f64,
    /// Elastic deformation gradient.
    pub f: Mat3,
    /// Affine velocity field.
    pub c: Mat3,
    pub material: usize,
    /// Index of the Gaussian kernel this particle carries.
    pub kernel: usize,
}

impl Particle {
    pub fn new(x: Vec3, mass: f64, volume: f64, material: usize, kernel: usize) -> Result<Self> {
        if !(mass > 0.0 && volume > 0.0 && mass.is_finite() && volume.is_finite()) {
            return Err(Error::invalid("particle mass and volume must be positive"));
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("particle position is not finite"));
        }
        Ok(Self {
            x,
            v: Vec3::zeros(),
            mass,
            volume,
            f: Mat3::identity(),
            c: Mat3::zeros(),
            material,
            kernel,
        })
    }
}

fn default_band() -> usize {
    2
}

fn default_gravity() -> [f64; 3] {
    [0.0, 0.0, -9.8]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    #[serde(default = "default_gravity")]
    pub gravity: [f64; 3],
    /// Width in nodes of the zero-velocity band at the domain boundary; 0 disables it.
    #[serde(default = "default_band")]
    pub boundary_band: usize,
    #[serde(default)]
    pub sticky: bool,
    /// Grid velocity damping rate in 1/s: free node velocities are scaled by
    /// `exp(-damping dt)` each step. 0 disables it.
    #[serde(default)]
    pub damping: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-4,
            gravity: default_gravity(),
            boundary_band: default_band(),
            sticky: true,
            damping: 0.0,
        }
    }
}

/// Stencil plus the quantities each particle scatters.
struct Scatter {
    stencil: Stencil,
    mass: f64,
    mv: Vec3,
    affine: Mat3,
}

/// Moves particles outside the 2-cell interior margin back onto it and
/// returns how many moved.
pub fn clamp_to_margin(particles: &mut [Particle], grid: &MpmGrid) -> usize {
    let mut moved = 0;
    for p in particles.iter_mut() {
        let mut hit = false;
        for a in 0..3 {
            let lo = grid.origin[a] + 2.0 * grid.h;
            let hi = grid.origin[a] + (grid.dims[a] as f64 - 3.0) * grid.h;
            if p.x[a] < lo || p.x[a] > hi || !p.x[a].is_finite() {
                p.x[a] = if p.x[a] > hi { hi } else { lo };
                hit = true;
            }
        }
        moved += hit as usize;
    }
    moved
}

/// Base-cell layers per scatter slab. Slab `s` writes node layers
/// `[4s, 4s + 6)`, so even slabs never overlap each other and neither do odd ones.
const SLAB: usize = 4;

/// Particle-to-grid transfer of mass and momentum, including the MLS stress
/// term. Particles are sorted by base cell and scattered slab by slab, even
/// slabs before odd ones, so every node sums its contributions in an order
/// that does not depend on the thread count.
/// Returns the number of particles clamped into the margin.
pub fn p2g(particles: &mut [Particle], materials: &[Material], grid: &mut MpmGrid, dt: f64) -> Result<usize> {
    let clamped = clamp_to_margin(particles, grid);
    let h = grid.h;
    let scale = 4.0 / (h * h);
    let prepared: Vec<Scatter> = {
        let g = &*grid;
        par::map_slice(particles, |p| {
            // Failures are flagged with a NaN mass and reported below.
            let stress = match materials.get(p.material).map(|m| m.pk1(&p.f)) {
                Some(Ok(pk1)) => pk1 * p.f.transpose(),
                _ => Mat3::repeat(f64::NAN),
            };
            Scatter {
                stencil: Stencil::new(g, &p.x),
                mass: if stress[(0, 0)].is_nan() { f64::NAN } else { p.mass },
                mv: p.v * p.mass,
                affine: p.c * p.mass - stress * (scale * dt * p.volume),
            }
        })
    };
    if let Some(i) = prepared.iter().position(|s| s.mass.is_nan()) {
        let p = &particles[i];
        return Err(match materials.get(p.material) {
            None => Error::invalid(format!("particle {i} references material {}", p.material)),
            Some(m) => m.pk1(&p.f).err().unwrap_or_else(|| Error::invalid(format!("particle {i} has a non-finite stress"))),
        });
    }
    // Counting sort of particles by base cell, stable in particle index.
    let n = grid.len();
    let mut start = vec![0u32; n + 1];
    let keys: Vec<usize> = prepared
        .iter()
        .map(|s| grid.index(s.stencil.base[0], s.stencil.base[1], s.stencil.base[2]))
        .collect();
    for &k in &keys {
        start[k + 1] += 1;
    }
    for i in 0..n {
        start[i + 1] += start[i];
    }
    let mut fill = start.clone();
    let mut order = vec![0u32; prepared.len()];
    for (pi, &k) in keys.iter().enumerate() {
        order[fill[k] as usize] = pi as u32;
        fill[k] += 1;
    }

    let dims = grid.dims;
    let layer = dims[0] * dims[1];
    let scatter = |slab: usize, first_layer: usize, out: &mut [(f64, Vec3)]| {
        let z0 = slab * SLAB;
        if z0 >= dims[2] {
            return;
        }
        let z1 = (z0 + SLAB).min(dims[2]);
        let range = start[z0 * layer] as usize..start[z1 * layer] as usize;
        for &pi in &order[range] {
            let s = &prepared[pi as usize];
            let [bx, by, bz] = s.stencil.base;
            let w = &s.stencil.w;
            // mv + affine (o - fx) h, built up one axis at a time.
            let cols = s.affine * h;
            let origin = s.mv - cols * s.stencil.fx;
            for oz in 0..3 {
                let pz = origin + cols.column(2) * oz as f64;
                for oy in 0..3 {
                    let py = pz + cols.column(1) * oy as f64;
                    let wyz = w[2][oz] * w[1][oy];
                    let row = ((bz + oz - first_layer) * dims[1] + by + oy) * dims[0] + bx;
                    for ox in 0..3 {
                        let wt = wyz * w[0][ox];
                        let node = &mut out[row + ox];
                        node.0 += wt * s.mass;
                        node.1 += (py + cols.column(0) * ox as f64) * wt;
                    }
                }
            }
        }
    };
    let mut acc = vec![(0.0, Vec3::zeros()); n];
    par::for_each_chunk_mut(&mut acc, 2 * SLAB * layer, |m, chunk| scatter(2 * m, 2 * SLAB * m, chunk));
    if SLAB * layer < n {
        par::for_each_chunk_mut(&mut acc[SLAB * layer..], 2 * SLAB * layer, |m, chunk| {
            scatter(2 * m + 1, 2 * SLAB * m + SLAB, chunk)
        });
    }
    for (idx, (m, mom)) in acc.into_iter().enumerate() {
        grid.mass[idx] = m;
        grid.momentum[idx] = mom;
    }
    Ok(clamped)
}

/// Forward-Euler grid update with gravity, sticky nodes, and the boundary band.
pub fn grid_update(grid: &mut MpmGrid, dt: f64, gravity: &Vec3, boundary_band: usize, sticky: bool) {
    grid_update_damped(grid, dt, gravity, boundary_band, sticky, 1.0)
}

fn grid_update_damped(grid: &mut MpmGrid, dt: f64, gravity: &Vec3, boundary_band: usize, sticky: bool, keep: f64) {
    let dims = grid.dims;
    let (mass, momentum, flags) = (&grid.mass, &grid.momentum, &grid.sticky);
    let index_dims = |idx: usize| {
        let i = idx % dims[0];
        let j = (idx / dims[0]) % dims[1];
        [i, j, idx / (dims[0] * dims[1])]
    };
    par::for_each_mut(&mut grid.velocity, |idx, v| {
        let m = mass[idx];
        if m <= 0.0 {
            *v = Vec3::zeros();
            return;
        }
        let c = index_dims(idx);
        let in_band = (0..3).any(|a| c[a] < boundary_band || c[a] + boundary_band >= dims[a]);
        if in_band || (sticky && flags[idx]) {
            *v = Vec3::zeros();
        } else {
            *v = (momentum[idx] / m + gravity * dt) * keep;
        }
    });
}

/// Grid-to-particle transfer, advection, deformation update and plastic projection.
pub fn g2p(particles: &mut [Particle], materials: &[Material], grid: &MpmGrid, dt: f64) -> Result<()> {
    let h = grid.h;
    let scale = 4.0 / (h * h);
    let failures: Vec<Option<String>> = {
        let mut out = vec![None; particles.len()];
        let results = par::map_slice(particles, |p| {
            let s = Stencil::new(grid, &p.x);
            let mut v = Vec3::zeros();
            // Columns of sum w v_n o^T; the fx part is subtracted afterwards.
            let mut q = [Vec3::zeros(); 3];
            for oz in 0..3 {
                for oy in 0..3 {
                    let row = grid.index(s.base[0], s.base[1] + oy, s.base[2] + oz);
                    let wyz = s.w[2][oz] * s.w[1][oy];
                    let mut vy = Vec3::zeros();
                    for ox in 0..3 {
                        let wv = grid.velocity[row + ox] * (wyz * s.w[0][ox]);
                        vy += wv;
                        q[0] += wv * ox as f64;
                    }
                    v += vy;
                    q[1] += vy * oy as f64;
                    q[2] += vy * oz as f64;
                }
            }
            let b = (Mat3::from_columns(&q) - v * s.fx.transpose()) * h;
            let c = b * scale;
            let trial = (Mat3::identity() + c * dt) * p.f;
            let f = materials[p.material].project(&trial);
            (v, c, f)
        });
        for (i, (p, (v, c, f))) in particles.iter_mut().zip(results).enumerate() {
            match f {
                Ok(f) if v.iter().all(|x| x.is_finite()) && f.iter().all(|x| x.is_finite()) => {
                    p.v = v;
                    p.c = c;
                    p.x += v * dt;
                    p.f = f;
                }
                Ok(_) => out[i] = Some(format!("particle {i} has a non-finite velocity or deformation")),
                Err(e) => out[i] = Some(format!("particle {i}: {e}")),
            }
        }
        out
    };
    match failures.into_iter().flatten().next() {
        Some(detail) => Err(Error::Numerical { step: 0, detail }),
        None => Ok(()),
    }
}

/// Complete simulation state.
#[derive(Clone, Debug)]
pub struct MpmState {
    pub particles: Vec<Particle>,
    pub materials: Vec<Material>,
    pub grid: MpmGrid,
    pub steps: usize,
    /// Particles clamped back into the grid margin, summed over all steps.
    pub clamped: usize,
}

impl MpmState {
    pub fn new(particles: Vec<Particle>, materials: Vec<Material>, grid: MpmGrid) -> Result<Self> {
        for m in &materials {
            m.validate()?;
        }
        if let Some(p) = particles.iter().find(|p| p.material >= materials.len()) {
            return Err(Error::invalid(format!("particle references material {}", p.material)));
        }
        Ok(Self {
            particles,
            materials,
            grid,
            steps: 0,
            clamped: 0,
        })
    }

    /// Largest stable step `0.3 h / max(|v| + sqrt(E / rho))`.
    pub fn max_dt(&self) -> f64 {
        let speed = self
            .particles
            .iter()
            .map(|p| p.v.norm() + self.materials[p.material].wave_speed())
            .fold(0.0, f64::max);
        if speed > 0.0 {
            0.3 * self.grid.h / speed
        } else {
            f64::INFINITY
        }
    }

    pub fn step(&mut self, cfg: &SimConfig) -> Result<()> {
        let dt = cfg.dt;
        let max_dt = self.max_dt();
        if !(dt >= 0.0) || dt > max_dt {
            return Err(Error::Cfl { dt, max_dt });
        }
        self.clamped += p2g(&mut self.particles, &self.materials, &mut self.grid, dt)?;
        if !(cfg.damping >= 0.0) {
            return Err(Error::invalid("damping must be non-negative"));
        }
        let keep = (-cfg.damping * dt).exp();
        grid_update_damped(&mut self.grid, dt, &Vec3::from(cfg.gravity), cfg.boundary_band, cfg.sticky, keep);
        g2p(&mut self.particles, &self.materials, &self.grid, dt).map_err(|e| match e {
            Error::Numerical { detail, .. } => Error::Numerical { step: self.steps, detail },
            other => other,
        })?;
        self.steps += 1;
        Ok(())
    }

    /// Particle mass summed in index order.
    pub fn total_mass(&self) -> f64 {
        self.particles.iter().map(|p| p.mass).sum()
    }

    pub fn momentum(&self) -> Vec3 {
        self.particles.iter().map(|p| p.v * p.mass).sum()
    }

    pub fn kinetic_energy(&self) -> f64 {
        self.particles.iter().map(|p| 0.5 * p.mass * p.v.norm_squared()).sum()
    }

    pub fn max_penetration(&self) -> f64 {
        self.particles.iter().map(|p| self.grid.penetration(&p.x)).fold(0.0, f64::max)
    }
}
