use super::grid::{GridFrame, IndicatorGrid};
use crate::error::{Error, Result};
use crate::knn::KdTree;
use crate::math::{bounds, Vec3};
use crate::par;

/// Oriented samples with optional per-point surface area.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct OrientedPointSet {
    pub positions: Vec<Vec3>,
    pub normals: Vec<Vec3>,
    pub weights: Option<Vec<f64>>,
}

impl OrientedPointSet {
    pub fn new(positions: Vec<Vec3>, normals: Vec<Vec3>) -> Result<Self> {
        let set = Self {
            positions,
            normals,
            weights: None,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        self.weights = Some(weights);
        self.validate()?;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.positions.len() != self.normals.len() {
            return Err(Error::invalid("positions and normals differ in length"));
        }
        if let Some(w) = &self.weights {
            if w.len() != self.positions.len() || w.iter().any(|a| !(*a >= 0.0) || !a.is_finite()) {
                return Err(Error::invalid("area weights must be finite, non-negative, one per point"));
            }
        }
        for (i, (p, n)) in self.positions.iter().zip(&self.normals).enumerate() {
            if !p.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite {
                    record: i,
                    field: "position".into(),
                });
            }
            if (n.norm() - 1.0).abs() > 1e-6 {
                return Err(Error::invalid(format!("normal {i} is not unit length")));
            }
        }
        Ok(())
    }

    /// `pi d_k^2 / k` with `d_k` the distance to the k-th nearest other sample.
    pub fn estimate_areas(&self, k: usize) -> Vec<f64> {
        let tree = KdTree::new(&self.positions);
        let k = k.min(self.len().saturating_sub(1)).max(1);
        par::map_slice(&self.positions, |p| {
            let nn = tree.knn(p, k + 1);
            let d2 = nn.last().map_or(0.0, |n| n.dist2);
            std::f64::consts::PI * d2 / k as f64
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoissonConfig {
    /// Screening weight on the sample interpolation constraint.
    pub screening: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Neighbors used for the default per-sample area estimate.
    pub area_neighbors: usize,
}

impl Default for PoissonConfig {
    fn default() -> Self {
        Self {
            screening: 4.0,
            tolerance: 1e-6,
            max_iterations: 2000,
            area_neighbors: 8,
        }
    }
}

/// Solver statistics for the last indicator build.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub residual: f64,
}

/// Screened-Poisson indicator over a padded cubic-cell frame around the samples.
pub fn build_indicator(
    points: &OrientedPointSet,
    dims: [usize; 3],
    padding: f64,
    cfg: &PoissonConfig,
) -> Result<IndicatorGrid> {
    let (lo, hi) = bounds(&points.positions).ok_or(Error::DegenerateBounds)?;
    let frame = GridFrame::around(&lo, &hi, dims, padding)?;
    build_indicator_in(points, &frame, cfg).map(|(g, _)| g)
}

/// Solves in a given frame. Values outside the frame are held at 0, and the
/// result is scaled so the mean over samples is 0.5 and the mean over
/// boundary cells is 0.
pub fn build_indicator_in(
    points: &OrientedPointSet,
    frame: &GridFrame,
    cfg: &PoissonConfig,
) -> Result<(IndicatorGrid, SolveStats)> {
    points.validate()?;
    if points.len() < 50 {
        return Err(Error::invalid(format!("need at least 50 samples, got {}", points.len())));
    }
    if frame.dims.iter().any(|d| *d < 8) {
        return Err(Error::invalid("indicator grid needs at least 8 cells per axis"));
    }
    let areas = match &points.weights {
        Some(w) => w.clone(),
        None => points.estimate_areas(cfg.area_neighbors),
    };
    let c2 = frame.cell * frame.cell;
    let alpha: Vec<f64> = areas.iter().map(|a| a / c2).collect();

    let screen = Screening::new(frame, &points.positions, &alpha, cfg.screening);
    let mut rhs = divergence(frame, points, &alpha);
    for (cell, v) in screen.rhs(0.5) {
        rhs[cell] += v;
    }

    let mg = Multigrid::new(frame.dims, screen.diagonal(frame.len()));
    let apply = |x: &[f64], out: &mut [f64]| {
        laplacian(frame.dims, 1.0, None, x, out);
        screen.apply_add(x, out);
    };
    let (x, stats) = pcg(&apply, &|r: &[f64]| mg.vcycle(r), &rhs, cfg.tolerance, cfg.max_iterations)?;

    let mut grid = IndicatorGrid::zeros(*frame);
    grid.values = x;
    let m_s = points.positions.iter().map(|p| interp(frame, &grid.values, p)).sum::<f64>() / points.len() as f64;
    let boundary: Vec<usize> = (0..frame.len())
        .filter(|&i| {
            let c = frame.coords(i);
            (0..3).any(|a| c[a] == 0 || c[a] + 1 == frame.dims[a])
        })
        .collect();
    let m_b = boundary.iter().map(|&i| grid.values[i]).sum::<f64>() / boundary.len() as f64;
    let gap = (m_s - m_b).abs();
    if !(gap > 1e-12) || !gap.is_finite() {
        return Err(Error::Numerical {
            step: 0,
            detail: "indicator is flat across samples and boundary".into(),
        });
    }
    let a = 0.5 / gap;
    for v in &mut grid.values {
        *v = a * (*v - m_b);
    }
    log::debug!("poisson solve: {} iterations, residual {:.2e}", stats.iterations, stats.residual);
    Ok((grid, stats))
}

/// Trilinear interpolation on the cell-center lattice with zero outside.
fn interp(frame: &GridFrame, x: &[f64], p: &Vec3) -> f64 {
    frame.trilinear(p).map(|(i, w)| w * x[i]).sum()
}

/// Right-hand side `D^T g` of the gradient-fit term, where `g` holds the
/// area-weighted normals splatted onto the face lattices with the sign of
/// an indicator that is 1 inside.
fn divergence(frame: &GridFrame, points: &OrientedPointSet, alpha: &[f64]) -> Vec<f64> {
    let [nx, ny, nz] = frame.dims;
    let mut rhs = vec![0.0; frame.len()];
    for axis in 0..3 {
        let mut fd = [nx, ny, nz];
        fd[axis] += 1;
        let face_index = |c: [usize; 3]| (c[2] * fd[1] + c[1]) * fd[0] + c[0];
        let mut g = vec![0.0; fd[0] * fd[1] * fd[2]];
        for ((p, n), a) in points.positions.iter().zip(&points.normals).zip(alpha) {
            let mut u = (p - frame.origin) / frame.cell - Vec3::repeat(0.5);
            u[axis] += 0.5;
            let base = u.map(f64::floor);
            let f = u - base;
            for corner in 0..8 {
                let mut w = 1.0;
                let mut c = [0usize; 3];
                let mut inside = true;
                for d in 0..3 {
                    let hi = (corner >> d) & 1 == 1;
                    let ci = base[d] as i64 + hi as i64;
                    w *= if hi { f[d] } else { 1.0 - f[d] };
                    if ci < 0 || ci >= fd[d] as i64 {
                        inside = false;
                    }
                    c[d] = ci.max(0) as usize;
                }
                if inside && w != 0.0 {
                    g[face_index(c)] -= n[axis] * a * w;
                }
            }
        }
        for idx in 0..frame.len() {
            let c = frame.coords(idx);
            let mut hi = c;
            hi[axis] += 1;
            rhs[idx] += g[face_index(c)] - g[face_index(hi)];
        }
    }
    rhs
}

/// `lambda sum_s alpha_s phi_s phi_s^T`, stored per touched cell.
struct Screening {
    lambda: f64,
    stencils: Vec<[(usize, f64); 8]>,
    alpha: Vec<f64>,
    rows: Vec<usize>,
    offsets: Vec<usize>,
    entries: Vec<(u32, f64)>,
}

impl Screening {
    fn new(frame: &GridFrame, positions: &[Vec3], alpha: &[f64], lambda: f64) -> Self {
        let stencils: Vec<[(usize, f64); 8]> = par::map_slice(positions, |p| {
            let mut s = [(usize::MAX, 0.0); 8];
            for (slot, e) in s.iter_mut().zip(frame.trilinear(p)) {
                *slot = e;
            }
            s
        });
        let mut triples: Vec<(usize, u32, f64)> = Vec::with_capacity(positions.len() * 8);
        for (s, st) in stencils.iter().enumerate() {
            for &(cell, w) in st.iter().filter(|e| e.0 != usize::MAX) {
                triples.push((cell, s as u32, w));
            }
        }
        triples.sort_by_key(|t| (t.0, t.1));
        let mut rows = Vec::new();
        let mut offsets = vec![0];
        let mut entries = Vec::with_capacity(triples.len());
        for (cell, s, w) in triples {
            if rows.last() != Some(&cell) {
                if !rows.is_empty() {
                    offsets.push(entries.len());
                }
                rows.push(cell);
            }
            entries.push((s, w));
        }
        offsets.push(entries.len());
        Self {
            lambda,
            stencils,
            alpha: alpha.to_vec(),
            rows,
            offsets,
            entries,
        }
    }

    fn row(&self, r: usize) -> &[(u32, f64)] {
        &self.entries[self.offsets[r]..self.offsets[r + 1]]
    }

    fn diagonal(&self, n: usize) -> Vec<f64> {
        let mut d = vec![0.0; n];
        for (r, &cell) in self.rows.iter().enumerate() {
            d[cell] = self.lambda * self.row(r).iter().map(|(s, w)| self.alpha[*s as usize] * w * w).sum::<f64>();
        }
        d
    }

    fn rhs(&self, target: f64) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.rows.iter().enumerate().map(move |(r, &cell)| {
            let v: f64 = self.row(r).iter().map(|(s, w)| self.alpha[*s as usize] * w).sum();
            (cell, self.lambda * target * v)
        })
    }

    fn apply_add(&self, x: &[f64], out: &mut [f64]) {
        let vals: Vec<f64> = par::map_slice(&self.stencils, |st| {
            st.iter().filter(|e| e.0 != usize::MAX).map(|(c, w)| w * x[*c]).sum()
        });
        let add = par::map_range(self.rows.len(), |r| {
            self.row(r)
                .iter()
                .map(|(s, w)| self.alpha[*s as usize] * w * vals[*s as usize])
                .sum::<f64>()
        });
        for (r, &cell) in self.rows.iter().enumerate() {
            out[cell] += self.lambda * add[r];
        }
    }
}

/// `out = scale (6 x_i - sum of 6-neighbors) + diag_i x_i`, zero outside.
fn laplacian(dims: [usize; 3], scale: f64, diag: Option<&[f64]>, x: &[f64], out: &mut [f64]) {
    let [nx, ny, nz] = dims;
    let plane = nx * ny;
    par::for_each_chunk_mut(out, plane, |k, slab| {
        for j in 0..ny {
            for i in 0..nx {
                let idx = k * plane + j * nx + i;
                let mut s = 6.0 * x[idx];
                if i > 0 {
                    s -= x[idx - 1];
                }
                if i + 1 < nx {
                    s -= x[idx + 1];
                }
                if j > 0 {
                    s -= x[idx - nx];
                }
                if j + 1 < ny {
                    s -= x[idx + nx];
                }
                if k > 0 {
                    s -= x[idx - plane];
                }
                if k + 1 < nz {
                    s -= x[idx + plane];
                }
                let mut v = scale * s;
                if let Some(d) = diag {
                    v += d[idx] * x[idx];
                }
                slab[j * nx + i] = v;
            }
        }
    });
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    par::sum_range(a.len(), |i| a[i] * b[i])
}

/// Preconditioned conjugate gradient from a zero start.
pub(crate) fn pcg(
    apply: &(dyn Fn(&[f64], &mut [f64]) + Sync),
    precond: &(dyn Fn(&[f64]) -> Vec<f64> + Sync),
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveStats)> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        return Ok((x, SolveStats::default()));
    }
    let mut r = b.to_vec();
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut residual = 1.0;
    for it in 1..=max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Numerical {
                step: it,
                detail: "indicator system lost positive definiteness".into(),
            });
        }
        let a = rz / pap;
        par::for_each_mut(&mut x, |i, xi| *xi += a * p[i]);
        par::for_each_mut(&mut r, |i, ri| *ri -= a * ap[i]);
        residual = dot(&r, &r).sqrt() / b_norm;
        if residual < tol {
            return Ok((x, SolveStats { iterations: it, residual }));
        }
        z = precond(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        par::for_each_mut(&mut p, |i, pi| *pi = z[i] + beta * *pi);
    }
    Err(Error::NotConverged {
        iterations: max_iter,
        residual,
    })
}

/// Cell-centered geometric multigrid V-cycle for `L + diag`, used as a
/// symmetric preconditioner.
struct Multigrid {
    levels: Vec<Level>,
}

struct Level {
    dims: [usize; 3],
    scale: f64,
    diag: Vec<f64>,
}

const SMOOTH_STEPS: usize = 2;
const OMEGA: f64 = 0.8;

impl Multigrid {
    fn new(dims: [usize; 3], diag: Vec<f64>) -> Self {
        let mut levels = vec![Level { dims, scale: 1.0, diag }];
        loop {
            let last = levels.last().unwrap();
            if last.dims.iter().any(|d| *d < 4) {
                break;
            }
            let cd = last.dims.map(|d| d.div_ceil(2));
            let mut cdiag = vec![0.0; cd[0] * cd[1] * cd[2]];
            restrict(last.dims, cd, &last.diag, &mut cdiag);
            let scale = last.scale * 0.25;
            levels.push(Level {
                dims: cd,
                scale,
                diag: cdiag,
            });
        }
        Self { levels }
    }

    fn vcycle(&self, b: &[f64]) -> Vec<f64> {
        self.cycle(0, b)
    }

    fn cycle(&self, l: usize, b: &[f64]) -> Vec<f64> {
        let lv = &self.levels[l];
        let n = b.len();
        let mut x = vec![0.0; n];
        let mut tmp = vec![0.0; n];
        let coarsest = l + 1 == self.levels.len();
        let steps = if coarsest { 60 } else { SMOOTH_STEPS };
        for _ in 0..steps {
            self.jacobi(lv, b, &mut x, &mut tmp);
        }
        if coarsest {
            return x;
        }
        laplacian(lv.dims, lv.scale, Some(&lv.diag), &x, &mut tmp);
        par::for_each_mut(&mut tmp, |i, t| *t = b[i] - *t);
        let cl = &self.levels[l + 1];
        let mut rc = vec![0.0; cl.diag.len()];
        restrict(lv.dims, cl.dims, &tmp, &mut rc);
        let ec = self.cycle(l + 1, &rc);
        prolong_add(lv.dims, cl.dims, &ec, &mut x);
        for _ in 0..SMOOTH_STEPS {
            self.jacobi(lv, b, &mut x, &mut tmp);
        }
        x
    }

    fn jacobi(&self, lv: &Level, b: &[f64], x: &mut [f64], tmp: &mut [f64]) {
        laplacian(lv.dims, lv.scale, Some(&lv.diag), x, tmp);
        let s6 = 6.0 * lv.scale;
        par::for_each_mut(x, |i, xi| *xi += OMEGA * (b[i] - tmp[i]) / (s6 + lv.diag[i]));
    }
}

/// Coarse value = sum of the (up to 8) children / 8.
fn restrict(fd: [usize; 3], cd: [usize; 3], fine: &[f64], coarse: &mut [f64]) {
    let cplane = cd[0] * cd[1];
    par::for_each_chunk_mut(coarse, cplane, |kc, slab| {
        for jc in 0..cd[1] {
            for ic in 0..cd[0] {
                let mut s = 0.0;
                for k in 2 * kc..(2 * kc + 2).min(fd[2]) {
                    for j in 2 * jc..(2 * jc + 2).min(fd[1]) {
                        for i in 2 * ic..(2 * ic + 2).min(fd[0]) {
                            s += fine[(k * fd[1] + j) * fd[0] + i];
                        }
                    }
                }
                slab[jc * cd[0] + ic] = s * 0.125;
            }
        }
    });
}

/// Piecewise-constant prolongation, added into `fine`.
fn prolong_add(fd: [usize; 3], cd: [usize; 3], coarse: &[f64], fine: &mut [f64]) {
    let plane = fd[0] * fd[1];
    par::for_each_chunk_mut(fine, plane, |k, slab| {
        let kc = k / 2;
        for j in 0..fd[1] {
            let row = (kc * cd[1] + j / 2) * cd[0];
            for i in 0..fd[0] {
                slab[j * fd[0] + i] += coarse[row + i / 2];
            }
        }
    });
}
