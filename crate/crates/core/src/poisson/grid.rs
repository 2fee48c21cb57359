use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::math::Vec3;

const MAGIC: &[u8; 4] = b"GSIG";
const HEADER: usize = 64;

/// Cell-centered scalar field on a uniform grid. Cell `(i, j, k)` has its
/// center at `origin + (i + 0.5, j + 0.5, k + 0.5) * cell`; `x` varies fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct IndicatorGrid {
    pub origin: Vec3,
    pub cell: f64,
    pub dims: [usize; 3],
    pub values: Vec<f64>,
}

/// Position and resolution of a grid without its values.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridFrame {
    pub origin: Vec3,
    pub cell: f64,
    pub dims: [usize; 3],
}

impl GridFrame {
    /// Cubic-cell frame around `[lo, hi]`, enlarged by `padding` times the
    /// largest extent on every side.
    pub fn around(lo: &Vec3, hi: &Vec3, dims: [usize; 3], padding: f64) -> Result<Self> {
        let ext = hi - lo;
        let largest = ext.max();
        if !(largest > 0.0) || !largest.is_finite() {
            return Err(Error::DegenerateBounds);
        }
        let pad = padding.max(0.0) * largest;
        let cell = (0..3)
            .map(|a| (ext[a] + 2.0 * pad) / dims[a] as f64)
            .fold(0.0, f64::max);
        let mid = (lo + hi) * 0.5;
        let half = Vec3::new(dims[0] as f64, dims[1] as f64, dims[2] as f64) * (0.5 * cell);
        Ok(Self {
            origin: mid - half,
            cell,
            dims,
        })
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn max_corner(&self) -> Vec3 {
        self.origin + Vec3::new(self.dims[0] as f64, self.dims[1] as f64, self.dims[2] as f64) * self.cell
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.dims[1] + j) * self.dims[0] + i
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.dims[0];
        let j = (idx / self.dims[0]) % self.dims[1];
        [i, j, idx / (self.dims[0] * self.dims[1])]
    }

    pub fn cell_center(&self, i: usize, j: usize, k: usize) -> Vec3 {
        self.origin + Vec3::new(i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5) * self.cell
    }

    /// Continuous index coordinates, so that cell centers land on integers.
    pub fn to_lattice(&self, p: &Vec3) -> Vec3 {
        (p - self.origin) / self.cell - Vec3::repeat(0.5)
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        let hi = self.max_corner();
        (0..3).all(|a| p[a] >= self.origin[a] && p[a] <= hi[a])
    }

    pub fn overlaps(&self, other: &GridFrame) -> bool {
        let (a0, a1) = (self.origin, self.max_corner());
        let (b0, b1) = (other.origin, other.max_corner());
        (0..3).all(|d| a0[d] < b1[d] && b0[d] < a1[d])
    }

    /// 6-neighbors of a cell that lie inside the grid.
    pub fn neighbors6(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        let [i, j, k] = self.coords(idx);
        let [nx, ny, nz] = self.dims;
        let cand = [
            (i > 0).then(|| idx - 1),
            (i + 1 < nx).then(|| idx + 1),
            (j > 0).then(|| idx - nx),
            (j + 1 < ny).then(|| idx + nx),
            (k > 0).then(|| idx - nx * ny),
            (k + 1 < nz).then(|| idx + nx * ny),
        ];
        cand.into_iter().flatten()
    }

    /// 26-neighbors of a cell that lie inside the grid.
    pub fn neighbors26(&self, idx: usize) -> Vec<usize> {
        let [i, j, k] = self.coords(idx);
        let mut out = Vec::with_capacity(26);
        for dk in -1i64..=1 {
            for dj in -1i64..=1 {
                for di in -1i64..=1 {
                    if di == 0 && dj == 0 && dk == 0 {
                        continue;
                    }
                    let (a, b, c) = (i as i64 + di, j as i64 + dj, k as i64 + dk);
                    if a >= 0
                        && b >= 0
                        && c >= 0
                        && (a as usize) < self.dims[0]
                        && (b as usize) < self.dims[1]
                        && (c as usize) < self.dims[2]
                    {
                        out.push(self.index(a as usize, b as usize, c as usize));
                    }
                }
            }
        }
        out
    }

    /// Trilinear stencil of cell-center lattice corners around `p`. Corners
    /// outside the grid are dropped.
    pub fn trilinear(&self, p: &Vec3) -> impl Iterator<Item = (usize, f64)> + '_ {
        let u = self.to_lattice(p);
        let base = u.map(f64::floor);
        let f = u - base;
        (0..8).filter_map(move |corner| {
            let mut w = 1.0;
            let mut c = [0i64; 3];
            for a in 0..3 {
                let hi = (corner >> a) & 1 == 1;
                c[a] = base[a] as i64 + hi as i64;
                w *= if hi { f[a] } else { 1.0 - f[a] };
                if c[a] < 0 || c[a] >= self.dims[a] as i64 {
                    return None;
                }
            }
            (w != 0.0).then(|| (self.index(c[0] as usize, c[1] as usize, c[2] as usize), w))
        })
    }
}

impl IndicatorGrid {
    pub fn zeros(frame: GridFrame) -> Self {
        Self {
            origin: frame.origin,
            cell: frame.cell,
            dims: frame.dims,
            values: vec![0.0; frame.len()],
        }
    }

    pub fn frame(&self) -> GridFrame {
        GridFrame {
            origin: self.origin,
            cell: self.cell,
            dims: self.dims,
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.frame().index(i, j, k)]
    }

    pub fn cell_center(&self, idx: usize) -> Vec3 {
        let f = self.frame();
        let [i, j, k] = f.coords(idx);
        f.cell_center(i, j, k)
    }

    /// Trilinear value at world point `p`; zero outside the grid box, edge
    /// values clamped within the outer half cell.
    pub fn sample(&self, p: &Vec3) -> f64 {
        let f = self.frame();
        if !f.contains(p) {
            return 0.0;
        }
        let u = f.to_lattice(p);
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        for a in 0..3 {
            let n = self.dims[a];
            let x = u[a].clamp(0.0, (n - 1) as f64);
            let b = (x.floor() as usize).min(n.saturating_sub(2));
            base[a] = b;
            frac[a] = if n > 1 { x - b as f64 } else { 0.0 };
        }
        let mut acc = 0.0;
        for corner in 0..8 {
            let mut w = 1.0;
            let mut c = [0usize; 3];
            for a in 0..3 {
                let hi = (corner >> a) & 1 == 1;
                c[a] = (base[a] + hi as usize).min(self.dims[a] - 1);
                w *= if hi { frac[a] } else { 1.0 - frac[a] };
            }
            if w != 0.0 {
                acc += w * self.values[f.index(c[0], c[1], c[2])];
            }
        }
        acc
    }

    /// Central-difference gradient at a cell, in world units.
    pub fn gradient(&self, idx: usize) -> Vec3 {
        let f = self.frame();
        let c = f.coords(idx);
        let mut g = Vec3::zeros();
        for a in 0..3 {
            let mut lo = c;
            let mut hi = c;
            lo[a] = c[a].saturating_sub(1);
            hi[a] = (c[a] + 1).min(self.dims[a] - 1);
            let span = (hi[a] - lo[a]) as f64;
            if span > 0.0 {
                g[a] = (self.values[f.index(hi[0], hi[1], hi[2])] - self.values[f.index(lo[0], lo[1], lo[2])])
                    / (span * self.cell);
            }
        }
        g
    }

    pub fn count_above(&self, level: f64) -> usize {
        self.values.iter().filter(|v| **v > level).count()
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        let mut head = [0u8; HEADER];
        head[..4].copy_from_slice(MAGIC);
        for a in 0..3 {
            head[4 + 4 * a..8 + 4 * a].copy_from_slice(&(self.dims[a] as u32).to_le_bytes());
        }
        for a in 0..3 {
            head[16 + 8 * a..24 + 8 * a].copy_from_slice(&self.origin[a].to_le_bytes());
        }
        head[40..48].copy_from_slice(&self.cell.to_le_bytes());
        w.write_all(&head)?;
        let body: Vec<u8> = self.values.iter().flat_map(|v| (*v as f32).to_le_bytes()).collect();
        w.write_all(&body)?;
        Ok(())
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self> {
        let mut head = [0u8; HEADER];
        r.read_exact(&mut head)?;
        if &head[..4] != MAGIC {
            return Err(Error::format("bad indicator grid magic"));
        }
        let u32_at = |o: usize| u32::from_le_bytes(head[o..o + 4].try_into().unwrap()) as usize;
        let f64_at = |o: usize| f64::from_le_bytes(head[o..o + 8].try_into().unwrap());
        let dims = [u32_at(4), u32_at(8), u32_at(12)];
        let origin = Vec3::new(f64_at(16), f64_at(24), f64_at(32));
        let cell = f64_at(40);
        if !(cell > 0.0) || dims.iter().any(|d| *d == 0) {
            return Err(Error::format("indicator grid header has empty dims or cell"));
        }
        let n = dims[0] * dims[1] * dims[2];
        let mut body = vec![0u8; n * 4];
        r.read_exact(&mut body)?;
        let values = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        Ok(Self {
            origin,
            cell,
            dims,
            values,
        })
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| Error::at_path(path, e))?;
        self.write(std::io::BufWriter::new(f))
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::at_path(path, e))?;
        Self::read(std::io::BufReader::new(f))
    }
}

/// Trilinear resampling of `source` onto `target`. Cells outside the
/// source box read 0.
pub fn remap_grid(source: &IndicatorGrid, target: &GridFrame) -> Result<IndicatorGrid> {
    if !source.frame().overlaps(target) {
        return Err(Error::NoOverlap);
    }
    let values = crate::par::map_range(target.len(), |idx| {
        let [i, j, k] = target.coords(idx);
        source.sample(&target.cell_center(i, j, k))
    });
    Ok(IndicatorGrid {
        origin: target.origin,
        cell: target.cell,
        dims: target.dims,
        values,
    })
}

/// World-space centers of all cells with `X > 0.5`.
pub fn extract_interior_points(grid: &IndicatorGrid) -> Vec<Vec3> {
    grid.values
        .iter()
        .enumerate()
        .filter(|(_, v)| **v > 0.5)
        .map(|(i, _)| grid.cell_center(i))
        .collect()
}
