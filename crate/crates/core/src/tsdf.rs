//! Truncated signed-distance fusion of masked depth maps into colored,
//! oriented proxy points.

use std::collections::HashMap;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::math::Vec3;
use crate::par;
use crate::poisson::{GridFrame, OrientedPointSet};
use crate::raster::RasterImage;
use crate::splat::Camera;

const MAGIC: &[u8; 4] = b"GSTV";

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Voxel {
    /// Signed distance in units of the truncation band, in `[-1, 1]`.
    pub sdf: f64,
    pub weight: f64,
    pub color: [f64; 3],
}

#[derive(Clone, Debug, PartialEq)]
pub struct TsdfVolume {
    pub frame: GridFrame,
    pub truncation: f64,
    pub voxels: Vec<Voxel>,
}

/// Colored oriented points on the fused zero level.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ProxyPoints {
    pub points: OrientedPointSet,
    pub colors: Vec<[f64; 3]>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExtractConfig {
    pub min_weight: f64,
    pub largest_component: bool,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        Self {
            min_weight: 2.0,
            largest_component: true,
        }
    }
}

impl TsdfVolume {
    /// Empty volume. `truncation` defaults to four cells when `None`.
    pub fn new(frame: GridFrame, truncation: Option<f64>) -> Result<Self> {
        let truncation = truncation.unwrap_or(4.0 * frame.cell);
        if !(truncation > frame.cell) {
            return Err(Error::invalid("truncation band must exceed the voxel size"));
        }
        Ok(Self {
            frame,
            truncation,
            voxels: vec![Voxel::default(); frame.len()],
        })
    }

    pub fn touched(&self) -> usize {
        self.voxels.iter().filter(|v| v.weight > 0.0).count()
    }

    /// Fuses one depth map. `depth` carries view depth in channel 0 and a
    /// validity flag in channel 1; only pixels with `mask > 0.5` contribute.
    /// Voxels map to the pixel nearest their projection.
    pub fn integrate_depth(
        &mut self,
        depth: &RasterImage,
        mask: &RasterImage,
        camera: &Camera,
        color: Option<&RasterImage>,
    ) -> Result<()> {
        if depth.channels < 2 {
            return Err(Error::invalid("depth map needs a validity channel"));
        }
        if depth.width != camera.width || depth.height != camera.height || mask.width != depth.width || mask.height != depth.height {
            return Err(Error::invalid("depth, mask and camera sizes differ"));
        }
        if let Some(c) = color {
            if c.width != depth.width || c.height != depth.height || c.channels < 3 {
                return Err(Error::invalid("color image must match the depth map and have 3 channels"));
            }
        }
        let frame = self.frame;
        let delta = self.truncation;
        let plane = frame.dims[0] * frame.dims[1];
        par::for_each_chunk_mut(&mut self.voxels, plane, |k, slab| {
            for (local, vox) in slab.iter_mut().enumerate() {
                let (i, j) = (local % frame.dims[0], local / frame.dims[0]);
                let p = frame.cell_center(i, j, k);
                let Some((uv, z)) = camera.project(&p, 1e-6) else { continue };
                let (u, v) = (uv.x.round(), uv.y.round());
                if u < 0.0 || v < 0.0 || u >= camera.width as f64 || v >= camera.height as f64 {
                    continue;
                }
                let (u, v) = (u as usize, v as usize);
                if mask.get(u, v, 0) <= 0.5 || depth.get(u, v, 1) <= 0.5 {
                    continue;
                }
                let sdf = (depth.get(u, v, 0) - z) / delta;
                if sdf < -1.0 {
                    continue;
                }
                let sdf = sdf.min(1.0);
                let w = vox.weight;
                vox.sdf = (vox.sdf * w + sdf) / (w + 1.0);
                if let Some(img) = color {
                    for c in 0..3 {
                        vox.color[c] = (vox.color[c] * w + img.get(u, v, c)) / (w + 1.0);
                    }
                }
                vox.weight = w + 1.0;
            }
        });
        Ok(())
    }

    fn sdf_gradient(&self, idx: usize) -> Vec3 {
        let f = &self.frame;
        let c = f.coords(idx);
        let mut g = Vec3::zeros();
        for a in 0..3 {
            let mut lo = c;
            let mut hi = c;
            lo[a] = c[a].saturating_sub(1);
            hi[a] = (c[a] + 1).min(f.dims[a] - 1);
            let (il, ih) = (f.index(lo[0], lo[1], lo[2]), f.index(hi[0], hi[1], hi[2]));
            // Fall back to one-sided differences next to unobserved voxels.
            let (il, lo_a) = if self.voxels[il].weight > 0.0 { (il, lo[a]) } else { (idx, c[a]) };
            let (ih, hi_a) = if self.voxels[ih].weight > 0.0 { (ih, hi[a]) } else { (idx, c[a]) };
            if hi_a > lo_a {
                g[a] = (self.voxels[ih].sdf - self.voxels[il].sdf) / ((hi_a - lo_a) as f64 * f.cell);
            }
        }
        g
    }

    /// Weighted trilinear color; unobserved corners are ignored.
    fn sample_color(&self, p: &Vec3) -> [f64; 3] {
        let mut acc = [0.0; 3];
        let mut wsum = 0.0;
        for (idx, w) in self.frame.trilinear(p) {
            let v = &self.voxels[idx];
            if v.weight > 0.0 {
                for c in 0..3 {
                    acc[c] += w * v.color[c];
                }
                wsum += w;
            }
        }
        if wsum > 0.0 {
            acc.map(|a| a / wsum)
        } else {
            acc
        }
    }

    /// Zero crossings along voxel edges whose endpoints both carry at least
    /// `min_weight`, with outward normals from the distance gradient.
    pub fn extract_proxy_points(&self, cfg: &ExtractConfig) -> ProxyPoints {
        let f = self.frame;
        struct Hit {
            edge: (usize, usize),
            p: Vec3,
            n: Vec3,
        }
        let slabs: Vec<Vec<Hit>> = par::map_range(f.dims[2], |k| {
            let mut out = Vec::new();
            for j in 0..f.dims[1] {
                for i in 0..f.dims[0] {
                    let a = f.index(i, j, k);
                    let va = &self.voxels[a];
                    if va.weight < cfg.min_weight {
                        continue;
                    }
                    for axis in 0..3 {
                        let mut c = [i, j, k];
                        c[axis] += 1;
                        if c[axis] >= f.dims[axis] {
                            continue;
                        }
                        let b = f.index(c[0], c[1], c[2]);
                        let vb = &self.voxels[b];
                        if vb.weight < cfg.min_weight || (va.sdf > 0.0) == (vb.sdf > 0.0) {
                            continue;
                        }
                        if va.sdf.abs() >= 1.0 && vb.sdf.abs() >= 1.0 {
                            continue;
                        }
                        let t = va.sdf / (va.sdf - vb.sdf);
                        let pa = f.cell_center(i, j, k);
                        let pb = f.cell_center(c[0], c[1], c[2]);
                        let g = self.sdf_gradient(a) * (1.0 - t) + self.sdf_gradient(b) * t;
                        if g.norm() == 0.0 {
                            continue;
                        }
                        out.push(Hit {
                            edge: (a, axis),
                            p: pa + (pb - pa) * t,
                            n: g.normalize(),
                        });
                    }
                }
            }
            out
        });
        let hits: Vec<Hit> = slabs.into_iter().flatten().collect();
        let keep: Vec<bool> = if cfg.largest_component {
            largest_component(&f, &hits.iter().map(|h| h.edge).collect::<Vec<_>>())
        } else {
            vec![true; hits.len()]
        };
        let mut out = ProxyPoints::default();
        for (h, k) in hits.iter().zip(keep) {
            if k {
                out.points.positions.push(h.p);
                out.points.normals.push(h.n);
                out.colors.push(self.sample_color(&h.p));
            }
        }
        out
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        let mut head = [0u8; 64];
        head[..4].copy_from_slice(MAGIC);
        for a in 0..3 {
            head[4 + 4 * a..8 + 4 * a].copy_from_slice(&(self.frame.dims[a] as u32).to_le_bytes());
            head[16 + 8 * a..24 + 8 * a].copy_from_slice(&self.frame.origin[a].to_le_bytes());
        }
        head[40..48].copy_from_slice(&self.frame.cell.to_le_bytes());
        head[48..56].copy_from_slice(&self.truncation.to_le_bytes());
        head[56..60].copy_from_slice(&5u32.to_le_bytes());
        w.write_all(&head)?;
        let mut body = Vec::with_capacity(self.voxels.len() * 20);
        let mut channel = |get: &dyn Fn(&Voxel) -> f64| {
            for v in &self.voxels {
                body.extend_from_slice(&(get(v) as f32).to_le_bytes());
            }
        };
        channel(&|v| v.sdf);
        channel(&|v| v.weight);
        for c in 0..3 {
            channel(&|v| v.color[c]);
        }
        w.write_all(&body)?;
        Ok(())
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self> {
        let mut head = [0u8; 64];
        r.read_exact(&mut head)?;
        if &head[..4] != MAGIC {
            return Err(Error::format("bad tsdf volume magic"));
        }
        let u32_at = |o: usize| u32::from_le_bytes(head[o..o + 4].try_into().unwrap()) as usize;
        let f64_at = |o: usize| f64::from_le_bytes(head[o..o + 8].try_into().unwrap());
        if u32_at(56) != 5 {
            return Err(Error::format("tsdf volume must have 5 channels"));
        }
        let frame = GridFrame {
            dims: [u32_at(4), u32_at(8), u32_at(12)],
            origin: Vec3::new(f64_at(16), f64_at(24), f64_at(32)),
            cell: f64_at(40),
        };
        let n = frame.len();
        let mut body = vec![0u8; n * 20];
        r.read_exact(&mut body)?;
        let val = |ch: usize, i: usize| {
            let o = (ch * n + i) * 4;
            f32::from_le_bytes(body[o..o + 4].try_into().unwrap()) as f64
        };
        let voxels = (0..n)
            .map(|i| Voxel {
                sdf: val(0, i),
                weight: val(1, i),
                color: [val(2, i), val(3, i), val(4, i)],
            })
            .collect();
        Ok(Self {
            frame,
            truncation: f64_at(48),
            voxels,
        })
    }
}

/// Marks crossings in the largest group, where crossings are linked when
/// their edges border a common lattice cell.
fn largest_component(f: &GridFrame, edges: &[(usize, usize)]) -> Vec<bool> {
    let n = edges.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut cell_owner: HashMap<usize, usize> = HashMap::new();
    for (h, &(voxel, axis)) in edges.iter().enumerate() {
        let c = f.coords(voxel);
        let (a1, a2) = ((axis + 1) % 3, (axis + 2) % 3);
        for (d1, d2) in [(0i64, 0i64), (-1, 0), (0, -1), (-1, -1)] {
            let mut cc = c.map(|v| v as i64);
            cc[a1] += d1;
            cc[a2] += d2;
            if cc.iter().any(|v| *v < 0) {
                continue;
            }
            let key = f.index(cc[0] as usize, cc[1] as usize, cc[2] as usize);
            match cell_owner.get(&key) {
                Some(&o) => {
                    let (ra, rb) = (find(&mut parent, o), find(&mut parent, h));
                    if ra != rb {
                        parent[ra.max(rb)] = ra.min(rb);
                    }
                }
                None => {
                    cell_owner.insert(key, h);
                }
            }
        }
    }
    let roots: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
    let mut sizes: HashMap<usize, usize> = HashMap::new();
    for r in &roots {
        *sizes.entry(*r).or_insert(0) += 1;
    }
    let best = sizes.iter().max_by_key(|(r, s)| (**s, std::cmp::Reverse(**r))).map(|(r, _)| *r);
    roots.iter().map(|r| Some(*r) == best).collect()
}
