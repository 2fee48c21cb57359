//! Isosurface extraction, patch cropping and triangle-bound flat kernels.

mod io;
mod mc;

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::math::{bounds, quat_from_matrix, Mat3, Vec3};
use crate::splat::GaussianKernel;

pub use io::{read_obj, read_stl, write_obj, write_stl};
pub use mc::marching_cubes;

/// Thickness of a triangle-bound kernel along its normal.
pub const FLAT_SCALE: f64 = 1e-8;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>) -> Result<Self> {
        let n = vertices.len() as u32;
        if triangles.iter().flatten().any(|i| *i >= n) {
            return Err(Error::invalid("triangle index out of range"));
        }
        Ok(Self { vertices, triangles })
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn corners(&self, t: usize) -> [Vec3; 3] {
        self.triangles[t].map(|i| self.vertices[i as usize])
    }

    /// Unnormalized `(v1 - v0) x (v2 - v0)`.
    pub fn area_vector(&self, t: usize) -> Vec3 {
        let [a, b, c] = self.corners(t);
        (b - a).cross(&(c - a))
    }

    pub fn normal(&self, t: usize) -> Vec3 {
        self.area_vector(t).normalize()
    }

    pub fn normals(&self) -> Vec<Vec3> {
        (0..self.triangles.len()).map(|t| self.normal(t)).collect()
    }

    pub fn centroid(&self, t: usize) -> Vec3 {
        let [a, b, c] = self.corners(t);
        (a + b + c) / 3.0
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| 0.5 * self.area_vector(t).norm()).sum()
    }

    /// Undirected edges with their triangle counts.
    pub fn edge_counts(&self) -> HashMap<(u32, u32), usize> {
        let mut m = HashMap::new();
        for t in &self.triangles {
            for e in 0..3 {
                let (a, b) = (t[e], t[(e + 1) % 3]);
                *m.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        m
    }

    /// Every edge borders exactly two triangles.
    pub fn is_closed(&self) -> bool {
        self.edge_counts().values().all(|c| *c == 2)
    }

    /// `V - E + F` over referenced vertices.
    pub fn euler_characteristic(&self) -> i64 {
        let mut used = vec![false; self.vertices.len()];
        for i in self.triangles.iter().flatten() {
            used[*i as usize] = true;
        }
        let v = used.iter().filter(|u| **u).count() as i64;
        v - self.edge_counts().len() as i64 + self.triangles.len() as i64
    }

    /// Drops triangles with area below `min_area` and unreferenced vertices.
    pub fn remove_degenerate(&mut self, min_area: f64) -> usize {
        let before = self.triangles.len();
        let keep: Vec<bool> = (0..before)
            .map(|t| {
                let [a, b, c] = self.triangles[t];
                a != b && b != c && a != c && 0.5 * self.area_vector(t).norm() >= min_area
            })
            .collect();
        self.retain(&keep);
        before - self.triangles.len()
    }

    fn retain(&mut self, keep: &[bool]) {
        let mut remap = vec![u32::MAX; self.vertices.len()];
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for (t, k) in self.triangles.iter().zip(keep) {
            if !k {
                continue;
            }
            triangles.push(t.map(|i| {
                let r = &mut remap[i as usize];
                if *r == u32::MAX {
                    *r = vertices.len() as u32;
                    vertices.push(self.vertices[i as usize]);
                }
                *r
            }));
        }
        self.vertices = vertices;
        self.triangles = triangles;
    }
}

/// Triangles whose centroid lies in the bounding box of `points`, scaled
/// about its center by `scale`.
pub fn crop_mesh_patch(mesh: &TriangleMesh, points: &[Vec3], scale: f64) -> Result<TriangleMesh> {
    let (lo, hi) = bounds(points).ok_or_else(|| Error::invalid("cannot crop to an empty point set"))?;
    let mid = (lo + hi) * 0.5;
    let half = (hi - lo) * (0.5 * scale.max(0.0));
    let keep: Vec<bool> = (0..mesh.triangles.len())
        .map(|t| {
            let c = mesh.centroid(t);
            scale > 0.0 && (0..3).all(|a| (c[a] - mid[a]).abs() <= half[a])
        })
        .collect();
    let mut out = mesh.clone();
    out.retain(&keep);
    Ok(out)
}

/// Binding frame for one triangle: rotation columns (normal, toward `v2`,
/// in-plane orthogonal) and scales `(eps, |v2 - k|, |r3 . (v3 - k)|)`.
pub fn triangle_frame(v: [Vec3; 3]) -> Option<(Vec3, Mat3, Vec3)> {
    let k = (v[0] + v[1] + v[2]) / 3.0;
    let n = (v[1] - v[0]).cross(&(v[2] - v[0]));
    if !(0.5 * n.norm() >= 1e-12) {
        return None;
    }
    let r1 = n.normalize();
    let d2 = v[1] - k;
    let s2 = d2.norm();
    let r2 = d2 / s2;
    let d3 = v[2] - k;
    let mut r3 = d3 - r1 * r1.dot(&d3) - r2 * r2.dot(&d3);
    let len = r3.norm();
    if !(len > 1e-12 * s2) {
        return None;
    }
    r3 /= len;
    let mut rot = Mat3::from_columns(&[r1, r2, r3]);
    if rot.determinant() < 0.0 {
        r3 = -r3;
        rot.set_column(2, &r3);
    }
    let s3 = r3.dot(&d3).abs();
    Some((k, rot, Vec3::new(FLAT_SCALE, s2, s3)))
}

/// One flat kernel per triangle. Returns the kernels and the number of
/// degenerate triangles skipped. Kernels start opaque and grey.
pub fn mesh_to_gaussians(mesh: &TriangleMesh) -> (Vec<GaussianKernel>, usize) {
    let mut out = Vec::with_capacity(mesh.triangles.len());
    let mut skipped = 0;
    for t in 0..mesh.triangles.len() {
        match triangle_frame(mesh.corners(t)) {
            Some((k, rot, scales)) => out.push(GaussianKernel::new(k, scales, quat_from_matrix(&rot), 1.0)),
            None => skipped += 1,
        }
    }
    (out, skipped)
}
