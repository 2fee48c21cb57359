use std::collections::HashMap;
use std::io::{BufRead, Read, Write};

use super::TriangleMesh;
use crate::error::{Error, Result};
use crate::math::Vec3;

pub fn write_stl<W: Write>(mut w: W, mesh: &TriangleMesh) -> Result<()> {
    let mut head = [0u8; 80];
    head[..10].copy_from_slice(b"gsdecouple");
    w.write_all(&head)?;
    w.write_all(&(mesh.triangles.len() as u32).to_le_bytes())?;
    let mut buf = Vec::with_capacity(mesh.triangles.len() * 50);
    for t in 0..mesh.triangles.len() {
        let n = mesh.area_vector(t);
        let n = if n.norm() > 0.0 { n.normalize() } else { n };
        for v in std::iter::once(n).chain(mesh.corners(t)) {
            for a in 0..3 {
                buf.extend_from_slice(&(v[a] as f32).to_le_bytes());
            }
        }
        buf.extend_from_slice(&[0, 0]);
    }
    w.write_all(&buf)?;
    Ok(())
}

/// Binary STL; vertices with identical coordinates are merged.
pub fn read_stl<R: Read>(mut r: R) -> Result<TriangleMesh> {
    let mut head = [0u8; 84];
    r.read_exact(&mut head)?;
    let n = u32::from_le_bytes(head[80..84].try_into().unwrap()) as usize;
    let mut body = vec![0u8; n * 50];
    r.read_exact(&mut body)?;
    let mut ids: HashMap<[u32; 3], u32> = HashMap::new();
    let mut mesh = TriangleMesh::default();
    for rec in body.chunks_exact(50) {
        let f = |o: usize| f32::from_le_bytes(rec[o..o + 4].try_into().unwrap());
        let mut tri = [0u32; 3];
        for (c, slot) in tri.iter_mut().enumerate() {
            let o = 12 + 12 * c;
            let p = [f(o), f(o + 4), f(o + 8)];
            *slot = *ids.entry(p.map(f32::to_bits)).or_insert_with(|| {
                mesh.vertices.push(Vec3::new(p[0] as f64, p[1] as f64, p[2] as f64));
                (mesh.vertices.len() - 1) as u32
            });
        }
        mesh.triangles.push(tri);
    }
    Ok(mesh)
}

pub fn write_obj<W: Write>(mut w: W, mesh: &TriangleMesh) -> Result<()> {
    let mut s = String::new();
    for v in &mesh.vertices {
        s.push_str(&format!("v {} {} {}\n", v.x, v.y, v.z));
    }
    for t in &mesh.triangles {
        s.push_str(&format!("f {} {} {}\n", t[0] + 1, t[1] + 1, t[2] + 1));
    }
    w.write_all(s.as_bytes())?;
    Ok(())
}

/// ASCII OBJ with `v` and `f` records. Polygons are fan-triangulated;
/// texture and normal indices are ignored.
pub fn read_obj<R: BufRead>(r: R) -> Result<TriangleMesh> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (ln, line) in r.lines().enumerate() {
        let line = line?;
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let c: Vec<f64> = it
                    .take(3)
                    .map(|s| s.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| Error::format(format!("obj line {}: {e}", ln + 1)))?;
                if c.len() != 3 {
                    return Err(Error::format(format!("obj line {}: vertex needs 3 coordinates", ln + 1)));
                }
                vertices.push(Vec3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let idx: Vec<u32> = it
                    .map(|s| {
                        let head = s.split('/').next().unwrap_or("");
                        let i: i64 = head
                            .parse()
                            .map_err(|e| Error::format(format!("obj line {}: {e}", ln + 1)))?;
                        let i = if i < 0 { vertices.len() as i64 + i } else { i - 1 };
                        u32::try_from(i).map_err(|_| Error::format(format!("obj line {}: bad index", ln + 1)))
                    })
                    .collect::<Result<_>>()?;
                for t in 1..idx.len().saturating_sub(1) {
                    triangles.push([idx[0], idx[t], idx[t + 1]]);
                }
            }
            _ => {}
        }
    }
    TriangleMesh::new(vertices, triangles)
}
