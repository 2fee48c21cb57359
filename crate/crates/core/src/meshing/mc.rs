use std::collections::HashMap;
use std::sync::OnceLock;

use super::TriangleMesh;
use crate::math::Vec3;
use crate::par;
use crate::poisson::IndicatorGrid;

/// Corner `c` of the unit cube sits at `(c & 1, c >> 1 & 1, c >> 2 & 1)`.
const EDGES: [(usize, usize); 12] = [
    (0, 1),
    (2, 3),
    (4, 5),
    (6, 7),
    (0, 2),
    (1, 3),
    (4, 6),
    (5, 7),
    (0, 4),
    (1, 5),
    (2, 6),
    (3, 7),
];

/// Faces as corner cycles, with the outward normal axis and sign.
const FACES: [([usize; 4], usize, f64); 6] = [
    ([0, 2, 6, 4], 0, -1.0),
    ([1, 3, 7, 5], 0, 1.0),
    ([0, 1, 5, 4], 1, -1.0),
    ([2, 3, 7, 6], 1, 1.0),
    ([0, 1, 3, 2], 2, -1.0),
    ([4, 5, 7, 6], 2, 1.0),
];

fn corner_pos(c: usize) -> Vec3 {
    Vec3::new((c & 1) as f64, ((c >> 1) & 1) as f64, ((c >> 2) & 1) as f64)
}

fn edge_between(a: usize, b: usize) -> usize {
    EDGES
        .iter()
        .position(|&(p, q)| (p, q) == (a, b) || (p, q) == (b, a))
        .unwrap()
}

fn edge_mid(e: usize) -> Vec3 {
    (corner_pos(EDGES[e].0) + corner_pos(EDGES[e].1)) * 0.5
}

/// Closed edge loops for every inside-corner configuration, wound
/// counter-clockwise seen from outside the inside region. Ambiguous faces
/// always keep their two inside corners apart.
fn build_table() -> Vec<Vec<Vec<u8>>> {
    (0..256usize)
        .map(|config| {
            let inside = |c: usize| (config >> c) & 1 == 1;
            let mut next: HashMap<usize, usize> = HashMap::new();
            for (cyc, axis, sign) in FACES {
                let mut n = Vec3::zeros();
                n[axis] = sign;
                let crossing: Vec<usize> = (0..4)
                    .filter(|&i| inside(cyc[i]) != inside(cyc[(i + 1) % 4]))
                    .collect();
                let mut segs: Vec<(usize, usize, usize)> = Vec::new();
                match crossing.len() {
                    0 => {}
                    2 => {
                        let e0 = edge_between(cyc[crossing[0]], cyc[(crossing[0] + 1) % 4]);
                        let e1 = edge_between(cyc[crossing[1]], cyc[(crossing[1] + 1) % 4]);
                        let c = *cyc.iter().find(|&&c| inside(c)).unwrap();
                        segs.push((e0, e1, c));
                    }
                    4 => {
                        for i in 0..4 {
                            let c = cyc[i];
                            if inside(c) {
                                let e0 = edge_between(c, cyc[(i + 1) % 4]);
                                let e1 = edge_between(c, cyc[(i + 3) % 4]);
                                segs.push((e0, e1, c));
                            }
                        }
                    }
                    _ => unreachable!(),
                }
                for (e0, e1, c) in segs {
                    let (a, b) = (edge_mid(e0), edge_mid(e1));
                    let toward = corner_pos(c) - a;
                    if (b - a).cross(&n).dot(&toward) > 0.0 {
                        next.insert(e0, e1);
                    } else {
                        next.insert(e1, e0);
                    }
                }
            }
            let mut loops = Vec::new();
            let mut starts: Vec<usize> = next.keys().copied().collect();
            starts.sort_unstable();
            let mut used = [false; 12];
            for s in starts {
                if used[s] {
                    continue;
                }
                let mut lp = Vec::new();
                let mut e = s;
                while !used[e] {
                    used[e] = true;
                    lp.push(e as u8);
                    e = next[&e];
                }
                loops.push(lp);
            }
            loops
        })
        .collect()
}

/// Marker for a loop's centroid vertex in triangle lists.
const CENTER: u8 = 12;

struct Loop {
    edges: Vec<u8>,
    tris: Vec<[u8; 3]>,
}

fn on_common_face(a: u8, b: u8) -> bool {
    FACES.iter().any(|(cyc, _, _)| {
        let has = |e: u8| (0..4).any(|i| edge_between(cyc[i], cyc[(i + 1) % 4]) == e as usize);
        has(a) && has(b)
    })
}

/// Fan from an apex whose diagonals never lie in a cube face, so that no
/// interior edge can coincide with one from the neighboring cube. Loops
/// without such an apex are fanned around their centroid.
fn triangulate(edges: &[u8]) -> Vec<[u8; 3]> {
    let n = edges.len();
    if n == 3 {
        return vec![[edges[0], edges[1], edges[2]]];
    }
    for apex in 0..n {
        let ok = (2..n - 1).all(|d| !on_common_face(edges[apex], edges[(apex + d) % n]));
        if ok {
            return (1..n - 1)
                .map(|t| [edges[apex], edges[(apex + t) % n], edges[(apex + t + 1) % n]])
                .collect();
        }
    }
    (0..n).map(|t| [CENTER, edges[t], edges[(t + 1) % n]]).collect()
}

fn table() -> &'static [Vec<Loop>] {
    static TABLE: OnceLock<Vec<Vec<Loop>>> = OnceLock::new();
    TABLE.get_or_init(|| {
        build_table()
            .into_iter()
            .map(|loops| {
                loops
                    .into_iter()
                    .map(|edges| Loop {
                        tris: triangulate(&edges),
                        edges,
                    })
                    .collect()
            })
            .collect()
    })
}

/// Isosurface of the cell-center lattice at `iso`. Inside means `X > iso`;
/// triangle normals point toward decreasing `X`.
pub fn marching_cubes(grid: &IndicatorGrid, iso: f64) -> TriangleMesh {
    let f = grid.frame();
    let [nx, ny, nz] = f.dims;
    if nx < 2 || ny < 2 || nz < 2 {
        return TriangleMesh::default();
    }
    let table = table();
    let node = |i: usize, j: usize, k: usize| f.index(i, j, k);
    // Global edge key: lattice node index times 3 plus axis.
    let center_base = f.len() as u64 * 3;
    let slabs: Vec<(Vec<[u64; 3]>, Vec<(u64, Vec3)>)> = par::map_range(nz - 1, |k| {
        let mut tris = Vec::new();
        let mut centers = Vec::new();
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let mut config = 0;
                for c in 0..8 {
                    let v = grid.values[node(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1))];
                    if v > iso {
                        config |= 1 << c;
                    }
                }
                if config == 0 || config == 255 {
                    continue;
                }
                for (l, lp) in table[config].iter().enumerate() {
                    let key = |e: u8| {
                        if e == CENTER {
                            // Centroid keys live past all edge keys.
                            return center_base + (node(i, j, k) * 4 + l) as u64;
                        }
                        let (a, b) = EDGES[e as usize];
                        let lo = a.min(b);
                        let axis = (a ^ b).trailing_zeros() as u64;
                        let n = node(i + (lo & 1), j + ((lo >> 1) & 1), k + ((lo >> 2) & 1));
                        n as u64 * 3 + axis
                    };
                    for t in &lp.tris {
                        tris.push(t.map(key));
                    }
                    if lp.tris.iter().any(|t| t[0] == CENTER) {
                        let c = lp.edges.iter().map(|e| edge_vertex(grid, key(*e), iso)).sum::<Vec3>()
                            / lp.edges.len() as f64;
                        centers.push((key(CENTER), c));
                    }
                }
            }
        }
        (tris, centers)
    });
    let mut ids: HashMap<u64, u32> = HashMap::new();
    let mut mesh = TriangleMesh::default();
    for (tris, centers) in slabs {
        let centers: HashMap<u64, Vec3> = centers.into_iter().collect();
        for tri in tris {
            let t = tri.map(|key| {
                *ids.entry(key).or_insert_with(|| {
                    let p = match centers.get(&key) {
                        Some(c) => *c,
                        None => edge_vertex(grid, key, iso),
                    };
                    mesh.vertices.push(p);
                    (mesh.vertices.len() - 1) as u32
                })
            });
            mesh.triangles.push(t);
        }
    }
    mesh.remove_degenerate(1e-12);
    mesh
}

fn edge_vertex(grid: &IndicatorGrid, key: u64, iso: f64) -> Vec3 {
    let f = grid.frame();
    let n = (key / 3) as usize;
    let axis = (key % 3) as usize;
    let [i, j, k] = f.coords(n);
    let mut c = [i, j, k];
    c[axis] += 1;
    let m = f.index(c[0], c[1], c[2]);
    let (a, b) = (grid.values[n], grid.values[m]);
    let t = if a != b { ((iso - a) / (b - a)).clamp(0.0, 1.0) } else { 0.5 };
    let pa = f.cell_center(i, j, k);
    let pb = f.cell_center(c[0], c[1], c[2]);
    pa + (pb - pa) * t
}
