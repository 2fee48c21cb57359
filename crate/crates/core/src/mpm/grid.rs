use crate::math::Vec3;

/// Background grid of `dims` nodes, node `(i, j, k)` at `origin + h (i, j, k)`.
#[derive(Clone, Debug)]
pub struct MpmGrid {
    pub origin: Vec3,
    pub h: f64,
    pub dims: [usize; 3],
    pub mass: Vec<f64>,
    pub momentum: Vec<Vec3>,
    pub velocity: Vec<Vec3>,
    pub sticky: Vec<bool>,
    /// Highest sticky node per `(i, j)` column, for penetration diagnostics.
    column_top: Vec<Option<usize>>,
}

impl MpmGrid {
    pub fn new(origin: Vec3, h: f64, dims: [usize; 3]) -> crate::Result<Self> {
        if !(h > 0.0 && h.is_finite()) || dims.iter().any(|&d| d < 5) {
            return Err(crate::Error::invalid("MPM grid needs h > 0 and at least 5 nodes per axis"));
        }
        let n = dims[0] * dims[1] * dims[2];
        Ok(Self {
            origin,
            h,
            dims,
            mass: vec![0.0; n],
            momentum: vec![Vec3::zeros(); n],
            velocity: vec![Vec3::zeros(); n],
            sticky: vec![false; n],
            column_top: vec![None; dims[0] * dims[1]],
        })
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.dims[1] + j) * self.dims[0] + i
    }

    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.dims[0];
        let j = (idx / self.dims[0]) % self.dims[1];
        [i, j, idx / (self.dims[0] * self.dims[1])]
    }

    pub fn node_position(&self, idx: usize) -> Vec3 {
        let [i, j, k] = self.coords(idx);
        self.origin + Vec3::new(i as f64, j as f64, k as f64) * self.h
    }

    /// Node whose dual cell `[x_n - h/2, x_n + h/2)` holds `x`.
    pub fn nearest_node(&self, x: &Vec3) -> Option<[usize; 3]> {
        let mut out = [0; 3];
        for a in 0..3 {
            let t = ((x[a] - self.origin[a]) / self.h + 0.5).floor();
            if !(t >= 0.0 && t < self.dims[a] as f64) {
                return None;
            }
            out[a] = t as usize;
        }
        Some(out)
    }

    pub fn clear_sticky(&mut self) {
        self.sticky.iter_mut().for_each(|s| *s = false);
        self.column_top.iter_mut().for_each(|c| *c = None);
    }

    pub fn sticky_count(&self) -> usize {
        self.sticky.iter().filter(|&&s| s).count()
    }

    /// Depth of `x` below the highest sticky node in its column, 0 when above
    /// or when the column has none.
    pub fn penetration(&self, x: &Vec3) -> f64 {
        let Some([i, j, _]) = self.nearest_node(&Vec3::new(x.x, x.y, self.origin.z)) else {
            return 0.0;
        };
        match self.column_top[j * self.dims[0] + i] {
            Some(k) => (self.origin.z + k as f64 * self.h - x.z).max(0.0),
            None => 0.0,
        }
    }
}

/// Marks every node whose dual cell holds at least one scene point.
pub fn mark_sticky_nodes(grid: &mut MpmGrid, scene: &[Vec3]) {
    for p in scene {
        if let Some([i, j, k]) = grid.nearest_node(p) {
            let idx = grid.index(i, j, k);
            grid.sticky[idx] = true;
            let top = &mut grid.column_top[j * grid.dims[0] + i];
            *top = Some(top.map_or(k, |t| t.max(k)));
        }
    }
}

/// Quadratic B-spline stencil: base node per axis, particle offset from the
/// base in cells, and the three weights per axis.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Stencil {
    pub base: [usize; 3],
    pub fx: Vec3,
    pub w: [[f64; 3]; 3],
}

impl Stencil {
    /// Requires the particle to sit at least 1.5 cells inside the grid.
    #[inline]
    pub fn new(grid: &MpmGrid, x: &Vec3) -> Self {
        let mut base = [0; 3];
        let mut fx = Vec3::zeros();
        let mut w = [[0.0; 3]; 3];
        for a in 0..3 {
            let t = (x[a] - grid.origin[a]) / grid.h;
            let b = (t - 0.5).floor();
            let f = t - b;
            base[a] = b as usize;
            fx[a] = f;
            w[a] = [0.5 * (1.5 - f).powi(2), 0.75 - (f - 1.0).powi(2), 0.5 * (f - 0.5).powi(2)];
        }
        Self { base, fx, w }
    }

    #[cfg(test)]
    pub fn weight(&self, o: [usize; 3]) -> f64 {
        self.w[0][o[0]] * self.w[1][o[1]] * self.w[2][o[2]]
    }

    /// `x_node - x_p` in world units.
    #[cfg(test)]
    pub fn offset(&self, o: [usize; 3], h: f64) -> Vec3 {
        (Vec3::new(o[0] as f64, o[1] as f64, o[2] as f64) - self.fx) * h
    }
}
