use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::knn::KdTree;
use crate::math::{Mat3, Vec3};
use crate::par;

/// Per-point mean curvature. Points whose neighborhood does not support a
/// quadric fit get 0 and are flagged.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MeanCurvature {
    pub values: Vec<f64>,
    pub flagged: Vec<bool>,
}

/// Mean curvature from a quadric height field fitted over the `k` nearest
/// points in each point's PCA frame. Positive where the surface bends away
/// from the normal (a sphere with outward normals has `H = 1/r`). Without
/// normals, each PCA normal is oriented away from the centroid of all points.
pub fn mean_curvature(points: &[Vec3], normals: Option<&[Vec3]>, k: usize) -> MeanCurvature {
    if points.is_empty() {
        return MeanCurvature::default();
    }
    let tree = KdTree::new(points);
    let centroid = points.iter().sum::<Vec3>() / points.len() as f64;
    let k = k.max(6);
    let fits = par::map_range(points.len(), |i| {
        let hint = match normals {
            Some(n) => n[i],
            None => points[i] - centroid,
        };
        let nbrs: Vec<Vec3> = tree.knn(&points[i], k).iter().map(|n| *tree.point(n.index)).collect();
        fit_point(&points[i], &nbrs, &hint)
    });
    MeanCurvature {
        values: fits.iter().map(|f| f.unwrap_or(0.0)).collect(),
        flagged: fits.iter().map(|f| f.is_none()).collect(),
    }
}

fn fit_point(p: &Vec3, nbrs: &[Vec3], hint: &Vec3) -> Option<f64> {
    if nbrs.len() < 6 {
        return None;
    }
    let mean = nbrs.iter().sum::<Vec3>() / nbrs.len() as f64;
    let mut cov = Mat3::zeros();
    for q in nbrs {
        let d = q - mean;
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|a, b| eig.eigenvalues[*b].total_cmp(&eig.eigenvalues[*a]));
    let e1: Vec3 = eig.eigenvectors.column(order[0]).into_owned();
    let e2: Vec3 = eig.eigenvectors.column(order[1]).into_owned();
    let mut n: Vec3 = eig.eigenvectors.column(order[2]).into_owned();
    if n.dot(hint) < 0.0 {
        n = -n;
    }
    let e2 = if e1.cross(&e2).dot(&n) < 0.0 { -e2 } else { e2 };

    let radius = nbrs.iter().map(|q| (q - p).norm()).fold(0.0, f64::max);
    if !(radius > 0.0) {
        return None;
    }
    let mut a = DMatrix::zeros(nbrs.len(), 6);
    let mut b = DVector::zeros(nbrs.len());
    for (r, q) in nbrs.iter().enumerate() {
        let d = (q - p) / radius;
        let (x, y) = (d.dot(&e1), d.dot(&e2));
        a.row_mut(r).copy_from_slice(&[x * x, x * y, y * y, x, y, 1.0]);
        b[r] = d.dot(&n);
    }
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    if !(svd.singular_values.min() > 1e-8 * smax) {
        return None;
    }
    let sol = svd.solve(&b, 1e-12).ok()?;
    let (fxx, fxy, fyy, fx, fy) = (2.0 * sol[0], sol[1], 2.0 * sol[2], sol[3], sol[4]);
    let g = 1.0 + fx * fx + fy * fy;
    let h = ((1.0 + fy * fy) * fxx - 2.0 * fx * fy * fxy + (1.0 + fx * fx) * fyy) / (2.0 * g.powf(1.5));
    let h = -h / radius;
    h.is_finite().then_some(h)
}
