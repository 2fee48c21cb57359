//! Small linear-algebra helpers on top of nalgebra.

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector2, Vector3};

pub type Vec3 = Vector3<f64>;
pub type Vec2 = Vector2<f64>;
pub type Mat3 = Matrix3<f64>;

/// Rotation factor of the polar decomposition `F = R S`, by the scaled
/// Newton iteration `R <- (g R + R^-T / g) / 2`. Requires `det(F) > 0`.
pub fn polar_rotation(f: &Mat3) -> Option<Mat3> {
    let mut r = *f;
    if !r.iter().all(|v| v.is_finite()) || r.determinant() <= 0.0 {
        return None;
    }
    let mut last = f64::INFINITY;
    for _ in 0..32 {
        let inv_t = r.try_inverse()?.transpose();
        // Frobenius-norm scaling keeps the iteration quadratic from the start.
        let g = (inv_t.norm() / r.norm()).sqrt();
        let next = (r * g + inv_t / g) * 0.5;
        let delta = (next - r).abs().max();
        r = next;
        // Convergence is quadratic, so after a 1e-9 update the next one is
        // at rounding level.
        if delta < 1e-9 || (delta < 1e-6 && delta >= last) {
            break;
        }
        last = delta;
    }
    Some(r)
}

/// Minimal rotation taking unit vector `from` onto unit vector `to`.
pub fn rotation_between(from: &Vec3, to: &Vec3) -> Mat3 {
    let a = from.normalize();
    let b = to.normalize();
    let v = a.cross(&b);
    let s = v.norm();
    let c = a.dot(&b);
    let axis = if s > 1e-12 {
        v / s
    } else if c > 0.0 {
        return Mat3::identity();
    } else {
        // Half turn about any axis perpendicular to `a`.
        let helper = if a.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
        a.cross(&helper).normalize()
    };
    Rotation3::from_axis_angle(&nalgebra::Unit::new_unchecked(axis), s.atan2(c)).into_inner()
}

pub fn skew(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Unit quaternion from an orthonormal, right-handed matrix.
pub fn quat_from_matrix(m: &Mat3) -> UnitQuaternion<f64> {
    UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(*m))
}

/// Index of the smallest component; ties resolve to the lowest index.
pub fn argmin3(v: &Vec3) -> usize {
    let mut best = 0;
    for i in 1..3 {
        if v[i] < v[best] {
            best = i;
        }
    }
    best
}

pub fn is_rotation(m: &Mat3, tol: f64) -> bool {
    (m.transpose() * m - Mat3::identity()).abs().max() <= tol && (m.determinant() - 1.0).abs() <= tol
}

/// Axis-aligned bounds of a point set, or `None` when empty.
pub fn bounds(points: &[Vec3]) -> Option<(Vec3, Vec3)> {
    let first = points.first()?;
    let mut lo = *first;
    let mut hi = *first;
    for p in &points[1..] {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    Some((lo, hi))
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}
