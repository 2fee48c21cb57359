//! Real spherical harmonics (degrees 0-3) and their rotation by Wigner
//! D-matrices.
//!
//! Coefficients use the splat convention: degree-major, `m = -l..=l`, and
//! basis functions equal to `(-1)^m` times the textbook real harmonics
//! (so `Y_{1,-1} = -C1 y`, `Y_{1,0} = C1 z`, `Y_{1,1} = -C1 x`).
//! Rotation blocks are built in the complex basis from Euler angles and
//! mapped to this real basis once per rotation; applying them is real
//! arithmetic only.

use nalgebra::{DMatrix, Matrix3, SMatrix};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::math::{is_rotation, Mat3, Vec3};
use crate::splat::SH_COEFFS;

const C0: f64 = 0.282_094_791_773_878_14;
const C1: f64 = 0.488_602_511_902_919_9;
const C2: [f64; 5] = [
    1.092_548_430_592_079_2,
    -1.092_548_430_592_079_2,
    0.315_391_565_252_520_05,
    -1.092_548_430_592_079_2,
    0.546_274_215_296_039_6,
];
const C3: [f64; 7] = [
    -0.590_043_589_926_643_5,
    2.890_611_442_640_554,
    -0.457_045_799_464_465_8,
    0.373_176_332_590_115_4,
    -0.457_045_799_464_465_8,
    1.445_305_721_320_277,
    -0.590_043_589_926_643_5,
];

pub const MAX_DEGREE: usize = 3;

/// Basis values at a unit direction, in coefficient order.
pub fn sh_basis(d: &Vec3) -> [f64; SH_COEFFS] {
    let (x, y, z) = (d.x, d.y, d.z);
    let (xx, yy, zz) = (x * x, y * y, z * z);
    [
        C0,
        -C1 * y,
        C1 * z,
        -C1 * x,
        C2[0] * x * y,
        C2[1] * y * z,
        C2[2] * (2.0 * zz - xx - yy),
        C2[3] * x * z,
        C2[4] * (xx - yy),
        C3[0] * y * (3.0 * xx - yy),
        C3[1] * x * y * z,
        C3[2] * y * (4.0 * zz - xx - yy),
        C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy),
        C3[4] * x * (4.0 * zz - xx - yy),
        C3[5] * z * (xx - yy),
        C3[6] * x * (xx - 3.0 * yy),
    ]
}

/// `sum c_{l,m} Y_{l,m}(dir)`; `dir` must be unit length within 1e-9.
pub fn eval_sh(coeffs: &[f64; SH_COEFFS], dir: &Vec3) -> Result<f64> {
    if (dir.norm() - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("SH evaluation direction is not unit length"));
    }
    Ok(sh_basis(dir).iter().zip(coeffs).map(|(b, c)| b * c).sum())
}

fn factorial(n: i64) -> f64 {
    (1..=n).map(|v| v as f64).product()
}

/// Small Wigner d-matrix `d^l_{m',m}(beta)`, indexed `[m' + l, m + l]`.
pub fn wigner_small_d(l: usize, beta: f64) -> Result<DMatrix<f64>> {
    if l > MAX_DEGREE {
        return Err(Error::invalid(format!("SH degree {l} exceeds {MAX_DEGREE}")));
    }
    let j = l as i64;
    let n = 2 * l + 1;
    let (c, s) = ((beta / 2.0).cos(), (beta / 2.0).sin());
    Ok(DMatrix::from_fn(n, n, |row, col| {
        let mp = row as i64 - j;
        let m = col as i64 - j;
        let norm = (factorial(j + mp) * factorial(j - mp) * factorial(j + m) * factorial(j - m)).sqrt();
        let s_min = 0.max(m - mp);
        let s_max = (j + m).min(j - mp);
        (s_min..=s_max)
            .map(|k| {
                let sign = if (mp - m + k) % 2 == 0 { 1.0 } else { -1.0 };
                let denom = factorial(j + m - k) * factorial(k) * factorial(mp - m + k) * factorial(j - mp - k);
                sign * norm / denom * c.powi((2 * j + m - mp - 2 * k) as i32) * s.powi((mp - m + 2 * k) as i32)
            })
            .sum()
    }))
}

/// `R = Rz(alpha) Ry(beta) Rz(gamma)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EulerZyz {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

fn rot_z(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    Mat3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

fn rot_y(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    Mat3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

impl EulerZyz {
    pub fn to_matrix(&self) -> Mat3 {
        rot_z(self.alpha) * rot_y(self.beta) * rot_z(self.gamma)
    }
}

/// ZYZ Euler angles of a rotation. At the poles (`sin beta == 0`) the
/// split between `alpha` and `gamma` is arbitrary and `gamma = 0`.
pub fn rotation_to_euler_zyz(r: &Mat3) -> Result<EulerZyz> {
    if !r.iter().all(|v| v.is_finite()) || !is_rotation(r, 1e-6) {
        return Err(Error::invalid("matrix is not a rotation"));
    }
    let sin_beta = (r[(0, 2)].powi(2) + r[(1, 2)].powi(2)).sqrt();
    let beta = sin_beta.atan2(r[(2, 2)]);
    if sin_beta > 1e-12 {
        Ok(EulerZyz {
            alpha: r[(1, 2)].atan2(r[(0, 2)]),
            beta,
            gamma: r[(2, 1)].atan2(-r[(2, 0)]),
        })
    } else if r[(2, 2)] > 0.0 {
        Ok(EulerZyz {
            alpha: r[(1, 0)].atan2(r[(0, 0)]),
            beta: 0.0,
            gamma: 0.0,
        })
    } else {
        Ok(EulerZyz {
            alpha: (-r[(0, 1)]).atan2(r[(1, 1)]),
            beta: std::f64::consts::PI,
            gamma: 0.0,
        })
    }
}

/// Complex-to-real change of basis for degree `l`: row `m` holds the
/// complex-harmonic weights of textbook real harmonic `m`.
fn real_from_complex(l: usize) -> DMatrix<Complex64> {
    let j = l as i64;
    let n = 2 * l + 1;
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut u = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for m in -j..=j {
        let row = (m + j) as usize;
        let parity = if m % 2 == 0 { 1.0 } else { -1.0 };
        match m.cmp(&0) {
            std::cmp::Ordering::Less => {
                u[(row, (m + j) as usize)] = Complex64::new(0.0, h);
                u[(row, (-m + j) as usize)] = Complex64::new(0.0, -h * parity);
            }
            std::cmp::Ordering::Equal => u[(row, row)] = Complex64::new(1.0, 0.0),
            std::cmp::Ordering::Greater => {
                u[(row, (-m + j) as usize)] = Complex64::new(h, 0.0);
                u[(row, (m + j) as usize)] = Complex64::new(h * parity, 0.0);
            }
        }
    }
    u
}

fn real_block(l: usize, e: &EulerZyz) -> Result<DMatrix<f64>> {
    let j = l as i64;
    let n = 2 * l + 1;
    let d = wigner_small_d(l, e.beta)?;
    let big_d = DMatrix::from_fn(n, n, |row, col| {
        let mp = (row as i64 - j) as f64;
        let m = (col as i64 - j) as f64;
        Complex64::from_polar(1.0, -mp * e.alpha) * d[(row, col)] * Complex64::from_polar(1.0, -m * e.gamma)
    });
    let u = real_from_complex(l);
    let b = u.map(|z| z.conj()) * big_d * u.transpose();
    // Splat basis differs from the textbook one by (-1)^m per function.
    Ok(DMatrix::from_fn(n, n, |row, col| {
        let sign = if (row + col) % 2 == 0 { 1.0 } else { -1.0 };
        sign * b[(row, col)].re
    }))
}

/// Orthogonal real blocks, one per degree, acting on coefficient vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct ShBlockRotation {
    pub l1: Matrix3<f64>,
    pub l2: SMatrix<f64, 5, 5>,
    pub l3: SMatrix<f64, 7, 7>,
}

impl ShBlockRotation {
    pub fn identity() -> Self {
        Self {
            l1: Matrix3::identity(),
            l2: SMatrix::identity(),
            l3: SMatrix::identity(),
        }
    }

    /// Block for degree `l` as a dynamic matrix (`[1]` for degree 0).
    pub fn block(&self, l: usize) -> DMatrix<f64> {
        match l {
            0 => DMatrix::identity(1, 1),
            1 => DMatrix::from_column_slice(3, 3, self.l1.as_slice()),
            2 => DMatrix::from_column_slice(5, 5, self.l2.as_slice()),
            3 => DMatrix::from_column_slice(7, 7, self.l3.as_slice()),
            _ => panic!("SH degree {l} exceeds {MAX_DEGREE}"),
        }
    }

    pub fn apply(&self, c: &[f64; SH_COEFFS]) -> [f64; SH_COEFFS] {
        let mut out = [0.0; SH_COEFFS];
        out[0] = c[0];
        let v1 = self.l1 * nalgebra::Vector3::from_column_slice(&c[1..4]);
        out[1..4].copy_from_slice(v1.as_slice());
        let v2 = self.l2 * nalgebra::SVector::<f64, 5>::from_column_slice(&c[4..9]);
        out[4..9].copy_from_slice(v2.as_slice());
        let v3 = self.l3 * nalgebra::SVector::<f64, 7>::from_column_slice(&c[9..16]);
        out[9..16].copy_from_slice(v3.as_slice());
        out
    }
}

/// Rotation blocks such that `eval(B c, R d) == eval(c, d)`.
pub fn sh_block_rotation(r: &Mat3) -> Result<ShBlockRotation> {
    let e = rotation_to_euler_zyz(r)?;
    let b1 = real_block(1, &e)?;
    let b2 = real_block(2, &e)?;
    let b3 = real_block(3, &e)?;
    Ok(ShBlockRotation {
        l1: Matrix3::from_column_slice(b1.as_slice()),
        l2: SMatrix::from_column_slice(b2.as_slice()),
        l3: SMatrix::from_column_slice(b3.as_slice()),
    })
}

/// Rotates every color channel's coefficients by `r`.
pub fn rotate_sh(coeffs: &[[f64; SH_COEFFS]; 3], r: &Mat3) -> Result<[[f64; SH_COEFFS]; 3]> {
    let blocks = sh_block_rotation(r)?;
    Ok(coeffs.map(|c| blocks.apply(&c)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::UnitQuaternion;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_rotation(rng: &mut impl Rng) -> Mat3 {
        let q = nalgebra::Quaternion::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        UnitQuaternion::from_quaternion(q).to_rotation_matrix().into_inner()
    }

    fn random_unit(rng: &mut impl Rng) -> Vec3 {
        loop {
            let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let n = v.norm();
            if n > 0.1 && n < 1.0 {
                return v / n;
            }
        }
    }

    #[test]
    fn dc_only_is_constant() {
        let mut c = [0.0; SH_COEFFS];
        c[0] = 2.0;
        for d in [Vec3::x(), Vec3::new(0.6, 0.0, -0.8)] {
            assert_relative_eq!(eval_sh(&c, &d).unwrap(), 2.0 * 0.282_094_791_8, epsilon = 1e-10);
        }
        assert_eq!(eval_sh(&[0.0; SH_COEFFS], &Vec3::y()).unwrap(), 0.0);
    }

    #[test]
    fn degree_one_is_odd() {
        let mut c = [0.0; SH_COEFFS];
        c[1..4].copy_from_slice(&[0.3, -1.2, 0.7]);
        let d = Vec3::new(1.0, 2.0, -0.5).normalize();
        assert_relative_eq!(eval_sh(&c, &d).unwrap(), -eval_sh(&c, &-d).unwrap(), epsilon = 1e-15);
    }

    #[test]
    fn non_unit_direction_rejected() {
        assert!(eval_sh(&[0.0; SH_COEFFS], &Vec3::new(1.0, 1.0, 0.0)).is_err());
    }

    #[test]
    fn basis_is_orthonormal_by_quadrature() {
        // Product Gauss-Legendre in cos(theta) x uniform phi is exact for degree <= 6.
        let nodes: [(f64, f64); 6] = [
            (-0.932_469_514_203_152, 0.171_324_492_379_170),
            (-0.661_209_386_466_265, 0.360_761_573_048_139),
            (-0.238_619_186_083_197, 0.467_913_934_572_691),
            (0.238_619_186_083_197, 0.467_913_934_572_691),
            (0.661_209_386_466_265, 0.360_761_573_048_139),
            (0.932_469_514_203_152, 0.171_324_492_379_170),
        ];
        let nphi = 16;
        let mut gram = [[0.0; SH_COEFFS]; SH_COEFFS];
        for (ct, w) in nodes {
            let st = (1.0 - ct * ct).sqrt();
            for k in 0..nphi {
                let phi = k as f64 * std::f64::consts::TAU / nphi as f64;
                let b = sh_basis(&Vec3::new(st * phi.cos(), st * phi.sin(), ct));
                let wt = w * std::f64::consts::TAU / nphi as f64;
                for i in 0..SH_COEFFS {
                    for j in 0..SH_COEFFS {
                        gram[i][j] += wt * b[i] * b[j];
                    }
                }
            }
        }
        for i in 0..SH_COEFFS {
            for j in 0..SH_COEFFS {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((gram[i][j] - expect).abs() < 1e-10, "gram[{i}][{j}] = {}", gram[i][j]);
            }
        }
    }

    #[test]
    fn small_d_at_zero_is_identity() {
        for l in 0..=3 {
            let d = wigner_small_d(l, 0.0).unwrap();
            assert_relative_eq!(d, DMatrix::identity(2 * l + 1, 2 * l + 1), epsilon = 1e-15);
        }
        assert!(wigner_small_d(4, 0.1).is_err());
    }

    #[test]
    fn small_d_closed_forms() {
        let b: f64 = 0.73;
        let d1 = wigner_small_d(1, b).unwrap();
        assert_relative_eq!(d1[(1, 1)], b.cos(), epsilon = 1e-15);
        // d^1_{1,1} = (1 + cos b)/2, d^1_{1,0} = -sin b / sqrt 2
        assert_relative_eq!(d1[(2, 2)], (1.0 + b.cos()) / 2.0, epsilon = 1e-15);
        assert_relative_eq!(d1[(2, 1)], -b.sin() / 2f64.sqrt(), epsilon = 1e-15_f64);
        let d = wigner_small_d(1, std::f64::consts::FRAC_PI_2).unwrap();
        assert!(d[(1, 1)].abs() < 1e-15);
    }

    #[test]
    fn small_d_composes_and_inverts() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let (b1, b2) = (rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            for l in 0..=3 {
                let lhs = wigner_small_d(l, b1).unwrap() * wigner_small_d(l, b2).unwrap();
                assert_relative_eq!(lhs, wigner_small_d(l, b1 + b2).unwrap(), epsilon = 1e-12);
                assert_relative_eq!(
                    wigner_small_d(l, b1).unwrap().transpose(),
                    wigner_small_d(l, -b1).unwrap(),
                    epsilon = 1e-14
                );
            }
        }
    }

    #[test]
    fn euler_special_cases() {
        let e = rotation_to_euler_zyz(&Mat3::identity()).unwrap();
        assert_eq!(e, EulerZyz { alpha: 0.0, beta: 0.0, gamma: 0.0 });
        let e = rotation_to_euler_zyz(&rot_y(0.3)).unwrap();
        assert_relative_eq!(e.alpha, 0.0, epsilon = 1e-15);
        assert_relative_eq!(e.beta, 0.3, epsilon = 1e-15);
        assert_relative_eq!(e.gamma, 0.0, epsilon = 1e-15);
        let flip = rot_z(0.4) * rot_y(std::f64::consts::PI);
        assert_relative_eq!(rotation_to_euler_zyz(&flip).unwrap().to_matrix(), flip, epsilon = 1e-12);
        assert!(rotation_to_euler_zyz(&Mat3::from_diagonal(&Vec3::new(1.0, 1.0, -1.0))).is_err());
        assert!(rotation_to_euler_zyz(&(Mat3::identity() * 2.0)).is_err());
    }

    #[test]
    fn euler_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..1000 {
            let r = random_rotation(&mut rng);
            let e = rotation_to_euler_zyz(&r).unwrap();
            assert!((e.to_matrix() - r).abs().max() < 1e-8);
        }
    }

    #[test]
    fn identity_rotation_gives_identity_blocks() {
        let b = sh_block_rotation(&Mat3::identity()).unwrap();
        assert_relative_eq!(b.l1, Matrix3::identity(), epsilon = 1e-14);
        assert_relative_eq!(b.l2, SMatrix::<f64, 5, 5>::identity(), epsilon = 1e-14);
        assert_relative_eq!(b.l3, SMatrix::<f64, 7, 7>::identity(), epsilon = 1e-14);
    }

    #[test]
    fn degree_one_block_is_permuted_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        // Rows map (x, y, z) onto the signed (y, z, x) order of the l = 1 basis.
        let q = Mat3::new(0.0, -1.0, 0.0, 0.0, 0.0, 1.0, -1.0, 0.0, 0.0);
        for _ in 0..20 {
            let r = random_rotation(&mut rng);
            let b = sh_block_rotation(&r).unwrap();
            assert_relative_eq!(b.l1, q * r * q.transpose(), epsilon = 1e-12);
        }
    }

    #[test]
    fn z_rotation_mixes_m_plus_minus_one() {
        let theta = 0.6;
        let b = sh_block_rotation(&rot_z(theta)).unwrap();
        assert_relative_eq!(b.l1[(1, 1)], 1.0, epsilon = 1e-14);
        assert_relative_eq!(b.l1[(0, 0)], theta.cos(), epsilon = 1e-14);
        assert_relative_eq!(b.l1[(2, 2)], theta.cos(), epsilon = 1e-14);
        assert_relative_eq!(b.l1[(0, 2)].abs(), theta.sin(), epsilon = 1e-14);
        assert!(b.l1[(0, 1)].abs() < 1e-14 && b.l1[(1, 0)].abs() < 1e-14);
    }

    #[test]
    fn sampling_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..1000 {
            let r = random_rotation(&mut rng);
            let c: [f64; SH_COEFFS] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
            let d = random_unit(&mut rng);
            let rotated = sh_block_rotation(&r).unwrap().apply(&c);
            let lhs = eval_sh(&rotated, &(r * d).normalize()).unwrap();
            let rhs = eval_sh(&c, &d).unwrap();
            assert!((lhs - rhs).abs() < 1e-9, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn dc_only_and_identity_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut c = [[0.0; SH_COEFFS]; 3];
        c[0][0] = 1.5;
        c[2][0] = -0.4;
        assert_eq!(rotate_sh(&c, &random_rotation(&mut rng)).unwrap(), c);
        let full: [[f64; SH_COEFFS]; 3] = std::array::from_fn(|_| std::array::from_fn(|_| rng.gen_range(-1.0..1.0)));
        let same = rotate_sh(&full, &Mat3::identity()).unwrap();
        for ch in 0..3 {
            for i in 0..SH_COEFFS {
                assert_relative_eq!(same[ch][i], full[ch][i], epsilon = 1e-14);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn blocks_are_orthogonal(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let b = sh_block_rotation(&random_rotation(&mut rng)).unwrap();
            for l in 1..=3 {
                let m = b.block(l);
                let err = (m.transpose() * &m - DMatrix::identity(2 * l + 1, 2 * l + 1)).abs().max();
                prop_assert!(err < 1e-10);
            }
        }

        #[test]
        fn rotation_preserves_energy_and_composes(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let r1 = random_rotation(&mut rng);
            let r2 = random_rotation(&mut rng);
            let c: [[f64; SH_COEFFS]; 3] = std::array::from_fn(|_| std::array::from_fn(|_| rng.gen_range(-1.0..1.0)));
            let once = rotate_sh(&c, &r1).unwrap();
            let e0: f64 = c.iter().flatten().map(|v| v * v).sum();
            let e1: f64 = once.iter().flatten().map(|v| v * v).sum();
            prop_assert!((e0 - e1).abs() < 1e-9);
            let twice = rotate_sh(&once, &r2).unwrap();
            let direct = rotate_sh(&c, &(r2 * r1)).unwrap();
            for ch in 0..3 {
                for i in 0..SH_COEFFS {
                    prop_assert!((twice[ch][i] - direct[ch][i]).abs() < 1e-8);
                }
            }
        }
    }
}
