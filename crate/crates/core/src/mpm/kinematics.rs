use super::material::rotation_svd;
use super::solver::Particle;
use crate::error::{Error, Result};
use crate::math::{polar_rotation, quat_from_matrix, Mat3, Vec3};
use crate::sh::rotate_sh;
use crate::splat::GaussianKernel;

/// One particle per kernel with volume `cell^3` and mass `density * cell^3`.
pub fn particles_from_kernels(
    kernels: &[GaussianKernel],
    cell: f64,
    density: f64,
    material: usize,
) -> Result<Vec<Particle>> {
    let volume = cell.powi(3);
    kernels
        .iter()
        .enumerate()
        .map(|(i, k)| Particle::new(k.center, density * volume, volume, material, i))
        .collect()
}

/// Kernels deformed by their particles: center moves to the particle, the
/// covariance becomes `F Sigma F^T` re-factored into rotation and scales, and
/// SH coefficients turn with the rotation part of `F`.
pub fn advect_gaussians(rest: &[GaussianKernel], particles: &[Particle]) -> Result<Vec<GaussianKernel>> {
    let mut out = rest.to_vec();
    for p in particles {
        let k = out
            .get_mut(p.kernel)
            .ok_or_else(|| Error::invalid(format!("particle bound to missing kernel {}", p.kernel)))?;
        if !p.f.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid(format!("particle for kernel {} has a non-finite F", p.kernel)));
        }
        let src = &rest[p.kernel];
        k.center = p.x;
        if p.f == Mat3::identity() {
            continue;
        }
        let (rot, scales) = deformed_frame(&p.f, &src.rotation_matrix(), &src.scales);
        k.rotation = quat_from_matrix(&rot);
        k.scales = scales;
        let r = polar_rotation(&p.f)
            .ok_or_else(|| Error::invalid(format!("particle for kernel {} has det(F) <= 0", p.kernel)))?;
        k.sh = rotate_sh(&src.sh, &r)?;
    }
    Ok(out)
}

/// Rotation and scales of `M M^T` for `M = F R diag(s)`, with axis `j` of the
/// result matched to the rest axis it came from.
fn deformed_frame(f: &Mat3, r: &Mat3, s: &Vec3) -> (Mat3, Vec3) {
    let m = f * r * Mat3::from_diagonal(s);
    let (u, sigma, v) = rotation_svd(&m);
    // M e_j = sum_k u_k sigma_k V[j, k]: pick the dominant k per rest axis.
    let mut used = [false; 3];
    let mut cols = [Vec3::zeros(); 3];
    let mut scales = Vec3::zeros();
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    for &j in &order {
        let k = (0..3)
            .filter(|&k| !used[k])
            .max_by(|&a, &b| v[(j, a)].abs().total_cmp(&v[(j, b)].abs()))
            .unwrap();
        used[k] = true;
        let sign = if v[(j, k)] * sigma[k] < 0.0 { -1.0 } else { 1.0 };
        cols[j] = u.column(k) * sign;
        scales[j] = sigma[k].abs();
    }
    let mut rot = Mat3::from_columns(&cols);
    if rot.determinant() < 0.0 {
        // Flip the least-constrained axis; the covariance is unaffected.
        let j = order[2];
        rot.column_mut(j).neg_mut();
    }
    (rot, scales)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sh::eval_sh;
    use crate::splat::SH_COEFFS;
    use approx::assert_relative_eq;
    use nalgebra::{Rotation3, UnitQuaternion};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn kernel(rng: &mut ChaCha8Rng) -> GaussianKernel {
        let mut k = GaussianKernel::new(
            Vec3::new(rng.gen(), rng.gen(), rng.gen()),
            Vec3::new(rng.gen_range(0.01..0.1), rng.gen_range(0.01..0.1), rng.gen_range(0.01..0.1)),
            UnitQuaternion::from_euler_angles(rng.gen_range(-3.0..3.0), rng.gen_range(-1.5..1.5), rng.gen_range(-3.0..3.0)),
            0.7,
        );
        for c in 0..3 {
            for i in 0..SH_COEFFS {
                k.sh[c][i] = rng.gen_range(-1.0..1.0);
            }
        }
        k
    }

    fn particle_for(k: &GaussianKernel, i: usize, f: Mat3) -> Particle {
        let mut p = Particle::new(k.center + Vec3::new(0.1, 0.0, 0.0), 1.0, 1.0, 0, i).unwrap();
        p.f = f;
        p
    }

    #[test]
    fn identity_leaves_kernels_alone() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ks: Vec<_> = (0..5).map(|_| kernel(&mut rng)).collect();
        let ps: Vec<_> = ks.iter().enumerate().map(|(i, k)| particle_for(k, i, Mat3::identity())).collect();
        let out = advect_gaussians(&ks, &ps).unwrap();
        for ((a, b), p) in out.iter().zip(&ks).zip(&ps) {
            assert_eq!(a.center, p.x);
            assert_eq!(a.rotation, b.rotation);
            assert_eq!(a.scales, b.scales);
            assert_eq!(a.sh, b.sh);
        }
    }

    #[test]
    fn rigid_rotation_turns_covariance_and_sh() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r = Rotation3::from_euler_angles(0.3, 1.1, -0.8).into_inner();
        for i in 0..20 {
            let k = kernel(&mut rng);
            let out = advect_gaussians(std::slice::from_ref(&k), &[particle_for(&k, 0, r)]).unwrap();
            let a = &out[0];
            assert_relative_eq!(a.covariance(), r * k.covariance() * r.transpose(), epsilon = 1e-12);
            assert_relative_eq!(a.scales, k.scales, epsilon = 1e-9);
            let d = Vec3::new(0.3, -0.5, 0.8 + 0.01 * i as f64).normalize();
            for c in 0..3 {
                let before = eval_sh(&k.sh[c], &d).unwrap();
                let after = eval_sh(&a.sh[c], &(r * d)).unwrap();
                assert!((before - after).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn stretch_doubles_leading_scale() {
        let k = GaussianKernel::new(Vec3::zeros(), Vec3::new(0.3, 0.2, 0.1), UnitQuaternion::identity(), 1.0);
        let f = Mat3::from_diagonal(&Vec3::new(2.0, 1.0, 1.0));
        let out = advect_gaussians(std::slice::from_ref(&k), &[particle_for(&k, 0, f)]).unwrap();
        assert_relative_eq!(out[0].scales, Vec3::new(0.6, 0.2, 0.1), epsilon = 1e-9);
        assert_relative_eq!(out[0].covariance(), f * k.covariance() * f, epsilon = 1e-12);
    }

    #[test]
    fn random_deformations_preserve_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let k = kernel(&mut rng);
            let f = Mat3::identity() + Mat3::from_fn(|_, _| rng.gen_range(-0.3..0.3));
            if f.determinant() <= 0.1 {
                continue;
            }
            let out = advect_gaussians(std::slice::from_ref(&k), &[particle_for(&k, 0, f)]).unwrap();
            let expect = f * k.covariance() * f.transpose();
            assert!((out[0].covariance() - expect).norm() < 1e-12 * expect.norm().max(1.0));
            assert!(crate::math::is_rotation(&out[0].rotation_matrix(), 1e-9));
        }
    }

    #[test]
    fn bad_bindings_error() {
        let k = GaussianKernel::isotropic(Vec3::zeros(), 0.1, 1.0);
        let mut p = particle_for(&k, 3, Mat3::identity());
        assert!(advect_gaussians(std::slice::from_ref(&k), &[p.clone()]).is_err());
        p.kernel = 0;
        p.f[(0, 0)] = f64::NAN;
        assert!(advect_gaussians(&[k], &[p]).is_err());
    }
}
