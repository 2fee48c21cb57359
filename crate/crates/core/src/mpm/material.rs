use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{polar_rotation, Mat3, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaterialModel {
    FixedCorotated,
    DruckerPrager,
}

fn default_density() -> f64 {
    1000.0
}

fn default_friction() -> f64 {
    25.0
}

/// Constitutive model plus its parameters. `E` in pascals, density in kg/m^3,
/// friction angle in degrees.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub model: MaterialModel,
    #[serde(rename = "E")]
    pub youngs_modulus: f64,
    #[serde(rename = "nu")]
    pub poisson_ratio: f64,
    #[serde(default = "default_density")]
    pub density: f64,
    #[serde(default = "default_friction")]
    pub friction_angle: f64,
}

impl Material {
    pub fn new(model: MaterialModel, youngs_modulus: f64, poisson_ratio: f64) -> Result<Self> {
        let m = Self {
            model,
            youngs_modulus,
            poisson_ratio,
            density: default_density(),
            friction_angle: default_friction(),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn with_density(mut self, density: f64) -> Self {
        self.density = density;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.youngs_modulus > 0.0 && self.youngs_modulus.is_finite()) {
            return Err(Error::invalid("Young's modulus must be positive"));
        }
        if !(0.0..0.5).contains(&self.poisson_ratio) {
            return Err(Error::invalid("Poisson ratio must lie in [0, 0.5)"));
        }
        if !(self.density > 0.0 && self.density.is_finite()) {
            return Err(Error::invalid("density must be positive"));
        }
        if !(0.0..90.0).contains(&self.friction_angle) {
            return Err(Error::invalid("friction angle must lie in [0, 90) degrees"));
        }
        Ok(())
    }

    pub fn mu(&self) -> f64 {
        self.youngs_modulus / (2.0 * (1.0 + self.poisson_ratio))
    }

    pub fn lambda(&self) -> f64 {
        let nu = self.poisson_ratio;
        self.youngs_modulus * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
    }

    /// `sqrt(E / rho)`, the wave speed used by the CFL bound.
    pub fn wave_speed(&self) -> f64 {
        (self.youngs_modulus / self.density).sqrt()
    }

    pub fn pk1(&self, f: &Mat3) -> Result<Mat3> {
        match self.model {
            MaterialModel::FixedCorotated => fixed_corotated_pk1(f, self.mu(), self.lambda()),
            MaterialModel::DruckerPrager => hencky_pk1(f, self.mu(), self.lambda()),
        }
    }

    pub fn energy_density(&self, f: &Mat3) -> Result<f64> {
        match self.model {
            MaterialModel::FixedCorotated => fixed_corotated_energy(f, self.mu(), self.lambda()),
            MaterialModel::DruckerPrager => hencky_energy(f, self.mu(), self.lambda()),
        }
    }

    /// Plastic projection of a trial elastic deformation gradient.
    pub fn project(&self, f: &Mat3) -> Result<Mat3> {
        match self.model {
            MaterialModel::FixedCorotated => Ok(*f),
            MaterialModel::DruckerPrager => drucker_prager_return_map(f, self.friction_angle, self.mu(), self.lambda()),
        }
    }
}

/// SVD `F = U diag(s) V^T` with `U`, `V` proper rotations. A reflection is
/// absorbed into the last singular value.
pub fn rotation_svd(f: &Mat3) -> (Mat3, Vec3, Mat3) {
    let svd = f.svd(true, true);
    let mut u = svd.u.unwrap();
    let mut v = svd.v_t.unwrap().transpose();
    let mut s = svd.singular_values;
    if u.determinant() < 0.0 {
        u.column_mut(2).neg_mut();
        s[2] = -s[2];
    }
    if v.determinant() < 0.0 {
        v.column_mut(2).neg_mut();
        s[2] = -s[2];
    }
    (u, s, v)
}

fn check_invertible(f: &Mat3) -> Result<f64> {
    let j = f.determinant();
    if !(j > 0.0 && j.is_finite()) {
        return Err(Error::invalid(format!("deformation gradient has det {j:.3e}")));
    }
    Ok(j)
}

/// Cofactor matrix `J F^-T`.
fn cofactor(f: &Mat3) -> Mat3 {
    let c0 = f.column(1).cross(&f.column(2));
    let c1 = f.column(2).cross(&f.column(0));
    let c2 = f.column(0).cross(&f.column(1));
    Mat3::from_columns(&[c0, c1, c2])
}

/// `psi = mu sum (s_i - 1)^2 + lambda/2 (J - 1)^2`.
pub fn fixed_corotated_energy(f: &Mat3, mu: f64, lambda: f64) -> Result<f64> {
    let j = check_invertible(f)?;
    let (_, s, _) = rotation_svd(f);
    Ok(mu * s.iter().map(|x| (x - 1.0).powi(2)).sum::<f64>() + 0.5 * lambda * (j - 1.0).powi(2))
}

/// `P = 2 mu (F - R) + lambda (J - 1) J F^-T`.
pub fn fixed_corotated_pk1(f: &Mat3, mu: f64, lambda: f64) -> Result<Mat3> {
    let j = check_invertible(f)?;
    let r = polar_rotation(f).ok_or_else(|| Error::invalid("polar decomposition failed"))?;
    Ok((f - r) * (2.0 * mu) + cofactor(f) * (lambda * (j - 1.0)))
}

/// Hencky (log-strain St. Venant-Kirchhoff) energy, the elastic part of the sand model.
pub fn hencky_energy(f: &Mat3, mu: f64, lambda: f64) -> Result<f64> {
    check_invertible(f)?;
    let (_, s, _) = rotation_svd(f);
    let e = s.map(f64::ln);
    Ok(mu * e.norm_squared() + 0.5 * lambda * e.sum().powi(2))
}

pub fn hencky_pk1(f: &Mat3, mu: f64, lambda: f64) -> Result<Mat3> {
    check_invertible(f)?;
    let (u, s, v) = rotation_svd(f);
    let e = s.map(f64::ln);
    let tr = e.sum();
    let d = Vec3::from_fn(|i, _| (2.0 * mu * e[i] + lambda * tr) / s[i]);
    Ok(u * Mat3::from_diagonal(&d) * v.transpose())
}

fn friction_alpha(friction_angle: f64) -> f64 {
    let s = friction_angle.to_radians().sin();
    (2.0f64 / 3.0).sqrt() * 2.0 * s / (3.0 - s)
}

/// Yield function on log-singular-values; `<= 0` inside the cone.
pub fn drucker_prager_yield(f: &Mat3, friction_angle: f64, mu: f64, lambda: f64) -> Result<f64> {
    check_invertible(f)?;
    let (_, s, _) = rotation_svd(f);
    let e = s.map(f64::ln);
    let tr = e.sum();
    let dev = e - Vec3::repeat(tr / 3.0);
    Ok(dev.norm() + (3.0 * lambda + 2.0 * mu) / (2.0 * mu) * tr * friction_alpha(friction_angle))
}

/// Cohesionless sand projection: states inside the cone are kept, expansion
/// collapses to the undeformed tip, everything else moves onto the cone along
/// the deviatoric direction.
pub fn drucker_prager_return_map(f: &Mat3, friction_angle: f64, mu: f64, lambda: f64) -> Result<Mat3> {
    check_invertible(f)?;
    let (u, s, v) = rotation_svd(f);
    let e = s.map(f64::ln);
    let tr = e.sum();
    let dev = e - Vec3::repeat(tr / 3.0);
    let dev_norm = dev.norm();
    let dgamma = dev_norm + (3.0 * lambda + 2.0 * mu) / (2.0 * mu) * tr * friction_alpha(friction_angle);
    if dgamma <= 0.0 {
        return Ok(*f);
    }
    let h = if dev_norm == 0.0 || tr > 0.0 {
        Vec3::zeros()
    } else {
        e - dev * (dgamma / dev_norm)
    };
    Ok(u * Mat3::from_diagonal(&h.map(f64::exp)) * v.transpose())
}
