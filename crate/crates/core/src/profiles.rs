//! Closed-form angular and radial profiles.

use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::params::Parameters;

fn check_angle(theta: f64) -> Result<()> {
    if theta > 0.0 && theta < FRAC_PI_2 {
        Ok(())
    } else {
        Err(Error::Domain(format!("theta = {theta} must lie in (0, pi/2)")))
    }
}

/// `Γ(θ) = (sin θ cos²θ)^{α/3}`.
pub fn gamma_profile(theta: f64, alpha: f64) -> Result<f64> {
    check_angle(theta)?;
    Ok(gamma_unchecked(theta, alpha))
}

#[inline]
pub(crate) fn gamma_unchecked(theta: f64, alpha: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    (s * c * c).powf(alpha / 3.0)
}

/// `∂_θ Γ = (α/3) Γ (cot θ − 2 tan θ)`.
#[inline]
pub(crate) fn gamma_dtheta(theta: f64, alpha: f64) -> f64 {
    alpha / 3.0 * gamma_unchecked(theta, alpha) * (1.0 / theta.tan() - 2.0 * theta.tan())
}

/// `K(θ) = 3 sin θ cos²θ`.
#[inline]
pub fn k_profile(theta: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    3.0 * s * c * c
}

/// `w(z) = (1 + z)²/z²`.
pub fn weight_w(z: f64) -> Result<f64> {
    if !(z > 0.0) {
        return Err(Error::Domain(format!("weight needs z > 0, got {z}")));
    }
    Ok(weight_unchecked(z))
}

#[inline]
pub(crate) fn weight_unchecked(z: f64) -> f64 {
    let r = (1.0 + z) / z;
    r * r
}

#[inline]
fn bump(z: f64) -> f64 {
    4.0 * z / ((1.0 + z) * (1.0 + z))
}

/// Approximate steady vorticity profile `F★ = (Γ/c)·4αz/(1+z)²`.
pub fn f_star(z: f64, theta: f64, params: &Parameters) -> f64 {
    params.alpha * f_star_unscaled(z, theta, params)
}

/// `F★` without the factor `α`, the normalisation with `L_K(F★) = 4α/(1+z)`.
pub fn f_star_unscaled(z: f64, theta: f64, params: &Parameters) -> f64 {
    gamma_unchecked(theta, params.alpha) / params.c * bump(z)
}

/// Smooth cutoff: 0 below 1/2, 1 above 1, quintic smoothstep in between.
pub fn cutoff_chi(z: f64) -> f64 {
    let t = 2.0 * z - 1.0;
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
    }
}

/// `(χ, χ', χ'')` in `z`.
pub fn cutoff_chi_derivs(z: f64) -> (f64, f64, f64) {
    let t = 2.0 * z - 1.0;
    if t <= 0.0 {
        (0.0, 0.0, 0.0)
    } else if t >= 1.0 {
        (1.0, 0.0, 0.0)
    } else {
        let d1 = 30.0 * t * t * (1.0 - t) * (1.0 - t);
        let d2 = 60.0 * t * (1.0 - t) * (1.0 - 2.0 * t);
        (cutoff_chi(z), 2.0 * d1, 4.0 * d2)
    }
}

/// Neumann eigenfunction `cos²θ − 2/3` of `∂_θθ − tan θ ∂_θ + 6`.
pub fn pi_angular(theta: f64) -> f64 {
    let c = theta.cos();
    c * c - 2.0 / 3.0
}

/// `(Π₂, Π₂', Π₂'')`.
pub fn pi_angular_derivs(theta: f64) -> (f64, f64, f64) {
    (pi_angular(theta), -(2.0 * theta).sin(), -2.0 * (2.0 * theta).cos())
}

/// `Π₂'' − tan θ Π₂' + 6Π₂` from analytic derivatives.
pub fn sturm_liouville_residual(theta: f64) -> f64 {
    let (p, d1, d2) = pi_angular_derivs(theta);
    d2 - theta.tan() * d1 + 6.0 * p
}

/// Relative residual of `z^β` in `α²z²∂_zz + α(5+α)z∂_z + 1`.
pub fn euler_ode_residual(z: f64, params: &Parameters) -> f64 {
    let (a, b) = (params.alpha, params.beta);
    let f = z.powf(b);
    let zd1 = b * f;
    let z2d2 = b * (b - 1.0) * f;
    (a * a * z2d2 + a * (5.0 + a) * zd1 + f).abs() / f.abs()
}

/// Cut-off special solution `Π̃ · χ(z) · c₁ z^β · Π₂(θ)` of the
/// electrostatic problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpecialPi {
    pub amplitude: f64,
    pub c1: f64,
    pub params: Parameters,
}

impl SpecialPi {
    pub fn new(amplitude: f64, params: Parameters) -> Self {
        Self { amplitude, c1: 1.0, params }
    }

    fn radial(&self, z: f64) -> f64 {
        self.amplitude * self.c1 * cutoff_chi(z) * z.powf(self.params.beta)
    }

    pub fn value(&self, z: f64, theta: f64) -> f64 {
        self.radial(z) * pi_angular(theta)
    }

    /// Uncut product `Π₀ = Π̃ c₁ z^β Π₂`.
    pub fn uncut(&self, z: f64, theta: f64) -> f64 {
        self.amplitude * self.c1 * z.powf(self.params.beta) * pi_angular(theta)
    }

    /// `P Π` evaluated with analytic derivatives.
    pub fn potential_image(&self, z: f64, theta: f64) -> f64 {
        let (a, b) = (self.params.alpha, self.params.beta);
        let (chi, chi1, chi2) = cutoff_chi_derivs(z);
        if chi == 0.0 && chi1 == 0.0 {
            return 0.0;
        }
        let p = z.powf(b);
        // z h' and z² h'' for h = χ z^β
        let zh1 = z * chi1 * p + b * chi * p;
        let z2h2 = z * z * chi2 * p + 2.0 * b * z * chi1 * p + b * (b - 1.0) * chi * p;
        self.amplitude * self.c1 * pi_angular(theta) * (a * a * z2h2 + a * (5.0 + a) * zh1)
    }

    /// `P Π₀` for the uncut product; equals `−Π₀` identically.
    pub fn uncut_potential_image(&self, z: f64, theta: f64) -> f64 {
        let (a, b) = (self.params.alpha, self.params.beta);
        let p = self.amplitude * self.c1 * z.powf(b);
        let (q, q1, q2) = pi_angular_derivs(theta);
        let radial = a * a * b * (b - 1.0) * p + a * (5.0 + a) * b * p;
        radial * q + p * (q2 - theta.tan() * q1 + 6.0 * q)
    }

    pub fn sample(&self, grid: &Arc<Grid>) -> Field {
        Field::from_fn(grid, |z, t| self.value(z, t))
    }

    pub fn sample_image(&self, grid: &Arc<Grid>) -> Field {
        Field::from_fn(grid, |z, t| self.potential_image(z, t))
    }
}

/// Same as [`SpecialPi::sample`].
pub fn special_pi(sp: &SpecialPi, grid: &Arc<Grid>) -> Field {
    sp.sample(grid)
}

/// Background vorticity profile with the derivatives the linearised
/// operators need. `F = F★ + α² g`; the correction `g` is zero unless
/// supplied through [`Profile::with_correction`].
#[derive(Debug, Clone)]
pub struct Profile {
    pub f: Field,
    /// `∂_θ F`
    pub dtheta: Field,
    /// `z ∂_z F`
    pub zdz: Field,
}

impl Profile {
    pub fn f_star(grid: &Arc<Grid>, params: &Parameters) -> Self {
        let a = params.alpha;
        let f = Field::from_fn(grid, |z, t| f_star(z, t, params));
        let dtheta = Field::from_fn(grid, |z, t| a * gamma_dtheta(t, a) / params.c * bump(z));
        let zdz = Field::from_fn(grid, |z, t| {
            a * gamma_unchecked(t, a) / params.c * 4.0 * z * (1.0 - z) / (1.0 + z).powi(3)
        });
        Self { f, dtheta, zdz }
    }

    /// Add `α² g` given `g` and its derivatives `(∂_θ g, z ∂_z g)`.
    pub fn with_correction(mut self, alpha: f64, g: &Field, g_dtheta: &Field, g_zdz: &Field) -> Self {
        let s = alpha * alpha;
        self.f = self.f.axpy(s, g);
        self.dtheta = self.dtheta.axpy(s, g_dtheta);
        self.zdz = self.zdz.axpy(s, g_zdz);
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    #[test]
    fn k_values() {
        assert!((k_profile(FRAC_PI_4) - 3.0 * 2f64.sqrt() / 4.0).abs() < 1e-15);
        assert!(k_profile(FRAC_PI_2).abs() < 1e-15);
        assert!(k_profile(0.3) >= 0.0);
    }

    #[test]
    fn gamma_values() {
        // (√2/4)^(1/30), evaluated at high precision: 0.96593632892484...
        let g = gamma_profile(FRAC_PI_4, 0.1).unwrap();
        assert!((g - 0.965936328924846).abs() < 1e-13, "{g}");
        assert!(gamma_profile(0.0, 0.1).is_err());
        assert!(gamma_profile(FRAC_PI_2, 0.1).is_err());
    }

    #[test]
    fn weight_values() {
        assert_eq!(weight_w(1.0).unwrap(), 4.0);
        assert_eq!(weight_w(0.5).unwrap(), 9.0);
        assert!((weight_w(1e8).unwrap() - 1.0).abs() < 1e-7);
        assert!(weight_w(1e3).unwrap() > weight_w(1e4).unwrap());
        assert!(weight_w(0.0).is_err());
    }

    #[test]
    fn f_star_peaks_at_one() {
        let p = Parameters::new(0.05, 0.025, 0).unwrap();
        let t = 0.6;
        let peak = f_star(1.0, t, &p);
        assert!((peak - p.alpha * gamma_unchecked(t, p.alpha) / p.c).abs() < 1e-15);
        for z in [0.5, 0.9, 1.1, 3.0] {
            assert!(f_star(z, t, &p) < peak);
        }
        assert!(f_star(1.0, FRAC_PI_2 - 1e-12, &p) < 0.5 * peak);
    }

    #[test]
    fn cutoff_values() {
        assert_eq!(cutoff_chi(0.4), 0.0);
        assert_eq!(cutoff_chi(2.0), 1.0);
        assert!((cutoff_chi(0.75) - 0.5).abs() < 1e-15);
        // derivatives against central differences
        for z in [0.55, 0.7, 0.93] {
            let h = 1e-5;
            let (_, d1, d2) = cutoff_chi_derivs(z);
            let fd1 = (cutoff_chi(z + h) - cutoff_chi(z - h)) / (2.0 * h);
            let fd2 = (cutoff_chi(z + h) - 2.0 * cutoff_chi(z) + cutoff_chi(z - h)) / (h * h);
            assert!((d1 - fd1).abs() < 1e-8);
            assert!((d2 - fd2).abs() < 1e-4);
        }
    }

    #[test]
    fn angular_eigenfunction() {
        assert!((pi_angular(0.0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((pi_angular(FRAC_PI_2) + 2.0 / 3.0).abs() < 1e-15);
        assert!(sturm_liouville_residual(std::f64::consts::FRAC_PI_3).abs() < 1e-14);
        let (_, d0, _) = pi_angular_derivs(0.0);
        let (_, d1, _) = pi_angular_derivs(FRAC_PI_2);
        assert!(d0.abs() < 1e-15 && d1.abs() < 1e-15);
    }

    #[test]
    fn special_solution_cut_below_half() {
        let p = Parameters::new(0.05, 0.025, 0).unwrap();
        let sp = SpecialPi::new(3.0, p);
        assert_eq!(sp.value(0.25, 0.4), 0.0);
        assert_eq!(sp.potential_image(0.25, 0.4), 0.0);
        for z in [1.5, 4.0, 30.0] {
            let r = sp.potential_image(z, 0.4) + sp.value(z, 0.4);
            assert!(r.abs() <= 1e-10 * sp.value(z, 0.4).abs());
        }
    }

    #[test]
    fn euler_residual_small() {
        for alpha in [0.01, 0.05, 0.1] {
            let p = Parameters::new(alpha, 0.0, 0).unwrap();
            for z in [1.5, 10.0, 1e3] {
                assert!(euler_ode_residual(z, &p) < 1e-10);
            }
        }
    }
}
