//! Tensor-product `(z, θ)` grid, sampled fields and quadrature.

use std::f64::consts::FRAC_PI_2;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use crate::diff::{stencils, Stencil};
use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre, interval_integrals};

/// Log-spaced radial nodes crossed with Gauss–Legendre angular nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub z: Vec<f64>,
    pub theta: Vec<f64>,
    /// Weights with `Σ w_i f(z_i) ≈ ∫ f dz`.
    pub z_weights: Vec<f64>,
    pub theta_weights: Vec<f64>,
    /// Uniform spacing in `log z`.
    pub log_step: f64,
    pub(crate) u_d1: Vec<Stencil>,
    pub(crate) u_d2: Vec<Stencil>,
    pub(crate) theta_d1: Vec<Stencil>,
    pub(crate) theta_d2: Vec<Stencil>,
}

/// `n` nodes equispaced in `log z` on `[z_min, z_max]`, endpoints included.
pub fn geometric_nodes(z_min: f64, z_max: f64, n: usize) -> Vec<f64> {
    let (a, b) = (z_min.ln(), z_max.ln());
    let h = (b - a) / (n - 1) as f64;
    (0..n)
        .map(|i| match i {
            0 => z_min,
            _ if i == n - 1 => z_max,
            _ => (a + i as f64 * h).exp(),
        })
        .collect()
}

impl Grid {
    pub fn new(z_min: f64, z_max: f64, nz: usize, ntheta: usize) -> Result<Self> {
        if !(z_min > 0.0 && z_max > z_min && z_max.is_finite()) {
            return Err(Error::Grid(format!("need 0 < z_min < z_max, got [{z_min}, {z_max}]")));
        }
        if nz < 8 || ntheta < 8 {
            return Err(Error::Grid(format!("need at least 8 nodes per direction, got {nz} x {ntheta}")));
        }
        let z = geometric_nodes(z_min, z_max, nz);
        let log_step = (z_max.ln() - z_min.ln()) / (nz - 1) as f64;
        // ∫ f dz = ∫ f z du: per-node weights of the fourth-order interval rule.
        let mut z_weights = vec![0.0; nz];
        for i in 0..nz {
            let mut e = vec![0.0; nz];
            e[i] = z[i];
            z_weights[i] = interval_integrals(&e, log_step).iter().sum();
        }
        let (theta, theta_weights) = gauss_legendre(ntheta, 0.0, FRAC_PI_2);
        let u: Vec<f64> = (0..nz).map(|i| i as f64 * log_step).collect();
        let (u_d1, u_d2) = stencils(&u);
        let (theta_d1, theta_d2) = stencils(&theta);
        Ok(Self { z, theta, z_weights, theta_weights, log_step, u_d1, u_d2, theta_d1, theta_d2 })
    }

    pub fn nz(&self) -> usize {
        self.z.len()
    }

    pub fn ntheta(&self) -> usize {
        self.theta.len()
    }

    pub fn len(&self) -> usize {
        self.nz() * self.ntheta()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, iz: usize, jt: usize) -> usize {
        iz * self.ntheta() + jt
    }

    pub fn z_min(&self) -> f64 {
        self.z[0]
    }

    pub fn z_max(&self) -> f64 {
        self.z[self.nz() - 1]
    }
}

/// Same as [`Grid::new`], shared behind an `Arc`.
pub fn make_grid(z_min: f64, z_max: f64, nz: usize, ntheta: usize) -> Result<Arc<Grid>> {
    Grid::new(z_min, z_max, nz, ntheta).map(Arc::new)
}

fn same_grid(a: &Arc<Grid>, b: &Arc<Grid>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

/// Scalar samples on every `(z, θ)` node, θ fastest.
#[derive(Debug, Clone)]
pub struct Field {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        Self { grid: grid.clone(), values: vec![0.0; grid.len()] }
    }

    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for &z in &grid.z {
            for &t in &grid.theta {
                values.push(f(z, t));
            }
        }
        Self { grid: grid.clone(), values }
    }

    pub fn from_values(grid: &Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Grid(format!("expected {} samples, got {}", grid.len(), values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Grid("non-finite sample".into()));
        }
        Ok(Self { grid: grid.clone(), values })
    }

    pub(crate) fn from_raw(grid: &Arc<Grid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid: grid.clone(), values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn at(&self, iz: usize, jt: usize) -> f64 {
        self.values[self.grid.idx(iz, jt)]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Pointwise `f(z, θ, value)`.
    pub fn map(&self, f: impl Fn(f64, f64, f64) -> f64) -> Self {
        let g = &self.grid;
        let nt = g.ntheta();
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| f(g.z[i / nt], g.theta[i % nt], v))
            .collect();
        Self::from_raw(g, values)
    }

    pub fn try_zip(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if !same_grid(&self.grid, &other.grid) {
            return Err(Error::GridMismatch);
        }
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self::from_raw(&self.grid, values))
    }

    fn zip(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Self {
        self.try_zip(other, f).expect("fields combined across different grids")
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::from_raw(&self.grid, self.values.iter().map(|v| v * s).collect())
    }

    /// `self + s·other`
    pub fn axpy(&self, s: f64, other: &Field) -> Self {
        self.zip(other, |a, b| a + s * b)
    }

    /// Pointwise product with a function of the radial coordinate.
    pub fn mul_radial(&self, r: &RadialFunction) -> Self {
        assert!(same_grid(&self.grid, &r.grid), "fields combined across different grids");
        let nt = self.grid.ntheta();
        let values = self.values.iter().enumerate().map(|(i, v)| v * r.values[i / nt]).collect();
        Self::from_raw(&self.grid, values)
    }

    /// Broadcast a radial function over θ.
    pub fn from_radial(r: &RadialFunction) -> Self {
        let nt = r.grid.ntheta();
        let values = (0..r.grid.len()).map(|i| r.values[i / nt]).collect();
        Self::from_raw(&r.grid, values)
    }
}

impl Add for &Field {
    type Output = Field;
    fn add(self, rhs: &Field) -> Field {
        self.zip(rhs, |a, b| a + b)
    }
}

impl Sub for &Field {
    type Output = Field;
    fn sub(self, rhs: &Field) -> Field {
        self.zip(rhs, |a, b| a - b)
    }
}

impl Mul for &Field {
    type Output = Field;
    fn mul(self, rhs: &Field) -> Field {
        self.zip(rhs, |a, b| a * b)
    }
}

impl Mul<f64> for &Field {
    type Output = Field;
    fn mul(self, rhs: f64) -> Field {
        self.scale(rhs)
    }
}

impl Neg for &Field {
    type Output = Field;
    fn neg(self) -> Field {
        self.scale(-1.0)
    }
}

/// Samples of a function of `z` alone.
#[derive(Debug, Clone)]
pub struct RadialFunction {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl RadialFunction {
    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: grid.clone(), values: grid.z.iter().map(|&z| f(z)).collect() }
    }

    pub fn from_values(grid: &Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.nz() {
            return Err(Error::Grid(format!("expected {} radial samples, got {}", grid.nz(), values.len())));
        }
        Ok(Self { grid: grid.clone(), values })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at the innermost node, the proxy for `z = 0`.
    pub fn at_origin(&self) -> f64 {
        self.values[0]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// `∫ f dz` over `[z_min, z_max]`.
pub fn integrate_z(f: &RadialFunction) -> f64 {
    f.values.iter().zip(&f.grid.z_weights).map(|(v, w)| v * w).sum()
}

/// `∫ f(z_i, θ) dθ` at one radial node.
pub fn integrate_theta_at(f: &Field, iz: usize) -> f64 {
    let g = &f.grid;
    let row = &f.values[g.idx(iz, 0)..g.idx(iz, 0) + g.ntheta()];
    row.iter().zip(&g.theta_weights).map(|(v, w)| v * w).sum()
}

/// `∫ f dθ` at every radial node.
pub fn integrate_theta(f: &Field) -> RadialFunction {
    let values = (0..f.grid.nz()).map(|iz| integrate_theta_at(f, iz)).collect();
    RadialFunction { grid: f.grid.clone(), values }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::k_profile;

    #[test]
    fn geometric_spacing() {
        let z = geometric_nodes(0.01, 100.0, 4);
        let want = [0.01, 0.215443469003188, 4.641588833612779, 100.0];
        for (a, b) in z.iter().zip(want) {
            assert!((a - b).abs() < 1e-12 * b, "{a} vs {b}");
        }
    }

    #[test]
    fn grid_invariants() {
        let g = Grid::new(1e-2, 1e4, 64, 32).unwrap();
        assert!(g.z.windows(2).all(|w| w[0] < w[1]));
        assert!(g.theta.iter().all(|&t| t > 0.0 && t < FRAC_PI_2));
        let one: f64 = g.theta_weights.iter().sum();
        assert!((one - FRAC_PI_2).abs() < 1e-12 * FRAC_PI_2);
        let s2: f64 = g.theta.iter().zip(&g.theta_weights).map(|(t, w)| w * (2.0 * t).sin()).sum();
        assert!((s2 - 1.0).abs() < 1e-10);
        let kk: f64 = g.theta.iter().zip(&g.theta_weights).map(|(&t, w)| w * k_profile(t)).sum();
        assert!((kk - 1.0).abs() < 1e-10);
    }

    #[test]
    fn rejects_bad_bounds() {
        assert!(Grid::new(1.0, 0.5, 16, 16).is_err());
        assert!(Grid::new(0.0, 10.0, 16, 16).is_err());
        assert!(Grid::new(0.1, 10.0, 4, 16).is_err());
    }

    #[test]
    fn integrate_inverse_square() {
        let g = make_grid(1.0, 100.0, 512, 8).unwrap();
        let f = RadialFunction::from_fn(&g, |z| 1.0 / (z * z));
        assert!((integrate_z(&f) - 0.99).abs() < 1e-4);
        let zero = RadialFunction::from_fn(&g, |_| 0.0);
        assert_eq!(integrate_z(&zero), 0.0);
    }

    #[test]
    fn z_quadrature_converges() {
        let err = |n| {
            let g = make_grid(1.0, 100.0, n, 8).unwrap();
            (integrate_z(&RadialFunction::from_fn(&g, |z| 1.0 / (z * z))) - 0.99).abs()
        };
        let (e1, e2) = (err(16), err(32));
        assert!(e1 / e2 >= 3.5, "{e1} {e2}");
    }

    #[test]
    fn mismatched_grids_rejected() {
        let a = make_grid(0.01, 1e3, 16, 8).unwrap();
        let b = make_grid(0.01, 1e3, 16, 10).unwrap();
        let fa = Field::zeros(&a);
        let fb = Field::zeros(&b);
        assert_eq!(fa.try_zip(&fb, |x, y| x + y).unwrap_err(), Error::GridMismatch);
        let a2 = make_grid(0.01, 1e3, 16, 8).unwrap();
        assert!(fa.try_zip(&Field::zeros(&a2), |x, y| x + y).is_ok());
    }
}
