//! Scalar constants shared by every operator.

use crate::error::{Error, Result};
use crate::quadrature::tanh_sinh;

/// Angular exponent of the η-weighted norm terms.
pub const ETA: f64 = 0.99;

/// Model constants derived from the small parameter `alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Parameters {
    pub alpha: f64,
    pub delta: f64,
    pub eta: f64,
    pub gamma: f64,
    pub k: usize,
    /// `∫ Γ K dθ` over the quarter circle.
    pub c: f64,
    /// Radial exponent of the special electrostatic solution, `(√21 − 5)/(2α)`.
    pub beta: f64,
}

/// `(√21 − 5)/2`, the exponent `α·β` independent of `α`.
pub fn alpha_beta() -> f64 {
    (21f64.sqrt() - 5.0) / 2.0
}

impl Parameters {
    pub fn new(alpha: f64, delta: f64, k: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 0.2) {
            return Err(Error::Parameter(format!("alpha = {alpha} must satisfy 0 < alpha <= 0.2")));
        }
        if !(0.0..1.0).contains(&delta) {
            return Err(Error::Parameter(format!("delta = {delta} must satisfy 0 <= delta < 1")));
        }
        Ok(Self {
            alpha,
            delta,
            eta: ETA,
            gamma: 1.0 + alpha / 10.0,
            k,
            c: profile_constant(alpha),
            beta: alpha_beta() / alpha,
        })
    }
}

/// Same as [`Parameters::new`].
pub fn make_parameters(alpha: f64, delta: f64, k: usize) -> Result<Parameters> {
    Parameters::new(alpha, delta, k)
}

/// `c = ∫₀^{π/2} Γ(θ) K(θ) dθ` by double-exponential quadrature (the integrand
/// has fractional-power zeros at both ends).
pub fn profile_constant(alpha: f64) -> f64 {
    let e = alpha / 3.0;
    tanh_sinh(
        |t| {
            let (s, c) = t.sin_cos();
            let base = s * c * c;
            3.0 * base * base.powf(e)
        },
        0.0,
        std::f64::consts::FRAC_PI_2,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range_alpha() {
        assert!(Parameters::new(0.0, 0.0, 0).is_err());
        assert!(Parameters::new(-0.1, 0.0, 0).is_err());
        assert!(Parameters::new(0.25, 0.0, 0).is_err());
        assert!(Parameters::new(0.05, 1.0, 0).is_err());
        assert!(Parameters::new(0.2, 0.0, 0).is_ok());
    }

    #[test]
    fn fixed_exponents() {
        let p = Parameters::new(0.1, 0.05, 0).unwrap();
        assert_eq!(p.gamma, 1.01);
        assert_eq!(p.eta, 0.99);
    }

    #[test]
    fn beta_at_alpha_005() {
        let p = Parameters::new(0.05, 0.025, 0).unwrap();
        // √21 = 4.58257569495584000658804719372800848898...
        assert!((p.beta - (-4.174243050441599)).abs() < 1e-12);
        assert!((p.alpha * p.beta - (-0.20871215252207999)).abs() < 1e-15);
        assert!(p.beta < 0.0);
    }

    #[test]
    fn alpha_beta_is_alpha_free() {
        for alpha in [0.01, 0.05, 0.1, 0.2] {
            let p = Parameters::new(alpha, 0.0, 0).unwrap();
            assert!((p.alpha * p.beta - alpha_beta()).abs() < 1e-12);
        }
    }

    #[test]
    fn c_tends_to_one() {
        assert!((profile_constant(1e-9) - 1.0).abs() < 1e-8);
        let c = profile_constant(0.05);
        assert!(c > 0.0 && c < 1.0);
    }

    #[test]
    fn deterministic() {
        let a = Parameters::new(0.05, 0.025, 1).unwrap();
        let b = Parameters::new(0.05, 0.025, 1).unwrap();
        assert_eq!(a.c.to_bits(), b.c.to_bits());
        assert_eq!(a.beta.to_bits(), b.beta.to_bits());
    }
}
