//! Weighted inner products, the `H^k` family of norms and the energy.
//!
//! `‖f‖²_{H^k} = Σ_{i≤k} ‖D_z^i f · w/sin^{η/2}2θ‖² + Σ_{i≥1, i+j≤k} ‖D_z^j D_θ^i f · w/sin^{γ/2}2θ‖²`
//! with `D_z = z∂_z`, `D_θ = sin 2θ ∂_θ` and the flat measure `dθ dz`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::operators::{dtheta, zdz};
use crate::params::Parameters;
use crate::profiles::{weight_unchecked, SpecialPi};

/// Which angular weight a term carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightKind {
    /// `sin 2θ^{−η}`, radial-derivative terms.
    Eta,
    /// `sin 2θ^{−γ}`, terms with at least one angular derivative.
    Gamma,
}

/// One squared contribution `‖D_z^radial D_θ^angular f · weight‖²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormTerm {
    pub radial: usize,
    pub angular: usize,
    pub weight: WeightKind,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormBreakdown {
    pub terms: Vec<NormTerm>,
    /// Squared norm, the sum of all terms.
    pub total: f64,
}

impl NormBreakdown {
    pub fn norm(&self) -> f64 {
        self.total.sqrt()
    }
}

/// Quadrature weights of `w² sin 2θ^{−e} dθ dz` at every node.
fn measure(grid: &Grid, e: f64) -> Vec<f64> {
    let nt = grid.ntheta();
    let ang: Vec<f64> = grid.theta.iter().zip(&grid.theta_weights).map(|(t, w)| w * (2.0 * t).sin().powf(-e)).collect();
    let mut m = Vec::with_capacity(grid.len());
    for (z, zw) in grid.z.iter().zip(&grid.z_weights) {
        let w = weight_unchecked(*z);
        let r = w * w * zw;
        m.extend(ang.iter().map(|a| r * a));
    }
    debug_assert_eq!(m.len(), nt * grid.nz());
    m
}

fn pair(f: &[f64], g: &[f64], m: &[f64]) -> f64 {
    f.iter().zip(g).zip(m).map(|((a, b), w)| a * b * w).sum()
}

/// `∫∫ f g w² sin 2θ^{−e} dθ dz`.
pub fn weighted_l2(f: &Field, g: &Field, weight_exponent: f64) -> Result<f64> {
    if f.grid() != g.grid() {
        return Err(Error::GridMismatch);
    }
    Ok(pair(f.values(), g.values(), &measure(f.grid(), weight_exponent)))
}

/// All derivative fields entering the `H^k` sum, tagged with their term.
fn derivative_terms(f: &Field, k: usize) -> Vec<(usize, usize, WeightKind, Field)> {
    let mut out = Vec::new();
    // D_θ^i f for i = 0..=k, then D_z^j of each
    let mut ang = f.clone();
    for i in 0..=k {
        let mut cur = ang.clone();
        for j in 0..=k - i {
            let kind = if i == 0 { WeightKind::Eta } else { WeightKind::Gamma };
            out.push((j, i, kind, cur.clone()));
            if j < k - i {
                cur = zdz(&cur);
            }
        }
        if i < k {
            ang = dtheta(&ang).map(|_, t, v| (2.0 * t).sin() * v);
        }
    }
    out
}

/// Squared `H^k` norm with its per-term breakdown, `k` from the parameters.
pub fn h_k_norm(f: &Field, params: &Parameters) -> Result<NormBreakdown> {
    let grid = f.grid();
    let (me, mg) = (measure(grid, params.eta), measure(grid, params.gamma));
    let mut terms = Vec::new();
    for (idx, (j, i, kind, d)) in derivative_terms(f, params.k).into_iter().enumerate() {
        let m = if kind == WeightKind::Eta { &me } else { &mg };
        let value = pair(d.values(), d.values(), m);
        if !value.is_finite() {
            return Err(Error::NonFinite(idx));
        }
        terms.push(NormTerm { radial: j, angular: i, weight: kind, value });
    }
    let total = terms.iter().map(|t| t.value).sum();
    Ok(NormBreakdown { terms, total })
}

/// `(f, g)_{H^k}`, the inner product whose square is [`h_k_norm`].
pub fn h_k_inner(f: &Field, g: &Field, params: &Parameters) -> Result<f64> {
    if f.grid() != g.grid() {
        return Err(Error::GridMismatch);
    }
    let grid = f.grid();
    let (me, mg) = (measure(grid, params.eta), measure(grid, params.gamma));
    let df = derivative_terms(f, params.k);
    let dg = derivative_terms(g, params.k);
    Ok(df
        .iter()
        .zip(&dg)
        .map(|((_, _, kind, a), (_, _, _, b))| pair(a.values(), b.values(), if *kind == WeightKind::Eta { &me } else { &mg }))
        .sum())
}

/// Energy `E = ‖ε‖²_{H^k} + ‖G‖²_{H^k} / C_G²`, where `C_G = ‖P Π_unit‖_{H^k}`
/// is the norm of the charge of the unit-amplitude special solution, so that
/// a special-form charge of amplitude `Π̃` contributes exactly `Π̃²`.
#[derive(Debug, Clone)]
pub struct EnergyFunctional {
    params: Parameters,
    unit_charge: Field,
    unit_norm2: f64,
}

impl EnergyFunctional {
    pub fn new(grid: &Arc<Grid>, params: &Parameters) -> Result<Self> {
        let unit_charge = SpecialPi::new(1.0, *params).sample_image(grid);
        let unit_norm2 = h_k_norm(&unit_charge, params)?.total;
        if !(unit_norm2 > 0.0) {
            return Err(Error::Domain("special charge has zero norm on this grid".into()));
        }
        Ok(Self { params: *params, unit_charge, unit_norm2 })
    }

    /// `C_G²`.
    pub fn normalization(&self) -> f64 {
        self.unit_norm2
    }

    /// Charge of the unit-amplitude special solution.
    pub fn unit_charge(&self) -> &Field {
        &self.unit_charge
    }

    pub fn energy(&self, eps: &Field, g: &Field) -> Result<f64> {
        Ok(h_k_norm(eps, &self.params)?.total + h_k_norm(g, &self.params)?.total / self.unit_norm2)
    }

    /// Amplitude of the `H^k`-orthogonal projection of `G` onto the
    /// special-solution charge.
    pub fn special_amplitude(&self, g: &Field) -> Result<f64> {
        Ok(h_k_inner(g, &self.unit_charge, &self.params)? / self.unit_norm2)
    }
}

/// One-shot energy; builds the normalisation on the fields' grid.
pub fn energy(eps: &Field, g: &Field, params: &Parameters) -> Result<f64> {
    if eps.grid() != g.grid() {
        return Err(Error::GridMismatch);
    }
    EnergyFunctional::new(eps.grid(), params)?.energy(eps, g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::quadrature::tanh_sinh;
    use proptest::prelude::*;

    fn params(k: usize) -> Parameters {
        Parameters::new(0.05, 0.025, k).unwrap()
    }

    fn test_field(grid: &Arc<Grid>, p: i32, q: i32, m: i32, phase: f64) -> Field {
        Field::from_fn(grid, |z, t| z.powi(p) / (1.0 + z).powi(q) * (2.0 * t).sin().powi(m) * (1.0 + 0.3 * (z.ln() + phase).cos()))
    }

    #[test]
    fn separable_example() {
        let grid = make_grid(1e-2, 1e4, 512, 64).unwrap();
        let f = Field::from_fn(&grid, |z, _| z * z / (1.0 + z).powi(3));
        let p = params(0);
        let got = weighted_l2(&f, &f, p.eta).unwrap();
        // independent radial integral in u = log z; angular factor with the grid rule
        let radial = tanh_sinh(
            |u: f64| {
                let z = u.exp();
                let v = z * z / (1.0 + z).powi(3) * (1.0 + z).powi(2) / (z * z);
                v * v * z
            },
            1e-2f64.ln(),
            1e4f64.ln(),
        );
        let ang: f64 = grid.theta.iter().zip(&grid.theta_weights).map(|(t, w)| w * (2.0 * t).sin().powf(-p.eta)).sum();
        assert!((got - radial * ang).abs() < 1e-8 * got, "{got} {}", radial * ang);
        let zero = Field::zeros(&grid);
        assert_eq!(weighted_l2(&zero, &f, p.eta).unwrap(), 0.0);
    }

    #[test]
    fn k0_is_single_term_and_monotone_in_k() {
        let grid = make_grid(1e-2, 1e4, 256, 48).unwrap();
        let f = test_field(&grid, 2, 4, 2, 0.0);
        let n0 = h_k_norm(&f, &params(0)).unwrap();
        assert_eq!(n0.terms.len(), 1);
        assert_eq!(n0.total, weighted_l2(&f, &f, params(0).eta).unwrap());
        let n1 = h_k_norm(&f, &params(1)).unwrap();
        let n2 = h_k_norm(&f, &params(2)).unwrap();
        assert_eq!(n1.terms.len(), 3);
        assert_eq!(n2.terms.len(), 6);
        assert!(n1.total >= n0.total && n2.total >= n1.total);
        for t in &n2.terms {
            assert!(t.value >= 0.0);
            assert_eq!(t.weight == WeightKind::Eta, t.angular == 0);
        }
        let s: f64 = n2.terms.iter().map(|t| t.value).sum();
        assert_eq!(s, n2.total);
    }

    #[test]
    fn homogeneity_and_inner_product() {
        let grid = make_grid(1e-2, 1e4, 128, 32).unwrap();
        let f = test_field(&grid, 3, 5, 1, 0.4);
        let p = params(1);
        let a = h_k_norm(&f, &p).unwrap().norm();
        let b = h_k_norm(&f.scale(-2.5), &p).unwrap().norm();
        assert!((b - 2.5 * a).abs() < 1e-12 * b);
        let ip = h_k_inner(&f, &f, &p).unwrap();
        assert!((ip - a * a).abs() < 1e-12 * ip);
    }

    #[test]
    fn energy_of_special_charge() {
        let grid = make_grid(1e-2, 1e4, 128, 32).unwrap();
        let p = params(1);
        let e = EnergyFunctional::new(&grid, &p).unwrap();
        let zero = Field::zeros(&grid);
        assert_eq!(e.energy(&zero, &zero).unwrap(), 0.0);
        for amp in [0.3, -1.7] {
            let g = SpecialPi::new(amp, p).sample_image(&grid);
            let en = e.energy(&zero, &g).unwrap();
            assert!((en - amp * amp).abs() < 1e-8 * amp * amp, "{en}");
            assert!((e.special_amplitude(&g).unwrap() - amp).abs() < 1e-10);
        }
        // norm of the special solution itself scales with the amplitude
        let n1 = h_k_norm(&SpecialPi::new(1.0, p).sample(&grid), &p).unwrap().norm();
        let n3 = h_k_norm(&SpecialPi::new(3.0, p).sample(&grid), &p).unwrap().norm();
        assert!((n3 / n1 - 3.0).abs() < 1e-12);
        let eps = test_field(&grid, 2, 4, 1, 0.0);
        let g = SpecialPi::new(0.5, p).sample_image(&grid);
        let total = e.energy(&eps, &g).unwrap();
        let parts = e.energy(&eps, &zero).unwrap() + e.energy(&zero, &g).unwrap();
        assert!((total - parts).abs() < 1e-12 * total);
    }

    #[test]
    fn family_terms_finite() {
        let grid = make_grid(1e-2, 1e4, 64, 16).unwrap();
        for (p, q, m) in [(2, 3, 1), (2, 5, 3), (4, 6, 2)] {
            let n = h_k_norm(&test_field(&grid, p, q, m, 0.0), &params(2)).unwrap();
            assert!(n.terms.iter().all(|t| t.value.is_finite()));
        }
    }

    #[test]
    fn mismatched_grids() {
        let a = make_grid(1e-2, 1e4, 64, 16).unwrap();
        let b = make_grid(1e-2, 1e4, 64, 17).unwrap();
        assert!(weighted_l2(&Field::zeros(&a), &Field::zeros(&b), 0.99).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn cauchy_schwarz_and_symmetry(p1 in 2i32..5, p2 in 2i32..5, m1 in 1i32..4, m2 in 1i32..4, ph in -3.0f64..3.0) {
            let grid = make_grid(1e-2, 1e4, 48, 12).unwrap();
            let f = test_field(&grid, p1, p1 + 2, m1, ph);
            let g = test_field(&grid, p2, p2 + 1, m2, -ph);
            let e = 0.99;
            let fg = weighted_l2(&f, &g, e).unwrap();
            prop_assert_eq!(fg, weighted_l2(&g, &f, e).unwrap());
            let ff = weighted_l2(&f, &f, e).unwrap();
            let gg = weighted_l2(&g, &g, e).unwrap();
            prop_assert!(fg * fg <= ff * gg * (1.0 + 1e-12));
        }
    }
}
