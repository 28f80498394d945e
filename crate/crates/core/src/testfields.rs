//! Seeded random test fields built from smooth bumps
//! `z^p/(1+z)^q · sin^m 2θ · cos(ω log z + φ)`.
//!
//! Each bump is scaled to peak at about 1 in `z`. Choosing `p` and `q − p`
//! large enough makes every weighted norm finite and kills the boundary
//! terms of the integration-by-parts identities on a truncated domain.

use std::ops::RangeInclusive;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::{Field, Grid};
use crate::operators::l_k;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestTerm {
    pub coefficient: f64,
    pub p: i32,
    pub q: i32,
    pub m: i32,
    pub frequency: f64,
    pub phase: f64,
}

impl TestTerm {
    pub fn value(&self, z: f64, theta: f64) -> f64 {
        let (p, q) = (self.p as f64, self.q as f64);
        // z^p/(1+z)^q peaks at z = p/(q−p)
        let zp = p / (q - p);
        let peak = zp.powf(p) / (1.0 + zp).powf(q);
        let radial = z.powf(p) / (1.0 + z).powf(q) / peak;
        let angular = (2.0 * theta).sin().powi(self.m);
        self.coefficient * radial * angular * (self.frequency * z.ln() + self.phase).cos()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestField {
    pub terms: Vec<TestTerm>,
}

impl TestField {
    pub fn value(&self, z: f64, theta: f64) -> f64 {
        self.terms.iter().map(|t| t.value(z, theta)).sum()
    }

    pub fn sample(&self, grid: &Arc<Grid>) -> Field {
        Field::from_fn(grid, |z, t| self.value(z, t))
    }
}

/// Ranges the random terms are drawn from; `q = p + q_excess`.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFamily {
    pub p: RangeInclusive<i32>,
    pub q_excess: RangeInclusive<i32>,
    pub m: RangeInclusive<i32>,
    pub max_frequency: f64,
    pub terms: usize,
}

impl Default for TestFamily {
    fn default() -> Self {
        Self { p: 4..=6, q_excess: 2..=4, m: 1..=3, max_frequency: 1.0, terms: 3 }
    }
}

impl TestFamily {
    pub fn draw(&self, rng: &mut impl Rng) -> TestField {
        let terms = (0..self.terms)
            .map(|_| {
                let p = rng.gen_range(self.p.clone());
                TestTerm {
                    coefficient: rng.gen_range(-1.0..1.0),
                    p,
                    q: p + rng.gen_range(self.q_excess.clone()),
                    m: rng.gen_range(self.m.clone()),
                    frequency: rng.gen_range(-self.max_frequency..=self.max_frequency),
                    phase: rng.gen_range(0.0..std::f64::consts::TAU),
                }
            })
            .collect();
        TestField { terms }
    }

    pub fn seeded(&self, seed: u64, count: usize) -> Vec<TestField> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count).map(|_| self.draw(&mut rng)).collect()
    }
}

/// Fixed bump `z⁴/(1+z)⁶ · sin 2θ` used to cancel `L_K(f)(z_min)`.
pub fn balancing_bump(z: f64, theta: f64) -> f64 {
    z.powi(4) / (1.0 + z).powi(6) * (2.0 * theta).sin()
}

/// `f − c·bump` with `c` chosen so that `L_K` of the result vanishes at `z_min`.
pub fn remove_lk_origin(f: &Field) -> Field {
    let bump = Field::from_fn(f.grid(), balancing_bump);
    let c = l_k(f).at_origin() / l_k(&bump).at_origin();
    f.axpy(-c, &bump)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    #[test]
    fn seeded_draws_are_reproducible_and_bounded() {
        let fam = TestFamily::default();
        let a = fam.seeded(11, 5);
        assert_eq!(a, fam.seeded(11, 5));
        assert_ne!(a, fam.seeded(12, 5));
        for f in &a {
            for t in &f.terms {
                assert!(t.q >= t.p + 2 && t.p >= 4 && t.m >= 1);
            }
            let v = f.value(1.3, 0.7);
            assert!(v.abs() <= f.terms.len() as f64 + 1e-12);
        }
    }

    #[test]
    fn bump_peaks_at_one() {
        let t = TestTerm { coefficient: 1.0, p: 4, q: 6, m: 1, frequency: 0.0, phase: 0.0 };
        // peak at z = 2, θ = π/4
        assert!((t.value(2.0, std::f64::consts::FRAC_PI_4) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn balanced_field_has_zero_lk_origin() {
        let grid = make_grid(1e-2, 1e4, 128, 32).unwrap();
        for f in TestFamily::default().seeded(3, 4) {
            let g = remove_lk_origin(&f.sample(&grid));
            assert!(l_k(&g).at_origin().abs() < 1e-13 * g.max_abs());
        }
    }
}
