//! Five-point finite-difference stencils along each grid direction.

use crate::quadrature::fornberg;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stencil {
    pub start: usize,
    pub w: [f64; 5],
}

/// First- and second-derivative stencils at every node of `xs`, centred
/// where possible and shifted one-sided near the ends.
pub fn stencils(xs: &[f64]) -> (Vec<Stencil>, Vec<Stencil>) {
    let n = xs.len();
    assert!(n >= 5, "five-point stencils need at least five nodes");
    let mut d1 = Vec::with_capacity(n);
    let mut d2 = Vec::with_capacity(n);
    for i in 0..n {
        let start = i.saturating_sub(2).min(n - 5);
        let c = fornberg(xs[i], &xs[start..start + 5], 2);
        let mut w1 = [0.0; 5];
        let mut w2 = [0.0; 5];
        w1.copy_from_slice(&c[1]);
        w2.copy_from_slice(&c[2]);
        d1.push(Stencil { start, w: w1 });
        d2.push(Stencil { start, w: w2 });
    }
    (d1, d2)
}

impl Stencil {
    #[inline]
    pub fn apply(&self, f: impl Fn(usize) -> f64) -> f64 {
        let mut s = 0.0;
        for (k, w) in self.w.iter().enumerate() {
            s += w * f(self.start + k);
        }
        s
    }
}
