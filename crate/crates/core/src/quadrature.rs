//! One-dimensional quadrature rules and finite-difference weights.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on `[a, b]`, nodes increasing.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let mut t = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, t);
            dp = d;
            let dt = p / d;
            t -= dt;
            if dt.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, t);
        if d != 0.0 {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - t * t) * dp * dp);
        // t runs from +1 downwards; store mirrored so nodes increase.
        x[i] = mid - half * t;
        x[n - 1 - i] = mid + half * t;
        w[i] = half * wi;
        w[n - 1 - i] = half * wi;
    }
    (x, w)
}

fn legendre(n: usize, t: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = t;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * t * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (t * p1 - p0) / (t * t - 1.0);
    (p1, d)
}

/// Double-exponential quadrature on `[a, b]`; tolerant of integrable
/// endpoint singularities. The integrand is never evaluated at `a` or `b`.
pub fn tanh_sinh<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    let half = 0.5 * (b - a);
    let eval = |t: f64| -> f64 {
        let s = 0.5 * PI * t.sinh();
        let u = s.tanh();
        let ch = s.cosh();
        let dw = 0.5 * PI * t.cosh() / (ch * ch);
        // Distance to the nearer end computed without cancellation.
        let e = 1.0 / (s.abs().exp() * ch);
        let x = if u >= 0.0 { b - half * e } else { a + half * e };
        if x <= a || x >= b {
            return 0.0;
        }
        let v = f(x) * dw;
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    let mut h = 1.0;
    let tmax = 4.0;
    let mut sum = eval(0.0);
    let mut k = 1;
    while (k as f64) * h <= tmax {
        let t = k as f64 * h;
        sum += eval(t) + eval(-t);
        k += 1;
    }
    let mut prev = sum * h;
    for _ in 0..10 {
        h *= 0.5;
        let mut t = h;
        while t <= tmax {
            sum += eval(t) + eval(-t);
            t += 2.0 * h;
        }
        let cur = sum * h;
        if (cur - prev).abs() <= 1e-15 * cur.abs() {
            return half * cur;
        }
        prev = cur;
    }
    half * prev
}

/// Per-interval integrals `∫_{x_i}^{x_{i+1}} f` of samples on a uniform grid
/// with spacing `h`, fourth-order accurate (cubic through four neighbours).
pub fn interval_integrals(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    assert!(n >= 4, "fourth-order interval rule needs at least four samples");
    let mut out = Vec::with_capacity(n - 1);
    for i in 0..n - 1 {
        let v = if i == 0 {
            9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3]
        } else if i == n - 2 {
            9.0 * f[n - 1] + 19.0 * f[n - 2] - 5.0 * f[n - 3] + f[n - 4]
        } else {
            -f[i - 1] + 13.0 * f[i] + 13.0 * f[i + 1] - f[i + 2]
        };
        out.push(v * h / 24.0);
    }
    out
}

/// Finite-difference weights for derivatives `0..=order` at `x0` from the
/// stencil `xs` (Fornberg's recursion). Returns `c[m][j]`.
pub fn fornberg(x0: f64, xs: &[f64], order: usize) -> Vec<Vec<f64>> {
    let n = xs.len();
    let mut c = vec![vec![0.0; n]; order + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] *= c4 / c3;
        }
        c1 = c2;
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_exact_for_polynomials() {
        let (x, w) = gauss_legendre(8, 0.0, 2.0);
        assert!(x.windows(2).all(|p| p[0] < p[1]));
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(15)).sum();
        assert!((s - 2f64.powi(16) / 16.0).abs() < 1e-9);
    }

    #[test]
    fn tanh_sinh_handles_endpoint_singularity() {
        let v = tanh_sinh(|x| 1.0 / x.sqrt(), 0.0, 1.0);
        assert!((v - 2.0).abs() < 1e-12, "{v}");
        let v = tanh_sinh(|x| x.ln(), 0.0, 1.0);
        assert!((v + 1.0).abs() < 1e-12, "{v}");
    }

    #[test]
    fn interval_rule_is_exact_for_cubics() {
        let h = 0.3;
        let f: Vec<f64> = (0..7).map(|i| (i as f64 * h).powi(3) - 2.0 * i as f64 * h).collect();
        let parts = interval_integrals(&f, h);
        let total: f64 = parts.iter().sum();
        let x1 = 6.0 * h;
        assert!((total - (x1.powi(4) / 4.0 - x1 * x1)).abs() < 1e-12);
    }

    #[test]
    fn fornberg_reproduces_centered_stencil() {
        let c = fornberg(0.0, &[-2.0, -1.0, 0.0, 1.0, 2.0], 2);
        let want1 = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];
        let want2 = [-1.0 / 12.0, 4.0 / 3.0, -2.5, 4.0 / 3.0, -1.0 / 12.0];
        for j in 0..5 {
            assert!((c[1][j] - want1[j]).abs() < 1e-14);
            assert!((c[2][j] - want2[j]).abs() < 1e-14);
        }
    }
}
