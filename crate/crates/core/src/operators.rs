//! Differential, nonlocal and linearised operators acting on fields.
//!
//! Radial derivatives are taken in `log z` (so `z ∂_z = ∂_{log z}`) and
//! angular derivatives on the Gauss–Legendre nodes, both with five-point
//! stencils that shift to one-sided form at the ends of each direction.

use crate::error::{Error, Result};
use crate::grid::{integrate_theta, Field, RadialFunction};
use crate::params::Parameters;
use crate::profiles::{gamma_unchecked, k_profile, Profile};
use crate::quadrature::interval_integrals;

/// Residual of a discrete identity together with its observed order.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorReport {
    pub name: String,
    pub residual_norm: f64,
    pub convergence_order: f64,
}

impl OperatorReport {
    /// Order from residuals on two grids whose spacing differs by `ratio`.
    pub fn from_two_grids(name: &str, coarse: f64, fine: f64, ratio: f64) -> Self {
        Self {
            name: name.to_string(),
            residual_norm: fine.abs(),
            convergence_order: (coarse.abs() / fine.abs()).ln() / ratio.ln(),
        }
    }
}

fn check_size(f: &Field) -> Result<()> {
    let g = f.grid();
    if g.nz() < 5 || g.ntheta() < 5 {
        return Err(Error::Grid("derivatives need at least 5 nodes per direction".into()));
    }
    Ok(())
}

/// `∂_θ f`
pub fn dtheta(f: &Field) -> Field {
    let g = f.grid();
    let nt = g.ntheta();
    let v = f.values();
    let mut out = vec![0.0; v.len()];
    for iz in 0..g.nz() {
        let row = &v[iz * nt..(iz + 1) * nt];
        for (jt, st) in g.theta_d1.iter().enumerate() {
            out[iz * nt + jt] = st.apply(|j| row[j]);
        }
    }
    Field::from_raw(g, out)
}

/// `∂_θθ f`
pub fn dtheta2(f: &Field) -> Field {
    let g = f.grid();
    let nt = g.ntheta();
    let v = f.values();
    let mut out = vec![0.0; v.len()];
    for iz in 0..g.nz() {
        let row = &v[iz * nt..(iz + 1) * nt];
        for (jt, st) in g.theta_d2.iter().enumerate() {
            out[iz * nt + jt] = st.apply(|j| row[j]);
        }
    }
    Field::from_raw(g, out)
}

fn du_with(f: &Field, second: bool) -> Field {
    let g = f.grid();
    let nt = g.ntheta();
    let v = f.values();
    let sts = if second { &g.u_d2 } else { &g.u_d1 };
    let mut out = vec![0.0; v.len()];
    for (iz, st) in sts.iter().enumerate() {
        for k in 0..5 {
            let w = st.w[k];
            let src = &v[(st.start + k) * nt..(st.start + k + 1) * nt];
            let dst = &mut out[iz * nt..(iz + 1) * nt];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += w * s;
            }
        }
    }
    Field::from_raw(g, out)
}

/// `z ∂_z f`, the raw radial derivative in `log z`.
pub fn zdz(f: &Field) -> Field {
    du_with(f, false)
}

/// `z² ∂_zz f`
pub fn z2dzz(f: &Field) -> Field {
    // z²∂_zz = ∂_uu − ∂_u
    &du_with(f, true) - &du_with(f, false)
}

/// `D_θ f = sin 2θ ∂_θ f`
pub fn d_theta(f: &Field) -> Result<Field> {
    check_size(f)?;
    Ok(dtheta(f).map(|_, t, v| (2.0 * t).sin() * v))
}

/// `D_z f = z ∂_z f`
pub fn d_z(f: &Field) -> Result<Field> {
    check_size(f)?;
    Ok(zdz(f))
}

/// `z ∂_z` of a radial function.
pub fn zdz_radial(r: &RadialFunction) -> RadialFunction {
    let g = r.grid();
    let v = r.values();
    let out = g.u_d1.iter().map(|st| st.apply(|i| v[i])).collect();
    RadialFunction::from_values(g, out).expect("same length")
}

/// `L_K(f)(z) = ∫_z^∞ ∫₀^{π/2} f(z', θ) K(θ) / z' dθ dz'`.
///
/// The tail beyond `z_max` is closed by fitting `∫ f K dθ ≈ a/z + b/z²` to
/// the last two nodes, which is exact to `O(z⁻³)` for fields with the
/// admissible `1/z` decay and vanishes for fields already zero there.
pub fn l_k(f: &Field) -> RadialFunction {
    let g = f.grid();
    let weighted = f.map(|_, t, v| v * k_profile(t));
    let q = integrate_theta(&weighted);
    let q = q.values();
    let n = q.len();
    let parts = interval_integrals(q, g.log_step);
    let (z1, z2) = (g.z[n - 2], g.z[n - 1]);
    // q = a/z + b/z² through (z1, q1), (z2, q2)
    let det = 1.0 / (z1 * z2 * z2) - 1.0 / (z2 * z1 * z1);
    let a = (q[n - 2] / (z2 * z2) - q[n - 1] / (z1 * z1)) / det;
    let b = (q[n - 1] / z1 - q[n - 2] / z2) / det;
    let tail = a / z2 + b / (2.0 * z2 * z2);
    let mut out = vec![0.0; n];
    out[n - 1] = tail;
    for i in (0..n - 1).rev() {
        out[i] = out[i + 1] + parts[i];
    }
    RadialFunction::from_values(g, out).expect("same length")
}

/// `L f = f + z∂_z f − 2f/(1+z)`
pub fn op_l(f: &Field) -> Field {
    let d = zdz(f);
    f.map(|z, _, v| v - 2.0 * v / (1.0 + z)).axpy(1.0, &d)
}

/// `L` on a radial function.
pub fn op_l_radial(r: &RadialFunction) -> RadialFunction {
    let d = zdz_radial(r);
    let g = r.grid();
    let out = r
        .values()
        .iter()
        .zip(d.values())
        .zip(&g.z)
        .map(|((v, dv), z)| v + dv - 2.0 * v / (1.0 + z))
        .collect();
    RadialFunction::from_values(g, out).expect("same length")
}

/// `L_{F★} f = L f − (2zΓ/(c(1+z)²)) L_K(f)`
pub fn op_l_fstar(f: &Field, params: &Parameters) -> Field {
    let lk = l_k(f);
    let a = params.alpha;
    let coupling = Field::from_fn(f.grid(), |z, t| 2.0 * z * gamma_unchecked(t, a) / (params.c * (1.0 + z) * (1.0 + z)));
    op_l(f).axpy(-1.0, &coupling.mul_radial(&lk))
}

/// `P f = f − (Γ/c)(2z²/(1+z)²) L_K(f)(0)`, with `0` read as `z_min`.
pub fn projector_p(f: &Field, params: &Parameters) -> Field {
    let l0 = l_k(f).at_origin();
    let a = params.alpha;
    f.map(|z, t, v| v - gamma_unchecked(t, a) / params.c * 2.0 * z * z / ((1.0 + z) * (1.0 + z)) * l0)
}

/// `L_{F★}^T f = L_{F★} f − P((3/(1+z)) sin 2θ ∂_θ f)`
pub fn op_l_fstar_t(f: &Field, params: &Parameters) -> Field {
    let transport = dtheta(f).map(|z, t, v| 3.0 / (1.0 + z) * (2.0 * t).sin() * v);
    op_l_fstar(f, params).axpy(-1.0, &projector_p(&transport, params))
}

/// `S_δ f = f + (1+δ) z∂_z f`
pub fn s_delta(f: &Field, delta: f64) -> Field {
    f.axpy(1.0 + delta, &zdz(f))
}

/// Velocity functionals of a stream function:
/// `U = −3Ψ − α z∂_zΨ`, `V = ∂_θΨ − tan θ Ψ`,
/// `R = (2 sin θ Ψ + α sin θ z∂_zΨ + cos θ ∂_θΨ)/cos θ`.
#[derive(Debug, Clone)]
pub struct Velocity {
    pub u: Field,
    pub v: Field,
    pub r: Field,
}

pub fn velocity_functionals(psi: &Field, params: &Parameters) -> Velocity {
    let a = params.alpha;
    let zd = zdz(psi);
    let td = dtheta(psi);
    let g = psi.grid();
    let nt = g.ntheta();
    let n = g.len();
    let (mut u, mut v, mut r) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let (p, zd, td) = (psi.values(), zd.values(), td.values());
    for i in 0..n {
        let tan = g.theta[i % nt].tan();
        u[i] = -3.0 * p[i] - a * zd[i];
        v[i] = td[i] - tan * p[i];
        r[i] = 2.0 * tan * p[i] + a * tan * zd[i] + td[i];
    }
    Velocity { u: Field::from_raw(g, u), v: Field::from_raw(g, v), r: Field::from_raw(g, r) }
}

/// `M_G G = S_δ G + U(Φ_F) ∂_θ G + V(Φ_F) α z∂_z G`
pub fn op_m_g(g: &Field, vel_f: &Velocity, params: &Parameters) -> Field {
    let a = params.alpha;
    let zd = zdz(g);
    let out = &(&vel_f.u * &dtheta(g)) + &(&vel_f.v * &zd).scale(a);
    out.axpy(1.0, &g.axpy(1.0 + params.delta, &zd))
}

/// Linearised vorticity operator
/// `M ε = S_δ ε + U(Φ_F)∂_θε + V(Φ_F)αz∂_zε + U(Φ_ε)∂_θF + V(Φ_ε)αz∂_zF − R(Φ_F)ε − R(Φ_ε)F`.
pub fn op_m(eps: &Field, profile: &Profile, vel_f: &Velocity, vel_eps: &Velocity, params: &Parameters) -> Field {
    let a = params.alpha;
    let zd = zdz(eps);
    let td = dtheta(eps);
    let g = eps.grid();
    let n = g.len();
    let (e, zd, td) = (eps.values(), zd.values(), td.values());
    let (uf, vf, rf) = (vel_f.u.values(), vel_f.v.values(), vel_f.r.values());
    let (ue, ve, re) = (vel_eps.u.values(), vel_eps.v.values(), vel_eps.r.values());
    let (f, fth, fz) = (profile.f.values(), profile.dtheta.values(), profile.zdz.values());
    let mut out = vec![0.0; n];
    for i in 0..n {
        out[i] = e[i] + (1.0 + params.delta) * zd[i] + uf[i] * td[i] + a * vf[i] * zd[i] + ue[i] * fth[i] + a * ve[i] * fz[i]
            - rf[i] * e[i]
            - re[i] * f[i];
    }
    Field::from_raw(g, out)
}

/// Nonlinear forcing terms of the perturbation system.
#[derive(Debug, Clone)]
pub struct Nonlinear {
    /// `−U(Φ_ε)ε − αV(Φ_ε)z∂_zε + R(Φ_ε)ε`
    pub n1: Field,
    /// `αz∂_zΠ ∂_θG − αz∂_zG ∂_θΠ + 2∂_θG Π`
    pub n2: Field,
    /// `−U(Φ_ε)∂_θG − V(Φ_ε)αz∂_zG`
    pub n3: Field,
}

pub fn nonlinear_terms(eps: &Field, g: &Field, pi: &Field, vel_eps: &Velocity, params: &Parameters) -> Nonlinear {
    let a = params.alpha;
    let (zd_e, zd_g, zd_p) = (zdz(eps), zdz(g), zdz(pi));
    let (td_g, td_p) = (dtheta(g), dtheta(pi));
    let grid = eps.grid();
    let n = grid.len();
    let (e, p) = (eps.values(), pi.values());
    let (ue, ve, re) = (vel_eps.u.values(), vel_eps.v.values(), vel_eps.r.values());
    let (zd_e, zd_g, zd_p, td_g, td_p) = (zd_e.values(), zd_g.values(), zd_p.values(), td_g.values(), td_p.values());
    let (mut n1, mut n2, mut n3) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for i in 0..n {
        n1[i] = -ue[i] * e[i] - a * ve[i] * zd_e[i] + re[i] * e[i];
        n2[i] = a * zd_p[i] * td_g[i] - a * zd_g[i] * td_p[i] + 2.0 * td_g[i] * p[i];
        n3[i] = -ue[i] * td_g[i] - a * ve[i] * zd_g[i];
    }
    Nonlinear { n1: Field::from_raw(grid, n1), n2: Field::from_raw(grid, n2), n3: Field::from_raw(grid, n3) }
}

/// `E = −(μ_s/μ) z∂_zF + (1 + λ_s/λ) S_δ(F)`
pub fn error_term(profile: &Profile, lambda_rate: f64, mu_rate: f64, params: &Parameters) -> Field {
    let a = 1.0 + lambda_rate;
    let s = profile.f.axpy(1.0 + params.delta, &profile.zdz);
    s.scale(a).axpy(-mu_rate, &profile.zdz)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::profiles::f_star_unscaled;

    fn params() -> Parameters {
        Parameters::new(0.05, 0.025, 0).unwrap()
    }

    #[test]
    fn derivative_examples() {
        let g = make_grid(1e-2, 1e4, 256, 64).unwrap();
        let f = Field::from_fn(&g, |_, t| t.cos().powi(2));
        let d = d_theta(&f).unwrap();
        let want = Field::from_fn(&g, |_, t| -(2.0 * t).sin().powi(2));
        let err = (&d - &want).max_abs();
        assert!(err < 1e-5, "{err}");

        let f = Field::from_fn(&g, |z, _| z / (1.0 + z).powi(2));
        let d = d_z(&f).unwrap();
        let want = Field::from_fn(&g, |z, _| z * (1.0 - z) / (1.0 + z).powi(3));
        let err = (&d - &want).max_abs();
        assert!(err < 1e-6, "{err}");

        let c = Field::from_fn(&g, |_, _| 2.5);
        assert!(d_theta(&c).unwrap().max_abs() < 1e-12);
        assert!(d_z(&c).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn too_small_grid_rejected() {
        // Grid::new refuses fewer than 8 nodes, so the check is on the field side.
        let g = make_grid(1e-2, 1e2, 8, 8).unwrap();
        assert!(d_z(&Field::zeros(&g)).is_ok());
    }

    #[test]
    fn op_l_on_inverse_linear() {
        let g = make_grid(1e-2, 1e2, 257, 8).unwrap();
        let f = Field::from_fn(&g, |z, _| 1.0 / (1.0 + z));
        let l = op_l(&f);
        // z = 1 sits at the centre node of the symmetric log grid
        let iz = 128;
        assert!((g.z[iz] - 1.0).abs() < 1e-12);
        assert!((l.at(iz, 3) + 0.25).abs() < 1e-7);
    }

    #[test]
    fn l_k_of_profile() {
        let p = params();
        let g = make_grid(1e-2, 1e4, 512, 64).unwrap();
        let f = Field::from_fn(&g, |z, t| f_star_unscaled(z, t, &p));
        let lk = l_k(&f);
        for (z, v) in g.z.iter().zip(lk.values()) {
            // unscaled F★ gives L_K = 4/(1+z)
            let want = 4.0 / (1.0 + z);
            assert!(((v - want) / want).abs() < 1e-4, "z={z} {v} {want}");
        }
        assert_eq!(l_k(&Field::zeros(&g)).max_abs(), 0.0);
    }

    #[test]
    fn velocity_of_zero_and_separable() {
        let p = params();
        let g = make_grid(1e-2, 1e3, 128, 32).unwrap();
        let v = velocity_functionals(&Field::zeros(&g), &p);
        assert_eq!(v.u.max_abs() + v.v.max_abs() + v.r.max_abs(), 0.0);
        let h = |z: f64| z * z / (1.0 + z).powi(4);
        let hp = |z: f64| 2.0 * z / (1.0 + z).powi(4) - 4.0 * z * z / (1.0 + z).powi(5);
        let psi = Field::from_fn(&g, |z, t| (2.0 * t).sin() * h(z));
        let v = velocity_functionals(&psi, &p);
        let want = Field::from_fn(&g, |z, t| -3.0 * (2.0 * t).sin() * h(z) - p.alpha * (2.0 * t).sin() * z * hp(z));
        assert!((&v.u - &want).max_abs() < 1e-6);
    }

    #[test]
    fn error_term_vanishes_at_steady_rates() {
        let p = params();
        let g = make_grid(1e-2, 1e3, 64, 16).unwrap();
        let prof = Profile::f_star(&g, &p);
        assert_eq!(error_term(&prof, -1.0, 0.0, &p).max_abs(), 0.0);
    }

    #[test]
    fn n2_with_equal_arguments() {
        let p = params();
        let g = make_grid(1e-2, 1e3, 64, 16).unwrap();
        let f = Field::from_fn(&g, |z, t| z * z / (1.0 + z).powi(4) * (2.0 * t).sin());
        let vel = velocity_functionals(&Field::zeros(&g), &p);
        let nl = nonlinear_terms(&Field::zeros(&g), &f, &f, &vel, &p);
        let want = &dtheta(&f).scale(2.0) * &f;
        assert!((&nl.n2 - &want).max_abs() < 1e-14);
        let zero = nonlinear_terms(&Field::zeros(&g), &Field::zeros(&g), &Field::zeros(&g), &vel, &p);
        assert_eq!(zero.n1.max_abs() + zero.n2.max_abs() + zero.n3.max_abs(), 0.0);
    }
}
