//! Identity checks, manufactured solutions and coercivity sampling, each
//! reported as rows of a verification table.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::config::Config;
use crate::dynamics::{RunStatus, SimulationReport};
use crate::elliptic::{solve_potential, solve_stream, EllipticSolver, ProblemKind};
use crate::error::Result;
use crate::grid::{make_grid, Field, Grid, RadialFunction};
use crate::norms::weighted_l2;
use crate::operators::{d_theta, d_z, l_k, op_l, op_l_fstar, op_l_radial, op_m_g, velocity_functionals, zdz};
use crate::params::{alpha_beta, Parameters};
use crate::profiles::{weight_unchecked, euler_ode_residual, f_star, k_profile, sturm_liouville_residual, Profile, SpecialPi};
use crate::testfields::{remove_lk_origin, TestFamily};

/// Direction of the comparison in a row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bound {
    AtMost,
    AtLeast,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteRow {
    pub name: String,
    pub value: f64,
    pub bound: Bound,
    pub tolerance: f64,
    pub passed: bool,
    /// Observed convergence order, when the row came from a refinement.
    pub order: Option<f64>,
}

impl SuiteRow {
    pub fn at_most(name: &str, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value, bound: Bound::AtMost, tolerance, passed: value <= tolerance, order: None }
    }

    pub fn at_least(name: &str, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value, bound: Bound::AtLeast, tolerance, passed: value >= tolerance, order: None }
    }

    pub fn with_order(mut self, order: f64) -> Self {
        self.order = Some(order);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VerificationSuiteResult {
    pub rows: Vec<SuiteRow>,
}

impl VerificationSuiteResult {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.passed)
    }

    /// Aligned plain-text table.
    pub fn table(&self) -> String {
        let width = self.rows.iter().map(|r| r.name.len()).max().unwrap_or(4).max(4);
        let mut out = format!("{:<width$}  {:>12}  {:>2} {:>10}  {:>7}  {}\n", "name", "value", "", "tolerance", "order", "result");
        for r in &self.rows {
            let op = match r.bound {
                Bound::AtMost => "<=",
                Bound::AtLeast => ">=",
            };
            let order = r.order.map_or("-".to_string(), |o| format!("{o:.2}"));
            let result = if r.passed { "PASS" } else { "FAIL" };
            let _ = writeln!(out, "{:<width$}  {:>12.4e}  {op} {:>10.2e}  {order:>7}  {result}", r.name, r.value, r.tolerance);
        }
        out
    }

    /// CSV twin of [`Self::table`] with full precision.
    pub fn csv(&self) -> String {
        let mut out = String::from("name,value,bound,tolerance,order,passed\n");
        for r in &self.rows {
            let op = match r.bound {
                Bound::AtMost => "le",
                Bound::AtLeast => "ge",
            };
            let order = r.order.map_or(String::new(), |o| format!("{o:.17e}"));
            let _ = writeln!(out, "{},{:.17e},{op},{:.17e},{order},{}", r.name, r.value, r.tolerance, r.passed);
        }
        out
    }
}

fn order(coarse: f64, fine: f64, ratio: f64) -> f64 {
    (coarse / fine).ln() / ratio.ln()
}

fn max_rel(a: &RadialFunction, b: &RadialFunction) -> f64 {
    let m = b.max_abs();
    a.values().iter().zip(b.values()).fold(0.0f64, |x, (u, v)| x.max((u - v).abs())) / m
}

/// `max_z |L_K(F★) − 4α/(1+z)| (1+z)/4α`.
pub fn lk_profile_error(grid: &Arc<Grid>, params: &Parameters) -> f64 {
    let lk = l_k(&Field::from_fn(grid, |z, t| f_star(z, t, params)));
    let a = params.alpha;
    grid.z.iter().zip(lk.values()).fold(0.0f64, |m, (z, v)| m.max((v - 4.0 * a / (1.0 + z)).abs() * (1.0 + z) / (4.0 * a)))
}

/// Relative error of `L_K(z∂_z g)(z_min) = −∫ g(z_min, θ) K dθ` for `g = z e^{−z} sin 2θ`.
pub fn zpz_error(grid: &Arc<Grid>) -> f64 {
    let g = |z: f64, t: f64| z * (-z).exp() * (2.0 * t).sin();
    let lhs = l_k(&zdz(&Field::from_fn(grid, g))).at_origin();
    let z0 = grid.z_min();
    let rhs: f64 = -grid.theta.iter().zip(&grid.theta_weights).map(|(t, w)| w * g(z0, *t) * k_profile(*t)).sum::<f64>();
    ((lhs - rhs) / rhs).abs()
}

/// Largest relative residual of `L_K(L_{F★} f) = L(L_K f)` over seeded fields.
pub fn commutation_error(grid: &Arc<Grid>, params: &Parameters, seed: u64, count: usize) -> f64 {
    TestFamily::default()
        .seeded(seed, count)
        .iter()
        .map(|f| {
            let f = f.sample(grid);
            max_rel(&l_k(&op_l_fstar(&f, params)), &op_l_radial(&l_k(&f)))
        })
        .fold(0.0, f64::max)
}

/// Largest relative error of `(L(g)w, gw) = ½‖gw‖²` over seeded fields.
pub fn pairing_error(grid: &Arc<Grid>, seed: u64, count: usize) -> Result<f64> {
    let mut worst = 0.0f64;
    for f in TestFamily::default().seeded(seed, count) {
        let f = f.sample(grid);
        let lhs = weighted_l2(&op_l(&f), &f, 0.0)?;
        let rhs = 0.5 * weighted_l2(&f, &f, 0.0)?;
        worst = worst.max(((lhs - rhs) / rhs).abs());
    }
    Ok(worst)
}

/// `‖r w‖_{L²(dz)}` for a function of `z` alone.
pub fn radial_norm(r: &RadialFunction) -> f64 {
    let g = r.grid();
    r.values()
        .iter()
        .zip(&g.z)
        .zip(&g.z_weights)
        .map(|((v, z), w)| {
            let x = v * weight_unchecked(*z);
            w * x * x
        })
        .sum::<f64>()
        .sqrt()
}

/// Largest `‖L_K f‖_{H⁰} / ‖f‖_{H⁰}` over seeded fields with `L_K(f)(z_min) = 0`,
/// the radial function measured by [`radial_norm`].
pub fn lk_boundedness_ratio(grid: &Arc<Grid>, params: &Parameters, seed: u64, count: usize) -> Result<f64> {
    let mut worst = 0.0f64;
    for f in TestFamily::default().seeded(seed, count) {
        let f = remove_lk_origin(&f.sample(grid));
        worst = worst.max(radial_norm(&l_k(&f)) / weighted_l2(&f, &f, params.eta)?.sqrt());
    }
    Ok(worst)
}

/// `|L_K(f)(z_min)| / max|f|` for `f` odd in `log z` about the middle of the grid.
pub fn lk_annihilation(grid: &Arc<Grid>) -> f64 {
    let u0 = 0.5 * (grid.z_min().ln() + grid.z_max().ln());
    let f = Field::from_fn(grid, |z, t| {
        let u = z.ln() - u0;
        u * (-u * u).exp() * (2.0 * t).sin()
    });
    l_k(&f).at_origin().abs() / f.max_abs()
}

/// Largest Sturm–Liouville residual of `Π₂` over the angular nodes.
pub fn sturm_liouville_error(grid: &Grid) -> f64 {
    grid.theta.iter().map(|t| sturm_liouville_residual(*t).abs()).fold(0.0, f64::max)
}

/// Largest relative Euler-ODE residual of `z^β` over the radial nodes.
pub fn euler_error(grid: &Grid, params: &Parameters) -> f64 {
    grid.z.iter().map(|z| euler_ode_residual(*z, params)).fold(0.0, f64::max)
}

fn relative_l2(a: &Field, b: &Field) -> f64 {
    let g = a.grid();
    let (mut num, mut den) = (0.0, 0.0);
    for (iz, zw) in g.z_weights.iter().enumerate() {
        for (j, tw) in g.theta_weights.iter().enumerate() {
            let (u, v) = (a.at(iz, j), b.at(iz, j));
            num += zw * tw * (u - v) * (u - v);
            den += zw * tw * v * v;
        }
    }
    (num / den).sqrt()
}

// a(u) = exp(−(u−u0)²/4), flat at u0
fn bump(u: f64, u0: f64) -> (f64, f64, f64) {
    let d = u - u0;
    let a = (-d * d / 4.0).exp();
    (a, -d / 2.0 * a, (d * d / 4.0 - 0.5) * a)
}

/// Manufactured stream function `a(log z) sin²2θ` and its image.
pub fn stream_manufactured(z: f64, t: f64, u0: f64, alpha: f64) -> (f64, f64) {
    let (a, a1, a2) = bump(z.ln(), u0);
    let s = (2.0 * t).sin().powi(2);
    let (st, ct) = (t.sin(), t.cos());
    let ang = -8.0 * (4.0 * t).cos() + 12.0 * st * st * ct * ct - 4.0 * st.powi(4) - 6.0 * s;
    (a * s, -(alpha * alpha * a2 + 5.0 * alpha * a1) * s + a * ang)
}

/// Manufactured potential `d² e^{−d/2} cos 4θ`, `d = log z − u_min`, and its image.
pub fn potential_manufactured(z: f64, t: f64, umin: f64, alpha: f64) -> (f64, f64) {
    let d = z.ln() - umin;
    let e = (-d / 2.0).exp();
    let (a, a1, a2) = (d * d * e, (2.0 * d - d * d / 2.0) * e, (2.0 - 2.0 * d + d * d / 4.0) * e);
    let p = (4.0 * t).cos();
    let ang = -10.0 * p + 16.0 * t.sin().powi(2) * (2.0 * t).cos();
    (a * p, (alpha * alpha * a2 + 5.0 * alpha * a1) * p + a * ang)
}

/// Relative L² error of the manufactured solution on `[0.1, 10]` with `α = 0.1`.
pub fn manufactured_error(kind: ProblemKind, nz: usize, nt: usize) -> Result<f64> {
    let alpha = 0.1;
    let p = Parameters::new(alpha, 0.0, 0)?;
    let grid = make_grid(0.1, 10.0, nz, nt)?;
    let u0 = 0.1f64.ln();
    let ex = |z, t| match kind {
        ProblemKind::Stream => stream_manufactured(z, t, u0, alpha),
        ProblemKind::Potential => potential_manufactured(z, t, u0, alpha),
    };
    let rhs = Field::from_fn(&grid, |z, t| ex(z, t).1);
    let exact = Field::from_fn(&grid, |z, t| ex(z, t).0);
    let inner: Vec<f64> = grid.theta.iter().map(|&t| ex(grid.z_min(), t).0).collect();
    let outer: Vec<f64> = grid.theta.iter().map(|&t| ex(grid.z_max(), t).0).collect();
    let sol = EllipticSolver::new(kind, &grid, &p)?.solve_with_boundary(&rhs, &inner, &outer)?;
    Ok(relative_l2(&sol, &exact))
}

/// Relative L² error of `solve_potential(PΠ_s)` against `Π_s`, with `PΠ_s`
/// from analytic derivatives.
pub fn round_trip_error(grid: &Arc<Grid>, params: &Parameters) -> Result<f64> {
    let sp = SpecialPi::new(1.0, *params);
    let back = solve_potential(&sp.sample_image(grid), params)?;
    Ok(relative_l2(&back, &sp.sample(grid)))
}

/// `max |PΠ_s| / |Π_s|` over the nodes where `Π_s ≠ 0`.
pub fn special_bound_constant(grid: &Grid, params: &Parameters) -> f64 {
    let sp = SpecialPi::new(1.0, *params);
    let mut c = 0.0f64;
    for &z in &grid.z {
        for &t in &grid.theta {
            let v = sp.value(z, t);
            if v != 0.0 {
                c = c.max((sp.potential_image(z, t) / v).abs());
            }
        }
    }
    c
}

fn three_grids(cfg: &Config) -> [(usize, usize); 3] {
    [(cfg.nz / 4, cfg.ntheta / 4), (cfg.nz / 2, cfg.ntheta / 2), (cfg.nz, cfg.ntheta)]
}

/// Identity suite on the configured domain; refinement studies use the
/// configured resolution and its halvings.
pub fn cmd_verify(cfg: &Config) -> Result<VerificationSuiteResult> {
    let params = cfg.parameters()?;
    let grid = cfg.grid()?;
    let coarse = make_grid(cfg.z_min, cfg.z_max, cfg.nz / 2, cfg.ntheta)?;
    let mut rows = Vec::new();

    let (e1, e2) = (lk_profile_error(&coarse, &params), lk_profile_error(&grid, &params));
    let o = order(e1, e2, (cfg.nz - 1) as f64 / (cfg.nz / 2 - 1) as f64);
    rows.push(SuiteRow::at_most("lk_profile_identity", e2, 1e-4).with_order(o));
    rows.push(SuiteRow::at_least("lk_profile_order", o, 2.0));

    rows.push(SuiteRow::at_most("lk_zdz_origin", zpz_error(&grid), 1e-6));
    rows.push(SuiteRow::at_most("lk_annihilation", lk_annihilation(&grid), 1e-8));
    rows.push(SuiteRow::at_most("lk_boundedness_ratio", lk_boundedness_ratio(&grid, &params, cfg.seed, 100)?, 1.0 + 1e-3));

    let sizes = three_grids(cfg);
    let comm: Vec<f64> = sizes
        .iter()
        .map(|&(nz, nt)| make_grid(cfg.z_min, cfg.z_max, nz, nt).map(|g| commutation_error(&g, &params, cfg.seed, 10)))
        .collect::<Result<_>>()?;
    let o = order(comm[1], comm[2], 2.0);
    rows.push(SuiteRow::at_most("commutation_identity", comm[2], 1e-4).with_order(o));
    rows.push(SuiteRow::at_least("commutation_order", o, 2.0));

    rows.push(SuiteRow::at_most("pairing_identity", pairing_error(&grid, cfg.seed, 10)?, 1e-6));
    rows.push(SuiteRow::at_most("sturm_liouville_residual", sturm_liouville_error(&grid), 1e-12));
    let worst = [0.01, 0.05, 0.1]
        .iter()
        .map(|&a| Parameters::new(a, a / 2.0, 0).map(|p| euler_error(&grid, &p)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    rows.push(SuiteRow::at_most("euler_ode_residual", worst, 1e-10));
    rows.push(SuiteRow::at_most("alpha_beta_identity", (alpha_beta() - (21f64.sqrt() - 5.0) / 2.0).abs(), 1e-12));

    for (kind, name) in [(ProblemKind::Stream, "stream_manufactured"), (ProblemKind::Potential, "potential_manufactured")] {
        let e: Vec<f64> = [(65, 32), (129, 64), (257, 128)]
            .iter()
            .map(|&(nz, nt)| manufactured_error(kind, nz, nt))
            .collect::<Result<_>>()?;
        let o = order(e[1], e[2], 2.0);
        rows.push(SuiteRow::at_least(&format!("{name}_order"), o, 2.0));
    }

    let rt: Vec<f64> = sizes
        .iter()
        .map(|&(nz, nt)| make_grid(cfg.z_min, cfg.z_max, nz, nt).and_then(|g| round_trip_error(&g, &params)))
        .collect::<Result<_>>()?;
    let o = order(rt[1], rt[2], 2.0);
    rows.push(SuiteRow::at_least("special_round_trip_order", o, 2.0));

    // one C for every grid: the constant may not grow under refinement
    let cs: Vec<f64> = sizes
        .iter()
        .map(|&(nz, nt)| make_grid(cfg.z_min, cfg.z_max, nz, nt).map(|g| special_bound_constant(&g, &params)))
        .collect::<Result<_>>()?;
    let cmin = cs.iter().cloned().fold(f64::INFINITY, f64::min);
    rows.push(SuiteRow::at_most("special_pointwise_bound_growth", cs[2] / cmin - 1.0, 0.1));

    Ok(VerificationSuiteResult { rows })
}

/// Pairing ratios of `M_G` for one sample: the `k = 0` ratio and the
/// normalised `k = 1` combination with coefficients `(1, 9, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoercivitySample {
    pub k0: f64,
    pub k1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoercivityReport {
    pub alpha: f64,
    pub samples: Vec<CoercivitySample>,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

impl CoercivityReport {
    pub fn min_k0(&self) -> f64 {
        self.samples.iter().map(|s| s.k0).fold(f64::INFINITY, f64::min)
    }

    pub fn min_k1(&self) -> f64 {
        self.samples.iter().map(|s| s.k1).fold(f64::INFINITY, f64::min)
    }

    pub fn median_k0(&self) -> f64 {
        median(self.samples.iter().map(|s| s.k0).collect())
    }

    pub fn median_k1(&self) -> f64 {
        median(self.samples.iter().map(|s| s.k1).collect())
    }

    /// `k = 0` bound `1/2 − 10α` and positivity of the `k = 1` combination.
    pub fn rows(&self) -> VerificationSuiteResult {
        VerificationSuiteResult {
            rows: vec![
                SuiteRow::at_least("coercivity_k0_min", self.min_k0(), 0.5 - 10.0 * self.alpha),
                SuiteRow::at_least("coercivity_k1_min", self.min_k1(), 0.0),
            ],
        }
    }
}

/// Monte-Carlo pairing ratios of `M_G` over seeded test fields.
pub fn cmd_coercivity(cfg: &Config, samples: usize) -> Result<CoercivityReport> {
    let params = cfg.parameters()?;
    let grid = cfg.grid()?;
    let phi = solve_stream(&Profile::f_star(&grid, &params).f, &params)?;
    let vel = velocity_functionals(&phi, &params);
    let (eta, gamma) = (params.eta, params.gamma);
    let mut out = Vec::with_capacity(samples);
    for f in TestFamily::default().seeded(cfg.seed, samples) {
        let g = f.sample(&grid);
        let m = op_m_g(&g, &vel, &params);
        let (dtm, dtg) = (d_theta(&m)?, d_theta(&g)?);
        let (dzm, dzg) = (d_z(&m)?, d_z(&g)?);
        let base = weighted_l2(&g, &g, eta)?;
        let k0 = weighted_l2(&m, &g, eta)?;
        let num = k0 + 9.0 * weighted_l2(&dtm, &dtg, gamma)? + weighted_l2(&dzm, &dzg, eta)?;
        let den = base + weighted_l2(&dtg, &dtg, gamma)? + weighted_l2(&dzg, &dzg, eta)?;
        out.push(CoercivitySample { k0: k0 / base, k1: num / den });
    }
    Ok(CoercivityReport { alpha: params.alpha, samples: out })
}

/// Pass/fail rows for a decay run: completion, constraint drift, and the
/// decay law when the initial energy is nonzero. The transient must end
/// by `s_max / 2`.
pub fn decay_checks(report: &SimulationReport, s_max: f64) -> VerificationSuiteResult {
    let completed = matches!(report.status, RunStatus::Completed);
    let mut rows = vec![
        SuiteRow::at_least("run_completed", if completed { 1.0 } else { 0.0 }, 1.0),
        SuiteRow::at_most("lk0_drift", report.lk0_drift, 1e-4),
    ];
    let e0 = report.rows.first().map_or(0.0, |r| r.energy);
    if e0 > 0.0 {
        match report.fit {
            Some(fit) => {
                rows.push(SuiteRow::at_least("decay_rate", fit.kappa, f64::MIN_POSITIVE));
                rows.push(SuiteRow::at_most("decay_fit_residual", fit.residual, 0.1));
                rows.push(SuiteRow::at_most("transient_end", fit.transient_end, 0.5 * s_max));
                rows.push(SuiteRow::at_least("inequality_c_meas", fit.c_meas, f64::MIN_POSITIVE));
            }
            None => rows.push(SuiteRow::at_least("decay_fit_available", 0.0, 1.0)),
        }
    }
    VerificationSuiteResult { rows }
}
