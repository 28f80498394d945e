//! Solvers for the two variant spherical Laplacians.
//!
//! Stream problem (Biot–Savart):
//! `−α²z²Ψ_zz − α(5+α)zΨ_z − Ψ_θθ + ∂_θ(tan θ Ψ) − 6Ψ = F`,
//! `Ψ = 0` at `θ = 0, π/2` and at `z_max`.
//!
//! Potential problem (electrostatics):
//! `α²z²Π_zz + α(5+α)zΠ_z + Π_θθ − tan θ Π_θ + 6Π = G`,
//! `∂_θΠ = 0` at `θ = 0, π/2`, `Π = 0` at `z_min` and `z_max`.
//!
//! Both are discretised with second-order differences on the `log z × θ`
//! grid. In `u = log z` the radial part is `∓(α²∂_uu + 5α∂_u)`; the first
//! derivative uses the one-sided second-order stencil on the `z_max` side.
//! Information travels inward in both problems and the boundary layer of
//! width `O(α)` in `log z` sits at `z_min`; the upwind stencil keeps it from
//! producing grid-scale oscillation when it is not resolved.
//! Angular boundary values are eliminated, so unknowns sit on the
//! Gauss–Legendre nodes only.
//!
//! The angular operator is tridiagonal and similar to a symmetric matrix, so
//! the discrete problem separates exactly into angular modes with one banded
//! radial solve each.
//!
//! The angular kernel (`sin 2θ` for the stream problem, `Π₂` for the
//! potential problem) has radial exponents `0` and `−5/α`. A discrete
//! angular eigenvalue `ε ≠ 0` in its place would turn the exponent `0` into
//! `∓ε/(5α)`, an error of size `e^{|ε| log(z_max/z_min)/(5α)}` across the
//! domain for small α. That eigenvalue is therefore set to exactly zero.
//!
//! The angular constant is an eigenvector of the discrete potential operator
//! with eigenvalue 6; its radial equation `α²a'' + 5αa' + 6a = g` has the
//! two decaying exponents `z^{−2/α}` and `z^{−3/α}`, so a two-point problem
//! for it is exponentially ill-conditioned. That mode is integrated outward
//! from `z_min` with zero slope instead (the solution that stays regular
//! below the support of the data).

use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use crate::banded::{BandLu, BandMatrix};
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::params::Parameters;
use crate::quadrature::fornberg;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    Stream,
    Potential,
}

/// Condition imposed at the innermost radial node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerBoundary {
    /// `f(z_min) = 0` (or prescribed data).
    Dirichlet,
    /// `∂_z f(z_min) = 0`, the regular branch of the stream problem.
    Neumann,
}

impl ProblemKind {
    pub fn default_inner(self) -> InnerBoundary {
        match self {
            ProblemKind::Stream => InnerBoundary::Neumann,
            ProblemKind::Potential => InnerBoundary::Dirichlet,
        }
    }

    /// `(a2, a1)` in `a2 ∂_uu + a1 ∂_u`.
    fn radial(self, alpha: f64) -> (f64, f64) {
        match self {
            ProblemKind::Stream => (-alpha * alpha, -5.0 * alpha),
            ProblemKind::Potential => (alpha * alpha, 5.0 * alpha),
        }
    }
}

/// A right-hand side together with the operator it belongs to.
#[derive(Debug, Clone)]
pub struct EllipticProblem {
    pub kind: ProblemKind,
    pub rhs: Field,
    pub parameters: Parameters,
}

impl EllipticProblem {
    pub fn solve(&self) -> Result<Field> {
        EllipticSolver::new(self.kind, self.rhs.grid(), &self.parameters)?.solve(&self.rhs)
    }
}

/// Three-point angular row at one node: weights on `(j−1, j, j+1)` after
/// eliminating the boundary value where a neighbour is an endpoint.
#[derive(Debug, Clone, Copy)]
struct AngularRow {
    w: [f64; 3],
}

fn angular_rows(kind: ProblemKind, theta: &[f64]) -> Vec<AngularRow> {
    let n = theta.len();
    let mut rows = Vec::with_capacity(n);
    for j in 0..n {
        let left = if j == 0 { 0.0 } else { theta[j - 1] };
        let right = if j == n - 1 { FRAC_PI_2 } else { theta[j + 1] };
        let t = theta[j];
        let c = fornberg(t, &[left, t, right], 2);
        let (tan, sec2) = (t.tan(), 1.0 / (t.cos() * t.cos()));
        // coefficient of f'', f', f
        let (c2, c1, c0) = match kind {
            ProblemKind::Stream => (-1.0, tan, sec2 - 6.0),
            ProblemKind::Potential => (1.0, -tan, 6.0),
        };
        let mut w = [0.0; 3];
        for k in 0..3 {
            w[k] = c2 * c[2][k] + c1 * c[1][k];
        }
        w[1] += c0;
        match kind {
            // Dirichlet: the endpoint value is zero.
            ProblemKind::Stream => {
                if j == 0 {
                    w[0] = 0.0;
                }
                if j == n - 1 {
                    w[2] = 0.0;
                }
            }
            // Neumann: endpoint value from the one-sided derivative through
            // the two nearest interior nodes.
            ProblemKind::Potential => {
                if j == 0 {
                    let d = fornberg(0.0, &[0.0, theta[0], theta[1]], 1);
                    let wb = w[0];
                    w[0] = 0.0;
                    w[1] -= wb * d[1][1] / d[1][0];
                    w[2] -= wb * d[1][2] / d[1][0];
                }
                if j == n - 1 {
                    let d = fornberg(FRAC_PI_2, &[FRAC_PI_2, theta[n - 1], theta[n - 2]], 1);
                    let wb = w[2];
                    w[2] = 0.0;
                    w[1] -= wb * d[1][1] / d[1][0];
                    w[0] -= wb * d[1][2] / d[1][0];
                }
            }
        }
        rows.push(AngularRow { w });
    }
    rows
}

/// Radial stencil at node `iz`: pairs `(offset, weight)` in `iz`.
fn radial_row(kind: ProblemKind, alpha: f64, h: f64, iz: usize, nz: usize) -> Vec<(isize, f64)> {
    let (a2, a1) = kind.radial(alpha);
    let mut row = vec![(-1, a2 / (h * h)), (0, -2.0 * a2 / (h * h)), (1, a2 / (h * h))];
    let upwind: Option<[(isize, f64); 3]> = if iz + 2 < nz {
        Some([(0, -1.5), (1, 2.0), (2, -0.5)])
    } else {
        None
    };
    match upwind {
        Some(st) => row.extend(st.iter().map(|&(o, w)| (o, a1 * w / h))),
        None => row.extend([(-1, -0.5 * a1 / h), (1, 0.5 * a1 / h)]),
    }
    row
}

/// One-sided second-order radial stencil at the two boundary nodes, used
/// only when applying the operator to a given field.
fn radial_boundary_row(kind: ProblemKind, alpha: f64, h: f64, iz: usize) -> Vec<(isize, f64)> {
    let (a2, a1) = kind.radial(alpha);
    let s = if iz == 0 { 1isize } else { -1 };
    let sf = s as f64;
    // f'' ≈ (2f0 − 5f1 + 4f2 − f3)/h², f' ≈ ±(−3f0 + 4f1 − f2)/(2h)
    let d2 = [2.0, -5.0, 4.0, -1.0];
    let d1 = [-1.5, 2.0, -0.5, 0.0];
    (0..4).map(|k| (s * k as isize, a2 * d2[k] / (h * h) + sf * a1 * d1[k] / h)).collect()
}

/// Angular operator on the Gauss–Legendre nodes with its eigen-decomposition.
///
/// The three-point matrix is tridiagonal with positive off-diagonal products,
/// so `D A D⁻¹` is symmetric for a diagonal `D` and the modes are real.
#[derive(Debug, Clone)]
struct AngularOperator {
    n: usize,
    /// Corrected operator, dense row-major.
    a: Vec<f64>,
    /// Right eigenvectors, row-major `n × n`, column `m` is mode `m`.
    right: Vec<f64>,
    /// Left eigenvectors, row `m` is mode `m`; `left · right = I`.
    left: Vec<f64>,
    eigenvalues: Vec<f64>,
    /// Mode with eigenvalue 6 (the angular constant) for the potential problem.
    constant: Option<usize>,
}

impl AngularOperator {
    fn new(kind: ProblemKind, theta: &[f64]) -> Result<Self> {
        let rows = angular_rows(kind, theta);
        let n = rows.len();
        // symmetrising scale: d_{j+1}/d_j = sqrt(A_{j,j+1}/A_{j+1,j})
        let mut d = vec![1.0; n];
        for j in 0..n - 1 {
            let (up, down) = (rows[j].w[2], rows[j + 1].w[0]);
            if !(up * down > 0.0) {
                return Err(Error::Grid(format!("angular operator not symmetrisable at node {j}")));
            }
            d[j + 1] = d[j] * (up / down).sqrt();
        }
        let mut s = nalgebra::DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            s[(j, j)] = rows[j].w[1];
            if j + 1 < n {
                let off = rows[j].w[2].signum() * (rows[j].w[2] * rows[j + 1].w[0]).sqrt();
                s[(j, j + 1)] = off;
                s[(j + 1, j)] = off;
            }
        }
        let s0 = s.clone();
        let eig = nalgebra::SymmetricEigen::new(s);
        // The QR sweep loses accuracy on the small eigenvalues when the
        // entries span many orders of magnitude; polish each pair by inverse
        // iteration on the tridiagonal matrix.
        let mut q = eig.eigenvectors;
        let mut eigenvalues: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        for m in 0..n {
            let lam = eigenvalues[m];
            let shift = lam + 1e-10 * lam.abs().max(1.0);
            let mut t = BandMatrix::zeros(n, 1, 1);
            for j in 0..n {
                t.add(j, j, s0[(j, j)] - shift);
                if j + 1 < n {
                    t.add(j, j + 1, s0[(j, j + 1)]);
                    t.add(j + 1, j, s0[(j + 1, j)]);
                }
            }
            let lu = t.factor()?;
            let mut x: Vec<f64> = q.column(m).iter().copied().collect();
            for _ in 0..3 {
                lu.solve(&mut x);
                let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                x.iter_mut().for_each(|v| *v /= norm);
            }
            let sx = &s0 * nalgebra::DVector::from_column_slice(&x);
            eigenvalues[m] = x.iter().zip(sx.iter()).map(|(a, b)| a * b).sum();
            q.set_column(m, &nalgebra::DVector::from_vec(x));
        }
        let mut right = vec![0.0; n * n];
        let mut left = vec![0.0; n * n];
        for j in 0..n {
            for m in 0..n {
                right[j * n + m] = q[(j, m)] / d[j];
                left[m * n + j] = q[(j, m)] * d[j];
            }
        }
        let nearest = |ev: &[f64], target: f64| {
            (0..n).min_by(|&a, &b| (ev[a] - target).abs().total_cmp(&(ev[b] - target).abs())).unwrap()
        };
        let kernel = nearest(&eigenvalues, 0.0);
        eigenvalues[kernel] = 0.0;
        let constant = match kind {
            ProblemKind::Potential => {
                let c = nearest(&eigenvalues, 6.0);
                eigenvalues[c] = 6.0;
                Some(c)
            }
            ProblemKind::Stream => None,
        };
        let mut a = vec![0.0; n * n];
        for j in 0..n {
            for k in 0..n {
                a[j * n + k] = (0..n).map(|m| right[j * n + m] * eigenvalues[m] * left[m * n + k]).sum();
            }
        }
        Ok(Self { n, a, right, left, eigenvalues, constant })
    }

    /// Mode coefficients `left · x`.
    fn analyse(&self, x: &[f64]) -> Vec<f64> {
        self.left.chunks(self.n).map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }

    /// Nodal values `right · c`.
    fn synthesise(&self, c: &[f64]) -> Vec<f64> {
        self.right.chunks(self.n).map(|row| row.iter().zip(c).map(|(a, b)| a * b).sum()).collect()
    }

    fn apply_row(&self, x: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o += self.a[j * self.n..(j + 1) * self.n].iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
    }
}

/// Solves `α²a'' + 5αa' + 6a = g` in `u = log z` from `a(u₀) = a0`,
/// `a'(u₀) = 0` with exact exponentials and `g` linear between nodes.
fn integrate_constant_mode(alpha: f64, h: f64, g: &[f64], a0: f64) -> Vec<f64> {
    let rates = [-2.0 / alpha, -3.0 / alpha];
    let mut acc = [0.0f64; 2];
    let mut out = Vec::with_capacity(g.len());
    out.push(a0);
    let weights: Vec<(f64, f64, f64)> = rates
        .iter()
        .map(|&r| {
            let x = r * h;
            let e = x.exp();
            let (p1, p2) = if x.abs() < 1e-4 {
                (1.0 + x / 2.0, 0.5 + x / 6.0)
            } else {
                let p1 = x.exp_m1() / x;
                (p1, (p1 - 1.0) / x)
            };
            (e, h * p1, h * p2)
        })
        .collect();
    for i in 0..g.len() - 1 {
        for (k, &(e, w1, w2)) in weights.iter().enumerate() {
            acc[k] = e * acc[k] + w1 * g[i] + w2 * (g[i + 1] - g[i]);
        }
        let u = (i + 1) as f64 * h;
        let hom = a0 * (3.0 * (rates[0] * u).exp() - 2.0 * (rates[1] * u).exp());
        out.push(hom + (acc[0] - acc[1]) / alpha);
    }
    out
}

/// Relative residual accepted from the direct solve, in the discrete L²
/// norm over `(log z, θ)`.
pub const SOLVE_TOLERANCE: f64 = 1e-8;

/// Discrete operator for one grid and parameter set, factored mode by mode.
#[derive(Debug, Clone)]
pub struct EllipticSolver {
    kind: ProblemKind,
    inner: InnerBoundary,
    grid: Arc<Grid>,
    params: Parameters,
    angular: AngularOperator,
    /// Radial factorisation per angular mode; `None` for the constant mode.
    radial: Vec<Option<BandLu>>,
}

impl EllipticSolver {
    pub fn new(kind: ProblemKind, grid: &Arc<Grid>, params: &Parameters) -> Result<Self> {
        Self::with_inner(kind, grid, params, kind.default_inner())
    }

    pub fn with_inner(kind: ProblemKind, grid: &Arc<Grid>, params: &Parameters, inner: InnerBoundary) -> Result<Self> {
        let (nz, nt) = (grid.nz(), grid.ntheta());
        if nz < 5 || nt < 3 {
            return Err(Error::Grid("elliptic solve needs at least 5 radial and 3 angular nodes".into()));
        }
        let angular = AngularOperator::new(kind, &grid.theta)?;
        let h = grid.log_step;
        let mut radial = Vec::with_capacity(nt);
        for (m, &lam) in angular.eigenvalues.iter().enumerate() {
            if angular.constant == Some(m) {
                radial.push(None);
                continue;
            }
            let mut a = BandMatrix::zeros(nz - 2, 1, 2);
            for iz in 1..nz - 1 {
                let row = iz - 1;
                a.add(row, row, lam);
                for (off, w) in radial_row(kind, params.alpha, h, iz, nz) {
                    let src = iz as isize + off;
                    if src == (nz - 1) as isize {
                        continue;
                    }
                    if src == 0 {
                        if inner == InnerBoundary::Neumann {
                            // f0 = (4 f1 − f2)/3
                            a.add(row, 0, 4.0 / 3.0 * w);
                            a.add(row, 1, -1.0 / 3.0 * w);
                        }
                        continue;
                    }
                    a.add(row, src as usize - 1, w);
                }
            }
            radial.push(Some(a.factor()?));
        }
        Ok(Self { kind, inner, grid: grid.clone(), params: *params, angular, radial })
    }

    pub fn kind(&self) -> ProblemKind {
        self.kind
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// Solve with homogeneous radial boundary data.
    pub fn solve(&self, rhs: &Field) -> Result<Field> {
        let nt = self.grid.ntheta();
        self.solve_with_boundary(rhs, &vec![0.0; nt], &vec![0.0; nt])
    }

    /// Solve with Dirichlet data at `z_min` (ignored for a Neumann inner
    /// boundary) and at `z_max`, one value per angular node. For the
    /// potential problem the constant component of the outer data is not
    /// imposed; that component is fixed by its value and zero slope at `z_min`.
    pub fn solve_with_boundary(&self, rhs: &Field, inner: &[f64], outer: &[f64]) -> Result<Field> {
        if rhs.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        let nt = self.grid.ntheta();
        let mut x = self.direct(rhs.values(), inner, outer);
        let zeros = vec![0.0; nt];
        let mut history = Vec::new();
        for pass in 0..3 {
            let (res, r) = self.residual(rhs.values(), &x);
            history.push(res);
            if res <= SOLVE_TOLERANCE || pass == 2 {
                break;
            }
            let dx = self.direct(&r, &zeros, &zeros);
            x.iter_mut().zip(&dx).for_each(|(a, b)| *a += b);
        }
        if history.last().copied().unwrap_or(0.0) > SOLVE_TOLERANCE || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NotConverged(history));
        }
        Ok(Field::from_raw(&self.grid, x))
    }

    fn direct(&self, f: &[f64], inner: &[f64], outer: &[f64]) -> Vec<f64> {
        let (nz, nt) = (self.grid.nz(), self.grid.ntheta());
        let h = self.grid.log_step;
        let ang = &self.angular;
        // modal coefficients, stored mode-major
        let mut g = vec![0.0; nt * nz];
        for iz in 0..nz {
            for (m, c) in ang.analyse(&f[iz * nt..(iz + 1) * nt]).into_iter().enumerate() {
                g[m * nz + iz] = c;
            }
        }
        let (ci, co) = (ang.analyse(inner), ang.analyse(outer));
        let mut a = vec![0.0; nt * nz];
        for m in 0..nt {
            let gm = &g[m * nz..(m + 1) * nz];
            let am = &mut a[m * nz..(m + 1) * nz];
            let Some(lu) = &self.radial[m] else {
                am.copy_from_slice(&integrate_constant_mode(self.params.alpha, h, gm, ci[m]));
                continue;
            };
            let mut b = gm[1..nz - 1].to_vec();
            for iz in 1..nz - 1 {
                for (off, w) in radial_row(self.kind, self.params.alpha, h, iz, nz) {
                    let src = iz as isize + off;
                    if src == 0 && self.inner == InnerBoundary::Dirichlet {
                        b[iz - 1] -= w * ci[m];
                    } else if src == (nz - 1) as isize {
                        b[iz - 1] -= w * co[m];
                    }
                }
            }
            lu.solve(&mut b);
            am[1..nz - 1].copy_from_slice(&b);
            am[0] = match self.inner {
                InnerBoundary::Dirichlet => ci[m],
                InnerBoundary::Neumann => (4.0 * b[0] - b[1]) / 3.0,
            };
            am[nz - 1] = co[m];
        }
        let mut out = vec![0.0; nz * nt];
        let mut c = vec![0.0; nt];
        for iz in 0..nz {
            for m in 0..nt {
                c[m] = a[m * nz + iz];
            }
            out[iz * nt..(iz + 1) * nt].copy_from_slice(&ang.synthesise(&c));
        }
        out
    }

    /// Relative interior residual and the residual field (zero on the radial
    /// boundary rows). The constant potential mode is integrated rather than
    /// differenced, so it is excluded.
    fn residual(&self, f: &[f64], x: &[f64]) -> (f64, Vec<f64>) {
        let (nz, nt) = (self.grid.nz(), self.grid.ntheta());
        let ax = apply_rows(self.kind, &self.params, &self.angular, &Field::from_raw(&self.grid, x.to_vec()));
        let mut r = vec![0.0; nz * nt];
        for i in nt..(nz - 1) * nt {
            r[i] = f[i] - ax.values()[i];
        }
        let mut fi = f.to_vec();
        fi[..nt].iter_mut().for_each(|v| *v = 0.0);
        fi[(nz - 1) * nt..].iter_mut().for_each(|v| *v = 0.0);
        if let Some(c) = self.angular.constant {
            for v in [&mut r, &mut fi] {
                for row in v.chunks_mut(nt) {
                    let k = self.angular.left[c * nt..(c + 1) * nt].iter().zip(row.iter()).map(|(a, b)| a * b).sum::<f64>();
                    for (j, x) in row.iter_mut().enumerate() {
                        *x -= k * self.angular.right[j * nt + c];
                    }
                }
            }
        }
        let tw = &self.grid.theta_weights;
        let norm = |v: &[f64]| v.iter().enumerate().map(|(k, x)| tw[k % nt] * x * x).sum::<f64>().sqrt();
        let scale = norm(&fi).max(f64::MIN_POSITIVE);
        (norm(&r) / scale, r)
    }

    /// The discrete operator applied to a field, using its own values at the
    /// radial boundary nodes. Interior rows coincide with the solver's matrix.
    pub fn apply(&self, f: &Field) -> Field {
        apply_rows(self.kind, &self.params, &self.angular, f)
    }
}

fn apply_rows(kind: ProblemKind, params: &Parameters, angular: &AngularOperator, f: &Field) -> Field {
    let grid = f.grid();
    let (nz, nt) = (grid.nz(), grid.ntheta());
    let h = grid.log_step;
    let v = f.values();
    let mut out = vec![0.0; nz * nt];
    for iz in 0..nz {
        let rrow = if iz == 0 || iz == nz - 1 {
            radial_boundary_row(kind, params.alpha, h, iz)
        } else {
            radial_row(kind, params.alpha, h, iz, nz)
        };
        let o = &mut out[iz * nt..(iz + 1) * nt];
        for (j, oj) in o.iter_mut().enumerate() {
            for &(off, w) in &rrow {
                *oj += w * v[(iz as isize + off) as usize * nt + j];
            }
        }
        angular.apply_row(&v[iz * nt..(iz + 1) * nt], o);
    }
    Field::from_raw(grid, out)
}

fn apply_kind(kind: ProblemKind, f: &Field, params: &Parameters) -> Result<Field> {
    let grid = f.grid();
    if grid.nz() < 5 || grid.ntheta() < 3 {
        return Err(Error::Grid("elliptic operator needs at least 5 radial and 3 angular nodes".into()));
    }
    Ok(apply_rows(kind, params, &AngularOperator::new(kind, &grid.theta)?, f))
}

/// Stream function of a vorticity field.
pub fn solve_stream(f: &Field, params: &Parameters) -> Result<Field> {
    EllipticSolver::new(ProblemKind::Stream, f.grid(), params)?.solve(f)
}

/// Electrostatic potential of a charge field.
pub fn solve_potential(g: &Field, params: &Parameters) -> Result<Field> {
    EllipticSolver::new(ProblemKind::Potential, g.grid(), params)?.solve(g)
}

/// `P Π` by finite differences.
pub fn apply_potential_operator(pi: &Field, params: &Parameters) -> Result<Field> {
    apply_kind(ProblemKind::Potential, pi, params)
}

/// Left-hand side of the stream problem applied to `Ψ`.
pub fn apply_stream_operator(psi: &Field, params: &Parameters) -> Result<Field> {
    apply_kind(ProblemKind::Stream, psi, params)
}
