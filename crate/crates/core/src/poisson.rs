//! Anisotropic electrostatics −div(ε(d)∇Φ) = ρ with Φ = 0 on the walls, and
//! the Neumann pressure Poisson problem of the projection step.

use crate::error::{Error, Result};
use crate::grid::{BoundaryKind, CellField, Grid};
use crate::material::{epsilon_tensor, Mat2, Permittivity, Vec2};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Relative residual target ‖r‖₂ ≤ tol·‖b‖₂.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 5000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    /// Final ‖r‖₂.
    pub residual: f64,
}

/// Cellwise permittivity tensor field.
#[derive(Debug, Clone)]
pub struct EpsField {
    pub e11: CellField,
    pub e12: CellField,
    pub e22: CellField,
    /// Lower bound on the eigenvalues; scales the preconditioner.
    pub eps_perp: f64,
}

impl EpsField {
    pub fn from_director(grid: &Grid, d1: &[f64], d2: &[f64], p: &Permittivity) -> Self {
        let n = grid.cells();
        let (mut e11, mut e12, mut e22) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for k in 0..n {
            let e = epsilon_tensor(&Vec2::new(d1[k], d2[k]), p);
            e11[k] = e[(0, 0)];
            e12[k] = e[(0, 1)];
            e22[k] = e[(1, 1)];
        }
        Self { e11, e12, e22, eps_perp: p.eps_perp }
    }

    pub fn uniform(grid: &Grid, e: Mat2, eps_perp: f64) -> Self {
        let n = grid.cells();
        Self { e11: vec![e[(0, 0)]; n], e12: vec![e[(0, 1)]; n], e22: vec![e[(1, 1)]; n], eps_perp }
    }

    pub fn tensor(&self, k: usize) -> Mat2 {
        Mat2::new(self.e11[k], self.e12[k], self.e12[k], self.e22[k])
    }
}

/// −div(ε∇Φ) with Dirichlet walls. Normal fluxes use face-averaged ε and
/// two-point differences; tangential fluxes average the four neighbouring
/// face gradients with the off-diagonal ε of the cell they share, which keeps
/// the operator symmetric.
pub fn apply_aniso(grid: &Grid, eps: &EpsField, phi: &[f64]) -> CellField {
    let mut out = vec![0.0; grid.cells()];
    apply_aniso_into(grid, eps, phi, &mut out);
    out
}

fn apply_aniso_into(grid: &Grid, eps: &EpsField, phi: &[f64], out: &mut [f64]) {
    let (nx, ny) = (grid.nx, grid.ny);
    let (gxf, gyf) = grid.grad_cc(phi, BoundaryKind::Dirichlet0);
    let anisotropic = eps.e12.iter().any(|&e| e != 0.0);
    let (mut tx, mut ty) = (vec![0.0; grid.cells()], vec![0.0; grid.cells()]);
    if anisotropic {
        // ε12 times the cell-averaged tangential gradient
        par::rows_mut(&mut tx, nx, |j, row| {
            for i in 0..nx {
                let k = j * nx + i;
                row[i] = eps.e12[k] * 0.5 * (gyf[j * nx + i] + gyf[(j + 1) * nx + i]);
            }
        });
        par::rows_mut(&mut ty, nx, |j, row| {
            for i in 0..nx {
                let k = j * nx + i;
                row[i] = eps.e12[k] * 0.5 * (gxf[j * (nx + 1) + i] + gxf[j * (nx + 1) + i + 1]);
            }
        });
    }
    let mut fx = vec![0.0; grid.xfaces()];
    par::rows_mut(&mut fx, nx + 1, |j, row| {
        let c = |i: usize| j * nx + i;
        row[0] = eps.e11[c(0)] * gxf[j * (nx + 1)] + tx[c(0)];
        for i in 1..nx {
            row[i] = 0.5 * (eps.e11[c(i - 1)] + eps.e11[c(i)]) * gxf[j * (nx + 1) + i]
                + 0.5 * (tx[c(i - 1)] + tx[c(i)]);
        }
        row[nx] = eps.e11[c(nx - 1)] * gxf[j * (nx + 1) + nx] + tx[c(nx - 1)];
    });
    let mut fy = vec![0.0; grid.yfaces()];
    par::rows_mut(&mut fy, nx, |j, row| {
        for i in 0..nx {
            let f = j * nx + i;
            row[i] = if j == 0 {
                eps.e22[i] * gyf[f] + ty[i]
            } else if j == ny {
                let c = (ny - 1) * nx + i;
                eps.e22[c] * gyf[f] + ty[c]
            } else {
                let (s, n) = ((j - 1) * nx + i, j * nx + i);
                0.5 * (eps.e22[s] + eps.e22[n]) * gyf[f] + 0.5 * (ty[s] + ty[n])
            };
        }
    });
    let div = grid.div_fc(&fx, &fy);
    for (o, d) in out.iter_mut().zip(div) {
        *o = -d;
    }
}

/// Symmetric Gauss–Seidel sweeps on the isotropic five-point operator −s·Δ.
struct SymmetricRelaxation {
    nx: usize,
    ny: usize,
    ax: f64,
    ay: f64,
    diag: Vec<f64>,
    sweeps: usize,
}

impl SymmetricRelaxation {
    fn new(grid: &Grid, scale: f64, bc: BoundaryKind, sweeps: usize) -> Self {
        let (ax, ay) = (scale / (grid.hx * grid.hx), scale / (grid.hy * grid.hy));
        let wall = match bc {
            BoundaryKind::Dirichlet0 => 1.0,
            _ => -1.0,
        };
        let mut diag = vec![0.0; grid.cells()];
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let mut d = 2.0 * ax + 2.0 * ay;
                for edge in [i == 0, i + 1 == grid.nx] {
                    if edge {
                        d += wall * ax;
                    }
                }
                for edge in [j == 0, j + 1 == grid.ny] {
                    if edge {
                        d += wall * ay;
                    }
                }
                diag[grid.c(i, j)] = d;
            }
        }
        Self { nx: grid.nx, ny: grid.ny, ax, ay, diag, sweeps }
    }

    /// Adds a nonnegative diagonal term to the relaxed operator.
    fn shifted(mut self, shift: &[f64]) -> Self {
        for (d, s) in self.diag.iter_mut().zip(shift) {
            *d += s;
        }
        self
    }

    #[inline]
    fn relax(&self, r: &[f64], x: &mut [f64], i: usize, j: usize) {
        let (nx, ny) = (self.nx, self.ny);
        let k = j * nx + i;
        let mut s = r[k];
        if i > 0 {
            s += self.ax * x[k - 1];
        }
        if i + 1 < nx {
            s += self.ax * x[k + 1];
        }
        if j > 0 {
            s += self.ay * x[k - nx];
        }
        if j + 1 < ny {
            s += self.ay * x[k + nx];
        }
        x[k] = s / self.diag[k];
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.iter_mut().for_each(|v| *v = 0.0);
        for _ in 0..self.sweeps {
            for j in 0..self.ny {
                for i in 0..self.nx {
                    self.relax(r, z, i, j);
                }
            }
            for j in (0..self.ny).rev() {
                for i in (0..self.nx).rev() {
                    self.relax(r, z, i, j);
                }
            }
        }
    }
}

fn remove_mean(x: &mut [f64]) {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    x.iter_mut().for_each(|v| *v -= m);
}

/// Preconditioned conjugate gradients for a symmetric positive (semi-)definite
/// operator. Stops when ‖r‖₂ ≤ `threshold`. With `zero_mean` the iteration is
/// kept orthogonal to constants.
#[allow(clippy::too_many_arguments)]
pub(crate) fn pcg(
    solver: &'static str,
    apply: impl Fn(&[f64], &mut [f64]),
    precond: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    threshold: f64,
    max_iter: usize,
    zero_mean: bool,
    mut monitor: impl FnMut(&[f64]),
) -> Result<SolveStats> {
    let n = b.len();
    let mut r = vec![0.0; n];
    let mut ap = vec![0.0; n];
    apply(x, &mut ap);
    for k in 0..n {
        r[k] = b[k] - ap[k];
    }
    if zero_mean {
        remove_mean(&mut r);
    }
    let mut rnorm = par::dot(&r, &r).sqrt();
    if rnorm <= threshold {
        return Ok(SolveStats { iterations: 0, residual: rnorm });
    }
    let mut z = vec![0.0; n];
    precond(&r, &mut z);
    if zero_mean {
        remove_mean(&mut z);
    }
    let mut p = z.clone();
    let mut rz = par::dot(&r, &z);
    for it in 1..=max_iter {
        apply(&p, &mut ap);
        let pap = par::dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::NoConvergence { solver, iterations: it, residual: rnorm });
        }
        let alpha = rz / pap;
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        monitor(x);
        rnorm = par::dot(&r, &r).sqrt();
        if rnorm <= threshold {
            return Ok(SolveStats { iterations: it, residual: rnorm });
        }
        precond(&r, &mut z);
        if zero_mean {
            remove_mean(&mut z);
        }
        let rz_new = par::dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    Err(Error::NoConvergence { solver, iterations: max_iter, residual: rnorm })
}

const PRECOND_SWEEPS: usize = 2;

/// Solves −div(ε∇Φ) = ρ with Φ = 0 on ∂Ω, starting from `guess` when given.
pub fn solve_aniso_dirichlet(
    grid: &Grid,
    eps: &EpsField,
    rho: &[f64],
    opts: &SolverOptions,
    guess: Option<&[f64]>,
) -> Result<(CellField, SolveStats)> {
    solve_aniso_dirichlet_monitored(grid, eps, rho, opts, guess, |_| {})
}

/// As [`solve_aniso_dirichlet`], calling `monitor` with every iterate.
pub fn solve_aniso_dirichlet_monitored(
    grid: &Grid,
    eps: &EpsField,
    rho: &[f64],
    opts: &SolverOptions,
    guess: Option<&[f64]>,
    monitor: impl FnMut(&[f64]),
) -> Result<(CellField, SolveStats)> {
    let mut phi = guess.map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; grid.cells()]);
    let bnorm = par::dot(rho, rho).sqrt();
    if bnorm == 0.0 {
        return Ok((vec![0.0; grid.cells()], SolveStats { iterations: 0, residual: 0.0 }));
    }
    let pre = SymmetricRelaxation::new(grid, eps.eps_perp, BoundaryKind::Dirichlet0, PRECOND_SWEEPS);
    let stats = pcg(
        "anisotropic Poisson",
        |x, out| apply_aniso_into(grid, eps, x, out),
        |r, z| pre.apply(r, z),
        rho,
        &mut phi,
        opts.tol * bnorm,
        opts.max_iter,
        false,
        monitor,
    )?;
    Ok((phi, stats))
}

/// Solves (−div(ε∇·) + diag(shift))x = b with Dirichlet walls to ‖r‖₂ ≤ tol·‖b‖₂.
pub(crate) fn solve_aniso_shifted(
    grid: &Grid,
    eps: &EpsField,
    shift: &[f64],
    b: &[f64],
    opts: &SolverOptions,
) -> Result<CellField> {
    let mut x = vec![0.0; grid.cells()];
    let bnorm = par::dot(b, b).sqrt();
    if bnorm == 0.0 {
        return Ok(x);
    }
    let pre = SymmetricRelaxation::new(grid, eps.eps_perp, BoundaryKind::Dirichlet0, PRECOND_SWEEPS).shifted(shift);
    pcg(
        "shifted Poisson",
        |v, out| {
            apply_aniso_into(grid, eps, v, out);
            for k in 0..out.len() {
                out[k] += shift[k] * v[k];
            }
        },
        |r, z| pre.apply(r, z),
        b,
        &mut x,
        opts.tol * bnorm,
        opts.max_iter,
        false,
        |_| {},
    )?;
    Ok(x)
}

/// Solves [(I − τΔ) ⊗ I₂ + K]x = b for a two-component cell field with
/// Neumann walls, K a cellwise symmetric positive semidefinite 2×2 block.
/// Vectors hold the first component followed by the second.
pub(crate) fn solve_coupled_helmholtz(
    grid: &Grid,
    tau: f64,
    block: &[Mat2],
    b: &[f64],
    guess: &[f64],
    opts: &SolverOptions,
) -> Result<Vec<f64>> {
    let n = grid.cells();
    let mut x = guess.to_vec();
    let bnorm = par::dot(b, b).sqrt();
    if bnorm == 0.0 {
        return Ok(vec![0.0; 2 * n]);
    }
    let shift1: Vec<f64> = block.iter().map(|k| 1.0 + k[(0, 0)]).collect();
    let shift2: Vec<f64> = block.iter().map(|k| 1.0 + k[(1, 1)]).collect();
    let pre1 = SymmetricRelaxation::new(grid, tau, BoundaryKind::Neumann0, PRECOND_SWEEPS).shifted(&shift1);
    let pre2 = SymmetricRelaxation::new(grid, tau, BoundaryKind::Neumann0, PRECOND_SWEEPS).shifted(&shift2);
    pcg(
        "coupled Helmholtz",
        |v, out| {
            let (v1, v2) = v.split_at(n);
            let (l1, l2) = (grid.laplacian_cc(v1, BoundaryKind::Neumann0), grid.laplacian_cc(v2, BoundaryKind::Neumann0));
            for k in 0..n {
                let m = block[k];
                out[k] = v1[k] - tau * l1[k] + m[(0, 0)] * v1[k] + m[(0, 1)] * v2[k];
                out[n + k] = v2[k] - tau * l2[k] + m[(1, 0)] * v1[k] + m[(1, 1)] * v2[k];
            }
        },
        |r, z| {
            let (z1, z2) = z.split_at_mut(n);
            pre1.apply(&r[..n], z1);
            pre2.apply(&r[n..], z2);
        },
        b,
        &mut x,
        opts.tol * bnorm,
        opts.max_iter,
        false,
        |_| {},
    )?;
    Ok(x)
}

/// −Δπ with homogeneous Neumann walls.
fn apply_neg_neumann_laplacian(grid: &Grid, x: &[f64], out: &mut [f64]) {
    let l = grid.laplacian_cc(x, BoundaryKind::Neumann0);
    for (o, v) in out.iter_mut().zip(l) {
        *o = -v;
    }
}

/// Solves Δπ = rhs − mean(rhs) with ∂_ν π = 0. The residual target is
/// ‖r‖₂ ≤ `threshold`; the result has zero mean.
pub(crate) fn solve_neumann_threshold(
    grid: &Grid,
    rhs: &[f64],
    threshold: f64,
    max_iter: usize,
    guess: Option<&[f64]>,
) -> Result<(CellField, SolveStats)> {
    let mut b: Vec<f64> = rhs.iter().map(|v| -v).collect();
    remove_mean(&mut b);
    let mut x = guess.map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; grid.cells()]);
    remove_mean(&mut x);
    let pre = SymmetricRelaxation::new(grid, 1.0, BoundaryKind::Neumann0, PRECOND_SWEEPS);
    let stats = pcg(
        "pressure Poisson",
        |v, out| apply_neg_neumann_laplacian(grid, v, out),
        |r, z| pre.apply(r, z),
        &b,
        &mut x,
        threshold,
        max_iter,
        true,
        |_| {},
    )?;
    remove_mean(&mut x);
    Ok((x, stats))
}

/// Solves Δπ = rhs with ∂_ν π = 0 after removing the mean of `rhs`; returns the zero-mean solution.
pub fn solve_pressure_neumann(grid: &Grid, rhs: &[f64], opts: &SolverOptions) -> Result<(CellField, SolveStats)> {
    let mut b = rhs.to_vec();
    remove_mean(&mut b);
    let bnorm = par::dot(&b, &b).sqrt();
    if bnorm == 0.0 {
        return Ok((vec![0.0; grid.cells()], SolveStats { iterations: 0, residual: 0.0 }));
    }
    solve_neumann_threshold(grid, &b, opts.tol * bnorm, opts.max_iter, None)
}

/// Cellwise ∇Φ: central differences, second-order one-sided in wall cells.
pub fn efield(grid: &Grid, phi: &[f64]) -> (CellField, CellField) {
    grid.cell_gradient_interior(phi)
}

/// Cellwise field tensor M ≈ ∇Φ⊗∇Φ with ⟨−div(ε∇Φ), Φ⟩ = Σ_cells ε:M·|cell| exactly.
pub fn field_tensor(grid: &Grid, phi: &[f64]) -> Vec<Mat2> {
    grid.gradient_tensor(phi, BoundaryKind::Dirichlet0)
}

/// ½Σ ε:M·|cell|, the electrostatic energy in the cellwise form.
pub fn electric_energy(grid: &Grid, eps: &EpsField, field: &[Mat2]) -> f64 {
    let terms: Vec<f64> = (0..grid.cells())
        .map(|k| {
            let (e, m) = (eps.tensor(k), field[k]);
            e[(0, 0)] * m[(0, 0)] + 2.0 * e[(0, 1)] * m[(0, 1)] + e[(1, 1)] * m[(1, 1)]
        })
        .collect();
    0.5 * grid.integrate(&terms)
}

/// Discrete ⟨ε∇Φ, ∇Φ⟩, equal to ⟨−div(ε∇Φ), Φ⟩.
pub fn energy_norm_sq(grid: &Grid, eps: &EpsField, phi: &[f64]) -> f64 {
    grid.inner(&apply_aniso(grid, eps, phi), phi)
}
