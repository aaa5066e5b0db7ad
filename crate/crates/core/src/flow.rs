//! Incompressible momentum balance on the staggered grid: stresses, body
//! force, implicit viscosity and pressure projection.

use crate::director::{DirectorField, DirectorRates, Kinematics};
use crate::error::Result;
use crate::grid::{BoundaryKind, CellField, FaceFieldX, FaceFieldY, Grid};
use crate::material::{epsilon_tensor, leslie_stress_unchecked, Mat2, MaterialParams, Permittivity, Vec2};
use crate::par;
use crate::poisson::{pcg, solve_neumann_threshold, SolverOptions};

/// Wall condition for the tangential velocity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WallMode {
    #[default]
    NoSlip,
    /// Zero tangential stress; used to check viscous decay against Fourier modes.
    FreeSlip,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub u: FaceFieldX,
    pub v: FaceFieldY,
    /// Zero-mean pressure of the last projection.
    pub pi: CellField,
    /// ‖div v‖_∞
    pub div_inf: f64,
}

impl FlowState {
    pub fn at_rest(grid: &Grid) -> Self {
        Self { u: vec![0.0; grid.xfaces()], v: vec![0.0; grid.yfaces()], pi: vec![0.0; grid.cells()], div_inf: 0.0 }
    }

    /// Velocity given on faces; wall-normal components are zeroed.
    pub fn new(grid: &Grid, mut u: FaceFieldX, mut v: FaceFieldY) -> Self {
        zero_walls(grid, &mut u, &mut v);
        let div_inf = divergence_inf(grid, &u, &v);
        Self { u, v, pi: vec![0.0; grid.cells()], div_inf }
    }

    pub fn max_speed(&self) -> f64 {
        self.u.iter().chain(&self.v).fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn kinetic_energy(&self, grid: &Grid) -> f64 {
        let sq = |f: &[f64]| par::sum_compensated(&f.iter().map(|x| x * x).collect::<Vec<_>>());
        0.5 * (sq(&self.u) + sq(&self.v)) * grid.cell_area()
    }
}

fn zero_walls(grid: &Grid, u: &mut [f64], v: &mut [f64]) {
    let (nx, ny) = (grid.nx, grid.ny);
    for j in 0..ny {
        u[j * (nx + 1)] = 0.0;
        u[j * (nx + 1) + nx] = 0.0;
    }
    for i in 0..nx {
        v[i] = 0.0;
        v[ny * nx + i] = 0.0;
    }
}

pub fn divergence_inf(grid: &Grid, u: &[f64], v: &[f64]) -> f64 {
    grid.div_fc(u, v).iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Cellwise ∇d⊙∇d, [∇d⊙∇d]_ij = ∂_i d·∂_j d, from the face differences of d.
/// Its trace is the |∇d|² of the director equation.
pub fn ericksen_stress(grid: &Grid, d: &DirectorField) -> Vec<Mat2> {
    let a = grid.gradient_tensor(&d.d1, BoundaryKind::Neumann0);
    let b = grid.gradient_tensor(&d.d2, BoundaryKind::Neumann0);
    a.into_iter().zip(b).map(|(x, y)| x + y).collect()
}

/// (∇Φ⊗∇Φ)ε(d) from the cellwise field tensor. Not symmetric in general.
pub fn electric_stress(field: &[Mat2], d: &DirectorField, perm: &Permittivity) -> Vec<Mat2> {
    (0..field.len()).map(|k| field[k] * epsilon_tensor(&d.at(k), perm)).collect()
}

/// Leslie stress without its α4 D(v) part, which is treated implicitly.
pub fn leslie_explicit_stress(
    d: &DirectorField,
    kin: &Kinematics,
    rates: &DirectorRates,
    mat: &MaterialParams,
) -> Vec<Mat2> {
    let a4 = mat.leslie.alpha(4);
    (0..d.d1.len())
        .map(|k| {
            let dv = kin.grad.strain(k);
            let ring = Vec2::new(rates.ring1[k], rates.ring2[k]);
            leslie_stress_unchecked(&mat.leslie, &dv, &d.at(k), &ring) - dv * a4
        })
        .collect()
}

/// Row-wise divergence (div σ)_i = ∂_j σ_ij sampled on interior faces; the
/// wall-normal faces carry zero. Tangential derivatives are second order up
/// to the walls.
pub fn stress_divergence(grid: &Grid, sigma: &[Mat2]) -> (FaceFieldX, FaceFieldY) {
    let (s12, s21) = off_diagonals(sigma);
    let (_, dy_s12) = grid.cell_gradient_interior(&s12);
    let (dx_s21, _) = grid.cell_gradient_interior(&s21);
    assemble_divergence(grid, sigma, &dy_s12, &dx_s21)
}

/// Divergence whose pairing with the velocity reproduces −∫σ:∇v exactly for
/// the no-slip cellwise gradient of [`Grid::velocity_gradient`], so the power of the
/// Leslie stress matches its dissipation. Tangential derivatives mirror σ
/// across the walls, which is only first order there.
pub fn leslie_divergence(grid: &Grid, sigma: &[Mat2]) -> (FaceFieldX, FaceFieldY) {
    let (s12, s21) = off_diagonals(sigma);
    let (_, dy_s12) = grid.cell_gradient(&s12, BoundaryKind::Neumann0);
    let (dx_s21, _) = grid.cell_gradient(&s21, BoundaryKind::Neumann0);
    assemble_divergence(grid, sigma, &dy_s12, &dx_s21)
}

fn off_diagonals(sigma: &[Mat2]) -> (CellField, CellField) {
    (sigma.iter().map(|s| s[(0, 1)]).collect(), sigma.iter().map(|s| s[(1, 0)]).collect())
}

fn assemble_divergence(grid: &Grid, sigma: &[Mat2], dy_s12: &[f64], dx_s21: &[f64]) -> (FaceFieldX, FaceFieldY) {
    let (nx, ny, hx, hy) = (grid.nx, grid.ny, grid.hx, grid.hy);
    let mut fx = vec![0.0; grid.xfaces()];
    par::rows_mut(&mut fx, nx + 1, |j, row| {
        for i in 1..nx {
            let (l, r) = (j * nx + i - 1, j * nx + i);
            row[i] = (sigma[r][(0, 0)] - sigma[l][(0, 0)]) / hx + 0.5 * (dy_s12[l] + dy_s12[r]);
        }
    });
    let mut fy = vec![0.0; grid.yfaces()];
    par::rows_mut(&mut fy, nx, |j, row| {
        if j == 0 || j == ny {
            return;
        }
        for i in 0..nx {
            let (s, n) = ((j - 1) * nx + i, j * nx + i);
            row[i] = 0.5 * (dx_s21[s] + dx_s21[n]) + (sigma[n][(1, 1)] - sigma[s][(1, 1)]) / hy;
        }
    });
    (fx, fy)
}

/// f = −div(∇d⊙∇d) + div σ_L (without α4 D) + div((∇Φ⊗∇Φ)ε(d)).
pub fn body_force(
    grid: &Grid,
    d: &DirectorField,
    kin: &Kinematics,
    rates: &DirectorRates,
    field: &[Mat2],
    mat: &MaterialParams,
) -> (FaceFieldX, FaceFieldY) {
    let er = ericksen_stress(grid, d);
    let el = electric_stress(field, d, &mat.permittivity);
    let reactive: Vec<Mat2> = (0..grid.cells()).map(|k| el[k] - er[k]).collect();
    let (mut fx, mut fy) = stress_divergence(grid, &reactive);
    let (lx, ly) = leslie_divergence(grid, &leslie_explicit_stress(d, kin, rates, mat));
    fx.iter_mut().zip(&lx).for_each(|(f, l)| *f += l);
    fy.iter_mut().zip(&ly).for_each(|(f, l)| *f += l);
    (fx, fy)
}

/// Conservative div(v⊗v) with upwind face interpolation, on interior faces.
pub fn advection(grid: &Grid, u: &[f64], v: &[f64]) -> (FaceFieldX, FaceFieldY) {
    let (nx, ny, hx, hy) = (grid.nx, grid.ny, grid.hx, grid.hy);
    let up = |vel: f64, a: f64, b: f64| vel * if vel > 0.0 { a } else { b };
    let ux = |i: usize, j: usize| u[j * (nx + 1) + i];
    let vy = |i: usize, j: usize| v[j * nx + i];
    let mut au = vec![0.0; grid.xfaces()];
    par::rows_mut(&mut au, nx + 1, |j, row| {
        // uu at cell centres, vu at the corners (i, j) and (i, j+1)
        let cell = |i: usize| up(0.5 * (ux(i, j) + ux(i + 1, j)), ux(i, j), ux(i + 1, j));
        let corner = |i: usize, jn: usize| {
            if jn == 0 || jn == ny {
                return 0.0;
            }
            up(0.5 * (vy(i - 1, jn) + vy(i, jn)), ux(i, jn - 1), ux(i, jn))
        };
        for i in 1..nx {
            row[i] = (cell(i) - cell(i - 1)) / hx + (corner(i, j + 1) - corner(i, j)) / hy;
        }
    });
    let mut av = vec![0.0; grid.yfaces()];
    par::rows_mut(&mut av, nx, |j, row| {
        if j == 0 || j == ny {
            return;
        }
        let cell = |jc: usize, i: usize| up(0.5 * (vy(i, jc) + vy(i, jc + 1)), vy(i, jc), vy(i, jc + 1));
        let corner = |in_: usize| {
            if in_ == 0 || in_ == nx {
                return 0.0;
            }
            up(0.5 * (ux(in_, j - 1) + ux(in_, j)), vy(in_ - 1, j), vy(in_, j))
        };
        for i in 0..nx {
            row[i] = (corner(i + 1) - corner(i)) / hx + (cell(j, i) - cell(j - 1, i)) / hy;
        }
    });
    (au, av)
}

/// Face layout of one velocity component: `m` faces per row along the
/// component, `rows` rows, with walls normal to the component at both row ends.
struct Component {
    m: usize,
    rows: usize,
    h_along: f64,
    h_across: f64,
    /// y-faces: rows run along x, so consecutive faces of one row are nx apart
    transposed: bool,
}

impl Component {
    fn index(&self, a: usize, r: usize, nx: usize) -> usize {
        if self.transposed {
            a * nx + r
        } else {
            r * self.m + a
        }
    }
}

/// (I − νΔ_h) on one velocity component; wall-normal faces are identity rows.
fn apply_viscous(comp: &Component, nx: usize, nu: f64, mode: WallMode, x: &[f64], out: &mut [f64]) {
    let (aa, ac) = (nu / (comp.h_along * comp.h_along), nu / (comp.h_across * comp.h_across));
    let ghost = match mode {
        WallMode::NoSlip => -1.0,
        WallMode::FreeSlip => 1.0,
    };
    for r in 0..comp.rows {
        for a in 0..comp.m {
            let k = comp.index(a, r, nx);
            if a == 0 || a + 1 == comp.m {
                out[k] = x[k];
                continue;
            }
            let c = x[k];
            let w = if a > 1 { x[comp.index(a - 1, r, nx)] } else { 0.0 };
            let e = if a + 2 < comp.m { x[comp.index(a + 1, r, nx)] } else { 0.0 };
            let s = if r > 0 { x[comp.index(a, r - 1, nx)] } else { ghost * c };
            let n = if r + 1 < comp.rows { x[comp.index(a, r + 1, nx)] } else { ghost * c };
            out[k] = c - aa * (w - 2.0 * c + e) - ac * (s - 2.0 * c + n);
        }
    }
}

#[cfg(test)]
fn viscous_diag(comp: &Component, nx: usize, nu: f64, mode: WallMode) -> Vec<f64> {
    let n = comp.m * comp.rows;
    let mut e = vec![0.0; n];
    let mut out = vec![0.0; n];
    let mut diag = vec![1.0; n];
    for k in 0..n {
        e[k] = 1.0;
        apply_viscous(comp, nx, nu, mode, &e, &mut out);
        diag[k] = out[k];
        e[k] = 0.0;
    }
    diag
}

fn components(grid: &Grid) -> (Component, Component) {
    let cu = Component { m: grid.nx + 1, rows: grid.ny, h_along: grid.hx, h_across: grid.hy, transposed: false };
    let cv = Component { m: grid.ny + 1, rows: grid.nx, h_along: grid.hy, h_across: grid.hx, transposed: true };
    (cu, cv)
}

/// Backward-Euler viscous step: solves (I − ν·dt·Δ_h)ṽ = v for both components.
pub fn viscous_solve(
    grid: &Grid,
    u: &[f64],
    v: &[f64],
    nu_dt: f64,
    mode: WallMode,
    opts: &SolverOptions,
) -> Result<(FaceFieldX, FaceFieldY)> {
    let (cu, cv) = components(grid);
    let solve = |comp: &Component, b: &[f64]| -> Result<Vec<f64>> {
        let bnorm = par::dot(b, b).sqrt();
        let mut x = b.to_vec();
        if bnorm == 0.0 || nu_dt == 0.0 {
            return Ok(x);
        }
        let diag = jacobi(grid, comp, nu_dt, mode);
        pcg(
            "viscous",
            |p, out| apply_viscous(comp, grid.nx, nu_dt, mode, p, out),
            |r, z| {
                for k in 0..r.len() {
                    z[k] = r[k] / diag[k];
                }
            },
            b,
            &mut x,
            opts.tol * bnorm,
            opts.max_iter,
            false,
            |_| {},
        )?;
        Ok(x)
    };
    Ok((solve(&cu, u)?, solve(&cv, v)?))
}

fn jacobi(grid: &Grid, comp: &Component, nu: f64, mode: WallMode) -> Vec<f64> {
    // closed form of the diagonal; `viscous_diag` is the slow reference
    let (aa, ac) = (nu / (comp.h_along * comp.h_along), nu / (comp.h_across * comp.h_across));
    let wall = match mode {
        WallMode::NoSlip => 1.0,
        WallMode::FreeSlip => -1.0,
    };
    let mut diag = vec![1.0; comp.m * comp.rows];
    for r in 0..comp.rows {
        for a in 1..comp.m - 1 {
            let mut d = 1.0 + 2.0 * aa + 2.0 * ac;
            if r == 0 {
                d += wall * ac;
            }
            if r + 1 == comp.rows {
                d += wall * ac;
            }
            diag[comp.index(a, r, grid.nx)] = d;
        }
    }
    diag
}

/// Projects (u, v) onto discretely divergence-free fields with zero normal
/// wall velocity. Returns the corrected velocity and the potential q with
/// v ← v − ∇_h q.
pub fn project(grid: &Grid, u: &[f64], v: &[f64], opts: &SolverOptions) -> Result<(FaceFieldX, FaceFieldY, CellField)> {
    let (mut u, mut v) = (u.to_vec(), v.to_vec());
    zero_walls(grid, &mut u, &mut v);
    let div = grid.div_fc(&u, &v);
    let bnorm = par::dot(&div, &div).sqrt();
    if bnorm == 0.0 {
        return Ok((u, v, vec![0.0; grid.cells()]));
    }
    let (q, _) = solve_neumann_threshold(grid, &div, opts.tol * bnorm.min(1.0), opts.max_iter, None)?;
    let (gx, gy) = grid.grad_cc(&q, BoundaryKind::Neumann0);
    for (a, g) in u.iter_mut().zip(&gx) {
        *a -= g;
    }
    for (a, g) in v.iter_mut().zip(&gy) {
        *a -= g;
    }
    Ok((u, v, q))
}

/// One step: implicit viscosity with ν = α4/2, explicit advection and body
/// force, then projection. The pressure absorbs the gradient part of `force`.
pub fn ns_step(
    grid: &Grid,
    flow: &FlowState,
    force: (&[f64], &[f64]),
    dt: f64,
    alpha4: f64,
    mode: WallMode,
    opts: &SolverOptions,
) -> Result<FlowState> {
    let (mut u, mut v) = viscous_solve(grid, &flow.u, &flow.v, 0.5 * alpha4 * dt, mode, opts)?;
    let (au, av) = advection(grid, &flow.u, &flow.v);
    for k in 0..u.len() {
        u[k] += dt * (force.0[k] - au[k]);
    }
    for k in 0..v.len() {
        v[k] += dt * (force.1[k] - av[k]);
    }
    let (u, v, q) = project(grid, &u, &v, opts)?;
    let div_inf = divergence_inf(grid, &u, &v);
    Ok(FlowState { u, v, pi: q.iter().map(|x| x / dt).collect(), div_inf })
}
