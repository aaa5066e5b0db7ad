//! Conservative drift–diffusion–advection update of the ion concentrations.

use crate::error::{Error, Result};
use crate::grid::{BoundaryKind, CellField, FaceFieldX, FaceFieldY, Grid};
use crate::material::IonSpecies;
use crate::par;
use crate::poisson::efield;

#[derive(Debug, Clone, PartialEq)]
pub struct IonState {
    pub c: Vec<CellField>,
    /// Total amount of each species at t = 0.
    pub masses: Vec<f64>,
}

impl IonState {
    /// Wraps initial concentrations and records their masses.
    pub fn new(grid: &Grid, c: Vec<CellField>) -> Self {
        let masses = c.iter().map(|ck| grid.integrate(ck)).collect();
        Self { c, masses }
    }

    pub fn current_masses(&self, grid: &Grid) -> Vec<f64> {
        self.c.iter().map(|ck| grid.integrate(ck)).collect()
    }

    pub fn min_concentration(&self) -> f64 {
        self.c.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    }

    /// Charge density Σ z_k c_k.
    pub fn charge(&self, species: &[IonSpecies]) -> CellField {
        let n = self.c.first().map_or(0, Vec::len);
        let mut rho = vec![0.0; n];
        for (ck, sp) in self.c.iter().zip(species) {
            for (r, c) in rho.iter_mut().zip(ck) {
                *r += sp.valence * c;
            }
        }
        rho
    }
}

/// B(x) = x / (eˣ − 1), the exponential-fitting weight.
#[inline]
pub fn bernoulli(x: f64) -> f64 {
    if x.abs() < 1e-6 {
        1.0 - 0.5 * x + x * x / 12.0
    } else {
        x / x.exp_m1()
    }
}

/// μ = ln c + zΦ.
pub fn chemical_potential(grid: &Grid, c: &[f64], phi: &[f64], z: f64) -> Result<CellField> {
    if let Some(k) = c.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::NonPositiveConcentration { i: k % grid.nx, j: k / grid.nx, value: c[k] });
    }
    Ok(c.iter().zip(phi).map(|(c, p)| c.ln() + z * p).collect())
}

/// Face flux J = D(∇c + z c ∇Φ). Diagonal diffusivities use the
/// Scharfetter–Gummel two-point flux; off-diagonal entries use centred averages
/// of cell gradients. Wall faces carry zero flux.
pub fn np_face_flux(grid: &Grid, c: &[f64], phi: &[f64], sp: &IonSpecies) -> (FaceFieldX, FaceFieldY) {
    let (nx, ny, hx, hy) = (grid.nx, grid.ny, grid.hx, grid.hy);
    let z = sp.valence;
    let (d11, d12, d22) = (sp.diffusion[(0, 0)], sp.diffusion[(0, 1)], sp.diffusion[(1, 1)]);
    let (mut tx, mut ty) = (vec![0.0; grid.cells()], vec![0.0; grid.cells()]);
    if d12 != 0.0 {
        let (cx, cy) = grid.cell_gradient_interior(c);
        let (ex, ey) = efield(grid, phi);
        for k in 0..grid.cells() {
            // tangential parts: the x-face flux needs the y-gradient and vice versa
            tx[k] = d12 * (cy[k] + z * c[k] * ey[k]);
            ty[k] = d12 * (cx[k] + z * c[k] * ex[k]);
        }
    }
    let mut jx = vec![0.0; grid.xfaces()];
    par::rows_mut(&mut jx, nx + 1, |j, row| {
        for i in 1..nx {
            let (l, r) = (j * nx + i - 1, j * nx + i);
            let delta = z * (phi[r] - phi[l]);
            row[i] = d11 / hx * (bernoulli(-delta) * c[r] - bernoulli(delta) * c[l]) + 0.5 * (tx[l] + tx[r]);
        }
    });
    let mut jy = vec![0.0; grid.yfaces()];
    par::rows_mut(&mut jy, nx, |j, row| {
        if j == 0 || j == ny {
            return;
        }
        for i in 0..nx {
            let (s, n) = ((j - 1) * nx + i, j * nx + i);
            let delta = z * (phi[n] - phi[s]);
            row[i] = d22 / hy * (bernoulli(-delta) * c[n] - bernoulli(delta) * c[s]) + 0.5 * (ty[s] + ty[n]);
        }
    });
    (jx, jy)
}

/// Upwind advective flux v·c on faces; wall faces are zero.
pub fn advective_flux(grid: &Grid, c: &[f64], u: &[f64], v: &[f64]) -> (FaceFieldX, FaceFieldY) {
    let (nx, ny) = (grid.nx, grid.ny);
    let mut fx = vec![0.0; grid.xfaces()];
    par::rows_mut(&mut fx, nx + 1, |j, row| {
        for i in 1..nx {
            let w = u[j * (nx + 1) + i];
            row[i] = w * if w > 0.0 { c[j * nx + i - 1] } else { c[j * nx + i] };
        }
    });
    let mut fy = vec![0.0; grid.yfaces()];
    par::rows_mut(&mut fy, nx, |j, row| {
        if j == 0 || j == ny {
            return;
        }
        for i in 0..nx {
            let w = v[j * nx + i];
            row[i] = w * if w > 0.0 { c[(j - 1) * nx + i] } else { c[j * nx + i] };
        }
    });
    (fx, fy)
}

/// Right-hand side div J − div(v c) for one species.
pub fn np_rate(grid: &Grid, c: &[f64], phi: &[f64], u: &[f64], v: &[f64], sp: &IonSpecies) -> CellField {
    let (jx, jy) = np_face_flux(grid, c, phi, sp);
    let (ax, ay) = advective_flux(grid, c, u, v);
    let fx: Vec<f64> = jx.iter().zip(&ax).map(|(j, a)| j - a).collect();
    let fy: Vec<f64> = jy.iter().zip(&ay).map(|(j, a)| j - a).collect();
    grid.div_fc(&fx, &fy)
}

/// Explicit Euler step of every species.
pub fn np_step(
    grid: &Grid,
    ion: &IonState,
    phi: &[f64],
    u: &[f64],
    v: &[f64],
    species: &[IonSpecies],
    dt: f64,
) -> Result<IonState> {
    let mut c = Vec::with_capacity(ion.c.len());
    for (k, (ck, sp)) in ion.c.iter().zip(species).enumerate() {
        let rate = np_rate(grid, ck, phi, u, v, sp);
        let next: Vec<f64> = ck.iter().zip(&rate).map(|(c, r)| c + dt * r).collect();
        if let Some(m) = next.iter().position(|&x| !(x > 0.0)) {
            return Err(Error::NegativeConcentration {
                species: k + 1,
                i: m % grid.nx,
                j: m / grid.nx,
                value: next[m],
                dt,
            });
        }
        c.push(next);
    }
    Ok(IonState { c, masses: ion.masses.clone() })
}

/// Largest explicit step keeping every concentration positive: the inverse
/// of the largest total outflow rate of a cell.
pub fn positivity_dt_limit(grid: &Grid, phi: &[f64], u: &[f64], v: &[f64], species: &[IonSpecies]) -> f64 {
    let (nx, ny, hx, hy) = (grid.nx, grid.ny, grid.hx, grid.hy);
    let mut worst: f64 = 0.0;
    for sp in species {
        let z = sp.valence;
        let (ax, ay) = (sp.diffusion[(0, 0)] / (hx * hx), sp.diffusion[(1, 1)] / (hy * hy));
        let cross = 2.0 * sp.diffusion[(0, 1)].abs() * (1.0 / (hx * hy));
        for j in 0..ny {
            for i in 0..nx {
                let k = grid.c(i, j);
                let mut rate = cross;
                if i + 1 < nx {
                    rate += ax * bernoulli(z * (phi[k + 1] - phi[k]));
                    rate += u[grid.fx(i + 1, j)].max(0.0) / hx;
                }
                if i > 0 {
                    rate += ax * bernoulli(z * (phi[k - 1] - phi[k]));
                    rate += (-u[grid.fx(i, j)]).max(0.0) / hx;
                }
                if j + 1 < ny {
                    rate += ay * bernoulli(z * (phi[k + nx] - phi[k]));
                    rate += v[grid.fy(i, j + 1)].max(0.0) / hy;
                }
                if j > 0 {
                    rate += ay * bernoulli(z * (phi[k - nx] - phi[k]));
                    rate += (-v[grid.fy(i, j)]).max(0.0) / hy;
                }
                worst = worst.max(rate);
            }
        }
    }
    if worst > 0.0 {
        1.0 / worst
    } else {
        f64::INFINITY
    }
}

/// Ionic dissipation. `weighted` is the discrete production Σ_k Σ_faces J·∇μ
/// (the D_k-weighted rate that the update actually dissipates); `alpha_bound`
/// is α Σ_k ∫ c |∇μ|² with α the smallest diffusivity eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IonicDissipation {
    pub weighted: f64,
    pub alpha_bound: f64,
}

pub fn ionic_dissipation(
    grid: &Grid,
    ion: &IonState,
    phi: &[f64],
    species: &[IonSpecies],
) -> Result<IonicDissipation> {
    let (nx, ny, hx, hy) = (grid.nx, grid.ny, grid.hx, grid.hy);
    let alpha = species.iter().map(IonSpecies::min_diffusivity).fold(f64::INFINITY, f64::min);
    let mut weighted = 0.0;
    let mut bound = 0.0;
    for (ck, sp) in ion.c.iter().zip(species) {
        let mu = chemical_potential(grid, ck, phi, sp.valence)?;
        let (jx, jy) = np_face_flux(grid, ck, phi, sp);
        for j in 0..ny {
            for i in 1..nx {
                let (l, r) = (grid.c(i - 1, j), grid.c(i, j));
                let g = (mu[r] - mu[l]) / hx;
                weighted += jx[grid.fx(i, j)] * g;
                bound += 0.5 * (ck[l] + ck[r]) * g * g;
            }
        }
        for j in 1..ny {
            for i in 0..nx {
                let (s, n) = (grid.c(i, j - 1), grid.c(i, j));
                let g = (mu[n] - mu[s]) / hy;
                weighted += jy[grid.fy(i, j)] * g;
                bound += 0.5 * (ck[s] + ck[n]) * g * g;
            }
        }
    }
    let a = grid.cell_area();
    Ok(IonicDissipation { weighted: weighted * a, alpha_bound: alpha * bound * a })
}

/// Largest face difference quotient of μ_k over all species (∞-norm of ∇μ).
pub fn max_potential_gradient(grid: &Grid, ion: &IonState, phi: &[f64], species: &[IonSpecies]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (ck, sp) in ion.c.iter().zip(species) {
        let mu = chemical_potential(grid, ck, phi, sp.valence)?;
        let (gx, gy) = grid.grad_cc(&mu, BoundaryKind::NoFlux);
        worst = gx.iter().chain(&gy).fold(worst, |m, g| m.max(g.abs()));
    }
    Ok(worst)
}
