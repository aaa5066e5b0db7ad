//! Equilibria: Boltzmann-distributed ions in a self-consistent potential with
//! a director balancing elastic and dielectric torques, and the pressure that
//! holds them at rest.

use crate::director::{elastic_terms, molecular_field, DirectorField, Kinematics};
use crate::error::{Error, Result};
use crate::flow::ericksen_stress;
use crate::grid::{BoundaryKind, CellField, Grid};
use crate::material::{Mat2, MaterialParams, Permittivity, Vec2};
use crate::nernst_planck::chemical_potential;
use crate::poisson::{apply_aniso, field_tensor, solve_aniso_shifted, solve_coupled_helmholtz, EpsField, SolverOptions};
use crate::sim::State;

/// How the Boltzmann prefactors Z_k are chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum Prefactors {
    Fixed(Vec<f64>),
    /// Z_k ∫ e^{−z_k Φ} = m_k, re-evaluated at every Newton iterate.
    Masses(Vec<f64>),
}

impl Prefactors {
    fn evaluate(&self, grid: &Grid, valences: &[f64], phi: &[f64]) -> Vec<f64> {
        match self {
            Self::Fixed(z) => z.clone(),
            Self::Masses(m) => valences
                .iter()
                .zip(m)
                .map(|(&z, &mass)| mass / grid.integrate(&phi.iter().map(|p| (-z * p).exp()).collect::<Vec<_>>()))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PbOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub linear: SolverOptions,
}

impl Default for PbOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 60, linear: SolverOptions { tol: 1e-10, max_iter: 5000 } }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PbSolution {
    pub phi: CellField,
    pub prefactors: Vec<f64>,
    /// Scaled residual norm after each Newton iterate, starting with the initial guess.
    pub history: Vec<f64>,
}

impl PbSolution {
    pub fn residual(&self) -> f64 {
        *self.history.last().unwrap_or(&0.0)
    }
}

/// Boltzmann densities Z_k e^{−z_kΦ}.
pub fn boltzmann_densities(valences: &[f64], prefactors: &[f64], phi: &[f64]) -> Vec<CellField> {
    valences.iter().zip(prefactors).map(|(&z, &zk)| phi.iter().map(|p| zk * (-z * p).exp()).collect()).collect()
}

struct PbResidual {
    f: CellField,
    prefactors: Vec<f64>,
    norm: f64,
}

fn pb_residual(
    grid: &Grid,
    eps: &EpsField,
    valences: &[f64],
    pref: &Prefactors,
    background: Option<&[f64]>,
    phi: &[f64],
) -> PbResidual {
    let prefactors = pref.evaluate(grid, valences, phi);
    let mut f = apply_aniso(grid, eps, phi);
    let mut weight = vec![0.0; grid.cells()];
    for (&z, &zk) in valences.iter().zip(&prefactors) {
        for k in 0..f.len() {
            let c = zk * (-z * phi[k]).exp();
            f[k] -= z * c;
            weight[k] += z.abs() * c;
        }
    }
    if let Some(b) = background {
        for k in 0..f.len() {
            f[k] -= b[k];
            weight[k] += b[k].abs();
        }
    }
    let scale = grid.l2(&weight).max(1.0);
    let norm = grid.l2(&f) / scale;
    PbResidual { f, prefactors, norm: if norm.is_finite() { norm } else { f64::INFINITY } }
}

/// Damped Newton iteration for −div(ε∇Φ) = Σ_k z_k Z_k e^{−z_kΦ} + ρ₀ with
/// Φ = 0 on the boundary. The residual, scaled by the total ionic density,
/// decreases monotonically.
pub fn solve_poisson_boltzmann(
    grid: &Grid,
    eps: &EpsField,
    valences: &[f64],
    pref: &Prefactors,
    background: Option<&[f64]>,
    guess: Option<&[f64]>,
    opts: &PbOptions,
) -> Result<PbSolution> {
    let mut phi = guess.map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; grid.cells()]);
    let mut res = pb_residual(grid, eps, valences, pref, background, &phi);
    let mut history = vec![res.norm];
    for _ in 0..opts.max_iter {
        if res.norm <= opts.tol {
            return Ok(PbSolution { phi, prefactors: res.prefactors, history });
        }
        let mut shift = vec![0.0; grid.cells()];
        for (&z, &zk) in valences.iter().zip(&res.prefactors) {
            for k in 0..shift.len() {
                shift[k] += z * z * zk * (-z * phi[k]).exp();
            }
        }
        let rhs: Vec<f64> = res.f.iter().map(|v| -v).collect();
        let delta = solve_aniso_shifted(grid, eps, &shift, &rhs, &opts.linear)?;
        let mut lambda = 1.0;
        let next = loop {
            let trial: Vec<f64> = phi.iter().zip(&delta).map(|(p, d)| p + lambda * d).collect();
            let r = pb_residual(grid, eps, valences, pref, background, &trial);
            if r.norm < (1.0 - 1e-4 * lambda) * res.norm {
                break Some((trial, r));
            }
            lambda *= 0.5;
            if lambda < 1e-8 {
                break None;
            }
        };
        let Some((trial, r)) = next else {
            return Err(Error::NoConvergence { solver: "Poisson–Boltzmann", iterations: history.len(), residual: res.norm });
        };
        phi = trial;
        res = r;
        history.push(res.norm);
    }
    if res.norm <= opts.tol {
        return Ok(PbSolution { phi, prefactors: res.prefactors, history });
    }
    Err(Error::NoConvergence { solver: "Poisson–Boltzmann", iterations: opts.max_iter, residual: res.norm })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectorRelaxOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Pseudo-time step.
    pub tau: f64,
    /// Anderson history length.
    pub depth: usize,
    /// Anderson mixing weight.
    pub mixing: f64,
}

impl Default for DirectorRelaxOptions {
    fn default() -> Self {
        Self { tol: 1e-9, max_iter: 5000, tau: 1.0, depth: 5, mixing: 0.5 }
    }
}

fn max_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max(x.hypot(*y)))
}

/// One pseudo-time step
/// [(I − τΔ) + τε_a(sI − M)]d̃ = (1 + τ|∇d|² + τε_a(s − d·Md))d, d ← d̃/|d̃|,
/// with s the extreme eigenvalue of M that makes ε_a(sI − M) positive
/// semidefinite. The right-hand side is parallel to d and chosen so that the
/// solutions of the equilibrium director equation are fixed points with d̃ = d.
fn implicit_director_step(grid: &Grid, field: &[Mat2], d: &DirectorField, eps_a: f64, tau: f64) -> Result<DirectorField> {
    let lin = SolverOptions { tol: 1e-13, max_iter: 20_000 };
    let n = grid.cells();
    let (_, _, grad_sq) = elastic_terms(grid, d);
    let mut block = Vec::with_capacity(n);
    let mut b = vec![0.0; 2 * n];
    for k in 0..n {
        let m = field[k];
        let eig = m.symmetric_eigenvalues();
        let s = if eps_a > 0.0 { eig.max() } else { eig.min() };
        block.push((Mat2::identity() * s - m) * (tau * eps_a));
        let dk = d.at(k);
        let scale = 1.0 + tau * grad_sq[k] + tau * eps_a * (s - dk.dot(&(m * dk)));
        b[k] = scale * dk.x;
        b[n + k] = scale * dk.y;
    }
    let x = solve_coupled_helmholtz(grid, tau, &block, &b, &flatten(d), &lin)?;
    unflatten(grid, &x)
}

fn flatten(d: &DirectorField) -> Vec<f64> {
    d.d1.iter().chain(&d.d2).copied().collect()
}

/// Normalised director from a flattened vector.
fn unflatten(grid: &Grid, x: &[f64]) -> Result<DirectorField> {
    let n = grid.cells();
    let d = DirectorField::new(x[..n].to_vec(), x[n..].to_vec());
    if let Some(k) = (0..n).find(|&k| !(d.at(k).norm() > 1e-8)) {
        return Err(Error::DirectorCollapse { i: k % grid.nx, j: k / grid.nx, len: d.at(k).norm() });
    }
    Ok(d.renormalized())
}

/// Anderson mixing for a fixed-point map x ↦ F(x) with mixing weight `beta`.
struct Anderson {
    depth: usize,
    beta: f64,
    xs: std::collections::VecDeque<Vec<f64>>,
    gs: std::collections::VecDeque<Vec<f64>>,
}

impl Anderson {
    fn new(depth: usize, beta: f64) -> Self {
        Self { depth, beta, xs: Default::default(), gs: Default::default() }
    }

    fn next(&mut self, x: Vec<f64>, fx: &[f64]) -> Vec<f64> {
        let g: Vec<f64> = fx.iter().zip(&x).map(|(f, x)| f - x).collect();
        self.xs.push_back(x);
        self.gs.push_back(g);
        if self.xs.len() > self.depth + 1 {
            self.xs.pop_front();
            self.gs.pop_front();
        }
        let m = self.xs.len() - 1;
        let (x, g) = (&self.xs[m], &self.gs[m]);
        let n = x.len();
        let mut out: Vec<f64> = (0..n).map(|k| x[k] + self.beta * g[k]).collect();
        if m == 0 {
            return out;
        }
        let dg = nalgebra::DMatrix::from_fn(n, m, |r, c| self.gs[c + 1][r] - self.gs[c][r]);
        let rhs = nalgebra::DVector::from_column_slice(g);
        let Ok(gamma) = dg.clone().svd(true, true).solve(&rhs, 1e-12) else {
            return out;
        };
        for c in 0..m {
            let w = gamma[c];
            for k in 0..n {
                let dx = self.xs[c + 1][k] - self.xs[c][k];
                let dgk = dg[(k, c)];
                out[k] -= w * (dx + self.beta * dgk);
            }
        }
        out
    }
}

/// Anderson-accelerated implicit director iteration. `potential` returns the
/// field tensor for a director (frozen, or re-solved) and a residual of its
/// own equation; iteration stops once that and the director residual are ≤ tol.
fn director_fixed_point(
    grid: &Grid,
    d0: &DirectorField,
    eps_a: f64,
    opts: &DirectorRelaxOptions,
    max_iter: usize,
    mut potential: impl FnMut(&DirectorField) -> Result<(Vec<Mat2>, f64)>,
) -> Result<(DirectorField, f64, f64, usize)> {
    let mut d = d0.renormalized();
    let mut acc = Anderson::new(opts.depth, opts.mixing);
    let mut last = (f64::INFINITY, f64::INFINITY);
    for it in 0..max_iter {
        let (field, pres) = potential(&d)?;
        let (h1, h2) = molecular_field(grid, &d, &field, eps_a);
        let dres = max_norm(&h1, &h2);
        last = (pres, dres);
        if pres <= opts.tol && dres <= opts.tol {
            return Ok((d, pres, dres, it));
        }
        let fd = implicit_director_step(grid, &field, &d, eps_a, opts.tau)?;
        d = unflatten(grid, &acc.next(flatten(&d), &flatten(&fd)))?;
    }
    Err(Error::NoConvergence { solver: "equilibrium director", iterations: max_iter, residual: last.0.max(last.1) })
}

/// Relaxes the director in a frozen potential (field tensor `field`) until
/// the equilibrium director equation holds to `opts.tol` in the max norm.
pub fn equilibrium_director(
    grid: &Grid,
    field: &[Mat2],
    d0: &DirectorField,
    eps_a: f64,
    opts: &DirectorRelaxOptions,
) -> Result<DirectorField> {
    let (d, ..) = director_fixed_point(grid, d0, eps_a, opts, opts.max_iter, |_| Ok((field.to_vec(), 0.0)))?;
    Ok(d)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub pb: PbOptions,
    pub director: DirectorRelaxOptions,
}

impl Default for EquilibriumOptions {
    fn default() -> Self {
        Self { tol: 1e-9, max_iter: 5000, pb: PbOptions::default(), director: DirectorRelaxOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumSolution {
    pub phi: CellField,
    pub director: DirectorField,
    pub prefactors: Vec<f64>,
    pub c: Vec<CellField>,
    pub pi: CellField,
    /// Scaled Poisson–Boltzmann residual.
    pub poisson_residual: f64,
    /// ‖Δd + |∇d|²d + ε_a P(d)(∇Φ⊗∇Φ)d‖_∞
    pub director_residual: f64,
    pub iterations: usize,
}

/// Alternates Newton solves for Φ (Z_k pinned by the species masses) with
/// implicit director steps in the frozen potential, under-relaxed and
/// Anderson-accelerated, until both residuals are below `opts.tol`.
pub fn solve_equilibrium(
    grid: &Grid,
    mat: &MaterialParams,
    d0: &DirectorField,
    opts: &EquilibriumOptions,
) -> Result<EquilibriumSolution> {
    let valences: Vec<f64> = mat.species.iter().map(|s| s.valence).collect();
    let pref = Prefactors::Masses(mat.species.iter().map(|s| s.mass).collect());
    let eps_a = mat.permittivity.eps_a;
    let pb_opts = PbOptions { tol: opts.tol, ..opts.pb };
    let dir_opts = DirectorRelaxOptions { tol: opts.tol, ..opts.director };
    let mut phi = vec![0.0; grid.cells()];
    let (d, pres, dres, it) = director_fixed_point(grid, d0, eps_a, &dir_opts, opts.max_iter, |d| {
        let eps = EpsField::from_director(grid, &d.d1, &d.d2, &mat.permittivity);
        let pb = solve_poisson_boltzmann(grid, &eps, &valences, &pref, None, Some(&phi), &pb_opts)?;
        phi = pb.phi;
        Ok((field_tensor(grid, &phi), pb.history.last().copied().unwrap_or(0.0)))
    })?;
    let prefactors = pref.evaluate(grid, &valences, &phi);
    let c = boltzmann_densities(&valences, &prefactors, &phi);
    let pi = reconstruct_pressure(grid, &c, &phi, &d, &mat.permittivity);
    Ok(EquilibriumSolution {
        phi,
        director: d,
        prefactors,
        c,
        pi,
        poisson_residual: pres,
        director_residual: dres,
        iterations: it,
    })
}

/// π = Σ_k c_k + ½(ε⊥|∇Φ|² + ε_a (d·∇Φ)² − |∇d|²), shifted to zero mean.
pub fn reconstruct_pressure(grid: &Grid, c: &[CellField], phi: &[f64], d: &DirectorField, perm: &Permittivity) -> CellField {
    let field = field_tensor(grid, phi);
    let er = ericksen_stress(grid, d);
    let mut pi: Vec<f64> = (0..grid.cells())
        .map(|k| {
            let dk = d.at(k);
            let ions: f64 = c.iter().map(|ck| ck[k]).sum();
            ions + 0.5 * (perm.eps_perp * field[k].trace() + perm.eps_a * dk.dot(&(field[k] * dk)) - er[k].trace())
        })
        .collect();
    let m = grid.mean(&pi);
    pi.iter_mut().for_each(|p| *p -= m);
    pi
}

/// Distances of a state from the equilibrium set, all in the area-weighted L² norm.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EquilibriumResidual {
    pub velocity: f64,
    /// max_k ‖∇μ_k‖ over interior faces
    pub grad_mu: f64,
    /// ‖d̊‖
    pub director_rate: f64,
    /// ‖Δd + |∇d|²d + ε_a P(d)(∇Φ⊗∇Φ)d‖
    pub director_equation: f64,
}

impl EquilibriumResidual {
    pub fn max(&self) -> f64 {
        self.velocity.max(self.grad_mu).max(self.director_rate).max(self.director_equation)
    }
}

pub fn equilibrium_residual(grid: &Grid, state: &State, mat: &MaterialParams) -> Result<EquilibriumResidual> {
    let a = grid.cell_area();
    let l2 = |f: &[f64]| (crate::par::sum_compensated(&f.iter().map(|x| x * x).collect::<Vec<_>>()) * a).sqrt();
    let velocity = l2(&state.flow.u).hypot(l2(&state.flow.v));
    let mut grad_mu: f64 = 0.0;
    for (ck, sp) in state.ion.c.iter().zip(&mat.species) {
        let mu = chemical_potential(grid, ck, &state.phi, sp.valence)?;
        let (gx, gy) = grid.grad_cc(&mu, BoundaryKind::NoFlux);
        grad_mu = grad_mu.max(l2(&gx).hypot(l2(&gy)));
    }
    let field = field_tensor(grid, &state.phi);
    let kin = Kinematics::new(grid, &state.flow.u, &state.flow.v);
    let rates = crate::director::director_rhs(
        grid,
        &state.director,
        &kin,
        &field,
        &crate::director::DirectorParams::from_material(mat),
    )?;
    let (h1, h2) = molecular_field(grid, &state.director, &field, mat.permittivity.eps_a);
    Ok(EquilibriumResidual {
        velocity,
        grad_mu,
        director_rate: l2(&rates.ring1).hypot(l2(&rates.ring2)),
        director_equation: l2(&h1).hypot(l2(&h2)),
    })
}

/// ‖∇_h π − f‖₂ over faces for the body force of a state at rest.
pub fn momentum_residual(grid: &Grid, eq: &EquilibriumSolution, mat: &MaterialParams) -> Result<f64> {
    let field = field_tensor(grid, &eq.phi);
    let kin = Kinematics::at_rest(grid);
    let rates = crate::director::director_rhs(
        grid,
        &eq.director,
        &kin,
        &field,
        &crate::director::DirectorParams::from_material(mat),
    )?;
    let (fx, fy) = crate::flow::body_force(grid, &eq.director, &kin, &rates, &field, mat);
    let (gx, gy) = grid.grad_cc(&eq.pi, BoundaryKind::Neumann0);
    let sq: Vec<f64> = gx.iter().zip(&fx).chain(gy.iter().zip(&fy)).map(|(g, f)| (g - f) * (g - f)).collect();
    Ok((crate::par::sum_compensated(&sq) * grid.cell_area()).sqrt())
}

/// Unit vector of the mean director.
pub fn mean_direction(grid: &Grid, d: &DirectorField) -> Vec2 {
    let v = Vec2::new(grid.mean(&d.d1), grid.mean(&d.d2));
    v / v.norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::material::{IonSpecies, LeslieCoefficients};
    use crate::poisson::solve_aniso_dirichlet;
    use std::f64::consts::PI;

    fn iso(g: &Grid) -> EpsField {
        EpsField::uniform(g, Mat2::identity(), 1.0)
    }

    #[test]
    fn neutral_species_give_zero_potential() {
        let g = Grid::unit_square(12);
        let s = solve_poisson_boltzmann(&g, &iso(&g), &[0.0], &Prefactors::Masses(vec![1.0]), None, None, &PbOptions::default()).unwrap();
        assert!(s.phi.iter().all(|&p| p == 0.0));
        assert!((s.prefactors[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn symmetric_binary_electrolyte_has_zero_potential() {
        let g = Grid::unit_square(12);
        let guess = g.sample_cells(|x, y| 0.3 * (PI * x).sin() * (PI * y).sin());
        let opts = PbOptions::default();
        let s = solve_poisson_boltzmann(&g, &iso(&g), &[1.0, -1.0], &Prefactors::Fixed(vec![0.7, 0.7]), None, Some(&guess), &opts)
            .unwrap();
        assert!(s.phi.iter().all(|p| p.abs() <= 1e-8), "{}", s.phi.iter().fold(0.0f64, |m, p| m.max(p.abs())));
        for w in s.history.windows(2) {
            assert!(w[1] < w[0]);
        }
    }

    #[test]
    fn weak_forcing_matches_the_linearised_problem() {
        let g = Grid::unit_square(32);
        let amp = 1e-3;
        let rho0 = g.sample_cells(|x, y| amp * (PI * x).sin() * (PI * y).sin());
        let s = solve_poisson_boltzmann(&g, &iso(&g), &[1.0, -1.0], &Prefactors::Fixed(vec![1.0, 1.0]), Some(&rho0), None, &PbOptions::default())
            .unwrap();
        // (−Δ + 2)Φ = ρ₀ through the shifted linear solver
        let lin = solve_aniso_shifted(&g, &iso(&g), &vec![2.0; g.cells()], &rho0, &SolverOptions::default()).unwrap();
        let diff: Vec<f64> = s.phi.iter().zip(&lin).map(|(a, b)| a - b).collect();
        assert!(g.l2(&diff) <= 0.05 * g.l2(&lin));
        // and against the unshifted solve plus the analytic eigenvalue ratio
        let (p0, _) = solve_aniso_dirichlet(&g, &iso(&g), &rho0, &SolverOptions::default(), None).unwrap();
        let ratio = g.l2(&lin) / g.l2(&p0);
        assert!((ratio - 2.0 * PI * PI / (2.0 * PI * PI + 2.0)).abs() < 0.01);
    }

    #[test]
    fn newton_residuals_decrease_monotonically() {
        let g = Grid::unit_square(24);
        let d = DirectorField::from_angle(&g.sample_cells(|x, y| 0.5 + x * y));
        let eps = EpsField::from_director(&g, &d.d1, &d.d2, &Permittivity::new(1.0, 2.0).unwrap());
        let rho0 = g.sample_cells(|x, y| 40.0 * (PI * x).sin() * (2.0 * PI * y).sin());
        let s = solve_poisson_boltzmann(&g, &eps, &[1.0, -2.0], &Prefactors::Masses(vec![1.0, 0.5]), Some(&rho0), None, &PbOptions::default())
            .unwrap();
        assert!(s.history.len() > 2);
        for w in s.history.windows(2) {
            assert!(w[1] < w[0], "{:?}", s.history);
        }
        // mass normalisation
        let c = boltzmann_densities(&[1.0, -2.0], &s.prefactors, &s.phi);
        assert!((g.integrate(&c[0]) - 1.0).abs() < 1e-12 && (g.integrate(&c[1]) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn director_without_field_relaxes_to_a_constant() {
        let g = Grid::unit_square(16);
        let zero = vec![Mat2::zeros(); g.cells()];
        let uniform = DirectorField::uniform(&g, Vec2::new(0.6, 0.8));
        let same = equilibrium_director(&g, &zero, &uniform, 0.0, &DirectorRelaxOptions::default()).unwrap();
        assert_eq!(same, uniform);

        let d0 = DirectorField::from_angle(&g.sample_cells(|x, y| 0.3 + 0.4 * (PI * x).cos() * (PI * y).cos()));
        let d = equilibrium_director(&g, &zero, &d0, 0.0, &DirectorRelaxOptions::default()).unwrap();
        let m = mean_direction(&g, &d);
        let dev = (0..g.cells()).fold(0.0f64, |a, k| a.max((d.at(k) - m).norm()));
        assert!(dev <= 1e-6, "{dev}");
    }

    #[test]
    fn strong_field_aligns_the_director() {
        let g = Grid::unit_square(16);
        let e = 5.0;
        let field = vec![Mat2::new(e * e, 0.0, 0.0, 0.0); g.cells()];
        let d0 = DirectorField::from_angle(&g.sample_cells(|x, y| 0.6 + 0.2 * x * y));
        let opts = DirectorRelaxOptions { tol: 1e-8, ..Default::default() };
        let d = equilibrium_director(&g, &field, &d0, 1.0, &opts).unwrap();
        for k in 0..g.cells() {
            assert!(d.d2[k].abs() <= 1e-8 && d.d1[k].abs() > 0.999);
        }
    }

    fn material(eps_a: f64) -> MaterialParams {
        MaterialParams {
            leslie: LeslieCoefficients::new([0.1, -0.8, 0.1, 1.0, 1.0, 0.3]),
            species: vec![IonSpecies::scalar(1.0, 1.0, 1.0).unwrap(), IonSpecies::scalar(-1.0, 1.0, 0.5).unwrap()],
            permittivity: Permittivity::new(1.0, eps_a).unwrap(),
        }
    }

    #[test]
    fn trivial_equilibrium_has_flat_pressure() {
        let g = Grid::unit_square(10);
        let mut mat = material(0.0);
        mat.species[1] = IonSpecies::scalar(-1.0, 1.0, 1.0).unwrap();
        let d0 = DirectorField::uniform(&g, Vec2::new(1.0, 0.0));
        let eq = solve_equilibrium(&g, &mat, &d0, &EquilibriumOptions::default()).unwrap();
        assert!(eq.phi.iter().all(|p| p.abs() < 1e-9));
        assert!(eq.pi.iter().all(|p| p.abs() < 1e-9));
    }

    #[test]
    fn coupled_equilibrium_satisfies_both_equations() {
        let g = Grid::unit_square(24);
        let mat = material(1.5);
        let d0 = DirectorField::from_angle(&g.sample_cells(|x, y| 0.4 + 0.3 * (PI * x).cos() * (PI * y).cos()));
        let eq = solve_equilibrium(&g, &mat, &d0, &EquilibriumOptions::default()).unwrap();
        assert!(eq.poisson_residual <= 1e-9 && eq.director_residual <= 1e-9);
        assert!(g.mean(&eq.pi).abs() < 1e-13);
        assert!(eq.phi.iter().any(|p| p.abs() > 1e-3));
        for (ck, sp) in eq.c.iter().zip(&mat.species) {
            assert!((g.integrate(ck) - sp.mass).abs() < 1e-12);
        }
    }

    #[test]
    fn pressure_balance_residual_converges() {
        let mat = material(1.5);
        let run = |n: usize| {
            let g = Grid::unit_square(n);
            let d0 = DirectorField::from_angle(&g.sample_cells(|x, y| 0.4 + 0.3 * (PI * x).cos() * (PI * y).cos()));
            let eq = solve_equilibrium(&g, &mat, &d0, &EquilibriumOptions::default()).unwrap();
            momentum_residual(&g, &eq, &mat).unwrap()
        };
        // Φ = 0 on both walls while ρ(0) ≠ 0 makes the corners singular, so
        // coarse grids sit below second order; the acceptance suite checks 32..128.
        let (a, b) = (run(16), run(32));
        let order = (a / b).log2();
        assert!(order >= 1.5, "{a} {b} {order}");
    }
}
