//! Director dynamics γ1 d̊ + γ2 P(d)D(v)d = Δd + |∇d|²d + ε_a P(d)(∇Φ⊗∇Φ)d.

use crate::error::{Error, Result};
use crate::grid::{BoundaryKind, CellField, Grid, VelocityGradient, WallClosure};
use crate::material::{projector, Mat2, MaterialParams, Vec2};
use crate::par;

#[derive(Debug, Clone, PartialEq)]
pub struct DirectorField {
    pub d1: CellField,
    pub d2: CellField,
    /// max | |d| − 1 |
    pub max_len_dev: f64,
}

impl DirectorField {
    pub fn new(d1: CellField, d2: CellField) -> Self {
        let max_len_dev = length_deviation(&d1, &d2);
        Self { d1, d2, max_len_dev }
    }

    /// d = (cos θ, sin θ).
    pub fn from_angle(theta: &[f64]) -> Self {
        Self::new(theta.iter().map(|t| t.cos()).collect(), theta.iter().map(|t| t.sin()).collect())
    }

    pub fn uniform(grid: &Grid, d: Vec2) -> Self {
        Self::new(vec![d.x; grid.cells()], vec![d.y; grid.cells()])
    }

    #[inline]
    pub fn at(&self, k: usize) -> Vec2 {
        Vec2::new(self.d1[k], self.d2[k])
    }

    pub fn renormalized(&self) -> Self {
        let (mut d1, mut d2) = (self.d1.clone(), self.d2.clone());
        for k in 0..d1.len() {
            let n = d1[k].hypot(d2[k]);
            d1[k] /= n;
            d2[k] /= n;
        }
        Self::new(d1, d2)
    }
}

pub fn length_deviation(d1: &[f64], d2: &[f64]) -> f64 {
    d1.iter().zip(d2).map(|(a, b)| (a.hypot(*b) - 1.0).abs()).fold(0.0, f64::max)
}

/// Coefficients entering the director equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectorParams {
    pub gamma1: f64,
    pub gamma2: f64,
    pub eps_a: f64,
}

impl DirectorParams {
    pub fn from_material(m: &MaterialParams) -> Self {
        Self { gamma1: m.leslie.gamma1(), gamma2: m.leslie.gamma2(), eps_a: m.permittivity.eps_a }
    }
}

/// Velocity data the director and stress evaluations share within a step.
#[derive(Debug, Clone)]
pub struct Kinematics {
    pub grad: VelocityGradient,
    pub uc: CellField,
    pub vc: CellField,
}

impl Kinematics {
    /// Kinematics of a flow obeying no-slip, as used by the time stepper.
    pub fn new(grid: &Grid, u: &[f64], v: &[f64]) -> Self {
        Self::with_closure(grid, u, v, WallClosure::NoSlip)
    }

    /// Kinematics of an arbitrary velocity field, with one-sided wall closures.
    pub fn one_sided(grid: &Grid, u: &[f64], v: &[f64]) -> Self {
        Self::with_closure(grid, u, v, WallClosure::OneSided)
    }

    pub fn with_closure(grid: &Grid, u: &[f64], v: &[f64], closure: WallClosure) -> Self {
        let (uc, vc) = grid.velocity_at_cells(u, v);
        Self { grad: grid.velocity_gradient(u, v, closure), uc, vc }
    }

    pub fn at_rest(grid: &Grid) -> Self {
        Self::new(grid, &vec![0.0; grid.xfaces()], &vec![0.0; grid.yfaces()])
    }
}

/// Δ_h d and |∇_h d|² from the same face differences, so that
/// ½Δ_h|d|² = d·Δ_h d + |∇_h d|² holds exactly.
pub fn elastic_terms(grid: &Grid, d: &DirectorField) -> (CellField, CellField, CellField) {
    let nx = grid.nx;
    let lap1 = grid.laplacian_cc(&d.d1, BoundaryKind::Neumann0);
    let lap2 = grid.laplacian_cc(&d.d2, BoundaryKind::Neumann0);
    let (ax1, ay1) = grid.grad_cc(&d.d1, BoundaryKind::Neumann0);
    let (ax2, ay2) = grid.grad_cc(&d.d2, BoundaryKind::Neumann0);
    let mut grad_sq = vec![0.0; grid.cells()];
    par::rows_mut(&mut grad_sq, nx, |j, row| {
        for i in 0..nx {
            let (w, e) = (j * (nx + 1) + i, j * (nx + 1) + i + 1);
            let (s, n) = (j * nx + i, (j + 1) * nx + i);
            row[i] = 0.5 * (ax1[w] * ax1[w] + ax1[e] * ax1[e] + ax2[w] * ax2[w] + ax2[e] * ax2[e])
                + 0.5 * (ay1[s] * ay1[s] + ay1[n] * ay1[n] + ay2[s] * ay2[s] + ay2[n] * ay2[n]);
        }
    });
    (lap1, lap2, grad_sq)
}

/// Cellwise v·∇d projected onto the tangent space of d.
pub fn advection_term(grid: &Grid, d: &DirectorField, kin: &Kinematics) -> (CellField, CellField) {
    let (gx1, gy1) = grid.cell_gradient(&d.d1, BoundaryKind::Neumann0);
    let (gx2, gy2) = grid.cell_gradient(&d.d2, BoundaryKind::Neumann0);
    let n = grid.cells();
    let (mut a1, mut a2) = (vec![0.0; n], vec![0.0; n]);
    for k in 0..n {
        let adv = Vec2::new(kin.uc[k] * gx1[k] + kin.vc[k] * gy1[k], kin.uc[k] * gx2[k] + kin.vc[k] * gy2[k]);
        let p = projector(&d.at(k)) * adv;
        a1[k] = p.x;
        a2[k] = p.y;
    }
    (a1, a2)
}

/// d̊ = ∂_t d + v·∇d − Ω(v)d for a given time derivative.
pub fn corotational_rate(
    grid: &Grid,
    d: &DirectorField,
    kin: &Kinematics,
    dt_d: (&[f64], &[f64]),
) -> (CellField, CellField) {
    let (a1, a2) = advection_term(grid, d, kin);
    let n = grid.cells();
    let (mut r1, mut r2) = (vec![0.0; n], vec![0.0; n]);
    for k in 0..n {
        let w = kin.grad.vorticity(k);
        r1[k] = dt_d.0[k] + a1[k] + w * d.d2[k];
        r2[k] = dt_d.1[k] + a2[k] - w * d.d1[k];
    }
    (r1, r2)
}

/// Time derivative and co-rotational rate of the director at one state.
#[derive(Debug, Clone)]
pub struct DirectorRates {
    pub dt_d1: CellField,
    pub dt_d2: CellField,
    pub ring1: CellField,
    pub ring2: CellField,
}

/// ∂_t d = Ω(v)d − v·∇d + (1/γ1)[Δd + |∇d|²d + ε_a P(d)(∇Φ⊗∇Φ)d − γ2 P(d)D(v)d],
/// with `field` the cellwise ∇Φ⊗∇Φ (see [`crate::poisson::field_tensor`]).
pub fn director_rhs(
    grid: &Grid,
    d: &DirectorField,
    kin: &Kinematics,
    field: &[Mat2],
    p: &DirectorParams,
) -> Result<DirectorRates> {
    if !(p.gamma1 > 0.0) {
        return Err(Error::Config(format!("director equation needs γ1 > 0, got {}", p.gamma1)));
    }
    let (lap1, lap2, grad_sq) = elastic_terms(grid, d);
    let (a1, a2) = advection_term(grid, d, kin);
    let n = grid.cells();
    let mut r = DirectorRates { dt_d1: vec![0.0; n], dt_d2: vec![0.0; n], ring1: vec![0.0; n], ring2: vec![0.0; n] };
    for k in 0..n {
        let dk = d.at(k);
        let proj = projector(&dk);
        let h = Vec2::new(lap1[k], lap2[k]) + dk * grad_sq[k] + proj * (field[k] * dk) * p.eps_a;
        let ring = (h - proj * (kin.grad.strain(k) * dk) * p.gamma2) / p.gamma1;
        let w = kin.grad.vorticity(k);
        r.ring1[k] = ring.x;
        r.ring2[k] = ring.y;
        r.dt_d1[k] = ring.x - w * dk.y - a1[k];
        r.dt_d2[k] = ring.y + w * dk.x - a2[k];
    }
    Ok(r)
}

/// Δd + |∇d|²d + ε_a P(d)(∇Φ⊗∇Φ)d, the residual of the equilibrium director equation.
pub fn molecular_field(grid: &Grid, d: &DirectorField, field: &[Mat2], eps_a: f64) -> (CellField, CellField) {
    let (lap1, lap2, grad_sq) = elastic_terms(grid, d);
    let n = grid.cells();
    let (mut h1, mut h2) = (vec![0.0; n], vec![0.0; n]);
    for k in 0..n {
        let dk = d.at(k);
        let h = Vec2::new(lap1[k], lap2[k]) + dk * grad_sq[k] + projector(&dk) * (field[k] * dk) * eps_a;
        h1[k] = h.x;
        h2[k] = h.y;
    }
    (h1, h2)
}

/// Explicit Euler update d + dt ∂_t d, optionally renormalized to unit length.
pub fn director_step(
    grid: &Grid,
    d: &DirectorField,
    rates: &DirectorRates,
    dt: f64,
    renormalize: bool,
) -> Result<DirectorField> {
    let n = grid.cells();
    let d1: Vec<f64> = (0..n).map(|k| d.d1[k] + dt * rates.dt_d1[k]).collect();
    let d2: Vec<f64> = (0..n).map(|k| d.d2[k] + dt * rates.dt_d2[k]).collect();
    if let Some(k) = (0..n).find(|&k| !(d1[k].hypot(d2[k]) >= 0.5)) {
        return Err(Error::DirectorCollapse { i: k % grid.nx, j: k / grid.nx, len: d1[k].hypot(d2[k]) });
    }
    let next = DirectorField::new(d1, d2);
    Ok(if renormalize { next.renormalized() } else { next })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poisson::field_tensor;
    use std::f64::consts::PI;

    fn params(eps_a: f64) -> DirectorParams {
        DirectorParams { gamma1: 1.0, gamma2: 0.0, eps_a }
    }

    fn twist(g: &Grid, amp: f64) -> DirectorField {
        DirectorField::from_angle(&g.sample_cells(|x, y| 0.2 + amp * (PI * x).cos() * (PI * y).cos()))
    }

    fn no_field(g: &Grid) -> Vec<Mat2> {
        vec![Mat2::zeros(); g.cells()]
    }

    #[test]
    fn uniform_director_at_rest_is_stationary() {
        let g = Grid::unit_square(8);
        let d = DirectorField::uniform(&g, Vec2::new(0.6, 0.8));
        let m = no_field(&g);
        let r = director_rhs(&g, &d, &Kinematics::at_rest(&g), &m, &params(1.0)).unwrap();
        assert!(r.dt_d1.iter().chain(&r.dt_d2).all(|&x| x.abs() < 1e-15));
    }

    #[test]
    fn rejects_nonpositive_rotational_viscosity() {
        let g = Grid::unit_square(8);
        let d = DirectorField::uniform(&g, Vec2::new(1.0, 0.0));
        let m = no_field(&g);
        let p = DirectorParams { gamma1: 0.0, gamma2: 0.0, eps_a: 0.0 };
        assert!(director_rhs(&g, &d, &Kinematics::at_rest(&g), &m, &p).unwrap_err().is_config());
    }

    #[test]
    fn shear_flow_rotates_a_uniform_director() {
        let g = Grid::unit_square(10);
        let d = DirectorField::uniform(&g, Vec2::new(1.0, 0.0));
        let kin = Kinematics::one_sided(&g, &g.sample_xfaces(|_, y| y), &vec![0.0; g.yfaces()]);
        let zero = vec![0.0; g.cells()];
        let (r1, r2) = corotational_rate(&g, &d, &kin, (&zero, &zero));
        for k in 0..g.cells() {
            assert!(r1[k].abs() < 1e-13 && (r2[k] - 0.5).abs() < 1e-13);
        }
        let (r1, r2) = corotational_rate(&g, &d, &Kinematics::at_rest(&g), (&zero, &zero));
        assert!(r1.iter().chain(&r2).all(|&x| x == 0.0));
    }

    #[test]
    fn corotational_rate_vanishes_in_a_rigidly_rotating_frame() {
        let err = |n: usize| {
            let g = Grid::unit_square(n);
            let w = 0.8;
            let theta = |x: f64, y: f64| 0.3 * (PI * x).cos() * (PI * y).cos();
            let d = DirectorField::from_angle(&g.sample_cells(theta));
            let u = g.sample_xfaces(|_, y| -w * (y - 0.5));
            let v = g.sample_yfaces(|x, _| w * (x - 0.5));
            let kin = Kinematics::one_sided(&g, &u, &v);
            // ∂_t d = ωJd − v·∇d for d(x, t) = R(ωt) d0(R(−ωt)x)
            let (mut t1, mut t2) = (vec![0.0; g.cells()], vec![0.0; g.cells()]);
            for j in 0..g.ny {
                for i in 0..g.nx {
                    let (x, y) = (g.xc(i), g.yc(j));
                    let th = theta(x, y);
                    let tx = -0.3 * PI * (PI * x).sin() * (PI * y).cos();
                    let ty = -0.3 * PI * (PI * x).cos() * (PI * y).sin();
                    let vdt = -w * (y - 0.5) * tx + w * (x - 0.5) * ty;
                    let k = g.c(i, j);
                    t1[k] = -w * th.sin() + th.sin() * vdt;
                    t2[k] = w * th.cos() - th.cos() * vdt;
                }
            }
            let (r1, r2) = corotational_rate(&g, &d, &kin, (&t1, &t2));
            // compare away from the wall cells, where mirrored ghosts are one-sided
            let mut m: f64 = 0.0;
            for j in 1..n - 1 {
                for i in 1..n - 1 {
                    m = m.max(r1[g.c(i, j)].abs()).max(r2[g.c(i, j)].abs());
                }
            }
            m
        };
        let (e1, e2) = (err(32), err(64));
        assert!(e2 < 1e-2 && e1 / e2 > 3.5, "{e1} {e2}");
    }

    #[test]
    fn elastic_terms_are_tangent_for_unit_fields() {
        let g = Grid::new(20, 16, 1.0, 0.8).unwrap();
        let d = twist(&g, 0.9);
        let (l1, l2, gs) = elastic_terms(&g, &d);
        for k in 0..g.cells() {
            let t = Vec2::new(l1[k], l2[k]) + d.at(k) * gs[k];
            assert!(t.dot(&d.at(k)).abs() < 1e-11);
        }
        // harmonic angle: the full rhs stays tangent too
        let d = DirectorField::from_angle(&g.sample_cells(|x, _| 0.4 + 0.5 * x));
        let m = no_field(&g);
        let r = director_rhs(&g, &d, &Kinematics::at_rest(&g), &m, &params(0.0)).unwrap();
        for k in 0..g.cells() {
            assert!((r.dt_d1[k] * d.d1[k] + r.dt_d2[k] * d.d2[k]).abs() < 1e-11);
        }
        // Neumann compatibility of the Laplacian
        assert!(g.integrate(&l1).abs() < 1e-12 && g.integrate(&l2).abs() < 1e-12);
    }

    #[test]
    fn electric_torque_turns_director_toward_field() {
        let g = Grid::unit_square(8);
        let t0 = PI / 4.0;
        let d = DirectorField::uniform(&g, Vec2::new(t0.cos(), t0.sin()));
        let e = 1.5;
        let m = vec![Mat2::new(e * e, 0.0, 0.0, 0.0); g.cells()];
        let p = DirectorParams { gamma1: 2.0, gamma2: 0.0, eps_a: 0.7 };
        let r = director_rhs(&g, &d, &Kinematics::at_rest(&g), &m, &p).unwrap();
        // (ε_a E²/γ1) P(d)(d1, 0) at θ0 = π/4 equals (ε_a E²/γ1)·(1/(2√2))·(1, −1)
        let s = p.eps_a * e * e / p.gamma1 / (2.0 * 2f64.sqrt());
        for k in 0..g.cells() {
            assert!((r.dt_d1[k] - s).abs() < 1e-14 && (r.dt_d2[k] + s).abs() < 1e-14);
        }
        // d2 decreases: rotation toward e1
        assert!(r.dt_d2[0] < 0.0);
    }

    #[test]
    fn step_checks_collapse_and_renormalizes() {
        let g = Grid::unit_square(6);
        let d = DirectorField::uniform(&g, Vec2::new(1.0, 0.0));
        let n = g.cells();
        let rates = DirectorRates { dt_d1: vec![-0.6; n], dt_d2: vec![0.0; n], ring1: vec![0.0; n], ring2: vec![0.0; n] };
        assert!(matches!(director_step(&g, &d, &rates, 1.0, true), Err(Error::DirectorCollapse { .. })));
        let still = DirectorRates { dt_d1: vec![0.0; n], ..rates.clone() };
        assert_eq!(director_step(&g, &d, &still, 1.0, false).unwrap(), d);

        let odd = DirectorField::new(g.sample_cells(|x, _| 1.0 + x), g.sample_cells(|_, y| y));
        let once = odd.renormalized();
        let twice = once.renormalized();
        assert!(once.max_len_dev < 1e-15);
        for k in 0..n {
            assert!((once.d1[k] - twice.d1[k]).abs() <= 1e-15 && (once.d2[k] - twice.d2[k]).abs() <= 1e-15);
        }
    }

    fn drift_run(n: usize, steps: usize, dt: f64) -> f64 {
        let g = Grid::unit_square(n);
        let mut d = twist(&g, 0.5);
        let phi = g.sample_cells(|x, y| (PI * x).sin() * (PI * y).sin());
        let m = field_tensor(&g, &phi);
        let kin = Kinematics::at_rest(&g);
        let p = params(0.5);
        for _ in 0..steps {
            let r = director_rhs(&g, &d, &kin, &m, &p).unwrap();
            d = director_step(&g, &d, &r, dt, false).unwrap();
        }
        d.max_len_dev
    }

    #[test]
    fn unit_length_drift_is_first_order_in_dt() {
        let h = 1.0 / 32.0;
        let dt = h * h / 8.0;
        let coarse = drift_run(32, 250, dt);
        let fine = drift_run(45, 500, dt / 2.0);
        assert!(coarse <= 1e-3);
        let ratio = coarse / fine;
        assert!((1.7..=2.4).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn small_length_perturbation_does_not_grow() {
        let g = Grid::unit_square(24);
        let base = twist(&g, 0.3);
        let bump = g.sample_cells(|x, y| 1.0 + 1e-2 * (PI * x).cos() * (PI * y).cos());
        let mut d = DirectorField::new(
            base.d1.iter().zip(&bump).map(|(a, b)| a * b).collect(),
            base.d2.iter().zip(&bump).map(|(a, b)| a * b).collect(),
        );
        let start = d.max_len_dev;
        let m = no_field(&g);
        let kin = Kinematics::at_rest(&g);
        let dt = g.hx * g.hx / 8.0;
        for _ in 0..1000 {
            let r = director_rhs(&g, &d, &kin, &m, &params(0.0)).unwrap();
            d = director_step(&g, &d, &r, dt, false).unwrap();
        }
        assert!(d.max_len_dev <= start, "{} > {start}", d.max_len_dev);
    }
}
