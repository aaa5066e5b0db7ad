//! Energy functional, dissipation and the discrete energy audit.

use crate::director::{DirectorRates, Kinematics};
use crate::error::{Error, Result};
use crate::flow::ericksen_stress;
use crate::grid::Grid;
use crate::material::{dissipation_quadratic_form, Mat2, MaterialParams, Vec2};
use crate::nernst_planck::ionic_dissipation;
use crate::poisson::{electric_energy, field_tensor, EpsField};
use crate::sim::State;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EnergyReport {
    pub e_kinetic: f64,
    pub e_elastic: f64,
    pub e_entropy: f64,
    pub e_electric: f64,
    pub e_total: f64,
    /// Σ_k ∫ c_k ∇μ_k·D_k∇μ_k
    pub d_ionic: f64,
    /// α Σ_k ∫ c_k |∇μ_k|², α the smallest diffusivity eigenvalue
    pub d_ionic_alpha: f64,
    /// α4 ∫ |D(v)|²
    pub d_viscous: f64,
    /// α4 ∫ |D(v)d|², logged next to `d_viscous`
    pub d_viscous_dd: f64,
    pub d_rotational: f64,
}

impl EnergyReport {
    pub fn d_total(&self) -> f64 {
        self.d_ionic + self.d_viscous + self.d_rotational
    }
}

/// ½∫|∇d|² from the face differences of d.
pub fn elastic_energy(grid: &Grid, d: &crate::director::DirectorField) -> f64 {
    let tr: Vec<f64> = ericksen_stress(grid, d).iter().map(Mat2::trace).collect();
    0.5 * grid.integrate(&tr)
}

/// Σ_k ∫ c_k ln c_k.
pub fn entropy(grid: &Grid, c: &[Vec<f64>]) -> Result<f64> {
    let mut total = 0.0;
    for ck in c {
        if let Some(k) = ck.iter().position(|&v| !(v > 0.0)) {
            return Err(Error::NonPositiveConcentration { i: k % grid.nx, j: k / grid.nx, value: ck[k] });
        }
        total += grid.integrate(&ck.iter().map(|c| c * c.ln()).collect::<Vec<_>>());
    }
    Ok(total)
}

/// The four energy components of a state; dissipation fields are left at zero.
pub fn energy(grid: &Grid, state: &State, mat: &MaterialParams) -> Result<EnergyReport> {
    let d = &state.director;
    let eps = EpsField::from_director(grid, &d.d1, &d.d2, &mat.permittivity);
    let mut r = EnergyReport {
        e_kinetic: state.flow.kinetic_energy(grid),
        e_elastic: elastic_energy(grid, d),
        e_entropy: entropy(grid, &state.ion.c)?,
        e_electric: electric_energy(grid, &eps, &field_tensor(grid, &state.phi)),
        ..Default::default()
    };
    r.e_total = r.e_kinetic + r.e_elastic + r.e_entropy + r.e_electric;
    Ok(r)
}

/// Fills the dissipation fields of `report` for the state, its velocity
/// gradient and the director rates d̊ of the same step.
pub fn dissipation(
    grid: &Grid,
    state: &State,
    kin: &Kinematics,
    rates: &DirectorRates,
    mat: &MaterialParams,
    report: EnergyReport,
) -> Result<EnergyReport> {
    let ionic = ionic_dissipation(grid, &state.ion, &state.phi, &mat.species)?;
    let a4 = mat.leslie.alpha(4);
    let n = grid.cells();
    let (mut visc, mut visc_dd, mut rot) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for k in 0..n {
        let dv = kin.grad.strain(k);
        let d = state.director.at(k);
        let ring = Vec2::new(rates.ring1[k], rates.ring2[k]);
        visc[k] = a4 * dv.norm_squared();
        visc_dd[k] = a4 * (dv * d).norm_squared();
        rot[k] = dissipation_quadratic_form(&mat.leslie, &d, &dv, &ring);
    }
    Ok(EnergyReport {
        d_ionic: ionic.weighted,
        d_ionic_alpha: ionic.alpha_bound,
        d_viscous: grid.integrate(&visc),
        d_viscous_dd: grid.integrate(&visc_dd),
        d_rotational: grid.integrate(&rot),
        ..report
    })
}

/// One row of an energy trajectory: step size into this state, its energy,
/// and the dissipation evaluated at the state the step started from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditEntry {
    pub dt: f64,
    pub e_total: f64,
    pub d_total: f64,
}

/// r_n = (E^{n+1} − E^n)/dt + D^n for consecutive entries; returns the series
/// and max |r_n|.
pub fn energy_audit(log: &[AuditEntry]) -> (Vec<f64>, f64) {
    let r: Vec<f64> = log.windows(2).map(|w| (w[1].e_total - w[0].e_total) / w[1].dt + w[1].d_total).collect();
    let max = r.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    (r, max)
}

/// Discrete value of
/// ∫(∇Φ⊗∇Φ)(d⊗d):∇v − ∫((∇Φ⊗∇Φ)d)·(v·∇d) − ∫(d⊗d)∇Φ·∇(v·∇Φ),
/// which vanishes for divergence-free v with v = 0 on the boundary.
pub fn transport_identity_residual(
    grid: &Grid,
    phi: &[f64],
    d: &crate::director::DirectorField,
    u: &[f64],
    v: &[f64],
) -> f64 {
    let (gx, gy) = grid.cell_gradient_interior(phi);
    let (d1x, d1y) = grid.cell_gradient_interior(&d.d1);
    let (d2x, d2y) = grid.cell_gradient_interior(&d.d2);
    let kin = Kinematics::one_sided(grid, u, v);
    let n = grid.cells();
    let w: Vec<f64> = (0..n).map(|k| kin.uc[k] * gx[k] + kin.vc[k] * gy[k]).collect();
    let (wx, wy) = grid.cell_gradient_interior(&w);
    let terms: Vec<f64> = (0..n)
        .map(|k| {
            let g = Vec2::new(gx[k], gy[k]);
            let dk = d.at(k);
            let gd = g.dot(&dk);
            let adv = Vec2::new(kin.uc[k] * d1x[k] + kin.vc[k] * d1y[k], kin.uc[k] * d2x[k] + kin.vc[k] * d2y[k]);
            let first = gd * g.dot(&(kin.grad.full(k) * dk));
            let second = gd * g.dot(&adv);
            let third = gd * dk.dot(&Vec2::new(wx[k], wy[k]));
            first - second - third
        })
        .collect();
    grid.integrate(&terms)
}
