//! Coupled time stepping, initial conditions and trajectory control.

use std::f64::consts::PI;

use crate::director::{director_rhs, director_step, DirectorField, DirectorParams, Kinematics};
use crate::energy::{dissipation, energy, EnergyReport};
use crate::equilibrium::{equilibrium_residual, solve_equilibrium, EquilibriumOptions, EquilibriumResidual};
use crate::error::{Error, Result};
use crate::flow::{body_force, ns_step, FlowState, WallMode};
use crate::grid::{CellField, Grid};
use crate::material::{MaterialParams, Vec2};
use crate::nernst_planck::{np_step, positivity_dt_limit, IonState};
use crate::poisson::{field_tensor, solve_aniso_dirichlet, EpsField, SolverOptions};

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub t: f64,
    pub ion: IonState,
    pub flow: FlowState,
    pub director: DirectorField,
    /// Potential for the current (c, d); kept consistent by every step.
    pub phi: CellField,
}

/// Everything a step needs besides the state.
#[derive(Debug, Clone)]
pub struct Model {
    pub grid: Grid,
    pub mat: MaterialParams,
    pub renormalize: bool,
    pub wall: WallMode,
    pub poisson: SolverOptions,
    pub pressure: SolverOptions,
}

impl Model {
    pub fn new(grid: Grid, mat: MaterialParams) -> Self {
        Self {
            grid,
            mat,
            renormalize: true,
            wall: WallMode::NoSlip,
            poisson: SolverOptions::default(),
            pressure: SolverOptions::default(),
        }
    }

    /// Solves for Φ given (c, d), warm-started from `guess`.
    pub fn potential(&self, ion: &IonState, d: &DirectorField, guess: Option<&[f64]>) -> Result<CellField> {
        let eps = EpsField::from_director(&self.grid, &d.d1, &d.d2, &self.mat.permittivity);
        let rho = ion.charge(&self.mat.species);
        Ok(solve_aniso_dirichlet(&self.grid, &eps, &rho, &self.poisson, guess)?.0)
    }

    /// Builds a state from (c, v, d) with a consistent potential.
    pub fn state(&self, t: f64, ion: IonState, flow: FlowState, director: DirectorField) -> Result<State> {
        let phi = self.potential(&ion, &director, None)?;
        Ok(State { t, ion, flow, director, phi })
    }
}

/// safety · min(h/|v|∞, h²/(4 max{α4, λmax(D_k), 1/γ1}), ion positivity limit).
pub fn stable_dt(model: &Model, state: &State, safety: f64) -> f64 {
    let g = &model.grid;
    let h = g.h_min();
    let vmax = state.flow.max_speed();
    let advective = if vmax > 0.0 { h / vmax } else { f64::INFINITY };
    let mut kappa = model.mat.leslie.alpha(4);
    for sp in &model.mat.species {
        kappa = kappa.max(sp.max_diffusivity());
    }
    let g1 = model.mat.leslie.gamma1();
    if g1 > 0.0 {
        kappa = kappa.max(1.0 / g1);
    }
    let diffusive = h * h / (4.0 * kappa);
    let drift = positivity_dt_limit(g, &state.phi, &state.flow.u, &state.flow.v, &model.mat.species);
    safety * advective.min(diffusive).min(drift)
}

/// One row of the energy log. Energies belong to the state after the step;
/// dissipation terms are evaluated at the state the step started from.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub step: usize,
    pub t: f64,
    pub dt: f64,
    pub report: EnergyReport,
    pub audit_r: f64,
    pub masses: Vec<f64>,
    pub min_c: f64,
    pub max_len_dev: f64,
    pub div_inf: f64,
}

/// Advances a state by dt: Poisson, director, ions, then flow. The input is
/// never modified; on error nothing is returned.
pub fn step(model: &Model, state: &State, dt: f64) -> Result<(State, EnergyReport)> {
    let g = &model.grid;
    let mat = &model.mat;
    let phi = model.potential(&state.ion, &state.director, Some(&state.phi))?;
    let field = field_tensor(g, &phi);
    let kin = Kinematics::new(g, &state.flow.u, &state.flow.v);
    let rates = director_rhs(g, &state.director, &kin, &field, &DirectorParams::from_material(mat))?;
    let director = director_step(g, &state.director, &rates, dt, model.renormalize)?;
    let ion = np_step(g, &state.ion, &phi, &state.flow.u, &state.flow.v, &mat.species, dt)?;
    let force = body_force(g, &state.director, &kin, &rates, &field, mat);
    let flow = ns_step(g, &state.flow, (&force.0, &force.1), dt, mat.leslie.alpha(4), model.wall, &model.pressure)?;

    let start = State { phi, ..state.clone() };
    let diss = dissipation(g, &start, &kin, &rates, mat, EnergyReport::default())?;
    let phi = model.potential(&ion, &director, Some(&start.phi))?;
    let next = State { t: state.t + dt, ion, flow, director, phi };
    let report = diss_into(energy(g, &next, mat)?, &diss);
    Ok((next, report))
}

fn diss_into(e: EnergyReport, d: &EnergyReport) -> EnergyReport {
    EnergyReport {
        d_ionic: d.d_ionic,
        d_ionic_alpha: d.d_ionic_alpha,
        d_viscous: d.d_viscous,
        d_viscous_dd: d.d_viscous_dd,
        d_rotational: d.d_rotational,
        ..e
    }
}

/// A state together with its step counter and current energy.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub model: Model,
    pub state: State,
    pub step: usize,
    pub energy: EnergyReport,
}

impl Simulation {
    pub fn new(model: Model, state: State, step: usize) -> Result<Self> {
        let energy = energy(&model.grid, &state, &model.mat)?;
        Ok(Self { model, state, step, energy })
    }

    fn row(&self, dt: f64, report: EnergyReport, audit_r: f64) -> LogRow {
        let s = &self.state;
        LogRow {
            step: self.step,
            t: s.t,
            dt,
            report,
            audit_r,
            masses: s.ion.current_masses(&self.model.grid),
            min_c: s.ion.min_concentration(),
            max_len_dev: s.director.max_len_dev,
            div_inf: s.flow.div_inf,
        }
    }

    /// Log row describing the current state with no step behind it.
    pub fn initial_row(&self) -> LogRow {
        self.row(0.0, self.energy, 0.0)
    }

    /// Takes one step; the simulation is unchanged if the step fails.
    pub fn advance(&mut self, dt: f64) -> Result<LogRow> {
        let (next, report) =
            step(&self.model, &self.state, dt).map_err(|e| Error::StepFailed { step: self.step + 1, source: Box::new(e) })?;
        let audit_r = (report.e_total - self.energy.e_total) / dt + report.d_total();
        self.state = next;
        self.step += 1;
        self.energy = report;
        Ok(self.row(dt, report, audit_r))
    }

    pub fn residual(&self) -> Result<EquilibriumResidual> {
        equilibrium_residual(&self.model.grid, &self.state, &self.model.mat)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DtPolicy {
    Fixed(f64),
    Auto { safety: f64 },
}

impl Default for DtPolicy {
    fn default() -> Self {
        DtPolicy::Auto { safety: 0.4 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunControl {
    pub dt: DtPolicy,
    pub t_final: f64,
    pub max_steps: Option<usize>,
    /// Stop once every equilibrium residual is below this; 0 disables.
    pub steady_tol: f64,
    /// Auto steps below this are treated as blow-up.
    pub dt_floor: f64,
    /// Speeds or concentrations above this are treated as blow-up.
    pub ceiling: f64,
}

impl Default for RunControl {
    fn default() -> Self {
        Self {
            dt: DtPolicy::default(),
            t_final: 1.0,
            max_steps: None,
            steady_tol: 0.0,
            dt_floor: 1e-12,
            ceiling: 1e8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Completed,
    ConvergedToEquilibrium,
    StepLimit,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Completed => "completed",
            Verdict::ConvergedToEquilibrium => "converged-to-equilibrium",
            Verdict::StepLimit => "step-limit",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub verdict: Verdict,
    pub steps: usize,
    pub t: f64,
    pub e_initial: f64,
    pub e_final: f64,
    pub max_len_dev: f64,
    pub min_c: f64,
    /// Largest relative deviation of any species mass from its initial value.
    pub mass_drift: f64,
    pub max_audit: f64,
    pub residual: EquilibriumResidual,
}

/// Runs until t_final, the step limit, or a steady state. `observe` sees
/// every committed row, starting with the initial one.
pub fn run(
    sim: &mut Simulation,
    ctl: &RunControl,
    mut observe: impl FnMut(&Simulation, &LogRow) -> Result<()>,
) -> Result<RunSummary> {
    let first = sim.initial_row();
    observe(sim, &first)?;
    let masses0 = sim.state.ion.masses.clone();
    let mut summary = RunSummary {
        verdict: Verdict::Completed,
        steps: 0,
        t: sim.state.t,
        e_initial: sim.energy.e_total,
        e_final: sim.energy.e_total,
        max_len_dev: first.max_len_dev,
        min_c: first.min_c,
        mass_drift: 0.0,
        max_audit: 0.0,
        residual: EquilibriumResidual::default(),
    };
    let end = ctl.t_final;
    let steady = |sim: &Simulation| -> Result<Option<EquilibriumResidual>> {
        if ctl.steady_tol > 0.0 {
            let r = sim.residual()?;
            if r.max() < ctl.steady_tol {
                return Ok(Some(r));
            }
        }
        Ok(None)
    };
    loop {
        if let Some(r) = steady(sim)? {
            summary.verdict = Verdict::ConvergedToEquilibrium;
            summary.residual = r;
            break;
        }
        let remaining = end - sim.state.t;
        if remaining <= 1e-12 * sim.state.t.abs().max(1.0) {
            break;
        }
        if ctl.max_steps.is_some_and(|m| summary.steps >= m) {
            summary.verdict = Verdict::StepLimit;
            break;
        }
        let dt = match ctl.dt {
            DtPolicy::Fixed(dt) => dt,
            DtPolicy::Auto { safety } => {
                let dt = stable_dt(&sim.model, &sim.state, safety);
                if dt < ctl.dt_floor {
                    return Err(Error::BlowUp { t: sim.state.t, reason: format!("stable step {dt:.3e} fell below the floor") });
                }
                dt
            }
        };
        let row = sim.advance(dt.min(remaining))?;
        let peak = sim.state.flow.max_speed().max(sim.state.ion.c.iter().flatten().fold(0.0, |m: f64, c| m.max(*c)));
        if !(peak <= ctl.ceiling) {
            return Err(Error::BlowUp { t: sim.state.t, reason: format!("field magnitude {peak:.3e} above the ceiling") });
        }
        summary.steps += 1;
        summary.max_len_dev = summary.max_len_dev.max(row.max_len_dev);
        summary.min_c = summary.min_c.min(row.min_c);
        summary.max_audit = summary.max_audit.max(row.audit_r.abs());
        for (m, m0) in row.masses.iter().zip(&masses0) {
            summary.mass_drift = summary.mass_drift.max(((m - m0) / m0).abs());
        }
        observe(sim, &row)?;
    }
    if summary.verdict != Verdict::ConvergedToEquilibrium {
        summary.residual = sim.residual()?;
    }
    summary.t = sim.state.t;
    summary.e_final = sim.energy.e_total;
    Ok(summary)
}

/// Named initial conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Uniform director at `angle`, uniform ions, fluid at rest.
    Uniform,
    /// θ = angle + amplitude·cos πx cos πy and a charge-separating ion bump.
    Twist,
    /// Converged equilibrium from the twist director, ions scaled by
    /// (1 + ion_amplitude · sin πx).
    PerturbedEquilibrium,
    /// Uniform director and ions with a closed recirculating flow of peak
    /// speed about `amplitude`.
    ShearCell,
}

impl Preset {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "uniform" => Preset::Uniform,
            "twist" => Preset::Twist,
            "perturbed-equilibrium" => Preset::PerturbedEquilibrium,
            "shear-cell" => Preset::ShearCell,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Uniform => "uniform",
            Preset::Twist => "twist",
            Preset::PerturbedEquilibrium => "perturbed-equilibrium",
            Preset::ShearCell => "shear-cell",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialSpec {
    pub preset: Preset,
    pub angle: f64,
    pub amplitude: f64,
    pub ion_amplitude: f64,
}

impl Default for InitialSpec {
    fn default() -> Self {
        Self { preset: Preset::Twist, angle: 0.0, amplitude: 0.3, ion_amplitude: 0.2 }
    }
}

fn scaled_to_mass(grid: &Grid, mut c: CellField, mass: f64) -> CellField {
    let s = mass / grid.integrate(&c);
    c.iter_mut().for_each(|x| *x *= s);
    c
}

/// Cellular flow from the nodal stream function ψ = a sin²πx̂ sin²πŷ / π,
/// divergence-free to roundoff with zero normal velocity on the walls.
pub fn recirculating_flow(grid: &Grid, amplitude: f64) -> FlowState {
    let psi = |i: usize, j: usize| {
        let (x, y) = (i as f64 / grid.nx as f64, j as f64 / grid.ny as f64);
        amplitude / PI * (PI * x).sin().powi(2) * (PI * y).sin().powi(2)
    };
    let mut u = vec![0.0; grid.xfaces()];
    let mut v = vec![0.0; grid.yfaces()];
    for j in 0..grid.ny {
        for i in 0..=grid.nx {
            u[grid.fx(i, j)] = (psi(i, j + 1) - psi(i, j)) / grid.hy;
        }
    }
    for j in 0..=grid.ny {
        for i in 0..grid.nx {
            v[grid.fy(i, j)] = -(psi(i + 1, j) - psi(i, j)) / grid.hx;
        }
    }
    FlowState::new(grid, u, v)
}

/// θ = angle + amplitude·cos πx̂ cos πŷ in scaled coordinates.
pub fn twist_director(grid: &Grid, angle: f64, amplitude: f64) -> DirectorField {
    let (lx, ly) = (grid.lx, grid.ly);
    DirectorField::from_angle(&grid.sample_cells(|x, y| angle + amplitude * (PI * x / lx).cos() * (PI * y / ly).cos()))
}

/// Builds the initial state of a preset; species masses come from the material.
pub fn initial_state(model: &Model, spec: &InitialSpec, eq_opts: &EquilibriumOptions) -> Result<State> {
    let g = &model.grid;
    let (lx, ly) = (g.lx, g.ly);
    let bump = move |x: f64, y: f64| (PI * x / lx).cos() * (PI * y / ly).cos();
    let twist = twist_director(g, spec.angle, spec.amplitude);
    let uniform_d = DirectorField::uniform(g, Vec2::new(spec.angle.cos(), spec.angle.sin()));
    let uniform_c = |sign: bool| -> Vec<CellField> {
        model
            .mat
            .species
            .iter()
            .map(|sp| {
                let a = if sign { spec.ion_amplitude * sp.valence.signum() } else { 0.0 };
                scaled_to_mass(g, g.sample_cells(|x, y| 1.0 + a * bump(x, y)), sp.mass)
            })
            .collect()
    };
    match spec.preset {
        Preset::Uniform => model.state(0.0, IonState::new(g, uniform_c(false)), FlowState::at_rest(g), uniform_d),
        Preset::Twist => model.state(0.0, IonState::new(g, uniform_c(true)), FlowState::at_rest(g), twist),
        Preset::ShearCell => {
            model.state(0.0, IonState::new(g, uniform_c(false)), recirculating_flow(g, spec.amplitude), uniform_d)
        }
        Preset::PerturbedEquilibrium => {
            let eq = solve_equilibrium(g, &model.mat, &twist, eq_opts)?;
            let p = g.sample_cells(|x, _| 1.0 + spec.ion_amplitude * (PI * x / lx).sin());
            let c = eq.c.iter().map(|ck| ck.iter().zip(&p).map(|(c, p)| c * p).collect()).collect();
            model.state(0.0, IonState::new(g, c), FlowState::at_rest(g), eq.director)
        }
    }
}
