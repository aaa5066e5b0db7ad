//! Pinned scenarios and the measurements taken on them.

use std::f64::consts::PI;

use nemel::director::DirectorField;
use nemel::energy::transport_identity_residual;
use nemel::equilibrium::{momentum_residual, solve_equilibrium, EquilibriumOptions};
use nemel::flow::{divergence_inf, ns_step, FlowState, WallMode};
use nemel::grid::Grid;
use nemel::material::*;
use nemel::poisson::{solve_aniso_dirichlet, EpsField, SolverOptions};
use nemel::sim::{initial_state, run, DtPolicy, InitialSpec, Model, Preset, RunControl, RunSummary, Simulation, Verdict};
use nemel::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const LESLIE: [f64; 6] = [0.1, -0.8, 0.1, 1.0, 1.0, 0.3];

/// Binary electrolyte z = ±1 with unit diffusivities; `anion_mass` below 1
/// leaves a net charge.
pub fn material(anion_mass: f64) -> MaterialParams {
    MaterialParams {
        leslie: LeslieCoefficients::new(LESLIE),
        species: vec![
            IonSpecies::scalar(1.0, 1.0, 1.0).expect("valid species"),
            IonSpecies::scalar(-1.0, 1.0, anion_mass).expect("valid species"),
        ],
        permittivity: Permittivity::new(1.0, 0.5).expect("valid permittivity"),
    }
}

fn simulation(n: usize, mat: MaterialParams, spec: &InitialSpec, renormalize: bool) -> Result<Simulation> {
    let mut model = Model::new(Grid::unit_square(n), mat);
    model.renormalize = renormalize;
    let state = initial_state(&model, spec, &EquilibriumOptions::default())?;
    Simulation::new(model, state, 0)
}

/// Per-step record of the smoke run.
#[derive(Debug, Clone)]
pub struct SmokeTrace {
    pub summary: RunSummary,
    pub t: Vec<f64>,
    pub min_c: Vec<f64>,
    /// Largest relative drift of any species mass over the run.
    pub mass_drift: f64,
    pub e_total: Vec<f64>,
}

/// Twist preset, neutral binary electrolyte, automatic steps.
pub fn smoke_run(n: usize, steps: usize) -> Result<SmokeTrace> {
    let mut sim = simulation(n, material(1.0), &InitialSpec::default(), true)?;
    let masses0 = sim.state.ion.masses.clone();
    let ctl = RunControl { t_final: f64::INFINITY, max_steps: Some(steps), ..Default::default() };
    let (mut t, mut min_c, mut e_total) = (Vec::new(), Vec::new(), Vec::new());
    let mut mass_drift: f64 = 0.0;
    let summary = run(&mut sim, &ctl, |_, row| {
        t.push(row.t);
        min_c.push(row.min_c);
        e_total.push(row.report.e_total);
        for (m, m0) in row.masses.iter().zip(&masses0) {
            mass_drift = mass_drift.max(((m - m0) / m0).abs());
        }
        Ok(())
    })?;
    Ok(SmokeTrace { summary, t, min_c, mass_drift, e_total })
}

/// Largest rate B with log min c(t) = log min c(0) − B t along the trace;
/// negative when the minimum only grows.
pub fn positivity_decay_rate(trace: &SmokeTrace) -> f64 {
    let l0 = trace.min_c[0].ln();
    trace
        .t
        .iter()
        .zip(&trace.min_c)
        .skip(1)
        .map(|(t, c)| (l0 - c.ln()) / t)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Largest unit-length deviation of the coupled twist run without
/// renormalization, on n² cells with a fixed step up to `t_final`.
pub fn unit_length_deviation(n: usize, dt: f64, t_final: f64) -> Result<f64> {
    let spec = InitialSpec { amplitude: 0.5, ..Default::default() };
    let mut sim = simulation(n, material(1.0), &spec, false)?;
    let ctl = RunControl { dt: DtPolicy::Fixed(dt), t_final, ..Default::default() };
    Ok(run(&mut sim, &ctl, |_, _| Ok(()))?.max_len_dev)
}

/// max |r_n| of the energy audit for a fixed step, together with the
/// initial and final total energy.
pub fn audit(n: usize, preset: Preset, anion_mass: f64, dt: f64, t_final: f64) -> Result<(f64, f64, f64)> {
    let spec = InitialSpec { preset, ..Default::default() };
    let mut sim = simulation(n, material(anion_mass), &spec, true)?;
    let ctl = RunControl { dt: DtPolicy::Fixed(dt), t_final, ..Default::default() };
    let s = run(&mut sim, &ctl, |_, _| Ok(()))?;
    Ok((s.max_audit, s.e_initial, s.e_final))
}

/// Energy drop of a preset under automatic steps.
pub fn energy_drop(n: usize, preset: Preset, anion_mass: f64, steps: usize) -> Result<(f64, f64)> {
    let spec = InitialSpec { preset, ..Default::default() };
    let mut sim = simulation(n, material(anion_mass), &spec, true)?;
    let ctl = RunControl { t_final: f64::INFINITY, max_steps: Some(steps), ..Default::default() };
    let s = run(&mut sim, &ctl, |_, _| Ok(()))?;
    Ok((s.e_initial, s.e_final))
}

/// ε = I + 2 d⊗d for the constant director at angle 0.5.
pub fn tilted_permittivity() -> Mat2 {
    epsilon_tensor(&Vec2::new(0.5f64.cos(), 0.5f64.sin()), &Permittivity { eps_perp: 1.0, eps_a: 2.0 })
}

/// Coefficient sets for the coercivity sampling: one Parodi, two not.
pub fn coercivity_sets() -> [LeslieCoefficients; 3] {
    [
        LeslieCoefficients::new(LESLIE),
        LeslieCoefficients::new([0.1, -0.8, 0.1, 1.0, 1.0, 0.5]),
        LeslieCoefficients::new([0.5, -1.2, -0.1, 0.8, 0.9, 0.2]),
    ]
}

#[derive(Debug, Clone, Copy)]
pub struct CoercivityStats {
    pub delta: f64,
    pub violations: usize,
    /// min over samples of (Q − δ|a|²) / (1 + |Q|).
    pub min_margin: f64,
}

/// Samples the dissipation form at random unit d, symmetric traceless D(v)
/// and rates a, comparing with δ|a|².
pub fn coercivity(c: &LeslieCoefficients, samples: usize, seed: u64) -> CoercivityStats {
    let delta = validate_leslie(c, DEFAULT_PARODI_TOL).delta.unwrap_or(f64::NAN);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    let mut min_margin = f64::INFINITY;
    for _ in 0..samples {
        let th: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let d = Vec2::new(th.cos(), th.sin());
        let (p, q): (f64, f64) = (rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
        let dv = Mat2::new(p, q, q, -p);
        let a = Vec2::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
        let form = dissipation_quadratic_form(c, &d, &dv, &a);
        let margin = (form - delta * a.norm_squared()) / (1.0 + form.abs());
        if !(margin >= -1e-14) {
            violations += 1;
        }
        min_margin = min_margin.min(margin);
    }
    CoercivityStats { delta, violations, min_margin }
}

#[derive(Debug, Clone)]
pub struct BoltzmannOutcome {
    pub verdict: Verdict,
    pub steps: usize,
    pub t: f64,
    pub grad_mu: f64,
    pub residual_max: f64,
    /// max_k ‖c_k − Z_k e^{−z_kΦ}‖∞ / ‖c_k‖∞ with Z_k from the species mass.
    pub boltzmann_error: f64,
}

pub fn boltzmann_error(grid: &Grid, c: &[Vec<f64>], phi: &[f64], species: &[IonSpecies]) -> f64 {
    let mut worst: f64 = 0.0;
    for (ck, sp) in c.iter().zip(species) {
        let b: Vec<f64> = phi.iter().map(|p| (-sp.valence * p).exp()).collect();
        let z = grid.integrate(ck) / grid.integrate(&b);
        let cmax = ck.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let err = ck.iter().zip(&b).fold(0.0f64, |m, (c, b)| m.max((c - z * b).abs()));
        worst = worst.max(err / cmax);
    }
    worst
}

/// Dynamic run from the perturbed-equilibrium preset with a net-charged
/// electrolyte until the residuals fall below `steady_tol`.
pub fn boltzmann_run(n: usize, steady_tol: f64, t_final: f64) -> Result<BoltzmannOutcome> {
    let spec = InitialSpec { preset: Preset::PerturbedEquilibrium, ..Default::default() };
    let mut sim = simulation(n, material(0.5), &spec, true)?;
    let ctl = RunControl { t_final, steady_tol, ..Default::default() };
    let s = run(&mut sim, &ctl, |_, _| Ok(()))?;
    let st = &sim.state;
    Ok(BoltzmannOutcome {
        verdict: s.verdict,
        steps: s.steps,
        t: s.t,
        grad_mu: s.residual.grad_mu,
        residual_max: s.residual.max(),
        boltzmann_error: boltzmann_error(&sim.model.grid, &st.ion.c, &st.phi, &sim.model.mat.species),
    })
}

/// ‖∇π − f‖₂ of the reconstructed pressure on a converged equilibrium.
pub fn pressure_residual(n: usize) -> Result<f64> {
    let g = Grid::unit_square(n);
    let mut mat = material(0.5);
    mat.permittivity = Permittivity::new(1.0, 1.5)?;
    let d0 = DirectorField::from_angle(&g.sample_cells(|x, y| 0.4 + 0.3 * (PI * x).cos() * (PI * y).cos()));
    let eq = solve_equilibrium(&g, &mat, &d0, &EquilibriumOptions::default())?;
    momentum_residual(&g, &eq, &mat)
}

/// L² error of the manufactured solution sin πx sin πy for a constant
/// permittivity tensor `eps` (smallest eigenvalue at least 1).
pub fn poisson_error(n: usize, eps: Mat2) -> Result<f64> {
    let g = Grid::unit_square(n);
    let field = EpsField::uniform(&g, eps, 1.0);
    let exact = g.sample_cells(|x, y| (PI * x).sin() * (PI * y).sin());
    let (diag, off) = ((eps[(0, 0)] + eps[(1, 1)]) * PI * PI, 2.0 * eps[(0, 1)] * PI * PI);
    let rho = g.sample_cells(|x, y| diag * (PI * x).sin() * (PI * y).sin() - off * (PI * x).cos() * (PI * y).cos());
    let opts = SolverOptions { tol: 1e-12, ..Default::default() };
    let (phi, _) = solve_aniso_dirichlet(&g, &field, &rho, &opts, None)?;
    let diff: Vec<f64> = phi.iter().zip(&exact).map(|(a, b)| a - b).collect();
    Ok(g.l2(&diff))
}

/// The transport identity residual on a discretely solenoidal cellular flow
/// vanishing on the walls, with smooth Φ and d.
pub fn identity_residual(n: usize) -> f64 {
    let g = Grid::unit_square(n);
    let phi = g.sample_cells(|x, y| (PI * x).sin() * (PI * y).sin() + 0.5 * x * y);
    let d = DirectorField::from_angle(&g.sample_cells(|x, y| 0.4 + 0.6 * x * y + 0.3 * (2.0 * y).sin()));
    let psi = |x: f64, y: f64| ((PI * x).sin() * (PI * y).sin()).powi(2);
    let u = g.sample_xfaces(|x, y| (psi(x, y + 0.5 * g.hy) - psi(x, y - 0.5 * g.hy)) / g.hy);
    let v = g.sample_yfaces(|x, y| -(psi(x + 0.5 * g.hx, y) - psi(x - 0.5 * g.hx, y)) / g.hx);
    debug_assert!(divergence_inf(&g, &u, &v) < 1e-9);
    transport_identity_residual(&g, &phi, &d, &u, &v).abs()
}

/// Measured and analytic kinetic-energy decay rates of the lowest
/// free-slip mode under pure viscous flow.
pub fn taylor_green_rate(n: usize, alpha4: f64) -> Result<(f64, f64)> {
    let g = Grid::unit_square(n);
    let amp = 0.1;
    let u = g.sample_xfaces(|x, y| amp * (PI * x).sin() * (PI * y).cos());
    let v = g.sample_yfaces(|x, y| -amp * (PI * x).cos() * (PI * y).sin());
    let mut flow = FlowState::new(&g, u, v);
    let (dt, steps) = (1e-3, 200);
    let e0 = flow.kinetic_energy(&g);
    let zx = vec![0.0; g.xfaces()];
    let zy = vec![0.0; g.yfaces()];
    for _ in 0..steps {
        flow = ns_step(&g, &flow, (&zx, &zy), dt, alpha4, WallMode::FreeSlip, &SolverOptions::default())?;
    }
    let t = dt * steps as f64;
    let rate = -(flow.kinetic_energy(&g) / e0).ln() / t;
    Ok((rate, 2.0 * 2.0 * PI * PI * (alpha4 / 2.0)))
}

/// Least-squares slope of log₂ e against log₂ (1/h) for halving h.
pub fn observed_order(errors: &[f64]) -> f64 {
    let n = errors.len() as f64;
    let xs: Vec<f64> = (0..errors.len()).map(|k| k as f64).collect();
    let ys: Vec<f64> = errors.iter().map(|e| -e.log2()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}
