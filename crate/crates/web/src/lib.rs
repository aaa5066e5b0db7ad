//! WebAssembly bindings for the browser demo in `www/`.

use std::f64::consts::PI;

use nemel::equilibrium::{solve_equilibrium, EquilibriumOptions};
use nemel::grid::Grid;
use nemel::material::{validate_leslie, IonSpecies, LeslieCoefficients, MaterialParams, Permittivity, DEFAULT_PARODI_TOL};
use nemel::sim::{initial_state, stable_dt, twist_director, InitialSpec, Model, Preset, Simulation};
use wasm_bindgen::prelude::*;

fn js(e: nemel::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Validity report for six Leslie coefficients.
#[wasm_bindgen(getter_with_clone)]
#[derive(Debug, Clone)]
pub struct Validity {
    pub valid: bool,
    pub parodi: bool,
    /// NaN when β ≤ 0.
    pub delta: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub violations: String,
}

#[wasm_bindgen]
pub fn check_leslie(alphas: &[f64]) -> Result<Validity, JsError> {
    check(alphas).map_err(js)
}

pub fn check(alphas: &[f64]) -> nemel::Result<Validity> {
    let a: [f64; 6] = alphas
        .try_into()
        .map_err(|_| nemel::Error::Config(format!("expected 6 coefficients, got {}", alphas.len())))?;
    if a.iter().any(|x| !x.is_finite()) {
        return Err(nemel::Error::Config("coefficients must be finite".into()));
    }
    let c = LeslieCoefficients::new(a);
    let r = validate_leslie(&c, DEFAULT_PARODI_TOL);
    Ok(Validity {
        valid: r.satisfies_positivity,
        parodi: r.parodi_holds,
        delta: r.delta.unwrap_or(f64::NAN),
        gamma1: c.gamma1(),
        gamma2: c.gamma2(),
        violations: r.violations.join(", "),
    })
}

fn material(eps_a: f64, anion_mass: f64) -> nemel::Result<MaterialParams> {
    Ok(MaterialParams {
        leslie: LeslieCoefficients::new([0.1, -0.8, 0.1, 1.0, 1.0, 0.3]),
        species: vec![IonSpecies::scalar(1.0, 1.0, 1.0)?, IonSpecies::scalar(-1.0, 1.0, anion_mass)?],
        permittivity: Permittivity::new(1.0, eps_a)?,
    })
}

/// A running simulation on the unit square.
#[wasm_bindgen]
pub struct Demo {
    sim: Simulation,
}

impl Demo {
    pub fn create(n: usize, preset: &str, eps_a: f64, anion_mass: f64) -> nemel::Result<Demo> {
        let preset = Preset::parse(preset).ok_or_else(|| nemel::Error::Config(format!("unknown preset {preset}")))?;
        let model = Model::new(Grid::new(n, n, 1.0, 1.0)?, material(eps_a, anion_mass)?);
        let spec = InitialSpec { preset, amplitude: 0.6, ..Default::default() };
        let state = initial_state(&model, &spec, &EquilibriumOptions::default())?;
        Ok(Demo { sim: Simulation::new(model, state, 0)? })
    }

    pub fn run_steps(&mut self, steps: usize) -> nemel::Result<()> {
        for _ in 0..steps {
            let dt = stable_dt(&self.sim.model, &self.sim.state, 0.4);
            self.sim.advance(dt)?;
        }
        Ok(())
    }
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(n: usize, preset: &str, eps_a: f64, anion_mass: f64) -> Result<Demo, JsError> {
        Demo::create(n, preset, eps_a, anion_mass).map_err(js)
    }

    pub fn advance(&mut self, steps: usize) -> Result<(), JsError> {
        self.run_steps(steps).map_err(js)
    }

    pub fn size(&self) -> usize {
        self.sim.model.grid.nx
    }

    pub fn time(&self) -> f64 {
        self.sim.state.t
    }

    pub fn step_count(&self) -> usize {
        self.sim.step
    }

    pub fn energy(&self) -> f64 {
        self.sim.energy.e_total
    }

    /// Largest equilibrium residual; NaN if it cannot be evaluated.
    pub fn residual(&self) -> f64 {
        self.sim.residual().map(|r| r.max()).unwrap_or(f64::NAN)
    }

    /// Director angle in (−π/2, π/2], row-major from the bottom row.
    pub fn director_angle(&self) -> Vec<f64> {
        let d = &self.sim.state.director;
        d.d1.iter().zip(&d.d2).map(|(a, b)| head_to_tail(b.atan2(*a))).collect()
    }

    /// Charge density Σ z_k c_k.
    pub fn charge(&self) -> Vec<f64> {
        self.sim.state.ion.charge(&self.sim.model.mat.species)
    }

    pub fn potential(&self) -> Vec<f64> {
        self.sim.state.phi.clone()
    }

    /// Speed at cell centres.
    pub fn speed(&self) -> Vec<f64> {
        let (uc, vc) = self.sim.model.grid.velocity_at_cells(&self.sim.state.flow.u, &self.sim.state.flow.v);
        uc.iter().zip(&vc).map(|(u, v)| u.hypot(*v)).collect()
    }
}

fn head_to_tail(theta: f64) -> f64 {
    if theta > PI / 2.0 {
        theta - PI
    } else if theta <= -PI / 2.0 {
        theta + PI
    } else {
        theta
    }
}

/// Equilibrium potential and director angle from a twisted start.
#[wasm_bindgen(getter_with_clone)]
pub struct Equilibrium {
    pub phi: Vec<f64>,
    pub angle: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

pub fn equilibrium(n: usize, eps_a: f64, anion_mass: f64) -> nemel::Result<Equilibrium> {
    let grid = Grid::new(n, n, 1.0, 1.0)?;
    let mat = material(eps_a, anion_mass)?;
    let d0 = twist_director(&grid, 0.0, 0.6);
    let eq = solve_equilibrium(&grid, &mat, &d0, &EquilibriumOptions::default())?;
    let angle = eq.director.d1.iter().zip(&eq.director.d2).map(|(a, b)| head_to_tail(b.atan2(*a))).collect();
    Ok(Equilibrium {
        phi: eq.phi,
        angle,
        iterations: eq.iterations,
        residual: eq.poisson_residual.max(eq.director_residual),
    })
}

#[wasm_bindgen]
pub fn solve_equilibrium_demo(n: usize, eps_a: f64, anion_mass: f64) -> Result<Equilibrium, JsError> {
    equilibrium(n, eps_a, anion_mass).map_err(js)
}
