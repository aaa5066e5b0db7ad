//! Finite-volume simulation of nematic electrolytes: ion electrodiffusion,
//! anisotropic electrostatics, incompressible flow and Ericksen–Leslie
//! director dynamics on a rectangle, with diagnostics for mass, positivity,
//! unit length, energy dissipation and the equilibrium characterization.

pub mod director;
pub mod energy;
pub mod equilibrium;
pub mod error;
pub mod flow;
pub mod grid;
pub mod io;
pub mod material;
pub mod nernst_planck;
pub mod par;
pub mod poisson;
pub mod sim;

pub use error::{Error, Result};
