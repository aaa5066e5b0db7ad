//! Constitutive constants and pointwise constitutive tensors.

use crate::error::{Error, Result};
use nalgebra::{Matrix2, SymmetricEigen, Vector2};

pub type Mat2 = Matrix2<f64>;
pub type Vec2 = Vector2<f64>;

/// Leslie viscosities. The derived coefficients are computed from the
/// alphas on construction and cannot be set independently.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeslieCoefficients {
    alpha: [f64; 6],
    gamma1: f64,
    gamma2: f64,
    beta: f64,
    mu0: f64,
}

impl LeslieCoefficients {
    pub fn new(alpha: [f64; 6]) -> Self {
        let [a1, a2, a3, _, a5, a6] = alpha;
        Self {
            alpha,
            gamma1: a3 - a2,
            gamma2: a6 - a5,
            beta: a5 + a6,
            mu0: a1 + a5 + a6,
        }
    }

    /// Only α4 nonzero: an isotropic Newtonian fluid with a passive director.
    pub fn newtonian(alpha4: f64) -> Self {
        Self::new([0.0, 0.0, 0.0, alpha4, 0.0, 0.0])
    }

    pub fn alpha(&self, k: usize) -> f64 {
        self.alpha[k - 1]
    }
    pub fn alphas(&self) -> [f64; 6] {
        self.alpha
    }
    pub fn gamma1(&self) -> f64 {
        self.gamma1
    }
    pub fn gamma2(&self) -> f64 {
        self.gamma2
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn mu0(&self) -> f64 {
        self.mu0
    }
    /// γ2 + α2 + α3, the coefficient of the cross term in the rotational dissipation.
    pub fn cross(&self) -> f64 {
        self.gamma2 + self.alpha[1] + self.alpha[2]
    }
}

/// Coefficients of the equivalent (μ_s, μ_0, μ_V, μ_D, μ_L, μ_P) parametrization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HpParams {
    pub mu_s: f64,
    pub mu_0: f64,
    pub mu_v: f64,
    pub mu_d: f64,
    pub mu_l: f64,
    pub mu_p: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidityReport {
    pub satisfies_positivity: bool,
    pub parodi_holds: bool,
    /// γ1 − (γ2+α2+α3)²/(4β), present when β > 0.
    pub delta: Option<f64>,
    pub hp_params: HpParams,
    /// 4βγ1 − (γ2+α2+α3)².
    pub discriminant: f64,
    /// βγ1 − γ2², the reduced condition when the Parodi relation holds.
    pub parodi_discriminant: f64,
    /// α1 + β ≥ 0 and 4βγ1 − (γ2+α2+α3)² ≥ 0. Reported only; never accepted in place of positivity.
    pub weak_condition_holds: bool,
    pub violations: Vec<&'static str>,
}

pub const DEFAULT_PARODI_TOL: f64 = 1e-12;

pub fn validate_leslie(c: &LeslieCoefficients, tol: f64) -> ValidityReport {
    let a = c.alpha;
    let s = c.cross();
    let discriminant = 4.0 * c.beta * c.gamma1 - s * s;
    let mut violations = Vec::new();
    if !(c.gamma1 > 0.0) {
        violations.push("γ1 > 0");
    }
    if !(a[3] > 0.0) {
        violations.push("α4 > 0");
    }
    if !(a[0] >= 0.0) {
        violations.push("α1 ≥ 0");
    }
    if !(discriminant > 0.0) {
        violations.push("4βγ1 − (γ2+α2+α3)² > 0");
    }
    let mu_p = 0.5 * (c.gamma2 - (a[1] + a[2]));
    let hp_params = HpParams {
        mu_s: a[3],
        mu_0: c.mu0,
        mu_v: c.gamma1,
        mu_d: -c.gamma2,
        mu_l: (c.beta * c.gamma1 - 0.25 * s * s) / c.gamma1,
        mu_p,
    };
    ValidityReport {
        satisfies_positivity: violations.is_empty(),
        parodi_holds: (c.gamma2 - (a[1] + a[2])).abs() <= tol,
        delta: (c.beta > 0.0).then(|| c.gamma1 - s * s / (4.0 * c.beta)),
        hp_params,
        discriminant,
        parodi_discriminant: c.beta * c.gamma1 - c.gamma2 * c.gamma2,
        weak_condition_holds: a[0] + c.beta >= 0.0 && discriminant >= 0.0,
        violations,
    }
}

/// One ionic species.
#[derive(Debug, Clone, PartialEq)]
pub struct IonSpecies {
    pub valence: f64,
    pub diffusion: Mat2,
    pub mass: f64,
}

impl IonSpecies {
    pub fn new(valence: f64, diffusion: Mat2, mass: f64) -> Result<Self> {
        let sym = (diffusion[(0, 1)] - diffusion[(1, 0)]).abs();
        if sym > 1e-14 * diffusion.norm().max(1.0) {
            return Err(Error::Config(format!("diffusion matrix is not symmetric: {diffusion}")));
        }
        let sp = Self { valence, diffusion, mass };
        if !(sp.min_diffusivity() > 0.0) {
            return Err(Error::Config("diffusion matrix must be positive definite".into()));
        }
        if !(mass > 0.0) || !valence.is_finite() {
            return Err(Error::Config("species mass must be positive and valence finite".into()));
        }
        Ok(sp)
    }

    pub fn scalar(valence: f64, diffusivity: f64, mass: f64) -> Result<Self> {
        Self::new(valence, Mat2::identity() * diffusivity, mass)
    }

    pub fn min_diffusivity(&self) -> f64 {
        SymmetricEigen::new(self.diffusion).eigenvalues.min()
    }

    pub fn max_diffusivity(&self) -> f64 {
        SymmetricEigen::new(self.diffusion).eigenvalues.max()
    }

    pub fn is_diagonal(&self) -> bool {
        self.diffusion[(0, 1)] == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Permittivity {
    pub eps_perp: f64,
    pub eps_a: f64,
}

impl Permittivity {
    pub fn new(eps_perp: f64, eps_a: f64) -> Result<Self> {
        if !(eps_perp > 0.0) || !(eps_a >= 0.0) {
            return Err(Error::Config(format!(
                "permittivity requires eps_perp > 0 and eps_a ≥ 0 (got {eps_perp}, {eps_a})"
            )));
        }
        Ok(Self { eps_perp, eps_a })
    }
}

/// Every material constant of the model.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialParams {
    pub leslie: LeslieCoefficients,
    pub species: Vec<IonSpecies>,
    pub permittivity: Permittivity,
}

impl MaterialParams {
    /// Smallest eigenvalue over all diffusion matrices.
    pub fn alpha_min(&self) -> f64 {
        self.species
            .iter()
            .map(IonSpecies::min_diffusivity)
            .fold(f64::INFINITY, f64::min)
    }
}

/// ε(d) = ε⊥ I + ε_a d⊗d.
pub fn epsilon_tensor(d: &Vec2, p: &Permittivity) -> Mat2 {
    Mat2::identity() * p.eps_perp + d * d.transpose() * p.eps_a
}

/// P(d) = I − d⊗d.
pub fn projector(d: &Vec2) -> Mat2 {
    Mat2::identity() - d * d.transpose()
}

fn check_symmetric(dv: &Mat2) -> Result<()> {
    let gap = (dv[(0, 1)] - dv[(1, 0)]).abs();
    if gap > 1e-12 * dv.abs().max().max(1.0) {
        return Err(Error::NonSymmetricStrain(gap));
    }
    Ok(())
}

/// Leslie stress in the projected form used by the solver:
/// μ0(Dd·d)d⊗d + α2 P d̊⊗d + α3 d⊗P d̊ + α4 D + α5 (P Dd)⊗d + α6 d⊗(P Dd).
pub fn leslie_stress(c: &LeslieCoefficients, dv: &Mat2, d: &Vec2, d_ring: &Vec2) -> Result<Mat2> {
    check_symmetric(dv)?;
    Ok(leslie_stress_unchecked(c, dv, d, d_ring))
}

pub(crate) fn leslie_stress_unchecked(c: &LeslieCoefficients, dv: &Mat2, d: &Vec2, d_ring: &Vec2) -> Mat2 {
    let a = c.alpha;
    let p = projector(d);
    let dd = dv * d;
    let pr = p * d_ring;
    let pdd = p * dd;
    d * d.transpose() * (c.mu0 * dd.dot(d))
        + pr * d.transpose() * a[1]
        + d * pr.transpose() * a[2]
        + dv * a[3]
        + pdd * d.transpose() * a[4]
        + d * pdd.transpose() * a[5]
}

/// Leslie stress in the classical form
/// α1(Dd·d)d⊗d + α2 d̊⊗d + α3 d⊗d̊ + α4 D + α5 Dd⊗d + α6 d⊗Dd.
pub fn leslie_stress_classical(c: &LeslieCoefficients, dv: &Mat2, d: &Vec2, d_ring: &Vec2) -> Result<Mat2> {
    check_symmetric(dv)?;
    let a = c.alpha;
    let dd = dv * d;
    Ok(d * d.transpose() * (a[0] * dd.dot(d))
        + d_ring * d.transpose() * a[1]
        + d * d_ring.transpose() * a[2]
        + dv * a[3]
        + dd * d.transpose() * a[4]
        + d * dd.transpose() * a[5])
}

/// α1(d·Dd)² + (γ2+α2+α3)(a·Dd) + β|Dd|² + γ1|a|².
pub fn dissipation_quadratic_form(c: &LeslieCoefficients, d: &Vec2, dv: &Mat2, a: &Vec2) -> f64 {
    let dd = dv * d;
    let s = d.dot(&dd);
    c.alpha[0] * s * s + c.cross() * a.dot(&dd) + c.beta * dd.norm_squared() + c.gamma1 * a.norm_squared()
}
