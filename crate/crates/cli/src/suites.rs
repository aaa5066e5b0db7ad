//! Invariant suites behind `nemel verify`.

use std::fmt;

use nemel::material::{validate_leslie, Mat2, DEFAULT_PARODI_TOL};
use nemel::sim::{Preset, Verdict};
use nemel::{Error, Result};

use crate::scenarios::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Conservation,
    Dissipation,
    UnitLength,
    Boltzmann,
    Convergence,
    AppendixB,
}

impl Suite {
    pub const ALL: [Suite; 6] = [
        Suite::Conservation,
        Suite::Dissipation,
        Suite::UnitLength,
        Suite::Boltzmann,
        Suite::Convergence,
        Suite::AppendixB,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Conservation => "conservation",
            Suite::Dissipation => "dissipation",
            Suite::UnitLength => "unitlength",
            Suite::Boltzmann => "boltzmann",
            Suite::Convergence => "convergence",
            Suite::AppendixB => "appendixB",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Suite::ALL.into_iter().find(|x| x.name().eq_ignore_ascii_case(s))
    }

    pub fn default_size(self) -> usize {
        match self {
            Suite::Conservation | Suite::UnitLength => 64,
            Suite::Dissipation | Suite::Boltzmann => 32,
            Suite::Convergence | Suite::AppendixB => 128,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub measured: String,
    pub pass: bool,
}

impl Check {
    fn new(name: impl Into<String>, pass: bool, measured: String) -> Self {
        Self { name: name.into(), measured, pass }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}: {}", if self.pass { "PASS" } else { "FAIL" }, self.name, self.measured)
    }
}

fn halvings(size: usize) -> Result<[usize; 3]> {
    if size < 16 || !size.is_multiple_of(4) {
        return Err(Error::Config(format!("size must be a multiple of 4 and at least 16, got {size}")));
    }
    Ok([size / 4, size / 2, size])
}

fn sci(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn in_range(x: f64, lo: f64, hi: f64) -> bool {
    (lo..=hi).contains(&x)
}

pub fn run_suite(suite: Suite, size: Option<usize>) -> Result<Vec<Check>> {
    let n = size.unwrap_or(suite.default_size());
    if n < 4 {
        return Err(Error::Config(format!("size must be at least 4, got {n}")));
    }
    match suite {
        Suite::Conservation => conservation(n),
        Suite::Dissipation => dissipation(n),
        Suite::UnitLength => unit_length(n),
        Suite::Boltzmann => boltzmann(n),
        Suite::Convergence => convergence(n),
        Suite::AppendixB => appendix_b(n),
    }
}

fn conservation(n: usize) -> Result<Vec<Check>> {
    let trace = smoke_run(n, 1000)?;
    let rate = positivity_decay_rate(&trace);
    let min_c = trace.min_c.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(vec![
        Check::new("mass drift ≤ 1e-12", trace.mass_drift <= 1e-12, format!("{:.3e} over {} steps", trace.mass_drift, trace.summary.steps)),
        Check::new("min c > 0 at every step", min_c > 0.0, format!("{min_c:.6e}")),
        Check::new("log min c decays at most linearly (B ≤ 10)", rate <= 10.0, format!("B = {rate:.3e}")),
    ])
}

fn dissipation(n: usize) -> Result<Vec<Check>> {
    let h = 1.0 / n as f64;
    let dt = h * h / 8.0;
    let t_final = 400.0 * dt;
    let (coarse, e0, e1) = audit(n, Preset::Twist, 1.0, dt, t_final)?;
    let (fine, _, _) = audit(n, Preset::Twist, 1.0, dt / 2.0, t_final)?;
    let ratio = coarse / fine;
    let mut checks = vec![
        Check::new(
            "audit max|r| ratio under dt halving ∈ [1.6, 2.6]",
            in_range(ratio, 1.6, 2.6),
            format!("{coarse:.4e} / {fine:.4e} = {ratio:.3}"),
        ),
        Check::new("twist: E decreases", e1 < e0, format!("{e0:.10e} → {e1:.10e}")),
    ];
    for preset in [Preset::Uniform, Preset::Twist, Preset::PerturbedEquilibrium, Preset::ShearCell] {
        let (e0, e1) = energy_drop(n, preset, 0.5, 200)?;
        checks.push(Check::new(format!("{}: E_final < E_0", preset.name()), e1 < e0, format!("{e0:.10e} → {e1:.10e}")));
    }
    for (k, c) in coercivity_sets().iter().enumerate() {
        let parodi = validate_leslie(c, DEFAULT_PARODI_TOL).parodi_holds;
        let s = coercivity(c, 100_000, 7 + k as u64);
        checks.push(Check::new(
            format!("coercivity, set {} ({})", k + 1, if parodi { "Parodi" } else { "non-Parodi" }),
            s.violations == 0,
            format!("δ = {:.4}, {} violations in 1e5 samples, min margin {:.3e}", s.delta, s.violations, s.min_margin),
        ));
    }
    Ok(checks)
}

fn unit_length(n: usize) -> Result<Vec<Check>> {
    let h = 1.0 / n as f64;
    let dt = h * h / 8.0;
    let fine_n = (n as f64 * std::f64::consts::SQRT_2).round() as usize;
    let t_final = 0.01;
    let coarse = unit_length_deviation(n, dt, t_final)?;
    let fine = unit_length_deviation(fine_n, dt / 2.0, t_final)?;
    let ratio = coarse / fine;
    Ok(vec![
        Check::new(format!("max||d|−1| ≤ 1e-3 at {n}², dt = h²/8"), coarse <= 1e-3, format!("{coarse:.4e}")),
        Check::new(
            format!("deviation ratio {n}² → {fine_n}² with dt/2 ∈ [1.7, 2.4]"),
            in_range(ratio, 1.7, 2.4),
            format!("{coarse:.4e} / {fine:.4e} = {ratio:.3}"),
        ),
    ])
}

fn boltzmann(n: usize) -> Result<Vec<Check>> {
    let tol = 1e-5;
    let o = boltzmann_run(n, tol, 5.0)?;
    Ok(vec![
        Check::new(
            "converged-to-equilibrium",
            o.verdict == Verdict::ConvergedToEquilibrium && o.residual_max < tol,
            format!("{} after {} steps, t = {:.4}, residual {:.3e}", o.verdict.as_str(), o.steps, o.t, o.residual_max),
        ),
        Check::new("∇μ residual < steady_tol", o.grad_mu < tol, format!("{:.3e}", o.grad_mu)),
        Check::new("Boltzmann profile error ≤ 1e-4", o.boltzmann_error <= 1e-4, format!("{:.3e}", o.boltzmann_error)),
    ])
}

fn ratio_checks(label: &str, errors: &[f64], lo: f64, hi: f64) -> Check {
    let ratios: Vec<f64> = errors.windows(2).map(|w| w[0] / w[1]).collect();
    let pass = ratios.iter().all(|r| in_range(*r, lo, hi));
    let shown: Vec<String> = ratios.iter().map(|r| format!("{r:.3}")).collect();
    Check::new(format!("{label} error ratios ∈ [{lo}, {hi}]"), pass, format!("{}, ratios {}", sci(errors), shown.join(", ")))
}

fn convergence(n: usize) -> Result<Vec<Check>> {
    let ns = halvings(n)?;
    let iso: Vec<f64> = ns.iter().map(|&k| poisson_error(k, Mat2::identity())).collect::<Result<_>>()?;
    let aniso: Vec<f64> = ns.iter().map(|&k| poisson_error(k, tilted_permittivity())).collect::<Result<_>>()?;
    let pressure: Vec<f64> = ns.iter().map(|&k| pressure_residual(k)).collect::<Result<_>>()?;
    let order = observed_order(&pressure);
    let (rate, exact) = taylor_green_rate(ns[1], 0.1)?;
    let rel = (rate / exact - 1.0).abs();
    Ok(vec![
        ratio_checks("isotropic Poisson", &iso, 3.5, 4.5),
        ratio_checks("anisotropic Poisson", &aniso, 3.5, 4.5),
        Check::new(
            format!("pressure reconstruction order over {}..{} ≥ 1.7", ns[0], ns[2]),
            order >= 1.7,
            format!("{}, order {order:.3}", sci(&pressure)),
        ),
        Check::new(
            format!("viscous decay rate within 3% at {}²", ns[1]),
            rel <= 0.03,
            format!("{rate:.5} vs {exact:.5} ({:.2}%)", 100.0 * rel),
        ),
    ])
}

fn appendix_b(n: usize) -> Result<Vec<Check>> {
    let ns = halvings(n)?;
    let e: Vec<f64> = ns.iter().map(|&k| identity_residual(k)).collect();
    let orders: Vec<f64> = e.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    Ok(vec![Check::new(
        "transport identity residual order ≥ 1.7",
        orders.iter().all(|o| *o >= 1.7),
        format!("{}, orders {orders:.3?}", sci(&e)),
    )])
}
