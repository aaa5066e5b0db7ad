use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nemel::equilibrium::{momentum_residual, solve_equilibrium};
use nemel::io::{parse_config, run_to_dir, write_equilibrium, RunConfig};
use nemel::material::ValidityReport;
use nemel::sim::twist_director;
use nemel::{par, Error};
use nemel_cli::suites::{run_suite, Suite};

#[derive(Parser)]
#[command(name = "nemel", version, about = "Nematic electrolyte simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the Leslie coefficients of a config and print the report.
    Validate { config: PathBuf },
    /// Run a simulation, writing the energy log and snapshots.
    Run {
        config: PathBuf,
        /// Output directory; defaults to [output] dir of the config.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        max_steps: Option<usize>,
        /// Run even if the coefficients violate the positivity conditions.
        #[arg(long)]
        override_validity: bool,
    },
    /// Solve for the equilibrium reached from the config's initial director.
    Equilibrium {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an invariant suite: conservation, dissipation, unitlength,
    /// boltzmann, convergence or appendixB.
    Verify {
        suite: String,
        /// Grid size; suites that compare resolutions use size/4, size/2, size.
        #[arg(long)]
        size: Option<usize>,
    },
}

const CONFIG_ERROR: u8 = 2;
const NUMERICAL_FAILURE: u8 = 3;
const SUITE_FAILURE: u8 = 4;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) => 1,
        e if e.is_config() => CONFIG_ERROR,
        _ => NUMERICAL_FAILURE,
    }
}

fn print_report(cfg: &RunConfig, r: &ValidityReport) {
    let l = &cfg.material.leslie;
    let a = l.alphas();
    println!("α1..α6 = {a:?}");
    println!("γ1 = {:.6}, γ2 = {:.6}, β = {:.6}", l.gamma1(), l.gamma2(), l.beta());
    println!("positivity conditions: {}", if r.satisfies_positivity { "satisfied" } else { "violated" });
    for v in &r.violations {
        println!("  violated: {v}");
    }
    println!("Parodi relation γ2 = α2 + α3: {}", if r.parodi_holds { "holds" } else { "does not hold" });
    match r.delta {
        Some(d) => println!("δ = γ1 − (γ2+α2+α3)²/(4β) = {d:.6e}"),
        None => println!("δ undefined (β ≤ 0)"),
    }
    println!("4βγ1 − (γ2+α2+α3)² = {:.6e}", r.discriminant);
    println!("βγ1 − γ2² = {:.6e}", r.parodi_discriminant);
    println!(
        "weak condition α1 + β ≥ 0, 4βγ1 − (γ2+α2+α3)² ≥ 0: {} (not sufficient)",
        if r.weak_condition_holds { "holds" } else { "fails" }
    );
    let p = &r.hp_params;
    println!(
        "equivalent parameters: μ_s = {:.6}, μ_0 = {:.6}, μ_V = {:.6}, μ_D = {:.6}, μ_L = {:.6}, μ_P = {:.6}",
        p.mu_s, p.mu_0, p.mu_v, p.mu_d, p.mu_l, p.mu_p
    );
}

fn execute(command: Command) -> Result<u8, Error> {
    match command {
        Command::Validate { config } => {
            let cfg = parse_config(&config)?;
            print_report(&cfg, &cfg.validity);
            Ok(if cfg.validity.satisfies_positivity { 0 } else { CONFIG_ERROR })
        }
        Command::Run { config, out, max_steps, override_validity } => {
            let cfg = parse_config(&config)?;
            if override_validity {
                if !cfg.validity.satisfies_positivity {
                    eprintln!("warning: running outside the positivity set: {}", cfg.validity.violations.join(", "));
                }
            } else {
                cfg.require_valid()?;
            }
            let out = out.unwrap_or_else(|| cfg.out_dir.clone());
            let result = run_to_dir(&cfg, &out, max_steps)?;
            let s = &result.summary;
            println!("verdict: {}", s.verdict.as_str());
            println!("steps: {}, t = {:.6e}", s.steps, s.t);
            println!("energy: {:.10e} → {:.10e}", s.e_initial, s.e_final);
            println!("max relative mass drift: {:.3e}", s.mass_drift);
            println!("min concentration: {:.6e}", s.min_c);
            println!("max ||d| − 1|: {:.3e}", s.max_len_dev);
            println!("max |audit residual|: {:.3e}", s.max_audit);
            println!("final residual: {:.3e}", s.residual.max());
            println!("log: {}", result.log.display());
            println!("final snapshot: {}", result.final_snapshot.display());
            Ok(0)
        }
        Command::Equilibrium { config, out } => {
            let cfg = parse_config(&config)?;
            cfg.require_valid()?;
            let d0 = twist_director(&cfg.grid, cfg.initial.angle, cfg.initial.amplitude);
            let eq = solve_equilibrium(&cfg.grid, &cfg.material, &d0, &cfg.equilibrium)?;
            let out = out.unwrap_or_else(|| cfg.out_dir.join("equilibrium"));
            write_equilibrium(&out, &cfg.grid, &eq)?;
            println!("iterations: {}", eq.iterations);
            println!("Poisson–Boltzmann residual: {:.3e}", eq.poisson_residual);
            println!("director residual: {:.3e}", eq.director_residual);
            println!("prefactors Z_k: {:?}", eq.prefactors);
            println!("pressure balance ‖∇π − f‖₂: {:.3e}", momentum_residual(&cfg.grid, &eq, &cfg.material)?);
            println!("fields: {}", out.display());
            Ok(0)
        }
        Command::Verify { suite, size } => {
            let Some(s) = Suite::parse(&suite) else {
                let names: Vec<&str> = Suite::ALL.iter().map(|s| s.name()).collect();
                return Err(Error::Config(format!("unknown suite \"{suite}\"; expected one of {}", names.join(", "))));
            };
            let checks = run_suite(s, size)?;
            for c in &checks {
                println!("{c}");
            }
            Ok(if checks.iter().all(|c| c.pass) { 0 } else { SUITE_FAILURE })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = par::threads_from_env();
    match par::with_threads(threads, || execute(cli.command)) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
