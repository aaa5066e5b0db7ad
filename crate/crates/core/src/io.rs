//! Configuration files, field snapshots and the energy log.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::director::DirectorField;
use crate::equilibrium::{EquilibriumOptions, EquilibriumSolution};
use crate::error::{Error, Result};
use crate::flow::{FlowState, WallMode};
use crate::grid::Grid;
use crate::material::{
    validate_leslie, IonSpecies, LeslieCoefficients, Mat2, MaterialParams, Permittivity, ValidityReport,
    DEFAULT_PARODI_TOL,
};
use crate::nernst_planck::IonState;
use crate::poisson::SolverOptions;
use crate::sim::{self, DtPolicy, InitialSpec, LogRow, Model, Preset, RunControl, RunSummary, Simulation, State};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    grid: GridSection,
    leslie: LeslieSection,
    species: BTreeMap<String, SpeciesSection>,
    permittivity: PermittivitySection,
    #[serde(default)]
    time: TimeSection,
    #[serde(default)]
    initial: InitialSection,
    #[serde(default)]
    output: OutputSection,
    #[serde(default)]
    tolerances: ToleranceSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSection {
    nx: usize,
    ny: usize,
    #[serde(default = "one")]
    lx: f64,
    #[serde(default = "one")]
    ly: f64,
    #[serde(default)]
    wall: Wall,
}

#[derive(Debug, Default, Deserialize, Clone, Copy)]
#[serde(rename_all = "kebab-case")]
enum Wall {
    #[default]
    NoSlip,
    FreeSlip,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LeslieSection {
    alpha1: f64,
    alpha2: f64,
    alpha3: f64,
    alpha4: f64,
    alpha5: f64,
    alpha6: f64,
    #[serde(default = "parodi_tol")]
    parodi_tol: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpeciesSection {
    valence: f64,
    diffusivity: Diffusivity,
    mass: f64,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Diffusivity {
    Scalar(f64),
    Matrix([[f64; 2]; 2]),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PermittivitySection {
    eps_perp: f64,
    #[serde(default)]
    eps_a: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TimeSection {
    #[serde(default)]
    dt: Step,
    #[serde(default = "safety")]
    safety: f64,
    #[serde(default = "one")]
    t_final: f64,
    max_steps: Option<usize>,
    #[serde(default = "yes")]
    renormalize: bool,
}

impl Default for TimeSection {
    fn default() -> Self {
        Self { dt: Step::default(), safety: safety(), t_final: 1.0, max_steps: None, renormalize: true }
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Step {
    Fixed(f64),
    Named(String),
}

impl Default for Step {
    fn default() -> Self {
        Step::Named("auto".into())
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct InitialSection {
    #[serde(default = "twist")]
    preset: String,
    #[serde(default)]
    angle: f64,
    #[serde(default = "amplitude")]
    amplitude: f64,
    #[serde(default = "ion_amplitude")]
    ion_amplitude: f64,
    /// Snapshot directory to resume from instead of a preset.
    restart: Option<PathBuf>,
}

impl Default for InitialSection {
    fn default() -> Self {
        Self { preset: twist(), angle: 0.0, amplitude: amplitude(), ion_amplitude: ion_amplitude(), restart: None }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    #[serde(default = "out_dir")]
    dir: PathBuf,
    #[serde(default)]
    snapshot_every: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: out_dir(), snapshot_every: 0 }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ToleranceSection {
    #[serde(default = "solver_tol")]
    poisson: f64,
    #[serde(default = "solver_tol")]
    pressure: f64,
    #[serde(default = "equilibrium_tol")]
    equilibrium: f64,
    /// Equilibrium-residual threshold for early stopping; 0 disables.
    #[serde(default)]
    steady: f64,
    #[serde(default = "dt_floor")]
    dt_floor: f64,
    #[serde(default = "ceiling")]
    ceiling: f64,
}

impl Default for ToleranceSection {
    fn default() -> Self {
        Self {
            poisson: solver_tol(),
            pressure: solver_tol(),
            equilibrium: equilibrium_tol(),
            steady: 0.0,
            dt_floor: dt_floor(),
            ceiling: ceiling(),
        }
    }
}

fn one() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}
fn parodi_tol() -> f64 {
    DEFAULT_PARODI_TOL
}
fn safety() -> f64 {
    0.4
}
fn twist() -> String {
    "twist".into()
}
fn amplitude() -> f64 {
    0.3
}
fn ion_amplitude() -> f64 {
    0.2
}
fn out_dir() -> PathBuf {
    "out".into()
}
fn solver_tol() -> f64 {
    1e-10
}
fn equilibrium_tol() -> f64 {
    1e-9
}
fn dt_floor() -> f64 {
    1e-12
}
fn ceiling() -> f64 {
    1e8
}

/// A fully validated run description.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub grid: Grid,
    pub material: MaterialParams,
    pub validity: ValidityReport,
    pub wall: WallMode,
    pub renormalize: bool,
    pub poisson: SolverOptions,
    pub pressure: SolverOptions,
    pub equilibrium: EquilibriumOptions,
    pub initial: InitialSpec,
    pub restart: Option<PathBuf>,
    pub control: RunControl,
    pub out_dir: PathBuf,
    pub snapshot_every: usize,
}

impl RunConfig {
    pub fn model(&self) -> Model {
        Model {
            grid: self.grid,
            mat: self.material.clone(),
            renormalize: self.renormalize,
            wall: self.wall,
            poisson: self.poisson,
            pressure: self.pressure,
        }
    }

    /// Refuses coefficient sets outside the positivity conditions.
    pub fn require_valid(&self) -> Result<()> {
        if self.validity.satisfies_positivity {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "Leslie coefficients violate: {} (pass --override-validity to run anyway)",
                self.validity.violations.join(", ")
            )))
        }
    }
}

fn finite(name: &str, x: f64) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::Config(format!("{name} must be finite, got {x}")))
    }
}

fn positive(name: &str, x: f64) -> Result<f64> {
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(Error::Config(format!("{name} must be positive and finite, got {x}")))
    }
}

/// Parses a configuration document. The Leslie validity verdict is recorded
/// but not enforced; see [`RunConfig::require_valid`].
pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let f: ConfigFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let g = &f.grid;
    let grid = Grid::new(g.nx, g.ny, positive("grid.lx", g.lx)?, positive("grid.ly", g.ly)?)?;
    let l = &f.leslie;
    let alpha = [l.alpha1, l.alpha2, l.alpha3, l.alpha4, l.alpha5, l.alpha6];
    for (k, a) in alpha.iter().enumerate() {
        finite(&format!("leslie.alpha{}", k + 1), *a)?;
    }
    let leslie = LeslieCoefficients::new(alpha);
    let validity = validate_leslie(&leslie, finite("leslie.parodi_tol", l.parodi_tol)?);
    if f.species.is_empty() {
        return Err(Error::Config("at least one [species.k] table is required".into()));
    }
    let mut keyed: Vec<(&String, &SpeciesSection)> = f.species.iter().collect();
    if keyed.iter().all(|(k, _)| k.parse::<u64>().is_ok()) {
        keyed.sort_by_key(|(k, _)| k.parse::<u64>().unwrap_or(0));
    }
    let mut species = Vec::with_capacity(keyed.len());
    for (key, s) in keyed {
        let d = match s.diffusivity {
            Diffusivity::Scalar(x) => Mat2::identity() * finite("diffusivity", x)?,
            Diffusivity::Matrix(m) => Mat2::new(m[0][0], m[0][1], m[1][0], m[1][1]),
        };
        if d.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config(format!("species.{key}: diffusivity must be finite")));
        }
        let sp = IonSpecies::new(finite("valence", s.valence)?, d, positive("mass", s.mass)?)
            .map_err(|e| Error::Config(format!("species.{key}: {e}")))?;
        species.push(sp);
    }
    let permittivity = Permittivity::new(
        finite("permittivity.eps_perp", f.permittivity.eps_perp)?,
        finite("permittivity.eps_a", f.permittivity.eps_a)?,
    )?;
    let t = &f.time;
    let dt = match &t.dt {
        Step::Fixed(x) => DtPolicy::Fixed(positive("time.dt", *x)?),
        Step::Named(s) if s == "auto" => DtPolicy::Auto { safety: positive("time.safety", t.safety)? },
        Step::Named(s) => return Err(Error::Config(format!("time.dt must be a number or \"auto\", got \"{s}\""))),
    };
    let preset = Preset::parse(&f.initial.preset).ok_or_else(|| {
        Error::Config(format!(
            "initial.preset \"{}\" is not one of uniform, twist, perturbed-equilibrium, shear-cell",
            f.initial.preset
        ))
    })?;
    let tol = &f.tolerances;
    let solver = |name: &str, x: f64| -> Result<SolverOptions> {
        Ok(SolverOptions { tol: positive(name, x)?, ..SolverOptions::default() })
    };
    let equilibrium = EquilibriumOptions { tol: positive("tolerances.equilibrium", tol.equilibrium)?, ..Default::default() };
    if !(tol.steady >= 0.0 && tol.steady.is_finite()) {
        return Err(Error::Config("tolerances.steady must be finite and non-negative".into()));
    }
    Ok(RunConfig {
        grid,
        material: MaterialParams { leslie, species, permittivity },
        validity,
        wall: match g.wall {
            Wall::NoSlip => WallMode::NoSlip,
            Wall::FreeSlip => WallMode::FreeSlip,
        },
        renormalize: t.renormalize,
        poisson: solver("tolerances.poisson", tol.poisson)?,
        pressure: solver("tolerances.pressure", tol.pressure)?,
        equilibrium,
        initial: InitialSpec {
            preset,
            angle: finite("initial.angle", f.initial.angle)?,
            amplitude: finite("initial.amplitude", f.initial.amplitude)?,
            ion_amplitude: finite("initial.ion_amplitude", f.initial.ion_amplitude)?,
        },
        restart: f.initial.restart.clone(),
        control: RunControl {
            dt,
            t_final: finite("time.t_final", t.t_final)?,
            max_steps: t.max_steps,
            steady_tol: tol.steady,
            dt_floor: finite("tolerances.dt_floor", tol.dt_floor)?,
            ceiling: positive("tolerances.ceiling", tol.ceiling)?,
        },
        out_dir: f.output.dir.clone(),
        snapshot_every: f.output.snapshot_every,
    })
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = parse_config_str(&text).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    })?;
    if let Some(r) = &cfg.restart {
        if r.is_relative() {
            cfg.restart = Some(path.parent().unwrap_or(Path::new(".")).join(r));
        }
    }
    Ok(cfg)
}

/// Header of one snapshot file.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotHeader {
    pub field: String,
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub t: f64,
}

pub const MAGIC: &str = "NEMEL1";

/// Renders a field: header line, then `ny` rows of `nx` values with 17
/// significant digits.
pub fn format_field(h: &SnapshotHeader, data: &[f64]) -> String {
    assert_eq!(data.len(), h.nx * h.ny, "field length does not match header");
    let mut s = String::with_capacity(24 * data.len() + 64);
    let _ = writeln!(s, "{MAGIC} {} {} {} {:e} {:e} {:e}", h.field, h.nx, h.ny, h.lx, h.ly, h.t);
    for row in data.chunks(h.nx) {
        let mut first = true;
        for x in row {
            if !first {
                s.push(' ');
            }
            first = false;
            let _ = write!(s, "{x:.16e}");
        }
        s.push('\n');
    }
    s
}

fn snap_err(offset: usize, msg: impl Into<String>) -> Error {
    Error::Snapshot { offset, msg: msg.into() }
}

/// Parses a field file, checking the magic and the value count.
pub fn parse_field(text: &str) -> Result<(SnapshotHeader, Vec<f64>)> {
    let line_end = text.find('\n').ok_or_else(|| snap_err(text.len(), "missing header line"))?;
    let mut parts = text[..line_end].split_whitespace();
    let magic = parts.next().unwrap_or("");
    if magic != MAGIC {
        return Err(snap_err(0, format!("expected magic {MAGIC}, found \"{magic}\"")));
    }
    let mut next = |what: &str| parts.next().ok_or_else(|| snap_err(line_end, format!("header is missing {what}")));
    let field = next("field name")?.to_string();
    let int = |s: &str| s.parse::<usize>().map_err(|_| snap_err(0, format!("bad dimension \"{s}\"")));
    let nx = int(next("nx")?)?;
    let ny = int(next("ny")?)?;
    let real = |s: &str| s.parse::<f64>().map_err(|_| snap_err(0, format!("bad header number \"{s}\"")));
    let lx = real(next("lx")?)?;
    let ly = real(next("ly")?)?;
    let t = real(next("t")?)?;
    let expected = nx * ny;
    let mut data = Vec::with_capacity(expected);
    let body = &text[line_end + 1..];
    let mut pos = line_end + 1;
    for tok in body.split_inclusive(|c: char| c.is_ascii_whitespace()) {
        let start = pos;
        pos += tok.len();
        let word = tok.trim_end();
        if word.is_empty() {
            continue;
        }
        if data.len() == expected {
            return Err(snap_err(start, format!("more than {expected} values")));
        }
        data.push(word.parse::<f64>().map_err(|_| snap_err(start, format!("bad value \"{word}\"")))?);
    }
    if data.len() != expected {
        return Err(snap_err(text.len(), format!("truncated: {} of {expected} values", data.len())));
    }
    Ok((SnapshotHeader { field, nx, ny, lx, ly, t }, data))
}

pub fn write_field(path: &Path, h: &SnapshotHeader, data: &[f64]) -> Result<()> {
    fs::write(path, format_field(h, data))?;
    Ok(())
}

/// Reads a field and checks it against the expected name and shape.
pub fn read_field(path: &Path, field: &str, nx: usize, ny: usize) -> Result<(SnapshotHeader, Vec<f64>)> {
    let (h, data) = parse_field(&fs::read_to_string(path)?)?;
    if h.field != field {
        return Err(snap_err(0, format!("{}: expected field {field}, found {}", path.display(), h.field)));
    }
    if (h.nx, h.ny) != (nx, ny) {
        return Err(snap_err(
            0,
            format!("{}: dimensions {}x{} do not match the grid ({nx}x{ny})", path.display(), h.nx, h.ny),
        ));
    }
    Ok((h, data))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SnapshotMeta {
    step: usize,
    t: f64,
    /// Species masses at the start of the trajectory.
    initial_masses: Vec<f64>,
}

fn field_list(n_species: usize) -> Vec<String> {
    let mut v: Vec<String> = (1..=n_species).map(|k| format!("c{k}")).collect();
    v.extend(["u", "v", "d1", "d2", "phi", "pi"].map(String::from));
    v
}

fn field_shape(grid: &Grid, name: &str) -> (usize, usize) {
    match name {
        "u" => (grid.nx + 1, grid.ny),
        "v" => (grid.nx, grid.ny + 1),
        _ => (grid.nx, grid.ny),
    }
}

/// Writes every field of a state into `dir` (created if missing).
pub fn write_state(dir: &Path, grid: &Grid, state: &State, step: usize) -> Result<()> {
    fs::create_dir_all(dir)?;
    let n = state.ion.c.len();
    for name in field_list(n) {
        let data: &[f64] = match name.as_str() {
            "u" => &state.flow.u,
            "v" => &state.flow.v,
            "d1" => &state.director.d1,
            "d2" => &state.director.d2,
            "phi" => &state.phi,
            "pi" => &state.flow.pi,
            c => &state.ion.c[c[1..].parse::<usize>().unwrap_or(1) - 1],
        };
        let (nx, ny) = field_shape(grid, &name);
        let h = SnapshotHeader { field: name.clone(), nx, ny, lx: grid.lx, ly: grid.ly, t: state.t };
        write_field(&dir.join(format!("{name}.txt")), &h, data)?;
    }
    let meta = SnapshotMeta { step, t: state.t, initial_masses: state.ion.masses.clone() };
    let text = toml::to_string(&meta).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(dir.join("meta.toml"), text)?;
    Ok(())
}

/// Reads a state written by [`write_state`]; returns it with its step index.
pub fn read_state(dir: &Path, grid: &Grid, n_species: usize) -> Result<(State, usize)> {
    let meta_text = fs::read_to_string(dir.join("meta.toml"))?;
    let meta: SnapshotMeta =
        toml::from_str(&meta_text).map_err(|e| snap_err(0, format!("{}: {e}", dir.join("meta.toml").display())))?;
    if meta.initial_masses.len() != n_species {
        return Err(snap_err(0, format!("snapshot has {} species, config has {n_species}", meta.initial_masses.len())));
    }
    let mut fields = BTreeMap::new();
    for name in field_list(n_species) {
        let (nx, ny) = field_shape(grid, &name);
        let (h, data) = read_field(&dir.join(format!("{name}.txt")), &name, nx, ny)?;
        if h.t.to_bits() != meta.t.to_bits() {
            return Err(snap_err(0, format!("{name}: time {} differs from meta {}", h.t, meta.t)));
        }
        fields.insert(name, data);
    }
    let mut take = |k: &str| fields.remove(k).unwrap_or_default();
    let c = (1..=n_species).map(|k| take(&format!("c{k}"))).collect();
    let (u, v, d1, d2, phi, pi) = (take("u"), take("v"), take("d1"), take("d2"), take("phi"), take("pi"));
    let mut flow = FlowState::new(grid, u, v);
    flow.pi = pi;
    let state = State {
        t: meta.t,
        ion: IonState { c, masses: meta.initial_masses },
        flow,
        director: DirectorField::new(d1, d2),
        phi,
    };
    Ok((state, meta.step))
}

/// Writes Φ, d, c_k and π of an equilibrium as snapshot files.
pub fn write_equilibrium(dir: &Path, grid: &Grid, eq: &EquilibriumSolution) -> Result<()> {
    fs::create_dir_all(dir)?;
    let put = |name: String, data: &[f64]| {
        let h = SnapshotHeader { field: name.clone(), nx: grid.nx, ny: grid.ny, lx: grid.lx, ly: grid.ly, t: 0.0 };
        write_field(&dir.join(format!("{name}.txt")), &h, data)
    };
    put("phi".into(), &eq.phi)?;
    put("d1".into(), &eq.director.d1)?;
    put("d2".into(), &eq.director.d2)?;
    put("pi".into(), &eq.pi)?;
    for (k, c) in eq.c.iter().enumerate() {
        put(format!("c{}", k + 1), c)?;
    }
    Ok(())
}

pub fn log_header(n_species: usize) -> String {
    let mut h = String::from("step,t,dt,E_kin,E_elastic,E_entropy,E_elec,E_total,D_ionic,D_visc,D_rot,audit_r");
    for k in 1..=n_species {
        let _ = write!(h, ",mass_{k}");
    }
    h.push_str(",min_c,max_len_dev,div_inf");
    h
}

/// One CSV line; every real uses the shortest representation that reads
/// back to the same double.
pub fn format_log_row(r: &LogRow) -> String {
    let e = &r.report;
    let mut s = format!(
        "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
        r.step,
        r.t,
        r.dt,
        e.e_kinetic,
        e.e_elastic,
        e.e_entropy,
        e.e_electric,
        e.e_total,
        e.d_ionic,
        e.d_viscous,
        e.d_rotational,
        r.audit_r
    );
    for m in &r.masses {
        let _ = write!(s, ",{m:e}");
    }
    let _ = write!(s, ",{:e},{:e},{:e}", r.min_c, r.max_len_dev, r.div_inf);
    s
}

/// Parses an energy log into its header and numeric rows.
pub fn parse_log(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = text.lines();
    let header: Vec<String> = lines.next().unwrap_or("").split(',').map(String::from).collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let row: std::result::Result<Vec<f64>, _> = line.split(',').map(str::parse::<f64>).collect();
        let row = row.map_err(|_| Error::Config(format!("energy log line {}: not numeric", i + 2)))?;
        if row.len() != header.len() {
            return Err(Error::Config(format!("energy log line {}: {} columns, header has {}", i + 2, row.len(), header.len())));
        }
        rows.push(row);
    }
    Ok((header, rows))
}

/// Energy log written and flushed row by row.
pub struct EnergyLog {
    out: BufWriter<File>,
}

impl EnergyLog {
    pub fn create(path: &Path, n_species: usize) -> Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{}", log_header(n_species))?;
        Ok(Self { out })
    }

    pub fn write(&mut self, row: &LogRow) -> Result<()> {
        writeln!(self.out, "{}", format_log_row(row))?;
        self.out.flush()?;
        Ok(())
    }
}

/// Files produced by [`run_to_dir`].
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub log: PathBuf,
    pub final_snapshot: PathBuf,
}

fn snapshot_dir(out: &Path, step: usize) -> PathBuf {
    out.join(format!("snap_{step:06}"))
}

/// Builds the initial simulation of a config: a preset, or a restart.
pub fn initial_simulation(cfg: &RunConfig) -> Result<Simulation> {
    let model = cfg.model();
    let (state, step) = match &cfg.restart {
        Some(dir) => read_state(dir, &cfg.grid, cfg.material.species.len())?,
        None => (sim::initial_state(&model, &cfg.initial, &cfg.equilibrium)?, 0),
    };
    Simulation::new(model, state, step)
}

/// Runs a config, writing `energy.csv`, periodic snapshots, the final
/// snapshot and `summary.toml` into `out`.
pub fn run_to_dir(cfg: &RunConfig, out: &Path, max_steps: Option<usize>) -> Result<RunOutput> {
    fs::create_dir_all(out)?;
    let mut sim = initial_simulation(cfg)?;
    let log_path = out.join("energy.csv");
    let mut log = EnergyLog::create(&log_path, cfg.material.species.len())?;
    let mut ctl = cfg.control.clone();
    if max_steps.is_some() {
        ctl.max_steps = max_steps;
    }
    let every = cfg.snapshot_every;
    // A resumed log continues the original one, whose last row is the restart state.
    let skip = cfg.restart.is_some().then_some(sim.step);
    write_state(&snapshot_dir(out, sim.step), &sim.model.grid, &sim.state, sim.step)?;
    let summary = sim::run(&mut sim, &ctl, |s, row| {
        if Some(row.step) != skip {
            log.write(row)?;
        }
        if every > 0 && row.step > 0 && row.step % every == 0 {
            write_state(&snapshot_dir(out, s.step), &s.model.grid, &s.state, s.step)?;
        }
        Ok(())
    })?;
    let final_snapshot = snapshot_dir(out, sim.step);
    write_state(&final_snapshot, &sim.model.grid, &sim.state, sim.step)?;
    fs::write(out.join("summary.toml"), format_summary(&summary))?;
    Ok(RunOutput { summary, log: log_path, final_snapshot })
}

pub fn format_summary(s: &RunSummary) -> String {
    let r = &s.residual;
    format!(
        "verdict = \"{}\"\nsteps = {}\nt = {:e}\ne_initial = {:e}\ne_final = {:e}\nmax_len_dev = {:e}\nmin_c = {:e}\n\
         mass_drift = {:e}\nmax_audit = {:e}\n\n[residual]\nvelocity = {:e}\ngrad_mu = {:e}\ndirector_rate = {:e}\n\
         director_equation = {:e}\n",
        s.verdict.as_str(),
        s.steps,
        s.t,
        s.e_initial,
        s.e_final,
        s.max_len_dev,
        s.min_c,
        s.mass_drift,
        s.max_audit,
        r.velocity,
        r.grad_mu,
        r.director_rate,
        r.director_equation
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const MINIMAL: &str = r#"
[grid]
nx = 8
ny = 8

[leslie]
alpha1 = 0.0
alpha2 = -0.5
alpha3 = 0.5
alpha4 = 1.0
alpha5 = 0.5
alpha6 = 0.5

[species.1]
valence = 1
diffusivity = 1.0
mass = 1.0

[species.2]
valence = -1
diffusivity = [[1.0, 0.0], [0.0, 2.0]]
mass = 1.0

[permittivity]
eps_perp = 1.0
eps_a = 0.5
"#;

    #[test]
    fn minimal_config_parses_with_parodi() {
        let c = parse_config_str(MINIMAL).unwrap();
        assert!(c.validity.satisfies_positivity && c.validity.parodi_holds);
        assert_eq!(c.material.species.len(), 2);
        assert_eq!(c.material.species[1].diffusion[(1, 1)], 2.0);
        assert_eq!(c.control.dt, DtPolicy::Auto { safety: 0.4 });
        c.require_valid().unwrap();
    }

    #[test]
    fn zero_alpha4_is_refused_naming_the_condition() {
        let c = parse_config_str(&MINIMAL.replace("alpha4 = 1.0", "alpha4 = 0.0")).unwrap();
        let e = c.require_valid().unwrap_err();
        assert!(e.is_config() && e.to_string().contains("α4 > 0"), "{e}");
    }

    #[test]
    fn unknown_keys_are_rejected_by_name() {
        let e = parse_config_str(&MINIMAL.replace("alpha6 = 0.5", "alpha6 = 0.5\nalpha7 = 1.0")).unwrap_err();
        assert!(e.to_string().contains("alpha7"), "{e}");
        let e = parse_config_str(&format!("{MINIMAL}\n[extras]\nx = 1\n")).unwrap_err();
        assert!(e.to_string().contains("extras"), "{e}");
    }

    #[test]
    fn syntax_errors_report_the_line() {
        let e = parse_config_str("[grid]\nnx = = 3\n").unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
    }

    #[test]
    fn non_finite_and_bad_enums_are_rejected() {
        assert!(parse_config_str(&MINIMAL.replace("alpha1 = 0.0", "alpha1 = nan")).is_err());
        assert!(parse_config_str(&format!("{MINIMAL}\n[time]\ndt = \"fast\"\n")).is_err());
        assert!(parse_config_str(&format!("{MINIMAL}\n[initial]\npreset = \"vortex\"\n")).is_err());
        assert!(parse_config_str(&MINIMAL.replace("mass = 1.0\n\n[species.2]", "mass = -1.0\n\n[species.2]")).is_err());
    }

    #[test]
    fn snapshot_header_and_truncation() {
        let h = SnapshotHeader { field: "phi".into(), nx: 3, ny: 2, lx: 1.0, ly: 0.5, t: 0.1 + 0.2 };
        let data = [1.0, -2.5e-300, 3.0, 1.0 / 3.0, 0.0, -7.0];
        let text = format_field(&h, &data);
        assert!(text.starts_with("NEMEL1 phi 3 2 "));
        let (h2, d2) = parse_field(&text).unwrap();
        assert_eq!(h2, h);
        assert_eq!(h2.t.to_bits(), (0.1f64 + 0.2).to_bits());
        assert_eq!(d2.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), data.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
        let cut = &text[..text[..text.len() - 1].rfind('\n').unwrap() + 1];
        match parse_field(cut).unwrap_err() {
            Error::Snapshot { offset, msg } => {
                assert_eq!(offset, cut.len());
                assert!(msg.contains("truncated"));
            }
            e => panic!("{e}"),
        }
        assert!(matches!(parse_field(&text.replace("NEMEL1", "NEMEL2")), Err(Error::Snapshot { offset: 0, .. })));
    }

    #[test]
    fn log_header_matches_the_documented_layout() {
        assert_eq!(
            log_header(2),
            "step,t,dt,E_kin,E_elastic,E_entropy,E_elec,E_total,D_ionic,D_visc,D_rot,audit_r,mass_1,mass_2,min_c,max_len_dev,div_inf"
        );
    }
}
