//! Command-line front end. Every subcommand writes its data files, a JSON
//! summary and a `<name>.manifest.json` into `--out`.

use std::ffi::OsString;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::cnls::{self, SimConfig};
use crate::config::{self, PendulumParams, ResonanceParams};
use crate::error::{Error, Result};
use crate::linear::{self, InflationParams};
use crate::manifest::RunManifest;
use crate::par::{self, Execution};
use crate::pendulum::{self, PendulumState};
use crate::resonance;
use crate::validation::{self, Suite};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_BLOW_UP: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "beating", version, about = "Beating solutions of coupled cubic Schrodinger equations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Enumerate the resonant quadruples in [-J, J]^4
    Resonances(ResonanceArgs),
    /// Integrate the reduced pendulum and compute its half-period
    Pendulum(PendulumArgs),
    /// Run the coupled system from two-mode data
    Beat(BeatArgs),
    /// Drive the linear equation with the potential of a beating run
    Inflate(InflateArgs),
    /// Run a property suite; exit 1 if any check fails
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML parameter file, or a manifest from an earlier run
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ResonanceArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub radius: Option<i64>,
    #[arg(long)]
    pub budget: Option<u64>,
    /// Enumerate on one thread
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Debug, Args)]
pub struct PendulumArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long = "t-end")]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub stride: Option<u64>,
    /// Additional gamma values whose half-periods are reported
    #[arg(long, value_delimiter = ',')]
    pub sweep: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct BeatArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub p: Option<i64>,
    #[arg(long)]
    pub q: Option<i64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long = "N")]
    pub truncation: Option<usize>,
    #[arg(long = "M")]
    pub grid: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long = "t-end")]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub sigma: Option<i32>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub perturbation: Option<f64>,
    #[arg(long)]
    pub stride: Option<u64>,
    #[arg(long = "sobolev-order")]
    pub sobolev_order: Option<f64>,
}

#[derive(Debug, Args)]
pub struct InflateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub q: Option<i64>,
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long = "t-end")]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long = "N")]
    pub truncation: Option<usize>,
    /// Gevrey decay rate B; fitted from the data when omitted
    #[arg(long = "gevrey-rate")]
    pub gevrey_rate: Option<f64>,
    #[arg(long = "budget-steps")]
    pub budget_steps: Option<u64>,
    #[arg(long)]
    pub samples: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long, value_enum, default_value = "quick")]
    pub suite: Suite,
    /// Also write the results as JSON into this directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub sequential: bool,
}

fn set<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}

fn set_opt<T>(slot: &mut Option<T>, flag: Option<T>) {
    if flag.is_some() {
        *slot = flag;
    }
}

fn load_or_default<T: serde::de::DeserializeOwned + Default>(path: &Option<PathBuf>) -> Result<T> {
    match path {
        Some(p) => config::load_file(p),
        None => Ok(T::default()),
    }
}

impl BeatArgs {
    pub fn resolve(&self) -> Result<SimConfig> {
        let mut c: SimConfig = load_or_default(&self.common.config)?;
        set(&mut c.p, self.p);
        set(&mut c.q, self.q);
        set(&mut c.gamma, self.gamma);
        set(&mut c.epsilon, self.epsilon);
        set(&mut c.truncation, self.truncation);
        set_opt(&mut c.grid, self.grid);
        set_opt(&mut c.dt, self.dt);
        set_opt(&mut c.t_end, self.t_end);
        set(&mut c.sigma, self.sigma);
        set(&mut c.seed, self.seed);
        set(&mut c.perturbation, self.perturbation);
        set(&mut c.sample_stride, self.stride);
        set(&mut c.sobolev_order, self.sobolev_order);
        Ok(c)
    }
}

impl InflateArgs {
    pub fn resolve(&self) -> Result<InflationParams> {
        let mut c: InflationParams = load_or_default(&self.common.config)?;
        set(&mut c.q, self.q);
        set(&mut c.s, self.s);
        set(&mut c.alpha, self.alpha);
        set(&mut c.gamma, self.gamma);
        set(&mut c.epsilon, self.epsilon);
        set_opt(&mut c.t_end, self.t_end);
        set_opt(&mut c.dt, self.dt);
        set_opt(&mut c.truncation, self.truncation);
        set_opt(&mut c.gevrey_rate, self.gevrey_rate);
        set(&mut c.budget_steps, self.budget_steps);
        set(&mut c.samples, self.samples);
        Ok(c)
    }
}

impl PendulumArgs {
    pub fn resolve(&self) -> Result<PendulumParams> {
        let mut c: PendulumParams = load_or_default(&self.common.config)?;
        set(&mut c.gamma, self.gamma);
        set(&mut c.dt, self.dt);
        set_opt(&mut c.t_end, self.t_end);
        set(&mut c.stride, self.stride);
        set(&mut c.sweep, self.sweep.clone());
        Ok(c)
    }
}

impl ResonanceArgs {
    pub fn resolve(&self) -> Result<ResonanceParams> {
        let mut c: ResonanceParams = load_or_default(&self.common.config)?;
        set(&mut c.radius, self.radius);
        set(&mut c.budget, self.budget);
        Ok(c)
    }
}

/// Exit status for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::BlowUp { .. } => EXIT_BLOW_UP,
        Error::DiagnosticUnavailable(_) => EXIT_VALIDATION,
        _ => EXIT_CONFIG,
    }
}

/// Parse `argv` (including the program name), run, and return the exit code.
pub fn cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let parsed = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    par::init_workers_from_env();
    match dispatch(&parsed.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cmd: &Command) -> Result<i32> {
    match cmd {
        Command::Resonances(a) => resonances(a),
        Command::Pendulum(a) => pendulum_cmd(a),
        Command::Beat(a) => beat(a),
        Command::Inflate(a) => inflate(a),
        Command::Validate(a) => validate(a),
    }
}

fn prepare_out(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn finish(mut manifest: RunManifest, started: Instant, dir: &Path, name: &str, files: &[PathBuf]) -> Result<()> {
    for f in files {
        manifest.add_output(f)?;
    }
    manifest.duration_seconds = started.elapsed().as_secs_f64();
    manifest.write(&dir.join(format!("{name}.manifest.json")))
}

fn print_warnings(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

#[derive(Serialize)]
struct ResonanceSummary {
    radius: i64,
    count: usize,
    min_nonzero_divisor: Option<i64>,
}

fn resonances(a: &ResonanceArgs) -> Result<i32> {
    let started = Instant::now();
    let params = a.resolve()?;
    let exec = if a.sequential { Execution::Sequential } else { Execution::Parallel };
    let set = resonance::enumerate_resonant_with(params.radius, params.budget as u128, exec)?;
    let divisor = if params.radius >= 1 {
        Some(resonance::small_divisor_scan_with(params.radius, params.budget as u128, exec)?.min_nonzero_divisor)
    } else {
        None
    };
    let dir = &a.common.out;
    prepare_out(dir)?;
    let csv = dir.join("resonances.csv");
    let mut w = BufWriter::new(std::fs::File::create(&csv)?);
    writeln!(w, "j1,j2,l1,l2")?;
    for q in &set {
        writeln!(w, "{},{},{},{}", q.j1, q.j2, q.l1, q.l2)?;
    }
    w.flush()?;
    drop(w);
    let json = dir.join("resonances.json");
    write_json(
        &json,
        &ResonanceSummary {
            radius: params.radius,
            count: set.len(),
            min_nonzero_divisor: divisor,
        },
    )?;
    let manifest = RunManifest::new("resonances", &params, Vec::new())?;
    finish(manifest, started, dir, "resonances", &[csv, json])?;
    println!("{} resonant quadruples at J = {}", set.len(), params.radius);
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct PendulumSummary {
    #[serde(flatten)]
    period: pendulum::PeriodResult,
    t_end: f64,
    final_state: PendulumState,
    sweep: Vec<pendulum::PeriodResult>,
}

fn pendulum_cmd(a: &PendulumArgs) -> Result<i32> {
    let started = Instant::now();
    let params = a.resolve()?;
    params.validate()?;
    let period = pendulum::period(params.gamma)?;
    let t_end = params.t_end.unwrap_or(2.0 * period.t_gamma);
    let steps = (t_end / params.dt).ceil().max(1.0) as usize;
    let h = t_end / steps as f64;
    let states = pendulum::integrate(PendulumState::new(0.0, params.gamma), h, steps);
    let sweep = par::map_ordered(Execution::default(), &params.sweep, |&g| pendulum::period(g))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let dir = &a.common.out;
    prepare_out(dir)?;
    let csv = dir.join("pendulum.csv");
    let mut w = BufWriter::new(std::fs::File::create(&csv)?);
    writeln!(w, "t,psi,K,H")?;
    for (k, s) in states.iter().enumerate() {
        if (k as u64).is_multiple_of(params.stride) || k == steps {
            writeln!(w, "{},{},{},{}", k as f64 * h, s.psi, s.k, pendulum::h_star(*s))?;
        }
    }
    w.flush()?;
    drop(w);
    let json = dir.join("pendulum.json");
    write_json(
        &json,
        &PendulumSummary {
            period,
            t_end,
            final_state: states[steps],
            sweep,
        },
    )?;
    let manifest = RunManifest::new("pendulum", &params, Vec::new())?;
    finish(manifest, started, dir, "pendulum", &[csv, json])?;
    println!("T_gamma = {} at gamma = {}", period.t_gamma, params.gamma);
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct BeatSummary<'a> {
    steps: u64,
    dt: f64,
    grid: usize,
    report: &'a cnls::BeatReport,
    warnings: &'a [String],
}

fn beat(a: &BeatArgs) -> Result<i32> {
    let started = Instant::now();
    let cfg = a.resolve()?;
    let warnings = cfg.validate()?;
    print_warnings(&warnings);
    let dir = &a.common.out;
    prepare_out(dir)?;
    let traj = cnls::run(&cfg)?;
    let report = cnls::analyze(&traj)?;
    let csv = dir.join("beat.csv");
    let mut w = BufWriter::new(std::fs::File::create(&csv)?);
    traj.write_csv(&mut w)?;
    w.flush()?;
    drop(w);
    let json = dir.join("beat.json");
    write_json(
        &json,
        &BeatSummary {
            steps: traj.steps,
            dt: traj.dt,
            grid: traj.grid,
            report: &report,
            warnings: &warnings,
        },
    )?;
    let manifest = RunManifest::new("beat", &cfg, warnings)?;
    finish(manifest, started, dir, "beat", &[csv, json])?;
    println!(
        "{} steps; |u_q|^2 at T/eps^2 = {}; max deviation from pendulum {:e}",
        traj.steps, report.uq_sq_at_exchange, report.max_uq_deviation
    );
    Ok(EXIT_OK)
}

fn inflate(a: &InflateArgs) -> Result<i32> {
    let started = Instant::now();
    let params = a.resolve()?;
    params.validate()?;
    let dir = &a.common.out;
    prepare_out(dir)?;
    let mut report = linear::inflation_experiment(&params)?;
    print_warnings(&report.warnings);
    let csv = dir.join("inflate.csv");
    let mut w = BufWriter::new(std::fs::File::create(&csv)?);
    report.write_csv(&mut w)?;
    w.flush()?;
    drop(w);
    report.series.clear();
    let json = dir.join("inflate.json");
    write_json(&json, &report)?;
    let manifest = RunManifest::new("inflate", &params, report.warnings.clone())?;
    finish(manifest, started, dir, "inflate", &[csv, json])?;
    println!(
        "growth {} (predicted {}); asymptotic scaling: {}",
        report.growth_ratio, report.predicted_ratio, report.asymptotic_scaling.reason
    );
    Ok(EXIT_OK)
}

fn validate(a: &ValidateArgs) -> Result<i32> {
    let exec = if a.sequential { Execution::Sequential } else { Execution::Parallel };
    let checks = validation::run_suite(a.suite, exec)?;
    for c in &checks {
        println!("{c}");
    }
    if let Some(dir) = &a.out {
        prepare_out(dir)?;
        write_json(&dir.join("validate.json"), &checks)?;
    }
    Ok(validation::exit_code(&checks))
}
