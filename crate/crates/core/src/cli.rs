//! Command-line front end.
//!
//! Settings come from, in increasing priority: the `QPISTON_OUT` environment
//! variable (output directory only), a `key = value` config file given with
//! `--config`, and flags. Config keys are long flag names.
//!
//! Exit codes: 0 success, 1 runtime or verification failure, 2 invalid
//! configuration, 3 physically infeasible request.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use rayon::prelude::*;
use serde_json::{json, Value};
use thiserror::Error;

use crate::dynamics::DynamicsError;
use crate::inverse::{peak_control, InverseError};
use crate::optimal::{
    brute_force_min_time, build_certificate, solve_optimal, OptimalError, OracleConfig,
};
use crate::output::{json_num, write_summary, Format, Table};
use crate::plan::{ExpansionPlan, PlanControl, PlanError, PlanMethod};
use crate::quantum::{
    check_resolution, evolve_pde, exact_state, mode_phases, phase_integral, physical_fidelity,
    ModeExpansion, PdeOptions, QuantumError, RampedSchedule, SlavedPlan, WallProtocol,
    WaveFunction, RESOLUTION_LIMIT,
};
use crate::thermo::{
    cooling_rate, feasibility_threshold, heat_extracted, max_cooling_rate_with, third_law_bound,
    ExpansionTimeModel, OttoCycleSpec, RateSearch, ThermoError,
};
use crate::units::{PhysicalUnits, UnitError, UnitMode};

pub const OUT_ENV: &str = "QPISTON_OUT";

/// Step of the tabulated wall for ramped controls.
const RAMP_WALL_STEP: f64 = 1e-4;
/// Simpson panels per unit time for phase integrals.
const PHASE_PANELS_PER_UNIT: f64 = 2000.0;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config file {path}, line {line}: expected `key = value`")]
    Syntax { path: PathBuf, line: usize },
    #[error("{0}")]
    Invalid(String),
}

/// The request is well formed but asks for something the physics forbids.
#[derive(Debug, Error)]
#[error("{0}")]
pub struct Infeasible(pub String);

/// A verification step ran and did not pass.
#[derive(Debug, Error)]
#[error("{0}")]
pub struct VerificationFailed(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum UnitsArg {
    Normalized,
    Physical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Optimal,
    Inverse,
}

impl From<MethodArg> for PlanMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Optimal => PlanMethod::Optimal,
            MethodArg::Inverse => PlanMethod::Inverse,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Spacing {
    Linear,
    Log,
}

fn positive(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("must be finite and > 0, got {v}"))
    }
}

fn non_negative(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("must be finite and >= 0, got {v}"))
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "qpiston",
    version,
    about = "Minimum-time frictionless expansion of a quantum piston",
    args_override_self = true
)]
pub struct Cli {
    /// Key-value config file; flags override its entries.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, short, global = true, env = OUT_ENV, default_value = ".")]
    pub out: PathBuf,
    /// Table format.
    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Csv)]
    pub format: FormatArg,
    /// Report times, lengths and stiffness in SI units (needs --mass, --k0, --a0).
    #[arg(long, global = true, value_enum, default_value_t = UnitsArg::Normalized)]
    pub units: UnitsArg,
    /// Particle mass in kg.
    #[arg(long, global = true, value_parser = positive)]
    pub mass: Option<f64>,
    /// Largest trap stiffness in N/m.
    #[arg(long, global = true, value_parser = positive)]
    pub k0: Option<f64>,
    /// Initial box width in m.
    #[arg(long, global = true, value_parser = positive)]
    pub a0: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Control and trajectory of one expansion.
    Plan {
        #[arg(long, default_value_t = 10.0)]
        gamma: f64,
        #[arg(long, value_enum, default_value_t = MethodArg::Optimal)]
        method: MethodArg,
        /// Sampling step in units of T0.
        #[arg(long, default_value_t = 1e-3, value_parser = positive)]
        step: f64,
    },
    /// Expansion times of both methods over a range of expansion factors.
    Sweep {
        #[arg(long, default_value_t = 1.1)]
        gamma_min: f64,
        #[arg(long, default_value_t = 10.0)]
        gamma_max: f64,
        #[arg(long, default_value_t = 50)]
        points: usize,
        #[arg(long, value_enum, default_value_t = Spacing::Linear)]
        spacing: Spacing,
    },
    /// Schrödinger evolution along a plan, with ideal or ramped bangs.
    Simulate {
        #[arg(long, default_value_t = 4.0)]
        gamma: f64,
        #[arg(long, value_enum, default_value_t = MethodArg::Optimal)]
        method: MethodArg,
        /// Ramp durations replacing the jumps, comma separated; 0 keeps ideal bangs.
        #[arg(long, value_delimiter = ',', default_value = "0", value_parser = non_negative)]
        ramp_delta: Vec<f64>,
        /// Interior grid points.
        #[arg(long, default_value_t = crate::quantum::DEFAULT_GRID)]
        grid: usize,
        #[arg(long, default_value_t = 1e-4, value_parser = positive)]
        dt: f64,
        /// Initial state: equal superposition of the lowest `modes` box modes.
        #[arg(long, default_value_t = 1)]
        modes: usize,
        /// Steps between fidelity samples.
        #[arg(long, default_value_t = 100)]
        record_every: usize,
        /// Run even when the time step under-resolves the dynamics.
        #[arg(long)]
        force: bool,
    },
    /// Otto refrigerator cooling rate and its optimum.
    Otto {
        /// Cold temperatures, comma separated.
        #[arg(long, value_delimiter = ',', required = true, value_parser = positive)]
        tau_c: Vec<f64>,
        #[arg(long, default_value_t = 1.0, value_parser = positive)]
        tau_h: f64,
        /// Also evaluate this operating point.
        #[arg(long)]
        gamma: Option<f64>,
        /// Points of the R(gamma) curve.
        #[arg(long, default_value_t = 200)]
        points: usize,
        #[arg(long, default_value_t = crate::thermo::GAMMA_MAX, value_parser = positive)]
        gamma_max: f64,
    },
    /// Maximum principle certificate and brute-force check of the closed form.
    Certify {
        #[arg(long, value_delimiter = ',', default_value = "2,10")]
        gamma: Vec<f64>,
        #[arg(long, default_value_t = 3)]
        max_switches: usize,
        /// Duration lattice step of the brute-force search.
        #[arg(long, default_value_t = 1e-3, value_parser = positive)]
        grid: f64,
        #[arg(long, default_value_t = 1e-6, value_parser = positive)]
        endpoint_tol: f64,
        /// Longest schedule the search considers.
        #[arg(long, default_value_t = 5.0, value_parser = positive)]
        horizon: f64,
    },
}

const SUBCOMMANDS: [&str; 5] = ["plan", "sweep", "simulate", "otto", "certify"];

/// Reads `key = value` lines; `#` starts a comment.
pub fn read_config(path: &Path) -> Result<Vec<(String, String)>, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            path: path.to_path_buf(),
            line: i + 1,
        })?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(ConfigError::Syntax {
                path: path.to_path_buf(),
                line: i + 1,
            });
        }
        out.push((k.replace('_', "-"), v.trim_matches('"').to_string()));
    }
    Ok(out)
}

fn config_path(args: &[OsString]) -> Option<PathBuf> {
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}

/// Splices config entries in front of the flags that follow the subcommand,
/// so flags given on the command line win.
fn with_config(args: Vec<OsString>) -> Result<Vec<OsString>, ConfigError> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let entries = read_config(&path)?;
    let mut injected = Vec::new();
    for (k, v) in entries {
        if k == "config" {
            return Err(ConfigError::Invalid("config files cannot nest".into()));
        }
        match v.as_str() {
            "true" => injected.push(OsString::from(format!("--{k}"))),
            "false" => {}
            _ => {
                injected.push(OsString::from(format!("--{k}")));
                injected.push(OsString::from(v));
            }
        }
    }
    let at = args
        .iter()
        .position(|a| SUBCOMMANDS.contains(&a.to_string_lossy().as_ref()))
        .map_or(args.len(), |i| i + 1);
    let mut out = args;
    out.splice(at..at, injected);
    Ok(out)
}

/// Parses arguments, including any config file.
pub fn parse(args: Vec<OsString>) -> Result<Cli, anyhow::Error> {
    let args = with_config(args)?;
    Ok(Cli::try_parse_from(args)?)
}

/// Maps an error to the process exit code.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<clap::Error>() {
            return e.exit_code();
        }
        if cause.is::<ConfigError>() || cause.is::<UnitError>() || cause.is::<InverseError>() {
            return 2;
        }
        if cause.is::<Infeasible>() {
            return 3;
        }
        if cause.is::<VerificationFailed>() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<OptimalError>() {
            return optimal_code(e);
        }
        if let Some(e) = cause.downcast_ref::<PlanError>() {
            return match e {
                PlanError::Optimal(o) => optimal_code(o),
                PlanError::Inverse(_) | PlanError::InvalidStep(_) => 2,
                PlanError::Dynamics(d) => dynamics_code(d),
            };
        }
        if let Some(e) = cause.downcast_ref::<ThermoError>() {
            return match e {
                ThermoError::Infeasible { .. } => 3,
                ThermoError::Optimal(o) => optimal_code(o),
                _ => 2,
            };
        }
        if let Some(e) = cause.downcast_ref::<QuantumError>() {
            return match e {
                QuantumError::NonPositiveWall { .. } => 3,
                _ => 2,
            };
        }
        if let Some(e) = cause.downcast_ref::<DynamicsError>() {
            return dynamics_code(e);
        }
    }
    1
}

fn optimal_code(e: &OptimalError) -> i32 {
    match e {
        OptimalError::InvalidGamma(_) | OptimalError::InvalidConfig(_) => 2,
        OptimalError::NoFeasibleSchedule(_) => 3,
        OptimalError::Dynamics(d) => dynamics_code(d),
    }
}

fn dynamics_code(e: &DynamicsError) -> i32 {
    match e {
        DynamicsError::StateConstraint { .. } => 3,
        _ => 2,
    }
}

/// Parses, runs and reports; returns the exit code.
pub fn main_with_args(args: Vec<OsString>) -> i32 {
    let cli = match parse(args) {
        Ok(c) => c,
        Err(e) => {
            if let Some(ce) = e.downcast_ref::<clap::Error>() {
                let _ = ce.print();
                return ce.exit_code();
            }
            eprintln!("error: {e:#}");
            return exit_code(&e);
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}

struct Ctx {
    out: PathBuf,
    format: Format,
    units: UnitMode,
}

impl Ctx {
    fn units_json(&self) -> Value {
        json!({
            "mode": match self.units { UnitMode::Normalized => "normalized", UnitMode::Physical(_) => "physical" },
            "time": self.units.time_label(),
            "length": self.units.length_label(),
            "velocity": self.units.velocity_label(),
            "stiffness": self.units.stiffness_label(),
        })
    }

    fn table(&self, t: &Table, stem: &str) -> Result<PathBuf> {
        t.write(&self.out, stem, self.format)
            .with_context(|| format!("writing {stem} to {}", self.out.display()))
    }

    fn summary(&self, stem: &str, v: &Value) -> Result<PathBuf> {
        let p = write_summary(&self.out, stem, v)
            .with_context(|| format!("writing {stem}.json to {}", self.out.display()))?;
        println!("{}", p.display());
        Ok(p)
    }
}

fn unit_mode(cli: &Cli) -> Result<UnitMode, anyhow::Error> {
    match cli.units {
        UnitsArg::Normalized => Ok(UnitMode::Normalized),
        UnitsArg::Physical => match (cli.mass, cli.k0, cli.a0) {
            (Some(m), Some(k), Some(a)) => Ok(UnitMode::Physical(PhysicalUnits::new(m, k, a)?)),
            _ => Err(ConfigError::Invalid("physical units need --mass, --k0 and --a0".into()).into()),
        },
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let ctx = Ctx {
        out: cli.out.clone(),
        format: match cli.format {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        },
        units: unit_mode(cli)?,
    };
    fs::create_dir_all(&ctx.out)
        .with_context(|| format!("creating output directory {}", ctx.out.display()))?;
    match &cli.command {
        Command::Plan { gamma, method, step } => cmd_plan(&ctx, *gamma, (*method).into(), *step),
        Command::Sweep {
            gamma_min,
            gamma_max,
            points,
            spacing,
        } => cmd_sweep(&ctx, *gamma_min, *gamma_max, *points, *spacing),
        Command::Simulate {
            gamma,
            method,
            ramp_delta,
            grid,
            dt,
            modes,
            record_every,
            force,
        } => cmd_simulate(
            &ctx,
            &SimulateArgs {
                gamma: *gamma,
                method: (*method).into(),
                deltas: ramp_delta.clone(),
                grid: *grid,
                dt: *dt,
                modes: *modes,
                record_every: *record_every,
                force: *force,
            },
        ),
        Command::Otto {
            tau_c,
            tau_h,
            gamma,
            points,
            gamma_max,
        } => cmd_otto(&ctx, tau_c, *tau_h, *gamma, *points, *gamma_max),
        Command::Certify {
            gamma,
            max_switches,
            grid,
            endpoint_tol,
            horizon,
        } => cmd_certify(&ctx, gamma, *max_switches, *grid, *endpoint_tol, *horizon),
    }
}

/// Control table with both one-sided values at every jump.
fn control_table(plan: &ExpansionPlan, step: f64, units: &UnitMode) -> Result<Table> {
    let traj = plan.sample(step)?;
    let mut t = Table::new(match units {
        UnitMode::Normalized => ["t", "u"],
        UnitMode::Physical(_) => ["t", "k"],
    });
    let row = |time: f64, u: f64| vec![units.time(time), units.stiffness(u)];
    match &plan.control {
        PlanControl::Piecewise(s) => {
            let jumps: Vec<f64> = s.switch_times();
            t.push(row(0.0, 0.0));
            for smp in &traj.samples {
                if jumps.contains(&smp.t) {
                    t.push(row(smp.t, s.control_at(smp.t - f64::EPSILON.max(smp.t * 1e-15))));
                }
                if smp.t == plan.duration {
                    let last = s.segments().last().map_or(0.0, |seg| seg.control);
                    t.push(row(smp.t, last));
                    t.push(row(smp.t, 0.0));
                } else {
                    t.push(row(smp.t, s.control_at(smp.t)));
                }
            }
        }
        PlanControl::Polynomial(_) => {
            for smp in &traj.samples {
                t.push(row(smp.t, smp.u));
            }
        }
    }
    Ok(t)
}

fn cmd_plan(ctx: &Ctx, gamma: f64, method: PlanMethod, step: f64) -> Result<()> {
    let plan = ExpansionPlan::from_method(gamma, method)?;
    let u = &ctx.units;
    let traj = plan.sample(step)?;
    let mut tt = Table::new(match u {
        UnitMode::Normalized => ["t", "x1", "x2"],
        UnitMode::Physical(_) => ["t", "a", "a_dot"],
    });
    for s in &traj.samples {
        tt.push(vec![u.time(s.t), u.length(s.state.x1), u.velocity(s.state.x2)]);
    }
    let stem = format!("plan_{method}");
    ctx.table(&control_table(&plan, step, u)?, &format!("{stem}_control"))?;
    ctx.table(&tt, &format!("{stem}_trajectory"))?;

    let mut summary = json!({
        "command": "plan",
        "gamma": gamma,
        "method": method,
        "total": u.time(plan.duration),
        "endpoint_error": plan.endpoint_error(),
        "units": ctx.units_json(),
    });
    match method {
        PlanMethod::Inverse => {
            let peak = peak_control(gamma)?;
            summary["peak"] = json!({
                "s": peak.s,
                "t": u.time(peak.s * plan.duration),
                "u": u.stiffness(peak.value / (plan.duration * plan.duration)),
            });
        }
        _ => {
            let sol = solve_optimal(gamma)?;
            let cert = build_certificate(&sol)?;
            summary["t_x"] = json!(u.time(sol.t_x));
            summary["t_y"] = json!(u.time(sol.t_y));
            summary["switch"] = json!([u.length(sol.switch_state.x1), u.velocity(sol.switch_state.x2)]);
            summary["certificate"] = json!({
                "pass": cert.pass,
                "max_abs_H": cert.max_abs_h,
                "phi_zero_times": cert.phi_zero_times.iter().map(|&t| u.time(t)).collect::<Vec<_>>(),
            });
        }
    }
    ctx.summary(&stem, &summary)?;
    Ok(())
}

/// Expansion factors of a sweep; a single point needs `gamma_min == gamma_max`.
pub fn sweep_points(lo: f64, hi: f64, points: usize, spacing: Spacing) -> Result<Vec<f64>, ConfigError> {
    if points == 0 {
        return Err(ConfigError::Invalid("sweep needs at least one point".into()));
    }
    if !(lo > 1.0 && hi >= lo && hi.is_finite()) {
        return Err(ConfigError::Invalid(format!(
            "sweep range must satisfy 1 < gamma_min <= gamma_max, got [{lo}, {hi}]"
        )));
    }
    if points == 1 || hi == lo {
        return Ok(vec![lo; points.min(1)]);
    }
    let n = (points - 1) as f64;
    Ok((0..points)
        .map(|i| {
            let w = i as f64 / n;
            if i + 1 == points {
                hi
            } else {
                match spacing {
                    Spacing::Linear => lo + w * (hi - lo),
                    Spacing::Log => (lo.ln() + w * (hi.ln() - lo.ln())).exp(),
                }
            }
        })
        .collect())
}

fn cmd_sweep(ctx: &Ctx, lo: f64, hi: f64, points: usize, spacing: Spacing) -> Result<()> {
    let gammas = sweep_points(lo, hi, points, spacing)?;
    let rows: Vec<(f64, f64, f64)> = gammas
        .par_iter()
        .map(|&g| -> Result<_> {
            let opt = solve_optimal(g)?.total;
            let inv = crate::inverse::min_feasible_duration(g)?;
            Ok((g, opt, inv))
        })
        .collect::<Result<_>>()?;
    let u = &ctx.units;
    let mut t = Table::new(["gamma", "t_optimal", "t_inverse"]);
    for &(g, o, i) in &rows {
        t.push(vec![g, u.time(o), u.time(i)]);
    }
    ctx.table(&t, "sweep")?;
    let dominated = rows.iter().all(|r| r.1 < r.2);
    let monotone = rows.windows(2).all(|w| w[1].1 > w[0].1 && w[1].2 > w[0].2);
    ctx.summary(
        "sweep",
        &json!({
            "command": "sweep",
            "points": rows.len(),
            "gamma_min": lo,
            "gamma_max": hi,
            "optimal_faster_everywhere": dominated,
            "monotone": monotone,
            "units": ctx.units_json(),
        }),
    )?;
    Ok(())
}

struct SimulateArgs {
    gamma: f64,
    method: PlanMethod,
    deltas: Vec<f64>,
    grid: usize,
    dt: f64,
    modes: usize,
    record_every: usize,
    force: bool,
}

/// Ideal exact state along the slaved plan at time `t`.
fn reference_state(
    ideal: &SlavedPlan,
    modes: &ModeExpansion,
    grid: usize,
    t: f64,
) -> Result<WaveFunction, QuantumError> {
    let s = ideal.sample(t);
    let panels = ((t * PHASE_PANELS_PER_UNIT).ceil() as usize).max(2);
    let phases = mode_phases(phase_integral(ideal, t, panels), modes.len());
    exact_state(modes, grid, t, s.a, s.a_dot, &phases)
}

struct SimulationRun {
    delta: f64,
    fidelity: Table,
    populations: Table,
    snapshot: Table,
    final_fidelity: f64,
    energy_ratio: f64,
    final_wall: f64,
    norm: f64,
    max_phase_step: f64,
    warnings: Vec<String>,
}

fn simulate_one(a: &SimulateArgs, plan: &ExpansionPlan, delta: f64, units: &UnitMode) -> Result<SimulationRun> {
    let modes = ModeExpansion::equal_superposition(a.modes)?;
    let ideal = SlavedPlan::new(plan.clone());
    let initial = exact_state(&modes, a.grid, 0.0, 1.0, 0.0, &vec![0.0; modes.len()])?;
    let opts = PdeOptions::covering(plan.duration, a.dt).recording(a.record_every.max(1));

    let ramped;
    let protocol: &dyn WallProtocol = if delta > 0.0 {
        let sched = plan.schedule().ok_or_else(|| {
            ConfigError::Invalid("ramps apply to bang-bang plans only; use --method optimal".into())
        })?;
        let ramp = RampedSchedule::new(sched, delta)
            .map_err(|e| ConfigError::Invalid(format!("ramp duration {delta} too long for the arcs: {e}")))?;
        ramped = ramp.wall(RAMP_WALL_STEP.min(a.dt))?;
        &ramped
    } else {
        &ideal
    };

    let (phase_step, suggested) = check_resolution(&initial, protocol, &opts);
    if phase_step > RESOLUTION_LIMIT && !a.force {
        return Err(ConfigError::Invalid(format!(
            "dt = {} under-resolves the dynamics (dt*omega = {phase_step:.3e} > {RESOLUTION_LIMIT}); use --dt {suggested:.3e} or smaller, or --force",
            opts.dt
        ))
        .into());
    }

    let run = evolve_pde(&initial, protocol, &opts)?;
    let mut fidelity = Table::new(["t", "F"]);
    let mut final_fidelity = f64::NAN;
    for snap in &run.snapshots {
        let reference = reference_state(&ideal, &modes, a.grid, snap.time.min(plan.duration))?;
        let f = physical_fidelity(&reference, snap);
        fidelity.push(vec![units.time(snap.time), f]);
        final_fidelity = f;
    }

    let cutoff = crate::quantum::DEFAULT_MODES.max(a.modes);
    let before = initial.populations(cutoff);
    let after = run.state.populations(cutoff);
    let mut populations = Table::new(["n", "initial", "final"]);
    for (i, (p0, p1)) in before.iter().zip(&after).enumerate() {
        populations.push(vec![(i + 1) as f64, *p0, *p1]);
    }
    let mut snapshot = Table::new(["y", "re", "im", "abs2"]);
    for (y, v) in crate::quantum::grid_points(a.grid).zip(&run.state.values) {
        snapshot.push(vec![y, v.re, v.im, Complex64::norm_sqr(v)]);
    }
    let energy_ratio = run.state.mean_energy(cutoff) / initial.mean_energy(cutoff);
    Ok(SimulationRun {
        delta,
        fidelity,
        populations,
        snapshot,
        final_fidelity,
        energy_ratio,
        final_wall: run.state.wall,
        norm: run.state.norm(),
        max_phase_step: run.max_phase_step,
        warnings: run.warnings,
    })
}

fn cmd_simulate(ctx: &Ctx, a: &SimulateArgs) -> Result<()> {
    if a.modes == 0 || a.grid < 2 || a.record_every == 0 {
        return Err(ConfigError::Invalid("modes, record-every must be >= 1 and grid >= 2".into()).into());
    }
    if a.deltas.is_empty() {
        return Err(ConfigError::Invalid("no ramp duration given".into()).into());
    }
    let plan = ExpansionPlan::from_method(a.gamma, a.method)?;
    let runs: Vec<SimulationRun> = a
        .deltas
        .par_iter()
        .map(|&d| simulate_one(a, &plan, d, &ctx.units))
        .collect::<Result<_>>()?;

    let mut items = Vec::new();
    for r in &runs {
        let stem = if runs.len() == 1 {
            "simulate".to_string()
        } else {
            format!("simulate_delta{}", r.delta)
        };
        ctx.table(&r.fidelity, &format!("{stem}_fidelity"))?;
        ctx.table(&r.populations, &format!("{stem}_populations"))?;
        ctx.table(&r.snapshot, &format!("{stem}_snapshot"))?;
        for w in &r.warnings {
            eprintln!("warning: {w}");
        }
        items.push(json!({
            "ramp_delta": ctx.units.time(r.delta),
            "final_fidelity": json_num(r.final_fidelity),
            "energy_ratio": r.energy_ratio,
            "expected_energy_ratio": 1.0 / (a.gamma * a.gamma),
            "final_wall": ctx.units.length(r.final_wall),
            "norm": r.norm,
            "max_dt_omega": r.max_phase_step,
            "warnings": r.warnings,
        }));
    }
    ctx.summary(
        "simulate",
        &json!({
            "command": "simulate",
            "gamma": a.gamma,
            "method": a.method,
            "total": ctx.units.time(plan.duration),
            "grid": a.grid,
            "dt": ctx.units.time(PdeOptions::covering(plan.duration, a.dt).dt),
            "modes": a.modes,
            "runs": items,
            "units": ctx.units_json(),
            "energy_units": "hbar^2/(m a0^2)",
        }),
    )?;
    Ok(())
}

fn cmd_otto(
    ctx: &Ctx,
    tau_cs: &[f64],
    tau_h: f64,
    gamma: Option<f64>,
    points: usize,
    gamma_max: f64,
) -> Result<()> {
    if points < 2 {
        return Err(ConfigError::Invalid("the rate curve needs at least 2 points".into()).into());
    }
    for &tc in tau_cs {
        if tc >= tau_h {
            return Err(ThermoError::InvalidTemperatures { tau_c: tc, tau_h }.into());
        }
    }
    let search = RateSearch {
        gamma_max,
        ..RateSearch::default()
    };
    let optima: Vec<_> = tau_cs
        .par_iter()
        .map(|&tc| -> Result<_> {
            Ok((
                max_cooling_rate_with(tc, tau_h, ExpansionTimeModel::Optimal, &search)?,
                max_cooling_rate_with(tc, tau_h, ExpansionTimeModel::Inverse, &search)?,
            ))
        })
        .collect::<Result<_>>()?;

    let t_unit = ctx.units.time(1.0);
    let mut bound = Table::new(["tau_c", "gamma_star", "R_star", "bound", "R_star_inverse"]);
    for (o, i) in &optima {
        bound.push(vec![
            o.tau_c,
            o.gamma_star,
            o.r_star / t_unit,
            o.bound.map_or(f64::NAN, |b| b / t_unit),
            i.r_star / t_unit,
        ]);
    }
    ctx.table(&bound, "otto_bound")?;

    for (k, &tc) in tau_cs.iter().enumerate() {
        let g0 = feasibility_threshold(tc, tau_h);
        let gammas = sweep_points(g0, gamma_max.max(g0), points, Spacing::Log)?;
        let mut curve = Table::new(["gamma", "Q", "R_optimal", "R_inverse"]);
        for g in gammas {
            let spec = OttoCycleSpec::new(tc, tau_h, g)?;
            // the first point sits on the threshold, where rounding can leave Q just below 0
            let q = heat_extracted(&spec).max(0.0);
            let r = |m| -> Result<f64> {
                Ok(if q > 0.0 { cooling_rate(&spec, m)? / t_unit } else { 0.0 })
            };
            curve.push(vec![g, q, r(ExpansionTimeModel::Optimal)?, r(ExpansionTimeModel::Inverse)?]);
        }
        let stem = if tau_cs.len() == 1 { "otto_rate".to_string() } else { format!("otto_rate_{k}") };
        ctx.table(&curve, &stem)?;
    }

    let operating = match gamma {
        Some(g) => {
            let mut ops = Vec::new();
            for &tc in tau_cs {
                let spec = OttoCycleSpec::new(tc, tau_h, g)?;
                let q = heat_extracted(&spec);
                if q <= 0.0 {
                    bail!(Infeasible(format!(
                        "no refrigeration at gamma = {g}: Q = {q:.6e} <= 0 for tau_c = {tc}, need gamma > {:.6}",
                        spec.gamma_threshold()
                    )));
                }
                ops.push(json!({
                    "tau_c": tc,
                    "gamma": g,
                    "Q": q,
                    "R_optimal": cooling_rate(&spec, ExpansionTimeModel::Optimal)? / t_unit,
                    "R_inverse": cooling_rate(&spec, ExpansionTimeModel::Inverse)? / t_unit,
                }));
            }
            Value::Array(ops)
        }
        None => Value::Null,
    };

    let results: Vec<Value> = optima
        .iter()
        .map(|(o, i)| {
            json!({
                "tau_c": o.tau_c,
                "gamma_min": feasibility_threshold(o.tau_c, tau_h),
                "optimal": { "gamma_star": o.gamma_star, "R_star": o.r_star / t_unit, "Q_star": o.q_star },
                "inverse": { "gamma_star": i.gamma_star, "R_star": i.r_star / t_unit, "Q_star": i.q_star },
                "bound": third_law_bound(o.tau_c).map(|b| b / t_unit),
                "below_bound": o.below_bound(),
            })
        })
        .collect();
    ctx.summary(
        "otto",
        &json!({
            "command": "otto",
            "tau_h": tau_h,
            "gamma_max": gamma_max,
            "results": results,
            "operating_point": operating,
            "units": { "temperature": "energy (k_B = 1)", "rate": format!("energy/{}", ctx.units.time_label()) },
        }),
    )?;
    Ok(())
}

fn cmd_certify(
    ctx: &Ctx,
    gammas: &[f64],
    max_switches: usize,
    grid: f64,
    endpoint_tol: f64,
    horizon: f64,
) -> Result<()> {
    if gammas.is_empty() {
        return Err(ConfigError::Invalid("no expansion factor given".into()).into());
    }
    let u = &ctx.units;
    let results: Vec<_> = gammas
        .par_iter()
        .map(|&g| -> Result<_> {
            let sol = solve_optimal(g)?;
            let cert = build_certificate(&sol)?;
            let cfg = OracleConfig {
                horizon,
                ..OracleConfig::new(g, max_switches, grid, endpoint_tol)
            };
            let oracle = brute_force_min_time(&cfg)?;
            Ok((sol, cert, oracle))
        })
        .collect::<Result<_>>()?;

    let mut entries = Vec::new();
    let mut failed = Vec::new();
    for (sol, cert, oracle) in &results {
        let mut t = Table::new(["t", "x1", "x2", "u", "lambda1", "lambda2", "phi", "H"]);
        for s in &cert.samples {
            t.push(vec![
                u.time(s.t),
                s.state.x1,
                s.state.x2,
                s.u,
                s.lambda1,
                s.lambda2,
                s.phi,
                s.hamiltonian,
            ]);
        }
        ctx.table(&t, &format!("certify_gamma{}", sol.gamma))?;
        let allowance = grid + endpoint_tol;
        let confirmed = oracle.duration >= sol.total - allowance;
        if !cert.pass || !confirmed {
            failed.push(sol.gamma);
        }
        entries.push(json!({
            "gamma": sol.gamma,
            "total": u.time(sol.total),
            "t_x": u.time(sol.t_x),
            "certificate": {
                "pass": cert.pass,
                "max_abs_H": cert.max_abs_h,
                "phi_zero_times": cert.phi_zero_times.iter().map(|&t| u.time(t)).collect::<Vec<_>>(),
                "endpoint_error": cert.endpoint_error,
                "violations": serde_json::to_value(&cert.violations)?,
            },
            "oracle": {
                "duration": u.time(oracle.duration),
                "effective_switches": oracle.effective_switches,
                "arcs": oracle.schedule.segments().iter().map(|s| json!([u.time(s.duration), s.control])).collect::<Vec<_>>(),
                "endpoint_error": oracle.endpoint_error,
                "evaluated": oracle.evaluated,
                "allowance": u.time(allowance),
                "closed_form_confirmed": confirmed,
            },
        }));
    }
    ctx.summary(
        "certify",
        &json!({
            "command": "certify",
            "max_switches": max_switches,
            "duration_grid": u.time(grid),
            "endpoint_tol": endpoint_tol,
            "results": entries,
            "units": ctx.units_json(),
        }),
    )?;
    if !failed.is_empty() {
        bail!(VerificationFailed(format!("verification failed for gamma = {failed:?}")));
    }
    Ok(())
}
