//! Batch front end for the queueing-inventory toolkit.
//!
//! [`run`] parses arguments, executes one subcommand and returns the process
//! exit code. Artifacts go to files under `--out DIR` when given, otherwise
//! the primary artifact is written to stdout; human-readable summaries and
//! warnings always go to stderr.
//!
//! Exit codes: 0 success, 1 a check failed, 2 configuration error,
//! 3 refused because the parameters are not ergodic, 4 drift certificate
//! inapplicable, 5 solver failure, 6 I/O error.

pub mod config;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use qinv::analysis::{self, BalanceReport, GeometricReport};
use qinv::instant;
use qinv::io as qio;
use qinv::lyapunov::{self, ErgodicityVerdict, LyapunovCertificate, Sharpness};
use qinv::simulator::{self, SimConfig, SimEstimates, ThroughputReport};
use qinv::solver::{self, SolveMethod, SolveOptions, StationaryDistribution, TruncationSpec};
use qinv::{Error, ModelParams, ParamAxis};
use rayon::prelude::*;
use serde::Serialize;

use config::{parse_count, parse_grid, validate_grid, ExperimentConfig, Format, SweepMode};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_UNSTABLE: i32 = 3;
pub const EXIT_CERTIFICATE: i32 = 4;
pub const EXIT_SOLVER: i32 = 5;
pub const EXIT_IO: i32 = 6;

pub const DEFAULT_TRUNC: TruncationSpec = TruncationSpec::new(40, 40);
pub const DEFAULT_DRIFT_BOX: TruncationSpec = TruncationSpec::new(50, 50);
pub const DEFAULT_EVENTS: u64 = 1_000_000;

#[derive(Parser, Debug)]
#[command(name = "qinv", version, about = "Two-class priority queueing-inventory toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// Experiment config (JSON, or flat key = value).
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Directory for output files; stdout when absent.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Proceed even when the parameters are known not to be ergodic.
    #[arg(long)]
    pub force: bool,
}

#[derive(Args, Debug, Clone, Default)]
pub struct SolverArgs {
    /// Queue caps of the truncated box.
    #[arg(long, num_args = 2, value_names = ["N1", "N2"])]
    pub trunc: Option<Vec<u32>>,
    #[arg(long, value_parser = parse_method)]
    pub method: Option<SolveMethod>,
    /// Residual bound for the stationary solve.
    #[arg(long)]
    pub tolerance: Option<f64>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct SimArgs {
    #[arg(long, value_parser = parse_count)]
    pub events: Option<u64>,
    #[arg(long)]
    pub batches: Option<usize>,
    #[arg(long, value_parser = parse_count)]
    pub warmup: Option<u64>,
    #[arg(long)]
    pub stream: Option<u64>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Stationary distribution of the truncated chain plus all balance checks.
    Solve {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Drift of the Lyapunov certificate over a box of states.
    Drift {
        #[command(flatten)]
        common: Common,
        #[arg(long, num_args = 2, value_names = ["N1", "N2"])]
        trunc: Option<Vec<u32>>,
        /// Also write the per-state drift table.
        #[arg(long)]
        emit_csv: bool,
    },
    /// Batch-means estimates from one simulated trajectory.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sim: SimArgs,
        #[command(flatten)]
        solver: SolverArgs,
        /// Write every event as `t,n1,n2,k,event`.
        #[arg(long, value_name = "PATH")]
        trajectory: Option<PathBuf>,
        /// Solve the truncated chain and print z-scores per metric.
        #[arg(long)]
        against_solve: bool,
    },
    /// Inventory distribution under zero service time.
    Instant {
        #[command(flatten)]
        common: Common,
        /// Compare a `k,theta` CSV against the closed form.
        #[arg(long, value_name = "PATH")]
        check: Option<PathBuf>,
    },
    /// Ergodicity verdict, drift certificate and balance checks on a solved
    /// or supplied distribution.
    Verify {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        solver: SolverArgs,
        /// Check this `n1,n2,k,prob` CSV instead of solving.
        #[arg(long, value_name = "PATH")]
        dist: Option<PathBuf>,
    },
    /// Metrics against one parameter over a grid, as long-format CSV.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        axis: Option<ParamAxis>,
        /// Comma-separated grid values.
        #[arg(long)]
        grid: Option<String>,
        #[arg(long, value_enum)]
        mode: Option<SweepMode>,
        #[arg(long)]
        workers: Option<usize>,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        sim: SimArgs,
    },
}

fn parse_method(s: &str) -> Result<SolveMethod, String> {
    match s {
        "auto" => Ok(SolveMethod::Auto),
        "gth" => Ok(SolveMethod::Gth),
        "power" => Ok(SolveMethod::Power),
        _ => Err(format!("expected auto, gth or power, got `{s}`")),
    }
}

/// A command that stops with a non-zero exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::InvalidParameter { .. }
            | Error::InvalidState { .. }
            | Error::Capacity { .. }
            | Error::DimensionMismatch { .. }
            | Error::InvalidSimConfig(_)
            | Error::MissingKey(_)
            | Error::Parse(_) => EXIT_CONFIG,
            Error::CertificateInapplicable { .. } => EXIT_CERTIFICATE,
            Error::Structural(_)
            | Error::Convergence { .. }
            | Error::ZeroConditioningMass(_)
            | Error::InsufficientData(_) => EXIT_SOLVER,
            Error::Io(_) => EXIT_IO,
        };
        let message = match &e {
            Error::MissingKey(k) => format!("config error: missing key `{k}`"),
            Error::CertificateInapplicable { .. } => format!("certificate inapplicable: {e}"),
            _ => e.to_string(),
        };
        Failure { code, message }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::new(EXIT_IO, format!("i/o error: {e}"))
    }
}

type CmdResult = Result<i32, Failure>;

struct Ctx<'a> {
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
    dir: Option<PathBuf>,
}

impl Ctx<'_> {
    /// Writes `name` under the output directory; the primary artifact goes
    /// to stdout when there is none.
    fn emit(&mut self, name: &str, bytes: &[u8], primary: bool) -> Result<(), Failure> {
        match &self.dir {
            Some(dir) => {
                let path = dir.join(name);
                fs::write(&path, bytes).map_err(|e| Failure::new(EXIT_IO, format!("{}: {e}", path.display())))?;
                writeln!(self.err, "wrote {}", path.display())?;
            }
            None if primary => self.out.write_all(bytes)?,
            None => {}
        }
        Ok(())
    }

    fn note(&mut self, line: impl AsRef<str>) -> Result<(), Failure> {
        writeln!(self.err, "{}", line.as_ref())?;
        Ok(())
    }
}

/// Runs the CLI on `args` (including the program name) and returns the exit
/// code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    return EXIT_OK;
                }
                _ => EXIT_CONFIG,
            };
            let _ = write!(err, "{e}");
            return code;
        }
    };
    let mut ctx = Ctx { out, err, dir: None };
    let result = dispatch(cli.command, &mut ctx);
    let _ = ctx.out.flush();
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(ctx.err, "error: {}", f.message);
            f.code
        }
    }
}

fn dispatch(cmd: Command, ctx: &mut Ctx<'_>) -> CmdResult {
    match cmd {
        Command::Solve { common, solver } => {
            let cfg = prepare(&common, ctx)?;
            cmd_solve(&cfg, &common, &solver, ctx)
        }
        Command::Drift { common, trunc, emit_csv } => {
            let cfg = prepare(&common, ctx)?;
            cmd_drift(&cfg, trunc.as_deref(), emit_csv, ctx)
        }
        Command::Simulate {
            common,
            sim,
            solver,
            trajectory,
            against_solve,
        } => {
            let cfg = prepare(&common, ctx)?;
            cmd_simulate(&cfg, &common, &sim, &solver, trajectory.as_deref(), against_solve, ctx)
        }
        Command::Instant { common, check } => {
            let cfg = prepare(&common, ctx)?;
            cmd_instant(&cfg, &common, check.as_deref(), ctx)
        }
        Command::Verify { common, solver, dist } => {
            let cfg = prepare(&common, ctx)?;
            cmd_verify(&cfg, &common, &solver, dist.as_deref(), ctx)
        }
        Command::Sweep {
            common,
            axis,
            grid,
            mode,
            workers,
            solver,
            sim,
        } => {
            let cfg = prepare(&common, ctx)?;
            let sweep = SweepPlan::resolve(&cfg, axis, grid.as_deref(), mode, workers, &common, &solver, &sim)?;
            cmd_sweep(&cfg, &sweep, ctx)
        }
    }
}

/// Loads the config and sets up the output directory.
fn prepare(common: &Common, ctx: &mut Ctx<'_>) -> Result<ExperimentConfig, Failure> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| Failure::new(EXIT_CONFIG, "config error: --config PATH is required"))?;
    let cfg = ExperimentConfig::load(path).map_err(|e| match e {
        Error::Io(m) => Failure::new(EXIT_CONFIG, format!("config error: cannot read {m}")),
        other => {
            let f = Failure::from(other);
            Failure::new(f.code, format!("config error: {}", f.message.trim_start_matches("config error: ")))
        }
    })?;
    let dir = common.out.clone().or_else(|| cfg.output.path.clone());
    if let Some(d) = &dir {
        fs::create_dir_all(d).map_err(|e| Failure::new(EXIT_IO, format!("{}: {e}", d.display())))?;
    }
    ctx.dir = dir;
    Ok(cfg)
}

fn format_of(common: &Common, cfg: &ExperimentConfig, default: Format) -> Format {
    common.format.or(cfg.output.format).unwrap_or(default)
}

fn trunc_of(flag: Option<&[u32]>, cfg: Option<TruncationSpec>, default: TruncationSpec) -> TruncationSpec {
    match flag {
        Some([a, b]) => TruncationSpec::new(*a, *b),
        _ => cfg.unwrap_or(default),
    }
}

fn solve_options(cfg: &ExperimentConfig, args: &SolverArgs) -> SolveOptions {
    SolveOptions {
        method: args.method.or(cfg.solver.method).unwrap_or(SolveMethod::Auto),
        tolerance: args.tolerance.or(cfg.solver.tolerance),
        ..SolveOptions::default()
    }
}

/// `None` when the parameters are known not to be ergodic.
fn known_unstable(verdict: &ErgodicityVerdict) -> bool {
    !verdict.stable && verdict.sharpness == Sharpness::Sharp
}

/// Refuses known non-ergodic parameters unless forced; warns when stability
/// is merely not established.
fn stability_gate(params: &ModelParams, force: bool, ctx: &mut Ctx<'_>) -> Result<ErgodicityVerdict, Failure> {
    let v = lyapunov::check_ergodicity(params);
    if known_unstable(&v) {
        let msg = "not ergodic: lambda1 + lambda2 >= mu with p = 1";
        if !force {
            return Err(Failure::new(EXIT_UNSTABLE, format!("{msg}; pass --force to proceed on the truncated chain")));
        }
        ctx.note(format!("warning: {msg}; proceeding because of --force"))?;
    } else if !v.stable {
        ctx.note("warning: stability not established (lambda1 + lambda2 >= mu, p < 1)")?;
    }
    Ok(v)
}

fn to_json<T: Serialize>(v: &T) -> Result<Vec<u8>, Failure> {
    let mut buf = serde_json::to_vec_pretty(v).map_err(|e| Failure::new(EXIT_IO, e.to_string()))?;
    buf.push(b'\n');
    Ok(buf)
}

fn buffer(f: impl FnOnce(&mut Vec<u8>) -> qinv::Result<()>) -> Result<Vec<u8>, Failure> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn report_line(r: &BalanceReport) -> String {
    format!(
        "{} {:<20} max_residual={} tolerance={}",
        if r.pass { "PASS" } else { "FAIL" },
        r.identity,
        qio::fmt_f64(r.max_residual),
        qio::fmt_f64(r.tolerance)
    )
}

fn solve_and_check(
    params: &ModelParams,
    trunc: TruncationSpec,
    opts: &SolveOptions,
) -> Result<(StationaryDistribution, Vec<BalanceReport>, Option<GeometricReport>), Failure> {
    let gen = solver::build_generator(params, trunc)?;
    let dist = solver::solve_with(&gen, opts)?;
    let reports = analysis::check_all(&dist, params, &gen)?;
    let geo = analysis::check_geometric(&dist, params).ok();
    Ok((dist, reports, geo))
}

fn cmd_solve(cfg: &ExperimentConfig, common: &Common, args: &SolverArgs, ctx: &mut Ctx<'_>) -> CmdResult {
    let params = &cfg.params;
    stability_gate(params, common.force, ctx)?;
    let trunc = trunc_of(args.trunc.as_deref(), cfg.trunc, DEFAULT_TRUNC);
    let (dist, reports, _) = solve_and_check(params, trunc, &solve_options(cfg, args))?;
    ctx.note(format!(
        "solved {} states (caps {} {}, b {}) by {:?}, residual {}",
        dist.probabilities.len(),
        trunc.cap1,
        trunc.cap2,
        params.b(),
        dist.method,
        qio::fmt_f64(dist.residual)
    ))?;
    for r in &reports {
        ctx.note(report_line(r))?;
    }
    let format = format_of(common, cfg, Format::Csv);
    let dist_bytes = match format {
        Format::Csv => buffer(|b| qio::write_distribution_csv(&dist, b))?,
        Format::Json => buffer(|b| qio::write_distribution_json(&dist, params, b))?,
    };
    ctx.emit(&format!("distribution.{}", format.ext()), &dist_bytes, true)?;
    let balance = match format {
        Format::Csv => buffer(|b| qio::write_balance_csv(&reports, b))?,
        Format::Json => buffer(|b| qio::write_balance_json(&reports, b))?,
    };
    ctx.emit(&format!("balance.{}", format.ext()), &balance, false)?;
    Ok(if reports.iter().all(|r| r.pass) { EXIT_OK } else { EXIT_CHECK_FAILED })
}

fn cmd_drift(cfg: &ExperimentConfig, trunc: Option<&[u32]>, emit_csv: bool, ctx: &mut Ctx<'_>) -> CmdResult {
    let params = &cfg.params;
    let bounds = trunc_of(trunc, cfg.drift, DEFAULT_DRIFT_BOX);
    LyapunovCertificate::new(params)?;
    let report = lyapunov::verify_drift_bound(params, bounds);
    ctx.note(format!(
        "eta={} epsilon={} max_drift_outside_F={} violations={}",
        qio::fmt_f64(report.eta),
        qio::fmt_f64(report.epsilon),
        report.max_drift_outside_f.map_or("none".into(), qio::fmt_f64),
        report.violations.len()
    ))?;
    let summary = buffer(|b| qio::write_drift_json(&report, b))?;
    ctx.emit("drift_summary.json", &summary, !emit_csv)?;
    if emit_csv {
        let table = buffer(|b| qio::write_drift_csv(&report, b))?;
        ctx.emit("drift.csv", &table, true)?;
    }
    Ok(if report.passed() { EXIT_OK } else { EXIT_CHECK_FAILED })
}

fn sim_config(cfg: &ExperimentConfig, common: &Common, args: &SimArgs) -> SimConfig {
    let events = args.events.or(cfg.sim.events).unwrap_or(DEFAULT_EVENTS);
    let mut sc = SimConfig::new(common.seed.or(cfg.sim.seed).unwrap_or(0), events);
    sc.stream = args.stream.or(cfg.sim.stream).unwrap_or(0);
    if let Some(w) = args.warmup.or(cfg.sim.warmup) {
        sc.warmup_events = w;
    }
    if let Some(b) = args.batches.or(cfg.sim.batches) {
        sc.batches = b;
    }
    sc
}

#[derive(Serialize)]
struct ZScore {
    metric: String,
    simulated: f64,
    exact: f64,
    std_error: f64,
    z: f64,
}

fn z_scores(est: &SimEstimates, exact: &BTreeMap<String, f64>) -> Vec<ZScore> {
    exact
        .iter()
        .filter_map(|(name, &x)| {
            let e = est.metric(name)?;
            let z = if e.std_error > 0.0 {
                (e.mean - x) / e.std_error
            } else if e.mean == x {
                0.0
            } else {
                f64::INFINITY.copysign(e.mean - x)
            };
            Some(ZScore {
                metric: name.clone(),
                simulated: e.mean,
                exact: x,
                std_error: e.std_error,
                z,
            })
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    cfg: &ExperimentConfig,
    common: &Common,
    args: &SimArgs,
    solver_args: &SolverArgs,
    trajectory: Option<&Path>,
    against_solve: bool,
    ctx: &mut Ctx<'_>,
) -> CmdResult {
    let params = &cfg.params;
    let verdict = lyapunov::check_ergodicity(params);
    if known_unstable(&verdict) {
        ctx.note("warning: not ergodic: lambda1 + lambda2 >= mu with p = 1; estimates describe a transient path")?;
    }
    let sc = sim_config(cfg, common, args);
    let est = match trajectory {
        Some(path) => {
            let file = fs::File::create(path).map_err(|e| Failure::new(EXIT_IO, format!("{}: {e}", path.display())))?;
            let mut w = BufWriter::new(file);
            let est = simulator::simulate_with_log(params, &sc, &mut w)?;
            w.flush()?;
            est
        }
        None => simulator::simulate(params, &sc)?,
    };
    let tp: ThroughputReport = simulator::throughput_check(&est)?;
    ctx.note(format!(
        "simulated {} events, time {}, seed {} stream {}",
        est.events,
        qio::fmt_f64(est.simulated_time),
        sc.seed,
        sc.stream
    ))?;
    for r in &tp.residuals {
        ctx.note(format!(
            "{} {} residual={} std_error={}",
            if r.within_3_sigma { "ok  " } else { "high" },
            r.name,
            qio::fmt_f64(r.residual),
            qio::fmt_f64(r.std_error)
        ))?;
    }
    let format = format_of(common, cfg, Format::Json);
    let bytes = match format {
        Format::Json => to_json(&est)?,
        Format::Csv => buffer(|b| qio::write_sim_csv(&est, b))?,
    };
    ctx.emit(&format!("sim.{}", format.ext()), &bytes, true)?;

    if against_solve {
        if known_unstable(&verdict) && !common.force {
            return Err(Failure::new(
                EXIT_UNSTABLE,
                "not ergodic: lambda1 + lambda2 >= mu with p = 1; no stationary solution to compare against",
            ));
        }
        let trunc = trunc_of(solver_args.trunc.as_deref(), cfg.trunc, DEFAULT_TRUNC);
        let gen = solver::build_generator(params, trunc)?;
        let dist = solver::solve_with(&gen, &solve_options(cfg, solver_args))?;
        let zs = z_scores(&est, &analysis::stationary_metrics(&dist, params));
        for z in &zs {
            ctx.note(format!(
                "z {:<18} sim={} exact={} z={:.3}",
                z.metric,
                qio::fmt_f64(z.simulated),
                qio::fmt_f64(z.exact),
                z.z
            ))?;
        }
        ctx.emit("zscores.json", &to_json(&zs)?, false)?;
    }
    Ok(EXIT_OK)
}

/// Largest deviation accepted by `instant --check`.
pub const THETA_CHECK_TOLERANCE: f64 = 1e-12;

fn cmd_instant(cfg: &ExperimentConfig, common: &Common, check: Option<&Path>, ctx: &mut Ctx<'_>) -> CmdResult {
    let params = &cfg.params;
    let dist = instant::instant_stationary(params);
    let residual = instant::instant_balance_residual(params, &dist)?;
    ctx.note(format!("balance residual {}", qio::fmt_f64(residual)))?;
    let format = format_of(common, cfg, Format::Csv);
    let bytes = match format {
        Format::Csv => buffer(|b| qio::write_theta_csv(&dist, b))?,
        Format::Json => buffer(|b| qio::write_theta_json(&dist, b))?,
    };
    ctx.emit(&format!("theta.{}", format.ext()), &bytes, true)?;
    if let Some(path) = check {
        let file = fs::File::open(path).map_err(|e| Failure::new(EXIT_IO, format!("{}: {e}", path.display())))?;
        let theirs = qio::read_theta_csv(file)?;
        if theirs.len() != dist.theta.len() {
            return Err(Error::DimensionMismatch {
                expected: dist.theta.len(),
                actual: theirs.len(),
            }
            .into());
        }
        let gap = theirs
            .iter()
            .zip(&dist.theta)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let pass = gap <= THETA_CHECK_TOLERANCE;
        ctx.note(format!(
            "{} theta max deviation {} tolerance {}",
            if pass { "PASS" } else { "FAIL" },
            qio::fmt_f64(gap),
            qio::fmt_f64(THETA_CHECK_TOLERANCE)
        ))?;
        if !pass {
            return Ok(EXIT_CHECK_FAILED);
        }
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct VerifyDoc<'a> {
    params: &'a ModelParams,
    trunc: TruncationSpec,
    ergodicity: ErgodicityVerdict,
    balance: &'a [BalanceReport],
    geometric: Option<GeometricReport>,
    drift: Option<lyapunov::DriftReport>,
    pass: bool,
}

fn cmd_verify(
    cfg: &ExperimentConfig,
    common: &Common,
    args: &SolverArgs,
    dist_path: Option<&Path>,
    ctx: &mut Ctx<'_>,
) -> CmdResult {
    let params = &cfg.params;
    let (dist, reports, geometric) = match dist_path {
        Some(path) => {
            let file = fs::File::open(path).map_err(|e| Failure::new(EXIT_IO, format!("{}: {e}", path.display())))?;
            let imported = qio::read_distribution_csv(file)?;
            if imported.b != params.b() {
                return Err(Failure::new(
                    EXIT_CONFIG,
                    format!("distribution has inventory levels 0..={} but b = {}", imported.b, params.b()),
                ));
            }
            let gen = solver::build_generator(params, imported.trunc)?;
            let tol = args.tolerance.or(cfg.solver.tolerance).unwrap_or(solver::DEFAULT_GTH_TOLERANCE);
            let dist = StationaryDistribution::from_probabilities(&gen, imported.probabilities, tol)?;
            let reports = analysis::check_all(&dist, params, &gen)?;
            let geo = analysis::check_geometric(&dist, params).ok();
            (dist, reports, geo)
        }
        None => {
            stability_gate(params, common.force, ctx)?;
            let trunc = trunc_of(args.trunc.as_deref(), cfg.trunc, DEFAULT_TRUNC);
            solve_and_check(params, trunc, &solve_options(cfg, args))?
        }
    };
    let ergodicity = lyapunov::check_ergodicity(params);
    let drift = ergodicity
        .stable
        .then(|| lyapunov::verify_drift_bound(params, cfg.drift.unwrap_or(DEFAULT_DRIFT_BOX)));

    ctx.note(format!(
        "ergodicity: stable={} eta={} ({:?})",
        ergodicity.stable,
        qio::fmt_f64(ergodicity.eta),
        ergodicity.sharpness
    ))?;
    for r in &reports {
        ctx.note(report_line(r))?;
    }
    if let Some(g) = &geometric {
        ctx.note(format!(
            "geometric: fitted ratio {} normalization gap {}",
            g.fitted_ratio.map_or("none".into(), qio::fmt_f64),
            qio::fmt_f64(g.normalization_gap)
        ))?;
    }
    if let Some(d) = &drift {
        ctx.note(format!(
            "{} drift over {}x{} box, violations {}",
            if d.passed() { "PASS" } else { "FAIL" },
            d.bounds.cap1,
            d.bounds.cap2,
            d.violations.len()
        ))?;
    }
    let pass = reports.iter().all(|r| r.pass) && drift.as_ref().is_none_or(|d| d.passed());
    let doc = VerifyDoc {
        params,
        trunc: dist.trunc(),
        ergodicity,
        balance: &reports,
        geometric,
        drift,
        pass,
    };
    ctx.emit("verify.json", &to_json(&doc)?, true)?;
    if format_of(common, cfg, Format::Json) == Format::Csv {
        let table = buffer(|b| qio::write_balance_csv(&reports, b))?;
        ctx.emit("balance.csv", &table, false)?;
    }
    Ok(if pass { EXIT_OK } else { EXIT_CHECK_FAILED })
}

/// A fully resolved sweep: config and flags merged.
#[derive(Debug, Clone)]
pub struct SweepPlan {
    pub axis: ParamAxis,
    pub grid: Vec<f64>,
    pub mode: SweepMode,
    pub workers: usize,
    pub force: bool,
    pub trunc: TruncationSpec,
    pub solve: SolveOptions,
    pub sim: SimConfig,
}

impl SweepPlan {
    #[allow(clippy::too_many_arguments)]
    fn resolve(
        cfg: &ExperimentConfig,
        axis: Option<ParamAxis>,
        grid: Option<&str>,
        mode: Option<SweepMode>,
        workers: Option<usize>,
        common: &Common,
        solver_args: &SolverArgs,
        sim_args: &SimArgs,
    ) -> Result<Self, Failure> {
        let block = cfg.sweep.as_ref();
        let axis = axis
            .or(block.map(|b| b.axis))
            .ok_or_else(|| Failure::from(Error::MissingKey("sweep.axis".into())))?;
        let grid = match grid {
            Some(g) => parse_grid(g)?,
            None => block
                .map(|b| b.grid.clone())
                .ok_or_else(|| Failure::from(Error::MissingKey("sweep.grid".into())))?,
        };
        validate_grid(&cfg.params, axis, &grid)?;
        let workers = workers.or(block.and_then(|b| b.workers)).unwrap_or(1);
        if workers == 0 {
            return Err(Failure::new(EXIT_CONFIG, "config error: workers must be at least 1"));
        }
        Ok(SweepPlan {
            axis,
            grid,
            mode: mode.or(block.and_then(|b| b.mode)).unwrap_or(SweepMode::Classify),
            workers,
            force: common.force,
            trunc: trunc_of(solver_args.trunc.as_deref(), cfg.trunc, DEFAULT_TRUNC),
            solve: solve_options(cfg, solver_args),
            sim: sim_config(cfg, common, sim_args),
        })
    }
}

/// One metric at one grid point; `half_width` only for simulated values.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub metric: String,
    pub estimate: f64,
    pub half_width: Option<f64>,
}

fn sweep_point(base: &ModelParams, plan: &SweepPlan, index: usize, value: f64) -> qinv::Result<Vec<SweepRow>> {
    let params = base.with(plan.axis, value)?;
    let verdict = lyapunov::check_ergodicity(&params);
    let mut rows = Vec::new();
    let mut push = |metric: &str, estimate: f64, half_width: Option<f64>| {
        rows.push(SweepRow {
            value,
            metric: metric.to_string(),
            estimate,
            half_width,
        })
    };
    push("stable", verdict.stable as u8 as f64, None);
    push("eta", verdict.eta, None);
    if let Some(eps) = verdict.epsilon {
        push("epsilon", eps, None);
    }
    let refuse = known_unstable(&verdict) && !plan.force;
    match plan.mode {
        SweepMode::Classify => {}
        SweepMode::Solve if !refuse => {
            let gen = solver::build_generator(&params, plan.trunc)?;
            let dist = solver::solve_with(&gen, &plan.solve)?;
            for (name, v) in analysis::stationary_metrics(&dist, &params) {
                push(&name, v, None);
            }
            push("boundary_mass", dist.boundary_mass(), None);
            push("residual", dist.residual, None);
        }
        SweepMode::Solve => {}
        SweepMode::Instant => {
            let d = instant::instant_stationary(&params);
            for (k, t) in d.theta.iter().enumerate() {
                push(&format!("theta_{k}"), *t, None);
            }
        }
        SweepMode::Simulate => {
            let sc = SimConfig {
                stream: plan.sim.stream.wrapping_add(index as u64),
                ..plan.sim
            };
            let est = simulator::simulate(&params, &sc)?;
            for (name, e) in &est.time_avg {
                push(name, e.mean, Some(e.half_width));
            }
        }
    }
    Ok(rows)
}

/// Evaluates every grid point on `plan.workers` threads; rows come back in
/// grid order.
pub fn run_sweep(params: &ModelParams, plan: &SweepPlan) -> qinv::Result<Vec<SweepRow>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.workers)
        .build()
        .map_err(|e| Error::InvalidSimConfig(format!("thread pool: {e}")))?;
    let per_point: Vec<qinv::Result<Vec<SweepRow>>> = pool.install(|| {
        plan.grid
            .par_iter()
            .enumerate()
            .map(|(i, &v)| sweep_point(params, plan, i, v))
            .collect()
    });
    let mut rows = Vec::new();
    for r in per_point {
        rows.extend(r?);
    }
    Ok(rows)
}

pub fn write_sweep_csv<W: Write>(axis: ParamAxis, rows: &[SweepRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "axis,value,metric,estimate,half_width")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            axis,
            qio::fmt_f64(r.value),
            r.metric,
            qio::fmt_f64(r.estimate),
            r.half_width.map(qio::fmt_f64).unwrap_or_default()
        )?;
    }
    Ok(())
}

fn cmd_sweep(cfg: &ExperimentConfig, plan: &SweepPlan, ctx: &mut Ctx<'_>) -> CmdResult {
    let rows = run_sweep(&cfg.params, plan)?;
    let mut buf = Vec::new();
    write_sweep_csv(plan.axis, &rows, &mut buf)?;
    ctx.note(format!(
        "swept {} over {} points ({:?}), {} rows",
        plan.axis,
        plan.grid.len(),
        plan.mode,
        rows.len()
    ))?;
    ctx.emit("sweep.csv", &buf, true)?;
    Ok(EXIT_OK)
}
