//! Experiment runner behind the `dgdae` binary.
//!
//! `run` integrates a built-in problem and writes a CSV time series;
//! `check` prints the subspace data, properness and structure verdicts of a
//! problem.
//!
//! Configuration files hold one `key = value` pair per line, with the keys
//! named like the long flags (`dt = 0.1`, `newton-tol = 1e-12`); `#` starts a
//! comment. Flags given on the command line override file values. Several
//! `--config` files make a batch: each file is one run, executed on up to
//! `--jobs` threads.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::integrators::{integrate, NewtonConfig, Scheme, Trajectory};
use crate::linalg::penrose_residuals;
use crate::model::{build_conservative_s, check_proper, verify_structure, StructureClaim};
use crate::problems::{self, ProblemSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_SOLVER_FAILURE: i32 = 2;

/// Fixed columns of the CSV output, before the per-problem extras.
pub const CSV_BASE_COLUMNS: [&str; 8] =
    ["step", "t", "V", "V_err", "constraint_norm", "c_norm", "newton_iters", "newton_residual"];

const CHECK_SAMPLES: usize = 20;
const PROPER_TOL: f64 = 1e-10;
const STRUCTURE_TOL: f64 = 1e-9;

#[derive(Debug, Parser)]
#[command(name = "dgdae", version, about = "Discrete gradient integrators for DAEs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate a problem and write a CSV time series.
    Run(RunArgs),
    /// Report rank, properness and structure of a problem.
    Check(CheckArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub problem: Option<String>,
    #[arg(long)]
    pub scheme: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// Grid size of the sinh-gordon problem.
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long = "newton-tol")]
    pub newton_tol: Option<f64>,
    #[arg(long = "newton-max-iters")]
    pub newton_max_iters: Option<usize>,
    /// Output path; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write every k-th step (and the last).
    #[arg(long = "snapshot-every")]
    pub snapshot_every: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "config")]
    pub config: Vec<PathBuf>,
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct CheckArgs {
    /// Problem name (alternatively `--problem`).
    pub name: Option<String>,
    #[arg(long)]
    pub problem: Option<String>,
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Fully resolved settings of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: String,
    /// Recommended scheme of the problem when absent.
    pub scheme: Option<String>,
    pub dt: f64,
    pub steps: usize,
    pub grid: Option<usize>,
    pub newton_tol: f64,
    pub newton_max_iters: usize,
    pub out_path: Option<PathBuf>,
    pub snapshot_every: Option<usize>,
    pub seed: u64,
}

impl RunConfig {
    pub fn new(problem: impl Into<String>) -> Self {
        Self {
            problem: problem.into(),
            scheme: None,
            dt: 0.1,
            steps: 100,
            grid: None,
            newton_tol: 1e-12,
            newton_max_iters: 50,
            out_path: None,
            snapshot_every: None,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {}", self.dt)));
        }
        if self.steps == 0 {
            return Err(Error::InvalidArgument("steps must be at least 1".into()));
        }
        if self.snapshot_every == Some(0) {
            return Err(Error::InvalidArgument("snapshot-every must be at least 1".into()));
        }
        self.newton().validate()
    }

    pub fn newton(&self) -> NewtonConfig {
        NewtonConfig {
            residual_tol: self.newton_tol,
            max_iters: self.newton_max_iters,
            ..NewtonConfig::default()
        }
    }
}

/// Parses a `key = value` configuration file into flag-shaped arguments.
pub fn parse_config(text: &str) -> Result<RunArgs> {
    let mut args = RunArgs::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = |msg: &str| Error::InvalidArgument(format!("config line {}: {msg}", lineno + 1));
        let (key, value) = line.split_once('=').ok_or_else(|| bad("expected `key = value`"))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        fn num<T: std::str::FromStr>(v: &str, bad: impl Fn(&str) -> Error) -> Result<T> {
            v.parse().map_err(|_| bad(&format!("cannot parse `{v}`")))
        }
        match key.as_str() {
            "problem" => args.problem = Some(value.to_string()),
            "scheme" => args.scheme = Some(value.to_string()),
            "dt" => args.dt = Some(num(value, bad)?),
            "steps" => args.steps = Some(num(value, bad)?),
            "grid" => args.grid = Some(num(value, bad)?),
            "newton-tol" => args.newton_tol = Some(num(value, bad)?),
            "newton-max-iters" => args.newton_max_iters = Some(num(value, bad)?),
            "out" => args.out = Some(PathBuf::from(value)),
            "snapshot-every" => args.snapshot_every = Some(num(value, bad)?),
            "seed" => args.seed = Some(num(value, bad)?),
            _ => return Err(bad(&format!("unknown key `{key}`"))),
        }
    }
    Ok(args)
}

/// `flags` over `file`.
pub fn merge(file: &RunArgs, flags: &RunArgs) -> Result<RunConfig> {
    let problem = flags
        .problem
        .clone()
        .or_else(|| file.problem.clone())
        .ok_or_else(|| Error::InvalidArgument("no problem given (use --problem)".into()))?;
    let d = RunConfig::new(problem);
    let cfg = RunConfig {
        scheme: flags.scheme.clone().or_else(|| file.scheme.clone()),
        dt: flags.dt.or(file.dt).unwrap_or(d.dt),
        steps: flags.steps.or(file.steps).unwrap_or(d.steps),
        grid: flags.grid.or(file.grid),
        newton_tol: flags.newton_tol.or(file.newton_tol).unwrap_or(d.newton_tol),
        newton_max_iters: flags.newton_max_iters.or(file.newton_max_iters).unwrap_or(d.newton_max_iters),
        out_path: flags.out.clone().or_else(|| file.out.clone()),
        snapshot_every: flags.snapshot_every.or(file.snapshot_every),
        seed: flags.seed.or(file.seed).unwrap_or(d.seed),
        problem: d.problem,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes the CSV header and one row per record (every `snapshot_every`-th
/// step plus the last). The first observer of each record fills the `V`
/// column; the remaining observers follow as extra columns.
pub fn write_csv<W: Write + ?Sized>(
    out: &mut W,
    extra_names: &[&str],
    traj: &Trajectory,
    snapshot_every: Option<usize>,
) -> io::Result<()> {
    let mut header = CSV_BASE_COLUMNS.join(",");
    for name in extra_names {
        header.push(',');
        header.push_str(name);
    }
    header.push('\n');
    out.write_all(header.as_bytes())?;
    let Some(first) = traj.records.first() else {
        return Ok(());
    };
    let v0 = first.invariant_values.first().map_or(f64::NAN, |(_, v)| *v);
    let every = snapshot_every.unwrap_or(1).max(1);
    let last = traj.records.len() - 1;
    for (idx, rec) in traj.records.iter().enumerate() {
        if rec.step_index % every != 0 && idx != last {
            continue;
        }
        let v = rec.invariant_values.first().map_or(f64::NAN, |(_, v)| *v);
        let mut line = String::with_capacity(256);
        let _ = write!(
            line,
            "{},{},{},{},{},{},{},{}",
            rec.step_index,
            fmt_f(rec.time),
            fmt_f(v),
            fmt_f(v - v0),
            fmt_f(rec.constraint_residual_norm),
            fmt_f(rec.redundant_c_norm),
            rec.newton_iters,
            fmt_f(rec.newton_residual),
        );
        for (_, x) in rec.invariant_values.iter().skip(1) {
            line.push(',');
            line.push_str(&fmt_f(*x));
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    Ok(())
}

/// Outcome of [`run`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub exit_code: i32,
    pub message: Option<String>,
    pub elapsed_seconds: f64,
}

fn usage_error(message: String, start: Instant) -> RunReport {
    RunReport {
        exit_code: EXIT_USAGE,
        message: Some(message),
        elapsed_seconds: start.elapsed().as_secs_f64(),
    }
}

/// Executes one run; the CSV goes to `cfg.out_path` or to `stdout`.
pub fn run<W: Write>(cfg: &RunConfig, stdout: &mut W) -> RunReport {
    let start = Instant::now();
    if let Err(e) = cfg.validate() {
        return usage_error(e.to_string(), start);
    }
    let spec = match problems::by_name(&cfg.problem, cfg.grid, cfg.seed) {
        Ok(s) => s,
        Err(e) => return usage_error(e.to_string(), start),
    };
    let scheme = match cfg.scheme.as_deref().map(str::parse::<Scheme>).transpose() {
        Ok(s) => s.unwrap_or(spec.recommended_scheme),
        Err(e) => return usage_error(e.to_string(), start),
    };
    let method = match spec.method(scheme) {
        Ok(m) => m,
        Err(e) => return usage_error(e.to_string(), start),
    };
    let mut file = match &cfg.out_path {
        Some(p) => match fs::File::create(p) {
            Ok(f) => Some(io::BufWriter::new(f)),
            Err(e) => return usage_error(format!("cannot write {}: {e}", p.display()), start),
        },
        None => None,
    };
    let out: &mut dyn Write = match file.as_mut() {
        Some(f) => f,
        None => stdout,
    };

    let observers = spec.observers();
    let extra_names: Vec<&str> = spec.extras.iter().map(|e| e.name()).collect();
    let result = integrate(
        method.as_ref(),
        &spec.default_initial_state,
        cfg.dt,
        cfg.steps,
        &observers,
        &cfg.newton(),
    );
    let (traj, failure) = match result {
        Ok(t) => (t, None),
        Err(f) if f.step == 0 => return usage_error(f.error.to_string(), start),
        Err(f) => (f.partial.clone(), Some(f)),
    };
    let written = write_csv(out, &extra_names, &traj, cfg.snapshot_every).and_then(|()| {
        if let Some(f) = &failure {
            writeln!(out, "# failed at step {}", f.step)?;
        }
        out.flush()
    });
    let elapsed_seconds = start.elapsed().as_secs_f64();
    if let Err(e) = written {
        return usage_error(format!("write failed: {e}"), start);
    }
    match failure {
        None => RunReport {
            exit_code: EXIT_OK,
            message: None,
            elapsed_seconds,
        },
        Some(f) => RunReport {
            exit_code: EXIT_SOLVER_FAILURE,
            message: Some(f.to_string()),
            elapsed_seconds,
        },
    }
}

/// Text report of the `check` subcommand.
pub fn check_report(spec: &ProblemSpec, seed: u64) -> Result<String> {
    let mut s = String::new();
    let general = spec.general();
    let sub = &general.subspaces;
    let _ = writeln!(s, "problem: {} (d = {})", spec.name, spec.dim());
    let _ = writeln!(s, "A: rank {}, nullity {}", sub.rank, sub.nullity());
    let [r1, r2, r3, r4] = penrose_residuals(&general.a, &sub.pinv);
    let _ = writeln!(s, "Penrose residuals: {r1:.3e} {r2:.3e} {r3:.3e} {r4:.3e}");
    let _ = writeln!(s, "index: {}", spec.index);

    let samples = spec.sample_manifold(CHECK_SAMPLES, seed);
    let mut proper_fields = Vec::new();
    for field in spec.observers() {
        let mut worst: f64 = 0.0;
        for z in &samples {
            worst = worst.max(check_proper(sub, &general.constraints, &field, z, PROPER_TOL)?.residual);
        }
        if worst <= PROPER_TOL {
            let _ = writeln!(s, "{}: proper (residual {worst:.3e})", field.name());
            proper_fields.push(field);
        } else {
            let _ = writeln!(s, "{}: NOT proper (residual {worst:.3e})", field.name());
        }
    }

    match spec.linear_gradient() {
        Some(lg) => {
            let report = verify_structure(lg, &samples, STRUCTURE_TOL)?;
            let constancy = if lg.s.is_constant() { "constant S" } else { "state-dependent S" };
            let verdict = if report.passed { "" } else { " (FAILED)" };
            match report.claim {
                StructureClaim::Dissipative => {
                    let _ = writeln!(s, "A†S negative semidefinite: max eigenvalue {:.3e}{verdict}", report.worst);
                    let _ = writeln!(s, "structure: dissipative, {constancy}");
                }
                StructureClaim::Conservative => {
                    let _ = writeln!(s, "A†S skew: residual {:.3e}{verdict}", report.worst);
                    let _ = writeln!(s, "structure: conservative, {constancy}");
                }
                StructureClaim::None => {
                    let _ = writeln!(s, "structure: none declared ({constancy})");
                }
            }
        }
        None => {
            // Build S from the first nonlinear proper quantity, falling back
            // to any proper one.
            let field = proper_fields
                .iter()
                .find(|f| !matches!(f.hint(), crate::gradients::FieldHint::General))
                .or(proper_fields.first());
            match field {
                Some(field) => {
                    let constructed = build_conservative_s(general, field, 1e-12)?;
                    let (mut recon, mut skew): (f64, f64) = (0.0, 0.0);
                    for z in &samples {
                        recon = recon.max(constructed.reconstruction_residual(z)?);
                        let m = constructed.pinv_times_s(z)?;
                        skew = skew.max((&m + m.transpose()).amax());
                    }
                    let _ = writeln!(
                        s,
                        "constructed S for {}: reconstruction residual {recon:.3e}, A†S skew residual {skew:.3e}",
                        field.name()
                    );
                    let _ = writeln!(s, "structure: conservative, state-dependent S (constructed)");
                }
                None => {
                    let _ = writeln!(s, "structure: none declared");
                }
            }
        }
    }
    let _ = writeln!(s, "recommended scheme: {}", spec.recommended_scheme);
    Ok(s)
}

fn load_config(path: &Path) -> Result<RunArgs> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

/// Dispatches a parsed command line; returns the process exit code.
pub fn execute<W: Write, E: Write>(cli: Cli, stdout: &mut W, stderr: &mut E) -> i32 {
    match cli.command {
        Command::Check(args) => {
            let Some(name) = args.name.or(args.problem) else {
                let _ = writeln!(stderr, "error: no problem given");
                return EXIT_USAGE;
            };
            let report = problems::by_name(&name, args.grid, args.seed.unwrap_or(0))
                .and_then(|spec| check_report(&spec, args.seed.unwrap_or(0)));
            match report {
                Ok(text) => {
                    let _ = stdout.write_all(text.as_bytes());
                    EXIT_OK
                }
                Err(e) => {
                    let _ = writeln!(stderr, "error: {e}");
                    EXIT_USAGE
                }
            }
        }
        Command::Run(args) => {
            let files: Result<Vec<RunArgs>> = args.config.iter().map(|p| load_config(p)).collect();
            let files = match files {
                Ok(f) if f.is_empty() => vec![RunArgs::default()],
                Ok(f) => f,
                Err(e) => {
                    let _ = writeln!(stderr, "error: {e}");
                    return EXIT_USAGE;
                }
            };
            let configs: Result<Vec<RunConfig>> = files.iter().map(|f| merge(f, &args)).collect();
            let configs = match configs {
                Ok(c) => c,
                Err(e) => {
                    let _ = writeln!(stderr, "error: {e}");
                    return EXIT_USAGE;
                }
            };
            if configs.len() == 1 {
                let report = run(&configs[0], stdout);
                report_to(stderr, &configs[0], &report);
                return report.exit_code;
            }
            run_batch(&configs, args.jobs, stderr)
        }
    }
}

fn report_to<E: Write>(stderr: &mut E, cfg: &RunConfig, report: &RunReport) {
    if let Some(msg) = &report.message {
        let _ = writeln!(stderr, "error ({}): {msg}", cfg.problem);
    }
    let _ = writeln!(stderr, "elapsed: {:.3} s", report.elapsed_seconds);
}

/// Runs independent configurations concurrently; each needs its own output
/// file. Returns the largest exit code.
pub fn run_batch<E: Write>(configs: &[RunConfig], jobs: Option<usize>, stderr: &mut E) -> i32 {
    let mut outs: Vec<&Path> = Vec::new();
    for cfg in configs {
        match &cfg.out_path {
            Some(p) if !outs.contains(&p.as_path()) => outs.push(p),
            Some(p) => {
                let _ = writeln!(stderr, "error: output path {} used by more than one run", p.display());
                return EXIT_USAGE;
            }
            None => {
                let _ = writeln!(stderr, "error: batch runs need an output path per config");
                return EXIT_USAGE;
            }
        }
    }
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(jobs.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return EXIT_USAGE;
        }
    };
    let reports: Vec<RunReport> = pool.install(|| configs.par_iter().map(|cfg| run(cfg, &mut io::sink())).collect());
    for (cfg, report) in configs.iter().zip(&reports) {
        report_to(stderr, cfg, report);
    }
    reports.iter().map(|r| r.exit_code).max().unwrap_or(EXIT_OK)
}
