//! The `fermi` command-line tool.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::format::{self, num, ManifoldRow};
use crate::impact::{iterate, MapKind, SolverConfig};
use crate::linear::{certified_interval, linspace, scan_family};
use crate::manifold::{manifold_at_n0, verify_continuum, ManifoldConfig, ManifoldContext, ManifoldSummary};
use crate::orbit::{build_n2_schedule, certify_unbounded, check_cycle_conditions, orbit_residuals};
use crate::racket::{family_coefficients, minimize_bound, CoefficientReport, FamilyParams, OPTIMAL_S};
use crate::real::{Precise, Real};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "fermi", version, about = "Unbounded bouncing-ball orbits and their stable manifold")]
pub struct Cli {
    #[command(flatten)]
    pub run: RunConfig,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// The implicit impact map.
    Full,
    /// The generalized standard map.
    Gs,
}

#[derive(Debug, Clone, Args)]
pub struct RunConfig {
    /// Family parameter s.
    #[arg(long, global = true, env = "FERMI_S", default_value_t = OPTIMAL_S, allow_negative_numbers = true)]
    pub s: f64,
    /// Gravity.
    #[arg(long, global = true, env = "FERMI_G", default_value_t = 1.0, allow_negative_numbers = true)]
    pub g: f64,
    /// Gap offset of the period-two orbit.
    #[arg(long, global = true, env = "FERMI_K", default_value_t = 20)]
    pub k: u64,
    /// Output file; standard output if absent.
    #[arg(long, global = true, env = "FERMI_OUT")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, env = "FERMI_FORMAT", value_enum)]
    pub format: Option<Format>,
    /// Impact steps written by `orbit`.
    #[arg(long, global = true, env = "FERMI_STEPS", default_value_t = 200)]
    pub steps: usize,
    /// Steps checked by `verify` (default 200) or tail cycles of `manifold` (default 60).
    #[arg(long, global = true, env = "FERMI_HORIZON")]
    pub horizon: Option<usize>,
    /// Grid points of `trace` (default 101) or manifold samples (default 41).
    #[arg(long, global = true, env = "FERMI_SAMPLES")]
    pub samples: Option<usize>,
    /// Manifold parameter radius.
    #[arg(long, global = true, env = "FERMI_A_MAX", default_value_t = 1e-3, allow_negative_numbers = true)]
    pub a_max: f64,
    /// First cycle of the manifold.
    #[arg(long, global = true, env = "FERMI_N0", default_value_t = 0)]
    pub n0: usize,
    /// Relative tolerance of the impact-time solves.
    #[arg(long, global = true, env = "FERMI_NEWTON_TOL", allow_negative_numbers = true)]
    pub newton_tol: Option<f64>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Coefficients of the family member and its speed bounds.
    Coeffs,
    /// Minimize the speed bound over s.
    Optimize {
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        s_lo: f64,
        #[arg(long, default_value_t = 0.05, allow_negative_numbers = true)]
        s_hi: f64,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// Iterate the map from the start of the period-two orbit.
    Orbit {
        #[arg(long, value_enum, default_value = "full")]
        mode: Mode,
    },
    /// Certify the period-two unbounded orbit.
    Verify,
    /// Scan the cycle-matrix trace over s.
    Trace {
        #[arg(long, default_value_t = -0.05, allow_negative_numbers = true)]
        s_min: f64,
        #[arg(long, default_value_t = 0.05, allow_negative_numbers = true)]
        s_max: f64,
    },
    /// Sample the stable manifold and follow each sample.
    Manifold {
        /// Cycles followed when checking the velocity ladder.
        #[arg(long, default_value_t = 100)]
        cycles: usize,
        /// Cap on successive-approximation sweeps.
        #[arg(long, default_value_t = 200)]
        iters: usize,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Coeffs => "coeffs",
            Command::Optimize { .. } => "optimize",
            Command::Orbit { .. } => "orbit",
            Command::Verify => "verify",
            Command::Trace { .. } => "trace",
            Command::Manifold { .. } => "manifold",
        }
    }

    fn default_format(&self) -> Format {
        match self {
            Command::Coeffs | Command::Optimize { .. } | Command::Verify => Format::Json,
            _ => Format::Csv,
        }
    }
}

/// A rejected flag value.
#[derive(Debug)]
struct FlagError(String);

fn flag_error(flag: &str, reason: impl std::fmt::Display) -> FlagError {
    FlagError(format!("invalid value for --{flag}: {reason}"))
}

impl RunConfig {
    fn validate(&self, command: &Command) -> std::result::Result<(), FlagError> {
        if !self.s.is_finite() {
            return Err(flag_error("s", "must be finite"));
        }
        if !(self.g.is_finite() && self.g > 0.0) {
            return Err(flag_error("g", format!("must be positive, got {}", self.g)));
        }
        if self.k == 0 {
            return Err(flag_error("k", "must be at least 1"));
        }
        if let Some(tol) = self.newton_tol {
            if !(tol > 0.0 && tol < 1.0) {
                return Err(flag_error("newton-tol", "must lie in (0, 1)"));
            }
        }
        match command {
            Command::Optimize { s_lo, s_hi, tol } => {
                if !(s_lo.is_finite() && s_hi.is_finite() && s_lo < s_hi) {
                    return Err(flag_error("s-hi", format!("need --s-lo < --s-hi, got [{s_lo}, {s_hi}]")));
                }
                if !(*tol > 0.0) {
                    return Err(flag_error("tol", "must be positive"));
                }
            }
            Command::Orbit { .. } if self.steps == 0 => {
                return Err(flag_error("steps", "must be at least 1"));
            }
            Command::Verify if self.horizon.is_some_and(|h| h < 4) => {
                return Err(flag_error("horizon", "must cover at least two cycles (4 steps)"));
            }
            Command::Trace { s_min, s_max } => {
                if !(s_min.is_finite() && s_max.is_finite() && s_min <= s_max) {
                    return Err(flag_error("s-max", "need --s-min <= --s-max"));
                }
                if self.samples == Some(0) {
                    return Err(flag_error("samples", "must be at least 1"));
                }
            }
            Command::Manifold { cycles, iters } => {
                let samples = self.samples.unwrap_or(41);
                if samples.is_multiple_of(2) {
                    return Err(flag_error("samples", "must be odd so that a = 0 is sampled"));
                }
                if !(self.a_max > 0.0 && self.a_max.is_finite()) {
                    return Err(flag_error("a-max", "must be positive"));
                }
                let decay_to = ManifoldConfig::for_precision::<Precise>().decay_to;
                if self.horizon.unwrap_or(60) < decay_to.max(self.n0 + 1) {
                    return Err(flag_error(
                        "horizon",
                        format!("must exceed --n0 and cover the decay fit up to cycle {decay_to}"),
                    ));
                }
                if *cycles == 0 {
                    return Err(flag_error("cycles", "must be at least 1"));
                }
                if *iters == 0 {
                    return Err(flag_error("iters", "must be at least 1"));
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn params(&self) -> FamilyParams {
        FamilyParams { s: self.s, g: self.g }
    }
}

/// What a command produced: the main output and an optional summary.
struct Emission {
    body: String,
    summary: Option<String>,
    passed: bool,
}

/// Parses `args` and runs the tool, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if let Err(FlagError(msg)) = cli.run.validate(&cli.command) {
        eprintln!("error: {msg}");
        return EXIT_INVALID;
    }
    let started = Instant::now();
    let format = cli.run.format.unwrap_or_else(|| cli.command.default_format());
    let result = dispatch(&cli, format).and_then(|em| {
        write_outputs(&cli, &em, &args, started)?;
        Ok(em.passed)
    });
    match result {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_FAILED,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    if e.is_solver_failure() {
        return EXIT_SOLVER;
    }
    match e.root() {
        Error::NotHyperbolic { .. } => EXIT_FAILED,
        _ => EXIT_INVALID,
    }
}

fn write_outputs(cli: &Cli, em: &Emission, args: &[OsString], started: Instant) -> Result<()> {
    let Some(out) = &cli.run.out else {
        print!("{}", em.body);
        if let Some(summary) = &em.summary {
            eprint!("{summary}");
        }
        return Ok(());
    };
    format::write_atomic(out, &em.body)?;
    if let Some(summary) = &em.summary {
        format::write_atomic(&sidecar(out, "summary.json"), summary)?;
    }
    let meta = json!({
        "tool": "fermi",
        "version": env!("CARGO_PKG_VERSION"),
        "command": cli.command.name(),
        "arguments": args.iter().skip(1).map(|a| a.to_string_lossy()).collect::<Vec<_>>(),
        "passed": em.passed,
        "elapsed_seconds": started.elapsed().as_secs_f64(),
    });
    format::write_atomic(&sidecar(out, "meta.json"), &pretty(&meta)?)
}

/// `<out>.<suffix>` next to `out`.
fn sidecar(out: &Path, suffix: &str) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".");
    name.push(suffix);
    out.with_file_name(name)
}

/// Rounds every float in `v` to the published number of significant digits.
fn rounded(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().unwrap_or(f64::NAN);
            num(x)
                .parse::<f64>()
                .ok()
                .and_then(serde_json::Number::from_f64)
                .map_or(Value::Null, Value::Number)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(rounded).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, rounded(v))).collect()),
        other => other,
    }
}

fn pretty<T: Serialize>(value: &T) -> Result<String> {
    let v = rounded(serde_json::to_value(value)?);
    Ok(serde_json::to_string_pretty(&v)? + "\n")
}

fn csv(header: &str, rows: &[Vec<String>]) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}

fn dispatch(cli: &Cli, format: Format) -> Result<Emission> {
    let run = &cli.run;
    match &cli.command {
        Command::Coeffs => cmd_coeffs(run, format),
        Command::Optimize { s_lo, s_hi, tol } => cmd_optimize(*s_lo, *s_hi, *tol, format),
        Command::Orbit { mode } => cmd_orbit(run, *mode, format),
        Command::Verify => cmd_verify(run, format),
        Command::Trace { s_min, s_max } => cmd_trace(run, *s_min, *s_max, format),
        Command::Manifold { cycles, iters } => cmd_manifold(run, *cycles, *iters, format),
    }
}

fn plain(body: String) -> Emission {
    Emission {
        body,
        summary: None,
        passed: true,
    }
}

fn cmd_coeffs(run: &RunConfig, format: Format) -> Result<Emission> {
    let r = CoefficientReport::new(&run.params())?;
    Ok(plain(match format {
        Format::Json => pretty(&r)?,
        Format::Csv => csv(
            "s,g,a1,b1,a2,b2,bound,true_max",
            &[[r.s, r.g, r.a1, r.b1, r.a2, r.b2, r.bound, r.true_max]
                .iter()
                .map(|&x| num(x))
                .collect()],
        ),
    }))
}

fn cmd_optimize(s_lo: f64, s_hi: f64, tol: f64, format: Format) -> Result<Emission> {
    let m = minimize_bound(s_lo, s_hi, tol)?;
    Ok(plain(match format {
        Format::Json => pretty(&json!({ "s_min": m.s, "value": m.value }))?,
        Format::Csv => csv("s_min,value", &[vec![num(m.s), num(m.value)]]),
    }))
}

fn precise_setup(run: &RunConfig) -> Result<(crate::racket::TrigPoly2<Precise>, Precise, SolverConfig<Precise>)> {
    let f = family_coefficients::<Precise>(&run.params())?;
    let g = Precise::from_f64(run.g);
    let mut solver = SolverConfig::for_racket(&f, &g);
    if let Some(tol) = run.newton_tol {
        solver.newton_tol = Precise::from_f64(tol);
    }
    Ok((f, g, solver))
}

fn cmd_orbit(run: &RunConfig, mode: Mode, format: Format) -> Result<Emission> {
    let (f, g, solver) = precise_setup(run)?;
    let sched = build_n2_schedule(&g, run.k)?;
    let kind = match mode {
        Mode::Full => MapKind::Full,
        Mode::Gs => MapKind::Standard,
    };
    let states = iterate(&f, &sched.start(), run.steps, &solver, &g, kind)?;
    let conditions = check_cycle_conditions(&f, &sched, &g);
    let residuals = orbit_residuals(&f, &sched, &states);
    let passed = conditions.certified && residuals.hold(run.g);
    let body = match format {
        Format::Csv => format::orbit_csv(&states),
        Format::Json => pretty(
            &states
                .iter()
                .enumerate()
                .map(|(n, s)| json!({ "n": n, "t": s.t.to_f64(), "v": s.v.to_f64() }))
                .collect::<Vec<_>>(),
        )?,
    };
    Ok(Emission {
        body,
        summary: None,
        passed,
    })
}

fn cmd_verify(run: &RunConfig, format: Format) -> Result<Emission> {
    let (f, g, solver) = precise_setup(run)?;
    let sched = build_n2_schedule(&g, run.k)?;
    let (report, _) = certify_unbounded(&f, &sched, run.horizon.unwrap_or(200), &solver, &g)?;
    let body = match format {
        Format::Json => pretty(&report)?,
        Format::Csv => {
            let c = &report.conditions;
            let o = report.orbit.as_ref().expect("orbit residuals");
            let opt = |x: Option<f64>| x.map(num).unwrap_or_default();
            csv(
                "name,value",
                &[
                    vec!["c1".into(), num(c.c1)],
                    vec!["c2p".into(), opt(c.c2p)],
                    vec!["c3".into(), opt(c.c3)],
                    vec!["c4p".into(), opt(c.c4p)],
                    vec!["horizon".into(), o.horizon.to_string()],
                    vec!["max_integrality".into(), num(o.max_integrality)],
                    vec!["max_velocity_residual".into(), num(o.max_velocity_residual)],
                    vec!["max_divdiff".into(), num(o.max_divdiff)],
                    vec!["certified".into(), format::flag(report.certified).into()],
                ],
            )
        }
    };
    Ok(Emission {
        body,
        summary: None,
        passed: report.certified,
    })
}

fn cmd_trace(run: &RunConfig, s_min: f64, s_max: f64, format: Format) -> Result<Emission> {
    let grid = linspace(s_min, s_max, run.samples.unwrap_or(101));
    let rows = scan_family(&grid, run.g, run.k)?;
    let passed = rows.iter().any(|r| r.member()) && rows.iter().filter(|r| r.member()).all(|r| r.hyperbolic);
    let body = match format {
        Format::Csv => format::scan_csv(&rows),
        Format::Json => {
            let interval = certified_interval(&rows, 0.006);
            pretty(&json!({ "rows": rows, "certified_interval": interval }))?
        }
    };
    Ok(Emission {
        body,
        summary: None,
        passed,
    })
}

fn cmd_manifold(run: &RunConfig, cycles: usize, iters: usize, format: Format) -> Result<Emission> {
    let (f, g, solver) = precise_setup(run)?;
    let sched = build_n2_schedule(&g, run.k)?;
    let cfg = ManifoldConfig {
        n0: run.n0,
        horizon: run.horizon.unwrap_or(60),
        iters,
        a_max: run.a_max,
        samples: run.samples.unwrap_or(41),
        ..ManifoldConfig::for_precision::<Precise>()
    };
    cfg.validate()?;
    let table = cfg.horizon.max(cfg.decay_to).max(cycles + cfg.n0);
    let ctx = ManifoldContext::new(f, sched, solver, table)?;
    let run_out = manifold_at_n0(&ctx, &cfg)?;
    let continuum = verify_continuum(&ctx, &run_out.samples, cycles);
    let lambda_s = ctx.split.stable.to_f64();
    let rows: Vec<ManifoldRow> = run_out
        .samples
        .iter()
        .zip(&continuum.rows)
        .map(|(s, c)| ManifoldRow {
            a: s.a,
            t0: s.state.t.to_f64(),
            v0: s.state.v.to_f64(),
            theta_residual: s.theta_residual,
            decay_ratio: s.decay_ratio,
            pass: s.accepted(lambda_s) && c.pass,
        })
        .collect();
    let summary = ManifoldSummary::new(&ctx, &cfg, &run_out, &continuum);
    let passed = run_out.failures.is_empty() && rows.iter().all(|r| r.pass);
    let summary_json = pretty(&json!({
        "summary": summary,
        "failures": run_out.failures,
    }))?;
    Ok(match format {
        Format::Csv => Emission {
            body: format::manifold_csv(&rows),
            summary: Some(summary_json),
            passed,
        },
        Format::Json => {
            let samples: Vec<Value> = rows
                .iter()
                .map(|r| {
                    json!({
                        "a": r.a, "t0": r.t0, "v0": r.v0,
                        "theta_residual": r.theta_residual,
                        "decay_ratio": r.decay_ratio, "pass": r.pass,
                    })
                })
                .collect();
            Emission {
                body: pretty(&json!({
                    "summary": summary,
                    "failures": run_out.failures,
                    "samples": samples,
                    "continuum": continuum,
                }))?,
                summary: None,
                passed,
            }
        }
    })
}
