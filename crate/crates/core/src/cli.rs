//! Command-line front end.
//!
//! Exit codes: 0 success, 2 model error, 3 ill-conditioned rank decision,
//! 4 breakdown at a breakpoint, 5 inadmissible history, 64 usage error.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::ddae::{self, wrap_linear, Classification, SfDdaeModel};
use crate::error::Error;
use crate::forcing::HistoryFunction;
use crate::integrator::IntegratorOptions;
use crate::lti::{self, LinearDdae, LtiDescriptor};
use crate::models::{self, BuiltModel, Structure};
use crate::mos::{self, Status};
use crate::pencil::{self, MatrixPencil, DEFAULT_TOL};

pub const EXIT_OK: i32 = 0;
pub const EXIT_MODEL: i32 = 2;
pub const EXIT_CONDITIONING: i32 = 3;
pub const EXIT_BREAKDOWN: i32 = 4;
pub const EXIT_INADMISSIBLE: i32 = 5;
pub const EXIT_USAGE: i32 = 64;

#[derive(Parser, Debug)]
#[command(name = "ddae", version, about = "Analyze, classify and simulate delay DAEs from hybrid substructuring")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Regularity, index and Weierstrass split of a pencil or linear model.
    Analyze(ModelArgs),
    /// Retarded, neutral or advanced type of a DDAE.
    Classify(ModelArgs),
    /// Method-of-steps simulation; CSV trajectory and JSON summary.
    Simulate(SimulateArgs),
    /// Deviation from the delay-free reference over a list of delays.
    Sweep(SweepArgs),
    /// List built-in models and their parameters.
    List,
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// Built-in model name or path to a JSON model.
    #[arg(value_name = "MODEL")]
    pub positional: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    /// Parameter override `key=value`, repeatable.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    pub params: Vec<String>,
    /// Rank-decision tolerance.
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct SolverArgs {
    /// Nominal step size (default tau/200).
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long = "newton-tol", default_value_t = 1e-10)]
    pub newton_tol: f64,
    #[arg(long = "res-tol", default_value_t = 1e-8)]
    pub res_tol: f64,
    #[arg(long = "max-newton", default_value_t = 10)]
    pub max_newton: usize,
}

#[derive(Args, Debug, Clone)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Horizon.
    #[arg(long = "T", value_name = "T")]
    pub horizon: Option<f64>,
    /// History `const:v1,v2,..` or `poly:c10,c11,..;c20,..` (one
    /// coefficient list per component, constant term first).
    #[arg(long)]
    pub history: Option<String>,
    /// Points of the residual audit grid.
    #[arg(long = "audit-points", default_value_t = 201)]
    pub audit_points: usize,
    /// Write the JSON summary here instead of stdout.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct SweepArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Delays, comma separated or repeated.
    #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
    pub tau: Vec<f64>,
    #[arg(long = "T", value_name = "T", default_value_t = 1.0)]
    pub horizon: f64,
    /// Points of the comparison grid.
    #[arg(long = "audit-points", default_value_t = 201)]
    pub audit_points: usize,
}

/// Failure of a command, carrying its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: exit_code(&e),
            message: e.to_string(),
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e.root() {
        Error::IllConditioned { .. } => EXIT_CONDITIONING,
        Error::InadmissibleHistory { .. } => EXIT_INADMISSIBLE,
        _ => EXIT_MODEL,
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Parses `args` (including the program name), runs the command and
/// returns the exit code.
pub fn run<I, S>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{}", e.render());
                    EXIT_OK
                }
                _ => EXIT_USAGE,
            };
        }
    };
    let result = match &cli.command {
        Command::Analyze(a) => cmd_analyze(a, stdout),
        Command::Classify(a) => cmd_classify(a, stdout),
        Command::Simulate(a) => cmd_simulate(a, stdout),
        Command::Sweep(a) => cmd_sweep(a, stdout),
        Command::List => cmd_list(stdout),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}

/// Entry point of the `ddae` binary.
pub fn main_from_env() -> i32 {
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or("DDAE_LOG", "warn")).try_init();
    run(std::env::args_os(), &mut std::io::stdout(), &mut std::io::stderr())
}

/// A model resolved from the registry or a JSON file.
pub enum Resolved {
    Builtin(BuiltModel),
    Pencil(MatrixPencil),
    Lti(LtiDescriptor),
    Linear(LinearDdae),
}

fn model_name(a: &ModelArgs) -> CliResult<&str> {
    match (&a.positional, &a.model) {
        (Some(_), Some(_)) => Err(Failure::usage("give the model either positionally or with --model")),
        (Some(m), None) | (None, Some(m)) => Ok(m),
        (None, None) => Err(Failure::usage("no model given")),
    }
}

pub fn parse_params(raw: &[String]) -> CliResult<Vec<(String, f64)>> {
    raw.iter()
        .map(|kv| {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Failure::usage(format!("expected KEY=VALUE, got `{kv}`")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Failure::usage(format!("`{v}` is not a number")))?;
            Ok((k.trim().to_string(), v))
        })
        .collect()
}

fn load_json(path: &Path) -> crate::Result<Resolved> {
    let text = std::fs::read_to_string(path)?;
    let value: Value = serde_json::from_str(&text)?;
    let obj = value
        .as_object()
        .ok_or_else(|| Error::Data("model file must hold a JSON object".into()))?;
    Ok(if obj.contains_key("A0") {
        Resolved::Linear(serde_json::from_value(value)?)
    } else if obj.contains_key("B") || obj.contains_key("C") {
        Resolved::Lti(serde_json::from_value(value)?)
    } else {
        Resolved::Pencil(serde_json::from_value(value)?)
    })
}

pub fn resolve(a: &ModelArgs) -> CliResult<Resolved> {
    let name = model_name(a)?;
    let params = parse_params(&a.params)?;
    let path = Path::new(name);
    if name.ends_with(".json") || path.is_file() {
        if !params.is_empty() {
            return Err(Failure::usage("--param applies to built-in models only"));
        }
        return Ok(load_json(path)?);
    }
    Ok(Resolved::Builtin(models::lookup(name)?.build(&params)?))
}

fn emit(out: &Option<PathBuf>, stdout: &mut dyn Write, value: &impl Serialize) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(Error::from)?;
    match out {
        Some(p) => std::fs::write(p, text + "\n").map_err(Error::from)?,
        None => writeln!(stdout, "{text}").map_err(Error::from)?,
    }
    Ok(())
}

fn pencil_json(p: &MatrixPencil, tol: f64) -> crate::Result<Value> {
    Ok(serde_json::to_value(pencil::analyze(p, tol)?)?)
}

fn with_subsystems(mut report: Value, subs: &[(String, MatrixPencil)], tol: f64) -> crate::Result<Value> {
    if !subs.is_empty() {
        let mut map = serde_json::Map::new();
        for (name, p) in subs {
            map.insert(name.clone(), pencil_json(p, tol)?);
        }
        report["subsystems"] = Value::Object(map);
    }
    Ok(report)
}

fn linear_json(sys: &LinearDdae, tol: f64) -> crate::Result<Value> {
    let mut report = pencil_json(&sys.pencil(), tol)?;
    if report["regular"] == json!(true) {
        report["classification"] = serde_json::to_value(lti::classify_linear(sys, tol)?)?;
    }
    report["tau"] = json!(sys.tau());
    Ok(report)
}

pub fn cmd_analyze(a: &ModelArgs, stdout: &mut dyn Write) -> CliResult<i32> {
    let tol = a.tol;
    let report = match resolve(a)? {
        Resolved::Pencil(p) => pencil_json(&p, tol)?,
        Resolved::Lti(s) => pencil_json(&s.pencil(), tol)?,
        Resolved::Linear(s) => linear_json(&s, tol)?,
        Resolved::Builtin(b) => {
            let mut report = match &b.structure {
                Structure::Pencil(p) => pencil_json(p, tol)?,
                Structure::Lti(s) => pencil_json(&s.pencil(), tol)?,
                Structure::Linear(s) => linear_json(s, tol)?,
                Structure::Nonlinear { d, a, strangeness } => {
                    let mut r = json!({"d": d, "a": a, "strangeness": strangeness});
                    if let Some(m) = &b.simulation {
                        r["classification"] = serde_json::to_value(ddae::classify(m.as_ref())).map_err(Error::from)?;
                    }
                    r
                }
            };
            report["model"] = json!(b.name);
            with_subsystems(report, &b.subsystems, tol)?
        }
    };
    emit(&a.out, stdout, &report)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct ClassifyReport {
    model: String,
    classification: Classification,
    #[serde(skip_serializing_if = "Option::is_none")]
    nu: Option<usize>,
    /// Highest power of the nilpotent part that meets the delay term.
    #[serde(skip_serializing_if = "Option::is_none")]
    highest_power: Option<usize>,
}

fn classify_linear_report(name: &str, sys: &LinearDdae, tol: f64) -> crate::Result<ClassifyReport> {
    let s = lti::linear_structure(sys, tol)?;
    Ok(ClassifyReport {
        model: name.into(),
        classification: s.classification,
        nu: Some(s.form.index),
        highest_power: s.highest_power,
    })
}

pub fn cmd_classify(a: &ModelArgs, stdout: &mut dyn Write) -> CliResult<i32> {
    let no_delay = || Error::Unsupported("model has no delay term to classify".into());
    let report = match resolve(a)? {
        Resolved::Linear(s) => classify_linear_report(model_name(a)?, &s, a.tol)?,
        Resolved::Pencil(_) | Resolved::Lti(_) => return Err(no_delay().into()),
        Resolved::Builtin(b) => match (&b.structure, &b.simulation) {
            (Structure::Linear(s), _) => classify_linear_report(&b.name, s, a.tol)?,
            (_, Some(m)) => ClassifyReport {
                model: b.name.clone(),
                classification: ddae::classify(m.as_ref()),
                nu: None,
                highest_power: None,
            },
            _ => return Err(no_delay().into()),
        },
    };
    emit(&a.out, stdout, &report)?;
    Ok(EXIT_OK)
}

/// Parses `const:v1,v2,..` or `poly:c10,c11;c20,..`.
pub fn parse_history(spec: &str) -> CliResult<HistoryFunction> {
    let (kind, body) = spec
        .split_once(':')
        .ok_or_else(|| Failure::usage(format!("history must be `const:..` or `poly:..`, got `{spec}`")))?;
    let numbers = |s: &str| -> CliResult<Vec<f64>> {
        s.split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Failure::usage(format!("`{v}` is not a number")))
            })
            .collect()
    };
    match kind {
        "const" => Ok(HistoryFunction::constant(&numbers(body)?)),
        "poly" => Ok(HistoryFunction::polynomial(
            body.split(';').map(numbers).collect::<CliResult<_>>()?,
        )),
        other => Err(Failure::usage(format!("unknown history kind `{other}`"))),
    }
}

fn solver_options(s: &SolverArgs) -> CliResult<IntegratorOptions> {
    let opts = IntegratorOptions {
        h: s.h,
        newton_tol: s.newton_tol,
        res_tol: s.res_tol,
        max_newton: s.max_newton,
        ..IntegratorOptions::default()
    };
    opts.validate().map_err(|e| Failure::usage(e.to_string()))?;
    Ok(opts)
}

#[derive(Serialize)]
pub struct SimulationSummary {
    pub model: String,
    #[serde(flatten)]
    pub status: Status,
    /// Time at which the solution stopped, if it broke down.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub breakpoint: Option<f64>,
    pub horizon: f64,
    pub covered_until: f64,
    pub breakpoints: Vec<f64>,
    /// Largest step-endpoint residual of the integrator.
    pub max_residual: f64,
    pub audit: mos::AuditReport,
    pub steps: usize,
    pub halvings: usize,
    pub runtime_seconds: f64,
}

pub fn cmd_simulate(a: &SimulateArgs, stdout: &mut dyn Write) -> CliResult<i32> {
    let opts = solver_options(&a.solver)?;
    if let Some(t) = a.horizon {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Failure::usage(format!("--T must be positive, got {t}")));
        }
    }
    if a.audit_points < 2 {
        return Err(Failure::usage("--audit-points must be at least 2"));
    }
    let explicit = a.history.as_deref().map(parse_history).transpose()?;
    let (model, history, default_horizon): (Arc<dyn SfDdaeModel>, Option<HistoryFunction>, f64) =
        match resolve(&a.model)? {
            Resolved::Builtin(b) => {
                let m = b
                    .simulation
                    .ok_or_else(|| Error::Unsupported(format!("`{}` cannot be simulated", b.name)))?;
                (m, b.history, b.default_horizon)
            }
            Resolved::Linear(s) => (Arc::new(wrap_linear(model_name(&a.model)?, &s, a.model.tol)?), None, s.tau()),
            Resolved::Pencil(_) | Resolved::Lti(_) => {
                return Err(Error::Unsupported("simulation needs a delay model (E, A0, A1, tau)".into()).into())
            }
        };
    let history = explicit
        .or(history)
        .ok_or_else(|| Failure::usage("this model has no default history; pass --history"))?;
    if history.dim() != model.dim() {
        return Err(Failure::usage(format!(
            "history has {} components, model has {}",
            history.dim(),
            model.dim()
        )));
    }
    let horizon = a.horizon.unwrap_or(default_horizon);

    let started = Instant::now();
    let tr = mos::solve_itp(model.as_ref(), &history, horizon, &opts)?;
    let runtime_seconds = started.elapsed().as_secs_f64();
    let audit = mos::audit(model.as_ref(), &tr, a.audit_points)?;

    if let Some(path) = &a.model.out {
        let file = std::fs::File::create(path).map_err(Error::from)?;
        mos::write_csv(model.as_ref(), &tr, std::io::BufWriter::new(file))?;
    }
    let breakpoint = match tr.status {
        Status::BrokeDown { time, .. } => Some(time),
        Status::Complete => None,
    };
    let summary = SimulationSummary {
        model: model.name().to_string(),
        status: tr.status.clone(),
        breakpoint,
        horizon,
        covered_until: tr.covered_until(),
        breakpoints: tr.breakpoints(),
        max_residual: tr.segments.iter().map(|s| s.stats.max_residual).fold(0.0, f64::max),
        audit,
        steps: tr.segments.iter().map(|s| s.stats.steps).sum(),
        halvings: tr.segments.iter().map(|s| s.stats.halvings).sum(),
        runtime_seconds,
    };
    emit(&a.summary, stdout, &summary)?;
    if let Status::BrokeDown { index, time, residual } = tr.status {
        log::warn!("solution broke down entering segment {index} at t = {time} (residual {residual:e})");
        return Ok(EXIT_BREAKDOWN);
    }
    Ok(EXIT_OK)
}

pub fn cmd_sweep(a: &SweepArgs, stdout: &mut dyn Write) -> CliResult<i32> {
    let opts = solver_options(&a.solver)?;
    if a.tau.is_empty() {
        return Err(Failure::usage("empty delay list"));
    }
    if let Some(bad) = a.tau.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
        return Err(Failure::usage(format!("delays must be positive, got {bad}")));
    }
    if !(a.horizon > 0.0 && a.horizon.is_finite()) {
        return Err(Failure::usage(format!("--T must be positive, got {}", a.horizon)));
    }
    let name = model_name(&a.model)?;
    if !matches!(name, "pmsd-hybrid" | "pmsd-coupled") {
        return Err(Error::Unsupported(format!("`{name}` has no delay family with a delay-free reference")).into());
    }
    let family = models::pmsd_sweep_family(&parse_params(&a.model.params)?)?;
    let entries = mos::tau_sweep(
        &family.builder,
        &family.reference,
        &a.tau,
        a.horizon,
        &family.outputs,
        a.audit_points,
        &opts,
    )?;

    let mut buf = Vec::new();
    let mut code = EXIT_OK;
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(["tau", "deviation", "status", "message"]).map_err(Error::from)?;
        for (tau, entry) in a.tau.iter().zip(&entries) {
            match entry {
                Ok(e) => w
                    .write_record([format!("{tau}"), format!("{:.12e}", e.deviation), "ok".into(), String::new()])
                    .map_err(Error::from)?,
                Err(err) => {
                    if code == EXIT_OK {
                        code = exit_code(err);
                    }
                    w.write_record([format!("{tau}"), String::new(), "error".into(), err.to_string()])
                        .map_err(Error::from)?
                }
            }
        }
        w.flush().map_err(Error::from)?;
    }
    match &a.model.out {
        Some(p) => std::fs::write(p, &buf).map_err(Error::from)?,
        None => stdout.write_all(&buf).map_err(Error::from)?,
    }
    Ok(code)
}

fn cmd_list(stdout: &mut dyn Write) -> CliResult<i32> {
    for e in models::builtin_models() {
        let params: Vec<String> = e.defaults.iter().map(|(k, v)| format!("{k}={v}")).collect();
        writeln!(stdout, "{:<18} {}\n{:<18} [{}]", e.name, e.summary, "", params.join(" ")).map_err(Error::from)?;
    }
    Ok(EXIT_OK)
}
