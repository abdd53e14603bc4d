// SPDX-License-Identifier: Apache-2.0

//! Command-line front end: `generate`, `solve`, `verify`, `study`, `floors`.
//!
//! Every subcommand reads a JSON config (`--config`), applies `--seed` and
//! `--set key=value` overrides to the parsed JSON, and writes into the output
//! directory (`--out`, else the config's `output_dir`, else `fedlab-out`).
//! Relative paths inside a config resolve against the config's directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::algorithms::{self, AlgorithmKind, AlgorithmSpec};
use crate::analysis::{self, ReferenceSolution};
use crate::datagen::{EnsembleKind, EnsembleSpec};
use crate::error::{Error, Result};
use crate::harness::{self, ExperimentConfig, ExperimentKind, REFERENCE_TOL};
use crate::jsonfmt::{self, fmt_f64};
use crate::problem::FederatedProblem;

pub const DEFAULT_OUTPUT_DIR: &str = "fedlab-out";

#[derive(Debug, Parser)]
#[command(name = "fedlab", version, about = "Federated optimization experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Overrides the config's `seed`.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Dotted-path override applied to the parsed config, e.g. `algorithm.s=0.05`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Worker threads; 0 picks the number of cores.
    #[arg(long, global = true, default_value_t = 0, value_name = "N")]
    pub threads: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Sample a problem from an ensemble and write `problem.json`.
    Generate,
    /// Run one algorithm on a problem file and write its trace.
    Solve,
    /// Evaluate closed-form limits and fixed-point residuals of a least-squares problem.
    Verify,
    /// Conditioning study: rounds to reach `eps_target` across a kappa grid.
    Study,
    /// Floor experiments (inexact prox, logistic, or FedGD/FedProx non-convergence).
    Floors,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GenerateConfig {
    ensemble: EnsembleKind,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    output_dir: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolveConfig {
    problem: PathBuf,
    algorithm: AlgorithmSpec,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    output_dir: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct VerifyConfig {
    problem: PathBuf,
    s: f64,
    e: usize,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    output_dir: Option<PathBuf>,
}

/// One-line summary echoed on stdout after a successful run.
#[derive(Debug, Serialize)]
pub struct Summary {
    pub command: &'static str,
    pub output_dir: String,
    pub files: Vec<String>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

#[derive(Serialize)]
struct Diagnostic<'a> {
    error: &'a str,
    message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    round: Option<usize>,
    /// Printed with 17 significant digits.
    #[serde(skip_serializing_if = "Option::is_none")]
    residual: Option<String>,
}

/// Sets `root[path] = value` for a dotted path, creating objects along the
/// way. Numeric segments index into arrays.
pub fn apply_override(root: &mut Value, path: &str, value: Value) -> Result<()> {
    let mut cur = root;
    let segments: Vec<&str> = path.split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err(Error::Config(format!("malformed override key `{path}`")));
    }
    for (i, seg) in segments.iter().enumerate() {
        let last = i + 1 == segments.len();
        cur = match cur {
            Value::Array(items) => {
                let idx: usize = seg
                    .parse()
                    .map_err(|_| Error::Config(format!("`{seg}` in `{path}` is not an array index")))?;
                let len = items.len();
                items
                    .get_mut(idx)
                    .ok_or_else(|| Error::Config(format!("index {idx} out of range (len {len}) in `{path}`")))?
            }
            Value::Object(map) => {
                if last {
                    map.insert(seg.to_string(), value);
                    return Ok(());
                }
                map.entry(seg.to_string()).or_insert_with(|| Value::Object(Map::new()))
            }
            _ => return Err(Error::Config(format!("cannot descend into `{seg}` of `{path}`"))),
        };
        if last {
            *cur = value;
            return Ok(());
        }
    }
    Ok(())
}

/// `key=value`; the value is parsed as JSON and taken as a string otherwise.
pub fn parse_override(raw: &str) -> Result<(String, Value)> {
    let (key, val) = raw
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{raw}` is not of the form key=value")))?;
    let value = serde_json::from_str(val).unwrap_or_else(|_| Value::String(val.to_string()));
    Ok((key.trim().to_string(), value))
}

struct Loaded {
    value: Value,
    base: PathBuf,
}

fn load_config(cli: &Cli) -> Result<Loaded> {
    let path = cli.config.as_ref().ok_or_else(|| Error::Config("--config is required".into()))?;
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    let mut value: Value = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("config {} is not valid JSON: {e}", path.display())))?;
    if !value.is_object() {
        return Err(Error::Config("config must be a JSON object".into()));
    }
    if let Some(seed) = cli.seed {
        apply_override(&mut value, "seed", Value::from(seed))?;
    }
    for raw in &cli.overrides {
        let (key, val) = parse_override(raw)?;
        apply_override(&mut value, &key, val)?;
    }
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(Loaded { value, base })
}

fn typed<T: for<'de> Deserialize<'de>>(value: Value) -> Result<T> {
    serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn output_dir(cli: &Cli, base: &Path, from_config: Option<&PathBuf>) -> PathBuf {
    match (&cli.out, from_config) {
        (Some(out), _) => out.clone(),
        (None, Some(p)) => resolve(base, p),
        (None, None) => PathBuf::from(DEFAULT_OUTPUT_DIR),
    }
}

fn load_problem(base: &Path, p: &Path) -> Result<FederatedProblem> {
    let path = resolve(base, p);
    FederatedProblem::load(&path).map_err(|e| match e {
        Error::Io(io) => Error::Config(format!("cannot read problem {}: {io}", path.display())),
        Error::Json(js) => Error::Config(format!("problem {} is malformed: {js}", path.display())),
        other => other,
    })
}

fn num(x: f64) -> Value {
    Value::String(fmt_f64(x))
}

fn extra(pairs: Vec<(&str, Value)>) -> Map<String, Value> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// Reference optimum for gap columns; `None` when the problem has no unique
/// least-squares solution.
fn reference_for(problem: &FederatedProblem) -> Result<Option<ReferenceSolution>> {
    match analysis::reference_optimum(problem, REFERENCE_TOL) {
        Ok(r) => Ok(Some(r)),
        Err(Error::Degenerate(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

fn cmd_generate(cli: &Cli, loaded: Loaded) -> Result<Summary> {
    let cfg: GenerateConfig = typed(loaded.value)?;
    let problem = EnsembleSpec { kind: cfg.ensemble, seed: cfg.seed }
        .generate()
        .map_err(|e| Error::Config(e.to_string()))?;
    let dir = output_dir(cli, &loaded.base, cfg.output_dir.as_ref());
    fs::create_dir_all(&dir)?;
    problem.save(&dir.join("problem.json"))?;
    Ok(Summary {
        command: "generate",
        output_dir: dir.display().to_string(),
        files: vec!["problem.json".into()],
        extra: extra(vec![
            ("d", problem.dim().into()),
            ("m", problem.num_clients().into()),
            ("seed", cfg.seed.into()),
        ]),
    })
}

fn cmd_solve(cli: &Cli, loaded: Loaded) -> Result<Summary> {
    let cfg: SolveConfig = typed(loaded.value)?;
    let problem = load_problem(&loaded.base, &cfg.problem)?;
    let mut spec = cfg.algorithm;
    spec.init_point(problem.dim())?;
    let reference = reference_for(&problem)?;
    // Losses without a global strong-convexity modulus get the local-curvature stepsize.
    if let (AlgorithmKind::Fedsplit { s: s @ None, .. }, Some(r)) = (&mut spec.kind, &reference) {
        if problem.constants().ell <= 0.0 {
            *s = Some(harness::local_fedsplit_stepsize(&problem, &r.x_star)?);
        }
    }
    let trace = algorithms::run(&problem, &spec, reference.as_ref(), cfg.seed)?;
    let dir = output_dir(cli, &loaded.base, cfg.output_dir.as_ref());
    let stem = trace.meta.label.clone();
    trace.save(&dir, &stem)?;
    let last = trace.last();
    let mut fields = vec![
        ("label", Value::from(stem.clone())),
        ("rounds", Value::from(trace.records.len() - 1)),
        ("stepsize", num(trace.meta.stepsize)),
        ("final_cost", num(last.cost)),
        ("final_grad_norm", num(last.grad_norm)),
    ];
    if let Some(gap) = last.gap {
        fields.push(("final_gap", num(gap)));
    }
    Ok(Summary {
        command: "solve",
        output_dir: dir.display().to_string(),
        files: vec![format!("{stem}.csv"), format!("{stem}.json")],
        extra: extra(fields),
    })
}

fn cmd_verify(cli: &Cli, loaded: Loaded) -> Result<Summary> {
    let cfg: VerifyConfig = typed(loaded.value)?;
    if !(cfg.s > 0.0) || cfg.e < 1 {
        return Err(Error::Config(format!("verify needs s > 0 and e >= 1 (s = {}, e = {})", cfg.s, cfg.e)));
    }
    let problem = load_problem(&loaded.base, &cfg.problem)?;
    if !problem.is_least_squares() {
        return Err(Error::Config("verify needs a least-squares problem".into()));
    }
    let report = harness::verify_instance(&problem, cfg.s, cfg.e)?;
    let dir = output_dir(cli, &loaded.base, cfg.output_dir.as_ref());
    let bytes = jsonfmt::to_vec(&report)?;
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("verify.json"), bytes)?;
    let gd = &report.residuals["fedgd_limit"];
    Ok(Summary {
        command: "verify",
        output_dir: dir.display().to_string(),
        files: vec!["verify.json".into()],
        extra: extra(vec![
            ("fedgd_limit_stationarity", num(gd.stationarity)),
            ("fedgd_limit_to_lsq", num(report.distances["fedgd_limit_to_lsq"])),
            ("fedprox_limit_to_lsq", num(report.distances["fedprox_limit_to_lsq"])),
            ("seed", cfg.seed.map_or(Value::Null, Value::from)),
        ]),
    })
}

fn experiment_config(loaded: &Loaded) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = typed(loaded.value.clone())?;
    cfg.validate()?;
    Ok(cfg)
}

fn written<R: Serialize>(out: &harness::ExperimentOutput<R>, dir: &Path) -> Result<Vec<String>> {
    out.write(dir)
}

fn cmd_study(cli: &Cli, loaded: Loaded) -> Result<Summary> {
    let cfg = experiment_config(&loaded)?;
    if !matches!(cfg.experiment, None | Some(ExperimentKind::Conditioning)) {
        return Err(Error::Config("`study` runs the conditioning study; use `floors` for other experiments".into()));
    }
    let out = harness::run_conditioning_study(&cfg)?;
    let dir = output_dir(cli, &loaded.base, cfg.output_dir.as_ref());
    let files = written(&out, &dir)?;
    let slopes: Map<String, Value> = out
        .report
        .fits
        .iter()
        .map(|f| (f.algorithm.clone(), f.fit.map_or(Value::Null, |fit| num(fit.slope))))
        .collect();
    Ok(Summary {
        command: "study",
        output_dir: dir.display().to_string(),
        files,
        extra: extra(vec![("slopes", Value::Object(slopes))]),
    })
}

fn cmd_floors(cli: &Cli, loaded: Loaded) -> Result<Summary> {
    let cfg = experiment_config(&loaded)?;
    let dir = output_dir(cli, &loaded.base, cfg.output_dir.as_ref());
    let (files, experiment) = match cfg.floors_experiment() {
        ExperimentKind::InexactFloor => (written(&harness::run_inexact_floor_experiment(&cfg)?, &dir)?, "inexact_floor"),
        ExperimentKind::Logistic => (written(&harness::run_logistic_experiment(&cfg)?, &dir)?, "logistic"),
        ExperimentKind::Nonconvergence => {
            (written(&harness::run_nonconvergence_experiment(&cfg)?, &dir)?, "nonconvergence")
        }
        ExperimentKind::Conditioning => {
            return Err(Error::Config("the conditioning study runs under `study`".into()));
        }
    };
    Ok(Summary {
        command: "floors",
        output_dir: dir.display().to_string(),
        files,
        extra: extra(vec![("experiment", experiment.into())]),
    })
}

/// Sizes the global rayon pool. Only the first call in a process takes effect.
fn configure_threads(n: usize) {
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
}

/// Runs a parsed invocation.
pub fn run(cli: &Cli) -> Result<Summary> {
    configure_threads(cli.threads);
    let loaded = load_config(cli)?;
    match cli.command {
        Command::Generate => cmd_generate(cli, loaded),
        Command::Solve => cmd_solve(cli, loaded),
        Command::Verify => cmd_verify(cli, loaded),
        Command::Study => cmd_study(cli, loaded),
        Command::Floors => cmd_floors(cli, loaded),
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Config(_) | Error::Json(_) | Error::InvalidParameter(_) | Error::DimensionMismatch { .. } => "config",
        Error::Io(_) | Error::Csv(_) => "io",
        Error::Diverged { .. } => "diverged",
        Error::NonConvergence { .. } => "nonconvergence",
        Error::Stepsize { .. } => "stepsize",
        Error::Degenerate(_) => "degenerate",
        Error::Round { .. } => "round",
    }
}

/// Exit code for an error: 2 for configuration/input problems, 1 for numerical failures.
pub fn exit_code(e: &Error) -> u8 {
    if e.is_config() {
        2
    } else {
        1
    }
}

pub fn diagnostic_line(e: &Error) -> String {
    let (round, residual) = e.diagnostics();
    let diag = Diagnostic { error: error_kind(e), message: e.to_string(), round, residual: residual.map(fmt_f64) };
    jsonfmt::to_line(&diag).unwrap_or_else(|_| format!("{{\"error\":\"{}\"}}", error_kind(e)))
}

pub fn main_with(cli: Cli) -> ExitCode {
    match run(&cli) {
        Ok(summary) => {
            match jsonfmt::to_line(&summary) {
                Ok(line) => println!("{line}"),
                Err(e) => eprintln!("{}", diagnostic_line(&e.into())),
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", diagnostic_line(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}
