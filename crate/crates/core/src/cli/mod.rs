//! Experiment harness behind the `staticgeo` binary.
//!
//! Each subcommand reads its parameters from flags and, optionally, from a
//! JSON config (`--config`); flags win. Reports go to stdout and, with
//! `--out DIR`, to `DIR/report.json` next to CSV artifacts and a
//! `manifest.json` carrying the SHA-256 of the resolved config.

mod commands;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::catalog::SpacetimeSpec;
use crate::io;
use crate::{Error, Result};

pub use commands::{
    ArrivalParams, ConnectParams, GrowthParams, IntegrateParams, LiftParams, ProbeParams, ReduceParams, ShootParams,
};

pub const EXIT_OK: u8 = 0;
pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;
pub const EXIT_DIVERGED: u8 = 4;

/// Comma-separated list of reals, e.g. `0,1.5,-2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct List(pub Vec<f64>);

impl FromStr for List {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        s.split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}")))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(List)
    }
}

#[derive(Debug, Parser)]
#[command(name = "staticgeo", version, about = "Geodesics and causal diagnostics for standard static spacetimes")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// JSON experiment config; command-line flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory for report.json, CSV artifacts and manifest.json.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Catalog name of the spacetime.
    #[arg(long, global = true)]
    pub spacetime: Option<String>,
    /// Schwarzschild mass override.
    #[arg(long, global = true)]
    pub m: Option<f64>,
    /// Exponent excess override for the superquadratic families.
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    /// Slice dimension override for the flat-slice families.
    #[arg(long, global = true)]
    pub dim: Option<usize>,
    /// Seed for randomized components.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Integration tolerance.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// List the spacetime catalog.
    Catalog,
    /// Integrate a geodesic from initial data.
    Integrate(IntegrateParams),
    /// Connect two events by minimizing the action functional.
    Connect(ConnectParams),
    /// Connect two events by shooting.
    Shoot(ShootParams),
    /// Fit the growth exponent of beta or 1/beta.
    Growth(GrowthParams),
    /// Search for incomplete geodesics of g, g_R or g_S/beta.
    Probe(ProbeParams),
    /// Earliest causal arrival time over a target point.
    Arrival(ArrivalParams),
    /// Reduce a geodesic to its classical trajectory.
    Reduce(ReduceParams),
    /// Lift a classical trajectory to a geodesic.
    Lift(LiftParams),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Catalog => "catalog",
            Command::Integrate(_) => "integrate",
            Command::Connect(_) => "connect",
            Command::Shoot(_) => "shoot",
            Command::Growth(_) => "growth",
            Command::Probe(_) => "probe",
            Command::Arrival(_) => "arrival",
            Command::Reduce(_) => "reduce",
            Command::Lift(_) => "lift",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpacetimeRef {
    Name(String),
    Spec(SpacetimeSpec),
}

/// Contents of a `--config` file.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Must match the subcommand when present.
    pub command: Option<String>,
    pub spacetime: Option<SpacetimeRef>,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    pub out: Option<PathBuf>,
    /// Command parameters, same names as the long flags with `_` for `-`.
    #[serde(default)]
    pub params: Map<String, Value>,
}

/// The fully merged configuration of a run.
#[derive(Debug, Clone, Serialize)]
pub struct Resolved {
    pub command: &'static str,
    pub spacetime: Option<SpacetimeSpec>,
    pub seed: u64,
    pub tol: f64,
    pub params: Value,
}

/// A report plus the artifacts that accompany it.
pub struct Outcome {
    pub report: Value,
    pub artifacts: Vec<(String, String)>,
    pub exit: u8,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    config: &'a Resolved,
    config_sha256: String,
    exit_code: u8,
    artifacts: Vec<&'a str>,
    version: &'static str,
}

fn exit_code(e: &Error) -> u8 {
    if e.is_numerical() {
        EXIT_NUMERICAL
    } else if matches!(e, Error::Unreachable) {
        EXIT_DIVERGED
    } else {
        EXIT_VALIDATION
    }
}

/// Overlay non-null flag values onto the file's parameter object.
fn merge_params<P: Serialize + for<'de> Deserialize<'de>>(file: &Map<String, Value>, flags: &P) -> Result<P> {
    let mut merged = file.clone();
    if let Value::Object(f) = serde_json::to_value(flags)? {
        for (k, v) in f {
            if !v.is_null() {
                merged.insert(k, v);
            }
        }
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| Error::Parse(format!("params: {e}")))
}

fn read_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn resolve_spacetime(common: &Common, file: Option<&SpacetimeRef>) -> Result<Option<SpacetimeSpec>> {
    let mut spec = match (&common.spacetime, file) {
        (Some(name), _) => Some(SpacetimeSpec::named(name.clone())),
        (None, Some(SpacetimeRef::Name(n))) => Some(SpacetimeSpec::named(n.clone())),
        (None, Some(SpacetimeRef::Spec(s))) => Some(s.clone()),
        (None, None) => None,
    };
    if let Some(s) = spec.as_mut() {
        if let (Some(SpacetimeRef::Spec(f)), Some(_)) = (file, &common.spacetime) {
            // keep file overrides only when the flag names the same entry
            if f.name == s.name {
                *s = f.clone();
            }
        }
        s.m = common.m.or(s.m);
        s.epsilon = common.epsilon.or(s.epsilon);
        s.dim = common.dim.or(s.dim);
    } else if common.m.is_some() || common.epsilon.is_some() || common.dim.is_some() {
        return Err(Error::invalid("--m/--epsilon/--dim need a spacetime"));
    }
    Ok(spec)
}

fn config_hash(resolved: &Resolved) -> Result<String> {
    let canonical = serde_json::to_string(resolved)?;
    let digest = Sha256::digest(canonical.as_bytes());
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

fn write_bundle(dir: &Path, resolved: &Resolved, outcome: &Outcome) -> Result<()> {
    io::write_text(&dir.join("report.json"), &io::to_json(&outcome.report)?)?;
    for (name, text) in &outcome.artifacts {
        io::write_text(&dir.join(name), text)?;
    }
    let mut artifacts = vec!["report.json"];
    artifacts.extend(outcome.artifacts.iter().map(|(n, _)| n.as_str()));
    let manifest = Manifest {
        command: resolved.command,
        config: resolved,
        config_sha256: config_hash(resolved)?,
        exit_code: outcome.exit,
        artifacts,
        version: env!("CARGO_PKG_VERSION"),
    };
    io::write_text(&dir.join("manifest.json"), &io::to_json(&manifest)?)
}

/// Resolve the configuration and run one experiment.
pub fn run(cli: Cli) -> Result<(Resolved, Outcome, Option<PathBuf>)> {
    let file = match &cli.common.config {
        Some(p) => read_config(p)?,
        None => ExperimentConfig::default(),
    };
    let name = cli.command.name();
    if let Some(c) = &file.command {
        if c != name {
            return Err(Error::invalid(format!("config is for `{c}`, not `{name}`")));
        }
    }
    let tol = cli.common.tol.or(file.tol).unwrap_or(1e-10);
    if !(tol > 0.0) {
        return Err(Error::invalid("tol must be positive"));
    }
    let seed = cli.common.seed.or(file.seed).unwrap_or(0);
    let spec = resolve_spacetime(&cli.common, file.spacetime.as_ref())?;
    let out = cli.common.out.clone().or(file.out.clone());
    let ctx = commands::Context { spec, seed, tol };
    let (params, outcome) = match &cli.command {
        Command::Catalog => {
            if !file.params.is_empty() {
                return Err(Error::invalid("catalog takes no params"));
            }
            (Value::Object(Map::new()), commands::catalog()?)
        }
        Command::Integrate(p) => commands::dispatch(&ctx, merge_params(&file.params, p)?, commands::integrate)?,
        Command::Connect(p) => commands::dispatch(&ctx, merge_params(&file.params, p)?, commands::connect)?,
        Command::Shoot(p) => commands::dispatch(&ctx, merge_params(&file.params, p)?, commands::shoot)?,
        Command::Growth(p) => commands::dispatch(&ctx, merge_params(&file.params, p)?, commands::growth)?,
        Command::Probe(p) => commands::dispatch(&ctx, merge_params(&file.params, p)?, commands::probe)?,
        Command::Arrival(p) => commands::dispatch(&ctx, merge_params(&file.params, p)?, commands::arrival)?,
        Command::Reduce(p) => commands::dispatch(&ctx, merge_params(&file.params, p)?, commands::reduce)?,
        Command::Lift(p) => commands::dispatch(&ctx, merge_params(&file.params, p)?, commands::lift)?,
    };
    let resolved = Resolved {
        command: name,
        spacetime: ctx.spec,
        seed,
        tol,
        params,
    };
    Ok((resolved, outcome, out))
}

fn configure_threads() -> std::result::Result<(), String> {
    let Ok(v) = std::env::var("STATICGEO_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| format!("STATICGEO_THREADS must be a positive integer, got `{v}`"))?;
    if n == 0 {
        return Err("STATICGEO_THREADS must be at least 1".into());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

/// Entry point of the binary.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("staticgeo: {e}");
        return ExitCode::from(EXIT_VALIDATION);
    }
    let name = cli.command.name();
    let op = commands::operation(name);
    let result = run(cli).and_then(|(resolved, outcome, out)| {
        if let Some(dir) = &out {
            write_bundle(dir, &resolved, &outcome)?;
        }
        Ok(outcome)
    });
    match result {
        Ok(outcome) => {
            match io::to_json(&outcome.report) {
                Ok(s) => print!("{s}"),
                Err(e) => {
                    eprintln!("staticgeo {name}: {e}");
                    return ExitCode::from(EXIT_VALIDATION);
                }
            }
            ExitCode::from(outcome.exit)
        }
        Err(e) => {
            eprintln!("staticgeo {name}: {op}: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
