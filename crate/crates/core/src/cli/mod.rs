//! Command-line interface.
//!
//! Every subcommand accepts `--config <json>`: a flat object whose keys are the
//! subcommand's option names in snake_case. Values in the file replace the
//! flag values, and unknown keys are rejected. The resolved configuration is
//! echoed next to every artifact, and that echo can be fed back as `--config`.

mod commands;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::datasets::ToyKind;
use crate::depth::{StrategyKind, DEFAULT_ALPHA};
use crate::error::{Error, Result};
use crate::eval::DEFAULT_STEPS;

pub const CONFIG_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "lensdepth", version, about = "Lens-depth OOD scoring over sample Fermat distances")]
pub struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true, env = "LD_THREADS")]
    pub threads: Option<usize>,

    /// JSON file whose keys override this subcommand's options.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a toy dataset.
    Generate(GenerateArgs),
    /// Fit per-class lens-depth models and save them to a directory.
    Fit(FitArgs),
    /// Score a feature file with a saved model.
    Score(ScoreArgs),
    /// AUROC and consistency curve from ID and OOD score files.
    Eval(EvalArgs),
    /// Score a 2-d lattice with a saved model or a baseline.
    Grid(GridArgs),
    /// AUROC of every (strategy, inner-point count) pair.
    ReduceBench(ReduceBenchArgs),
    /// Score a feature file with a baseline method.
    Baseline(BaselineArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Generate(_) => "generate",
            Command::Fit(_) => "fit",
            Command::Score(_) => "score",
            Command::Eval(_) => "eval",
            Command::Grid(_) => "grid",
            Command::ReduceBench(_) => "reduce-bench",
            Command::Baseline(_) => "baseline",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Binary,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "binary" => Ok(OutputFormat::Binary),
            other => Err(Error::usage(format!("unknown format '{other}' (expected csv or binary)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Lens depth over the modified Fermat distance.
    Ld,
    /// Distance to the nearest class centroid.
    Euclid,
    Mahalanobis,
    Knn,
    /// Negated entropy of predicted probabilities.
    Entropy,
    /// Lens depth with plain Euclidean distances.
    EuclidLd,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ld" => Ok(Method::Ld),
            "euclid" => Ok(Method::Euclid),
            "mahalanobis" => Ok(Method::Mahalanobis),
            "knn" => Ok(Method::Knn),
            "entropy" => Ok(Method::Entropy),
            "euclid-ld" => Ok(Method::EuclidLd),
            other => Err(Error::usage(format!(
                "unknown method '{other}' (expected ld, euclid, mahalanobis, knn, entropy or euclid-ld)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateArgs {
    /// moons, spiral or gaussians3.
    #[arg(long)]
    pub kind: ToyKind,
    /// Total rows; rows per class for gaussians3.
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Noise scale (moons 0.07, spiral 0.02, gaussians3 1.0 when omitted).
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Spiral turns.
    #[arg(long, default_value_t = crate::datasets::toy::DEFAULT_SPIRAL_TURNS)]
    pub turns: f64,
    /// Output file; CSV on stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// csv or binary; inferred from the extension when omitted.
    #[arg(long)]
    pub format: Option<OutputFormat>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitArgs {
    /// Labeled feature file (CSV or LDFEAT01).
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    /// none, random, kmean-center or kmean-center-plus.
    #[arg(long, default_value = "none")]
    pub strategy: StrategyKind,
    /// Inner points per class; required by every strategy except none.
    #[arg(long)]
    pub n_inner: Option<usize>,
    /// L2-normalize features before fitting and scoring.
    #[arg(long)]
    pub normalize: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Restrict the graph to k nearest neighbours per point (approximate).
    #[arg(long)]
    pub knn_edges: Option<usize>,
    /// Model directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreArgs {
    /// Model directory written by `fit`.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    /// Output CSV `row,score`; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalArgs {
    /// In-distribution score CSV. An optional `correct` column (0/1) marks
    /// misclassified rows; without it every ID row counts as correct.
    #[arg(long)]
    pub id: PathBuf,
    /// Out-of-distribution score CSV; its rows count as incorrect.
    #[arg(long)]
    pub ood: PathBuf,
    /// Rejection fractions k/steps for k in 0..steps.
    #[arg(long, default_value_t = DEFAULT_STEPS)]
    pub steps: usize,
    /// JSON report; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Baseline selection shared by `grid` and `baseline`.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct MethodArgs {
    /// ld, euclid, mahalanobis, knn, entropy or euclid-ld.
    #[arg(long)]
    pub method: Option<Method>,
    /// Labeled training features for the method.
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Neighbour rank for knn.
    #[arg(long)]
    pub k: Option<usize>,
    /// Pool the covariance over classes for mahalanobis.
    #[arg(long)]
    pub pooled: bool,
    /// L2-normalize features for ld; knn always normalizes.
    #[arg(long)]
    pub normalize: bool,
    /// Fermat exponent for ld.
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GridArgs {
    /// Model directory; alternatively pick a baseline with --method.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub method: MethodArgs,
    /// Bounds default to the data bounding box padded by a quarter of its size.
    #[arg(long, allow_negative_numbers = true)]
    pub xmin: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub xmax: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub ymin: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub ymax: Option<f64>,
    #[arg(long, default_value_t = 100)]
    pub resolution: usize,
    /// Output CSV `x,y,score`; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReduceBenchArgs {
    /// Labeled training features.
    #[arg(long)]
    pub features: PathBuf,
    /// In-distribution test features.
    #[arg(long)]
    pub id: PathBuf,
    /// Out-of-distribution test features.
    #[arg(long)]
    pub ood: PathBuf,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "random,kmean-center,kmean-center-plus"
    )]
    pub strategies: Vec<StrategyKind>,
    /// Inner-point counts per class, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub normalize: bool,
    /// Output CSV with one row per strategy and one column per size; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct BaselineArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub method: MethodArgs,
    /// Features to score; probability rows (any header) for entropy.
    #[arg(long)]
    pub features: PathBuf,
    /// Output CSV `row,score`; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Replaces fields of `args` with the keys of `overrides`. Keys that are not
/// options of the command are rejected.
pub fn apply_overrides<T: Serialize + DeserializeOwned>(
    args: &T,
    command: &str,
    overrides: &Map<String, Value>,
) -> Result<T> {
    let mut current = serde_json::to_value(args).expect("arguments serialize");
    let obj = current.as_object_mut().expect("arguments are a struct");
    for (key, value) in overrides {
        match key.as_str() {
            "command" => {
                if value.as_str() != Some(command) {
                    return Err(Error::usage(format!(
                        "config is for command {value}, not '{command}'"
                    )));
                }
            }
            "format_version" => {
                if value.as_u64() != Some(CONFIG_FORMAT_VERSION as u64) {
                    return Err(Error::usage(format!("unsupported config format_version {value}")));
                }
            }
            _ if obj.contains_key(key) => {
                obj.insert(key.clone(), value.clone());
            }
            _ => {
                return Err(Error::usage(format!(
                    "unknown config key '{key}' for command '{command}'"
                )))
            }
        }
    }
    serde_json::from_value(current).map_err(|e| Error::usage(format!("invalid config: {e}")))
}

/// The configuration echoed next to artifacts.
pub fn resolved_config<T: Serialize>(command: &str, args: &T) -> Value {
    let mut out = Map::new();
    out.insert("command".into(), command.into());
    out.insert("format_version".into(), CONFIG_FORMAT_VERSION.into());
    if let Value::Object(fields) = serde_json::to_value(args).expect("arguments serialize") {
        out.extend(fields);
    }
    Value::Object(out)
}

fn read_config(path: &Path) -> Result<Map<String, Value>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    match serde_json::from_str(&text) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(Error::format(path, "config must be a JSON object")),
        Err(e) => Err(Error::format(path, e.to_string())),
    }
}

fn with_config<T: Serialize + DeserializeOwned>(args: T, command: &str, config: Option<&Map<String, Value>>) -> Result<T> {
    match config {
        Some(map) => apply_overrides(&args, command, map),
        None => Ok(args),
    }
}

fn dispatch(command: Command, config: Option<&Map<String, Value>>) -> Result<()> {
    let name = command.name();
    match command {
        Command::Generate(a) => commands::generate(&with_config(a, name, config)?),
        Command::Fit(a) => commands::fit(&with_config(a, name, config)?),
        Command::Score(a) => commands::score(&with_config(a, name, config)?),
        Command::Eval(a) => commands::eval(&with_config(a, name, config)?),
        Command::Grid(a) => commands::grid(&with_config(a, name, config)?),
        Command::ReduceBench(a) => commands::reduce_bench(&with_config(a, name, config)?),
        Command::Baseline(a) => commands::baseline(&with_config(a, name, config)?),
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    let result = (|| {
        let config = cli.config.as_deref().map(read_config).transpose()?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads.unwrap_or(0))
            .build()
            .map_err(|e| Error::usage(format!("cannot start thread pool: {e}")))?;
        pool.install(|| dispatch(cli.command, config.as_ref()))
    })();
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
