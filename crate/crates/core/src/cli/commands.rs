use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde_json::Value;

use super::{
    resolved_config, BaselineArgs, EvalArgs, FitArgs, GenerateArgs, GridArgs, Method, MethodArgs,
    OutputFormat, ReduceBenchArgs, ScoreArgs,
};
use crate::baselines::{softmax_entropy, CentroidScorer, EuclideanLensDepth, KnnScorer, MahalanobisScorer};
use crate::datasets::features::{load_numeric_rows, write_binary, write_csv};
use crate::datasets::{load_features, load_features_allow_empty, FeatureFormat, ToySpec};
use crate::depth::{DepthScorer, FitConfig, ReductionStrategy, StrategyKind};
use crate::error::{Error, Result};
use crate::eval::{auroc, grid_map, EvalReport, GridBounds};
use crate::fermat::FermatOptions;
use crate::geometry::PointSet;
use crate::Scorer;

fn log(msg: impl AsRef<str>) {
    eprintln!("lensdepth: {}", msg.as_ref());
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Writes `bytes` to `out`, or stdout when there is no path. File outputs get
/// a `<out>.config.json` sidecar holding the resolved configuration.
fn emit(out: Option<&Path>, bytes: &[u8], config: &Value) -> Result<()> {
    match out {
        Some(path) => {
            write_file(path, bytes)?;
            let mut side = path.as_os_str().to_owned();
            side.push(".config.json");
            write_json(Path::new(&side), config)
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(bytes)
                .and_then(|_| stdout.flush())
                .map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn json_bytes(v: &impl serde::Serialize) -> Vec<u8> {
    let mut text = serde_json::to_string_pretty(v).expect("value serializes");
    text.push('\n');
    text.into_bytes()
}

fn write_json(path: &Path, v: &impl serde::Serialize) -> Result<()> {
    write_file(path, &json_bytes(v))
}

fn scores_csv(scores: &[f64]) -> Vec<u8> {
    let mut out = String::from("row,score\n");
    for (i, s) in scores.iter().enumerate() {
        out.push_str(&format!("{i},{s:?}\n"));
    }
    out.into_bytes()
}

pub fn generate(a: &GenerateArgs) -> Result<()> {
    let spec = ToySpec {
        kind: a.kind,
        n: a.n,
        noise: a.noise.unwrap_or(a.kind.default_noise()),
        seed: a.seed,
        turns: a.turns,
    };
    let points = spec.generate()?;
    let format = match (a.format, &a.out) {
        (Some(OutputFormat::Csv), _) | (None, None) => FeatureFormat::Csv,
        (Some(OutputFormat::Binary), _) => FeatureFormat::Binary,
        (None, Some(path)) => FeatureFormat::from_path(path),
    };
    let mut buf = Vec::new();
    match format {
        FeatureFormat::Csv => write_csv(&mut buf, &points),
        FeatureFormat::Binary => write_binary(&mut buf, &points),
    }
    .expect("writing to a Vec cannot fail");
    log(format!(
        "generated {} x {} {} rows",
        points.len(),
        points.dim(),
        a.kind.name()
    ));
    emit(a.out.as_deref(), &buf, &resolved_config("generate", a))
}

fn fit_config(alpha: f64, strategy: StrategyKind, n_inner: Option<usize>, seed: u64, normalize: bool) -> Result<FitConfig> {
    let strategy = match (strategy, n_inner) {
        (StrategyKind::None, None) => ReductionStrategy::keep_all(),
        (StrategyKind::None, Some(_)) => {
            return Err(Error::usage("--n-inner needs a reducing --strategy"))
        }
        (kind, Some(n)) => ReductionStrategy::new(kind, n, seed),
        (kind, None) => {
            return Err(Error::usage(format!("strategy {kind} needs --n-inner")))
        }
    };
    Ok(FitConfig {
        alpha,
        strategy,
        normalize,
        fermat: FermatOptions::default(),
    })
}

pub fn fit(a: &FitArgs) -> Result<()> {
    let features = load_features(&a.features)?;
    let mut config = fit_config(a.alpha, a.strategy, a.n_inner, a.seed, a.normalize)?;
    config.fermat.approx_knn_edges = a.knn_edges;
    let start = Instant::now();
    let model = DepthScorer::fit(&features, config)?;
    let elapsed = start.elapsed();
    for c in model.clusters() {
        log(format!("class {}: m = {}", c.class_id, c.graph.len()));
    }
    log(format!(
        "built {} class graph(s) in {:.3} s",
        model.clusters().len(),
        elapsed.as_secs_f64()
    ));
    model.save(&a.out, Some(resolved_config("fit", a)))
}

pub fn score(a: &ScoreArgs) -> Result<()> {
    let model = DepthScorer::load(&a.model)?;
    let scores = match load_features_allow_empty(&a.features)? {
        Some(features) => model.score_batch(&features)?,
        None => Vec::new(),
    };
    log(format!("scored {} row(s)", scores.len()));
    emit(a.out.as_deref(), &scores_csv(&scores), &resolved_config("score", a))
}

/// Reads a score CSV with a `score` column and an optional 0/1 `correct` column.
pub fn read_scores(path: &Path) -> Result<(Vec<f64>, Option<Vec<bool>>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(&bytes[..]);
    let header = rdr
        .headers()
        .map_err(|e| Error::format(path, e.to_string()))?
        .clone();
    let score_col = header
        .iter()
        .position(|h| h == "score")
        .ok_or_else(|| Error::format(path, "missing 'score' column"))?;
    let correct_col = header.iter().position(|h| h == "correct");
    let mut scores = Vec::new();
    let mut correct = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::format(path, format!("row {row}: {e}")))?;
        let field = &rec[score_col];
        let s: f64 = field
            .parse()
            .map_err(|_| Error::format(path, format!("row {row}: score '{field}' is not a number")))?;
        if s.is_nan() {
            return Err(Error::NonFinite { row, col: score_col });
        }
        scores.push(s);
        if let Some(c) = correct_col {
            correct.push(match &rec[c] {
                "1" | "true" => true,
                "0" | "false" => false,
                other => {
                    return Err(Error::format(
                        path,
                        format!("row {row}: correct must be 0 or 1, got '{other}'"),
                    ))
                }
            });
        }
    }
    if scores.is_empty() {
        return Err(Error::format(path, "no scores"));
    }
    Ok((scores, correct_col.map(|_| correct)))
}

pub fn eval(a: &EvalArgs) -> Result<()> {
    let (id, id_correct) = read_scores(&a.id)?;
    let (ood, _) = read_scores(&a.ood)?;
    let mut report = EvalReport::compute(&id, id_correct.as_deref(), &ood, a.steps)?;
    report.config = Some(resolved_config("eval", a));
    log(format!(
        "auroc {:.6} over {} ID / {} OOD",
        report.auroc, report.n_id, report.n_ood
    ));
    match &a.out {
        Some(path) => write_json(path, &report),
        None => emit(None, &json_bytes(&report), &Value::Null),
    }
}

fn require_train(m: &MethodArgs) -> Result<PointSet> {
    let path = m
        .train
        .as_ref()
        .ok_or_else(|| Error::usage("--train is required for this method"))?;
    load_features(path)
}

/// Builds a feature-space scorer for every method except entropy.
fn method_scorer(m: &MethodArgs, method: Method) -> Result<Box<dyn Scorer>> {
    let train = require_train(m)?;
    Ok(match method {
        Method::Ld => {
            let config = fit_config(m.alpha, StrategyKind::None, None, 0, m.normalize)?;
            Box::new(DepthScorer::fit(&train, config)?)
        }
        Method::Euclid => Box::new(CentroidScorer::fit(&train)?),
        Method::Mahalanobis => Box::new(MahalanobisScorer::fit(&train, m.pooled)?),
        Method::Knn => {
            let k = m
                .k
                .ok_or_else(|| Error::usage("knn needs --k (no default is assumed)"))?;
            Box::new(KnnScorer::new(&train, k, true)?)
        }
        Method::EuclidLd => Box::new(EuclideanLensDepth::new(&train)?),
        Method::Entropy => {
            return Err(Error::usage("entropy scores probability vectors, not feature points"))
        }
    })
}

fn padded_bounds(points: &[&PointSet]) -> GridBounds {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in points {
        for r in p.rows() {
            for k in 0..2 {
                lo[k] = lo[k].min(r[k]);
                hi[k] = hi[k].max(r[k]);
            }
        }
    }
    let pad = |k: usize| ((hi[k] - lo[k]) * 0.25).max(1e-3);
    GridBounds {
        xmin: lo[0] - pad(0),
        xmax: hi[0] + pad(0),
        ymin: lo[1] - pad(1),
        ymax: hi[1] + pad(1),
    }
}

pub fn grid(a: &GridArgs) -> Result<()> {
    let (scorer, data): (Box<dyn Scorer>, Vec<PointSet>) = match (&a.model, a.method.method) {
        (Some(_), Some(_)) => return Err(Error::usage("pass either --model or --method, not both")),
        (None, None) => return Err(Error::usage("pass --model or --method")),
        (Some(dir), None) => {
            let model = DepthScorer::load(dir)?;
            let inner = model.clusters().iter().map(|c| c.graph.points().clone()).collect();
            (Box::new(model), inner)
        }
        (None, Some(method)) => (method_scorer(&a.method, method)?, vec![require_train(&a.method)?]),
    };
    if scorer.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: scorer.dim(),
        });
    }
    let default = padded_bounds(&data.iter().collect::<Vec<_>>());
    let bounds = GridBounds {
        xmin: a.xmin.unwrap_or(default.xmin),
        xmax: a.xmax.unwrap_or(default.xmax),
        ymin: a.ymin.unwrap_or(default.ymin),
        ymax: a.ymax.unwrap_or(default.ymax),
    };
    let grid = grid_map(scorer.as_ref(), bounds, a.resolution)?;
    let mut buf = Vec::new();
    grid.write_csv(&mut buf).expect("writing to a Vec cannot fail");
    log(format!("evaluated {} grid cells", grid.scores.len()));
    emit(a.out.as_deref(), &buf, &resolved_config("grid", a))
}

/// AUROC for every strategy and size, in argument order.
pub fn reduce_bench_table(a: &ReduceBenchArgs) -> Result<Vec<Vec<f64>>> {
    if a.strategies.is_empty() || a.sizes.is_empty() {
        return Err(Error::usage("need at least one strategy and one size"));
    }
    if let Some(s) = a.strategies.iter().find(|s| **s == StrategyKind::None) {
        return Err(Error::usage(format!("strategy '{s}' does not reduce; benchmark it with fit")));
    }
    let train = load_features(&a.features)?;
    let id = load_features(&a.id)?;
    let ood = load_features(&a.ood)?;
    let mut table = Vec::with_capacity(a.strategies.len());
    for &kind in &a.strategies {
        let mut row = Vec::with_capacity(a.sizes.len());
        for &n in &a.sizes {
            let config = fit_config(a.alpha, kind, Some(n), a.seed, a.normalize)?;
            let model = DepthScorer::fit(&train, config)?;
            let v = auroc(&model.score_batch(&id)?, &model.score_batch(&ood)?)?;
            log(format!("{kind} n={n}: auroc {v:.6}"));
            row.push(v);
        }
        table.push(row);
    }
    Ok(table)
}

pub fn reduce_bench(a: &ReduceBenchArgs) -> Result<()> {
    let table = reduce_bench_table(a)?;
    let mut out = String::from("strategy");
    for n in &a.sizes {
        out.push_str(&format!(",{n}"));
    }
    out.push('\n');
    for (kind, row) in a.strategies.iter().zip(&table) {
        out.push_str(kind.name());
        for v in row {
            out.push_str(&format!(",{v:?}"));
        }
        out.push('\n');
    }
    emit(a.out.as_deref(), out.as_bytes(), &resolved_config("reduce-bench", a))
}

pub fn baseline(a: &BaselineArgs) -> Result<()> {
    let method = a
        .method
        .method
        .ok_or_else(|| Error::usage("--method is required"))?;
    let scores = if method == Method::Entropy {
        load_numeric_rows(&a.features)?
            .iter()
            .enumerate()
            .map(|(row, p)| {
                softmax_entropy(p).map(|h| -h).map_err(|e| match e {
                    Error::Usage(msg) => Error::format(&a.features, format!("row {row}: {msg}")),
                    Error::NonFinite { col, .. } => Error::NonFinite { row, col },
                    other => other,
                })
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        let scorer = method_scorer(&a.method, method)?;
        match load_features_allow_empty(&a.features)? {
            Some(x) => scorer.score_rows(&x)?,
            None => Vec::new(),
        }
    };
    log(format!("scored {} row(s)", scores.len()));
    emit(a.out.as_deref(), &scores_csv(&scores), &resolved_config("baseline", a))
}
