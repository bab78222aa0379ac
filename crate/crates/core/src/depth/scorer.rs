use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kmeans::KMEANS_INIT;
use super::lens::{lens_depth, LensMode};
use super::reduce::{ReductionStrategy, StrategyKind};
use crate::error::{Error, Result};
use crate::fermat::{build_fermat_graph_with, FermatGraph, FermatOptions};
use crate::geometry::{l2_normalize, normalize_in_place, PointSet};
use crate::Scorer;

pub const DEFAULT_ALPHA: f64 = 7.0;
pub const MODEL_FORMAT_VERSION: u32 = 1;
pub const MODEL_METADATA_FILE: &str = "model.json";
pub const PRNG_NAME: &str = "chacha8";

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub class_id: u32,
    pub graph: FermatGraph,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    pub alpha: f64,
    pub strategy: ReductionStrategy,
    pub normalize: bool,
    pub fermat: FermatOptions,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            strategy: ReductionStrategy::keep_all(),
            normalize: false,
            fermat: FermatOptions::default(),
        }
    }
}

/// Per-class lens-depth models; the score of a query is its depth in the
/// deepest class.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthScorer {
    clusters: Vec<ClusterModel>,
    config: FitConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub format_version: u32,
    pub alpha: f64,
    pub strategy: StrategyKind,
    pub n_inner: Option<usize>,
    pub normalize: bool,
    pub seed: u64,
    pub class_ids: Vec<u32>,
    pub inner_counts: Vec<usize>,
    pub dim: usize,
    pub approx_knn_edges: Option<usize>,
    pub kmeans_init: String,
    pub prng: String,
    /// Resolved run configuration of the command that produced the model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

/// Fits one lens-depth model per class of a labeled feature set.
pub fn fit(
    features: &PointSet,
    alpha: f64,
    strategy: ReductionStrategy,
    normalize: bool,
) -> Result<DepthScorer> {
    DepthScorer::fit(
        features,
        FitConfig {
            alpha,
            strategy,
            normalize,
            fermat: FermatOptions::default(),
        },
    )
}

impl DepthScorer {
    pub fn fit(features: &PointSet, config: FitConfig) -> Result<Self> {
        if !(config.alpha.is_finite() && config.alpha >= 1.0) {
            return Err(Error::usage(format!(
                "alpha must be >= 1, got {}",
                config.alpha
            )));
        }
        let class_ids = features.class_ids()?;
        let features = if config.normalize {
            l2_normalize(features)?
        } else {
            features.clone()
        };
        let clusters = class_ids
            .par_iter()
            .map(|&class_id| {
                let rows = features.class_rows(class_id)?;
                if rows.len() < 2 {
                    return Err(Error::usage(format!(
                        "class {class_id} has {} point(s); lens depth needs at least 2",
                        rows.len()
                    )));
                }
                let inner = config.strategy.apply(&rows).map_err(|e| match e {
                    Error::Usage(msg) => Error::Usage(format!("class {class_id}: {msg}")),
                    other => other,
                })?;
                let graph = build_fermat_graph_with(&inner, config.alpha, config.fermat)?;
                Ok(ClusterModel { class_id, graph })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { clusters, config })
    }

    pub fn clusters(&self) -> &[ClusterModel] {
        &self.clusters
    }

    pub fn config(&self) -> &FitConfig {
        &self.config
    }

    pub fn alpha(&self) -> f64 {
        self.config.alpha
    }

    pub fn dim(&self) -> usize {
        self.clusters[0].graph.dim()
    }

    /// Lens depth of `x` with respect to every class, in class-id order.
    pub fn class_depths(&self, x: &[f64]) -> Result<Vec<f64>> {
        let x = self.prepare(x)?;
        self.clusters
            .iter()
            .map(|c| lens_depth(&c.graph, &x, LensMode::Modified))
            .collect()
    }

    pub fn score(&self, x: &[f64]) -> Result<f64> {
        let x = self.prepare(x)?;
        let mut best = 0.0f64;
        for c in &self.clusters {
            best = best.max(lens_depth(&c.graph, &x, LensMode::Modified)?);
            if best >= 1.0 {
                break;
            }
        }
        Ok(best)
    }

    pub fn score_batch(&self, xs: &PointSet) -> Result<Vec<f64>> {
        if xs.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: xs.dim(),
            });
        }
        (0..xs.len())
            .into_par_iter()
            .map(|i| {
                self.score(xs.row(i)).map_err(|e| match e {
                    Error::ZeroRow { .. } => Error::ZeroRow { row: i },
                    other => other,
                })
            })
            .collect()
    }

    fn prepare(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        if let Some(col) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: 0, col });
        }
        let mut x = x.to_vec();
        if self.config.normalize {
            normalize_in_place(&mut x)?;
        }
        Ok(x)
    }

    pub fn metadata(&self) -> ModelMetadata {
        ModelMetadata {
            format_version: MODEL_FORMAT_VERSION,
            alpha: self.config.alpha,
            strategy: self.config.strategy.kind,
            n_inner: self.config.strategy.n,
            normalize: self.config.normalize,
            seed: self.config.strategy.seed,
            class_ids: self.clusters.iter().map(|c| c.class_id).collect(),
            inner_counts: self.clusters.iter().map(|c| c.graph.len()).collect(),
            dim: self.dim(),
            approx_knn_edges: self.config.fermat.approx_knn_edges,
            kmeans_init: KMEANS_INIT.to_string(),
            prng: PRNG_NAME.to_string(),
            config: None,
        }
    }

    /// Writes `model.json` and one `class_<id>.ldgraf` per class into `dir`.
    pub fn save(&self, dir: &Path, run_config: Option<serde_json::Value>) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut meta = self.metadata();
        meta.config = run_config;
        let meta_path = dir.join(MODEL_METADATA_FILE);
        let mut text = serde_json::to_string_pretty(&meta).expect("metadata serializes");
        text.push('\n');
        fs::write(&meta_path, text).map_err(|e| Error::io(&meta_path, e))?;
        for c in &self.clusters {
            let path = dir.join(graph_file_name(c.class_id));
            let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            let mut w = BufWriter::new(file);
            c.graph
                .write_to(&mut w)
                .and_then(|_| w.flush())
                .map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let meta_path = dir.join(MODEL_METADATA_FILE);
        let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        let meta: ModelMetadata = serde_json::from_str(&text)
            .map_err(|e| Error::format(&meta_path, e.to_string()))?;
        if meta.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::format(
                &meta_path,
                format!("unsupported format_version {}", meta.format_version),
            ));
        }
        if meta.class_ids.is_empty() {
            return Err(Error::format(&meta_path, "model has no classes"));
        }
        let mut clusters = Vec::with_capacity(meta.class_ids.len());
        for &class_id in &meta.class_ids {
            let path = dir.join(graph_file_name(class_id));
            let file = fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
            let graph = FermatGraph::read_from(BufReader::new(file)).map_err(|e| match e {
                Error::Usage(msg) => Error::format(&path, msg),
                other => other,
            })?;
            if graph.alpha() != meta.alpha || graph.dim() != meta.dim {
                return Err(Error::format(&path, "graph disagrees with model metadata"));
            }
            clusters.push(ClusterModel { class_id, graph });
        }
        Ok(Self {
            clusters,
            config: FitConfig {
                alpha: meta.alpha,
                strategy: ReductionStrategy {
                    kind: meta.strategy,
                    n: meta.n_inner,
                    seed: meta.seed,
                },
                normalize: meta.normalize,
                fermat: FermatOptions {
                    approx_knn_edges: meta.approx_knn_edges,
                },
            },
        })
    }
}

pub fn graph_file_name(class_id: u32) -> String {
    format!("class_{class_id}.ldgraf")
}

impl Scorer for DepthScorer {
    fn dim(&self) -> usize {
        DepthScorer::dim(self)
    }

    fn score(&self, x: &[f64]) -> Result<f64> {
        DepthScorer::score(self, x)
    }
}
