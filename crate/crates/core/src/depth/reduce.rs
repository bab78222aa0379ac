//! Inner-point reduction: choose `n` representatives of a class before building its graph.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::kmeans::{kmeans, DEFAULT_MAX_ITERS};
use crate::error::{Error, Result};
use crate::geometry::{nearest_particle, PointSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyKind {
    /// Sample rows without replacement.
    Random,
    /// Use k-means centroids as inner points.
    KmeanCenter,
    /// Use the original row nearest to each k-means centroid.
    KmeanCenterPlus,
    /// Keep every row.
    None,
}

impl StrategyKind {
    pub const REDUCING: [StrategyKind; 3] = [
        StrategyKind::Random,
        StrategyKind::KmeanCenter,
        StrategyKind::KmeanCenterPlus,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Random => "random",
            StrategyKind::KmeanCenter => "kmean-center",
            StrategyKind::KmeanCenterPlus => "kmean-center-plus",
            StrategyKind::None => "none",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(StrategyKind::Random),
            "kmean-center" => Ok(StrategyKind::KmeanCenter),
            "kmean-center-plus" => Ok(StrategyKind::KmeanCenterPlus),
            "none" => Ok(StrategyKind::None),
            other => Err(Error::usage(format!(
                "unknown strategy '{other}' (expected random, kmean-center, kmean-center-plus or none)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReductionStrategy {
    pub kind: StrategyKind,
    /// Target inner-point count. `None` keeps the whole class.
    pub n: Option<usize>,
    pub seed: u64,
}

impl ReductionStrategy {
    pub fn keep_all() -> Self {
        Self {
            kind: StrategyKind::None,
            n: None,
            seed: 0,
        }
    }

    pub fn new(kind: StrategyKind, n: usize, seed: u64) -> Self {
        Self {
            kind,
            n: Some(n),
            seed,
        }
    }

    pub fn apply(&self, p: &PointSet) -> Result<PointSet> {
        let n = match (self.kind, self.n) {
            (StrategyKind::None, _) | (_, None) => return Ok(p.without_labels()),
            (_, Some(n)) => n,
        };
        match self.kind {
            StrategyKind::Random => reduce_random(p, n, self.seed),
            StrategyKind::KmeanCenter => reduce_kmean_center(p, n, self.seed),
            StrategyKind::KmeanCenterPlus => reduce_kmean_center_plus(p, n, self.seed),
            StrategyKind::None => unreachable!(),
        }
    }
}

fn check_n(p: &PointSet, n: usize) -> Result<()> {
    if n < 2 || n > p.len() {
        return Err(Error::usage(format!(
            "inner-point count must lie in [2, {}], got {n}",
            p.len()
        )));
    }
    Ok(())
}

/// `n` distinct rows drawn without replacement, returned in their original order.
pub fn reduce_random(p: &PointSet, n: usize, seed: u64) -> Result<PointSet> {
    check_n(p, n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, p.len(), n).into_vec();
    idx.sort_unstable();
    p.select(&idx)
}

pub fn reduce_kmean_center(p: &PointSet, n: usize, seed: u64) -> Result<PointSet> {
    check_n(p, n)?;
    Ok(kmeans(p, n, DEFAULT_MAX_ITERS, seed)?.centroids)
}

/// Original rows nearest to the k-means centroids. Coincident picks are merged,
/// so fewer than `n` rows may come back.
pub fn reduce_kmean_center_plus(p: &PointSet, n: usize, seed: u64) -> Result<PointSet> {
    check_n(p, n)?;
    let centroids = kmeans(p, n, DEFAULT_MAX_ITERS, seed)?.centroids;
    let mut idx = centroids
        .rows()
        .map(|c| nearest_particle(c, p).map(|(i, _)| i))
        .collect::<Result<Vec<_>>>()?;
    idx.sort_unstable();
    idx.dedup();
    p.select(&idx)
}
