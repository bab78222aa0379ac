//! Comparison scorers. All of them follow the depth convention: higher means
//! more in-distribution.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{dist, normalize_in_place, l2_normalize, DistanceMatrix, PointSet};
use crate::Scorer;

fn check_query(dim: usize, x: &[f64]) -> Result<()> {
    if x.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: x.len(),
        });
    }
    if let Some(col) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { row: 0, col });
    }
    Ok(())
}

/// Per-class mean rows of a labeled set, in class-id order.
pub fn class_means(features: &PointSet) -> Result<(Vec<u32>, PointSet)> {
    let ids = features.class_ids()?;
    let d = features.dim();
    let mut data = Vec::with_capacity(ids.len() * d);
    for &id in &ids {
        let rows = features.class_rows(id)?;
        let mut mean = vec![0.0; d];
        for r in rows.rows() {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        data.extend(mean.into_iter().map(|m| m / rows.len() as f64));
    }
    let means = PointSet::new(data, ids.len(), d)?;
    Ok((ids, means))
}

/// Negative distance to the nearest centroid.
pub fn euclidean_centroid_score(centroids: &PointSet, x: &[f64]) -> Result<f64> {
    check_query(centroids.dim(), x)?;
    Ok(-centroids
        .rows()
        .map(|c| dist(x, c))
        .fold(f64::INFINITY, f64::min))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CentroidScorer {
    centroids: PointSet,
}

impl CentroidScorer {
    pub fn new(centroids: PointSet) -> Self {
        Self {
            centroids: centroids.without_labels(),
        }
    }

    pub fn fit(features: &PointSet) -> Result<Self> {
        Ok(Self::new(class_means(features)?.1))
    }

    pub fn centroids(&self) -> &PointSet {
        &self.centroids
    }
}

impl Scorer for CentroidScorer {
    fn dim(&self) -> usize {
        self.centroids.dim()
    }

    fn score(&self, x: &[f64]) -> Result<f64> {
        euclidean_centroid_score(&self.centroids, x)
    }
}

/// Mean and Cholesky factor of the regularized covariance of one class.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianClassStats {
    pub class_id: u32,
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub epsilon: f64,
    /// Lower factor `L` with `L L^T = covariance + epsilon I`.
    factor: DMatrix<f64>,
}

/// Regularization added to a covariance diagonal: `1e-6 * trace / d`.
pub fn default_epsilon(cov: &DMatrix<f64>) -> f64 {
    1e-6 * cov.trace() / cov.nrows() as f64
}

impl GaussianClassStats {
    pub fn new(class_id: u32, mean: DVector<f64>, covariance: DMatrix<f64>, epsilon: f64) -> Result<Self> {
        let d = mean.len();
        if covariance.shape() != (d, d) {
            return Err(Error::usage(format!(
                "covariance is {}x{}, mean has length {d}",
                covariance.nrows(),
                covariance.ncols()
            )));
        }
        if !(epsilon.is_finite() && epsilon >= 0.0) {
            return Err(Error::usage(format!("epsilon must be >= 0, got {epsilon}")));
        }
        let not_pd = Error::NotPositiveDefinite { class_id };
        if covariance.iter().any(|v| !v.is_finite()) || covariance != covariance.transpose() {
            return Err(not_pd);
        }
        let regularized = &covariance + DMatrix::identity(d, d) * epsilon;
        let factor = regularized.cholesky().ok_or(not_pd)?.l();
        Ok(Self {
            class_id,
            mean,
            covariance,
            epsilon,
            factor,
        })
    }

    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    /// `sqrt((x - mu)^T (Sigma + eps I)^-1 (x - mu))` via one triangular solve.
    pub fn mahalanobis(&self, x: &[f64]) -> Result<f64> {
        check_query(self.mean.len(), x)?;
        let diff = DVector::from_column_slice(x) - &self.mean;
        let z = self
            .factor
            .solve_lower_triangular(&diff)
            .ok_or(Error::NotPositiveDefinite {
                class_id: self.class_id,
            })?;
        Ok(z.norm())
    }
}

fn scatter(rows: &PointSet, mean: &DVector<f64>) -> DMatrix<f64> {
    let d = rows.dim();
    let mut s = DMatrix::zeros(d, d);
    for r in rows.rows() {
        let c = DVector::from_column_slice(r) - mean;
        s.ger(1.0, &c, &c, 1.0);
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct MahalanobisScorer {
    classes: Vec<GaussianClassStats>,
}

impl MahalanobisScorer {
    pub fn new(classes: Vec<GaussianClassStats>) -> Result<Self> {
        let Some(first) = classes.first() else {
            return Err(Error::usage("mahalanobis scorer needs at least one class"));
        };
        let d = first.mean.len();
        if let Some(c) = classes.iter().find(|c| c.mean.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: c.mean.len(),
            });
        }
        Ok(Self { classes })
    }

    /// Per-class maximum-likelihood covariances, or one covariance pooled over
    /// all classes when `pooled` is set. Each gets the default regularization.
    pub fn fit(features: &PointSet, pooled: bool) -> Result<Self> {
        let (ids, means) = class_means(features)?;
        let mut stats = Vec::with_capacity(ids.len());
        let mut scatters = Vec::with_capacity(ids.len());
        for (k, &id) in ids.iter().enumerate() {
            let rows = features.class_rows(id)?;
            let mean = DVector::from_column_slice(means.row(k));
            let s = scatter(&rows, &mean);
            scatters.push((mean, s, rows.len()));
        }
        let pooled_cov = pooled.then(|| {
            let total: DMatrix<f64> = scatters.iter().map(|(_, s, _)| s).sum();
            total / features.len() as f64
        });
        for (&id, (mean, s, n)) in ids.iter().zip(scatters) {
            let cov = pooled_cov.clone().unwrap_or_else(|| s / n as f64);
            let eps = default_epsilon(&cov);
            stats.push(GaussianClassStats::new(id, mean, cov, eps)?);
        }
        Self::new(stats)
    }

    pub fn classes(&self) -> &[GaussianClassStats] {
        &self.classes
    }

    /// Class with the smallest Mahalanobis distance (first in order on ties).
    pub fn nearest_class(&self, x: &[f64]) -> Result<(u32, f64)> {
        let mut best = (self.classes[0].class_id, f64::INFINITY);
        for c in &self.classes {
            let m = c.mahalanobis(x)?;
            if m < best.1 {
                best = (c.class_id, m);
            }
        }
        Ok(best)
    }
}

pub fn mahalanobis_score(classes: &[GaussianClassStats], x: &[f64]) -> Result<f64> {
    let mut best = f64::INFINITY;
    for c in classes {
        best = best.min(c.mahalanobis(x)?);
    }
    if classes.is_empty() {
        return Err(Error::usage("mahalanobis score needs at least one class"));
    }
    Ok(-best)
}

impl Scorer for MahalanobisScorer {
    fn dim(&self) -> usize {
        self.classes[0].mean.len()
    }

    fn score(&self, x: &[f64]) -> Result<f64> {
        mahalanobis_score(&self.classes, x)
    }
}

/// Negative distance to the `k`-th nearest training row.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnScorer {
    train: PointSet,
    k: usize,
    normalize: bool,
}

impl KnnScorer {
    pub fn new(train: &PointSet, k: usize, normalize: bool) -> Result<Self> {
        if k == 0 || k > train.len() {
            return Err(Error::usage(format!(
                "k must lie in [1, {}], got {k}",
                train.len()
            )));
        }
        let train = if normalize {
            l2_normalize(train)?
        } else {
            train.without_labels()
        };
        Ok(Self { train, k, normalize })
    }

    pub fn k(&self) -> usize {
        self.k
    }
}

pub fn knn_score(train: &PointSet, x: &[f64], k: usize) -> Result<f64> {
    check_query(train.dim(), x)?;
    if k == 0 || k > train.len() {
        return Err(Error::usage(format!(
            "k must lie in [1, {}], got {k}",
            train.len()
        )));
    }
    let mut d: Vec<f64> = train.rows().map(|r| dist(x, r)).collect();
    let (_, kth, _) = d.select_nth_unstable_by(k - 1, f64::total_cmp);
    Ok(-*kth)
}

impl Scorer for KnnScorer {
    fn dim(&self) -> usize {
        self.train.dim()
    }

    fn score(&self, x: &[f64]) -> Result<f64> {
        check_query(self.dim(), x)?;
        if self.normalize {
            let mut x = x.to_vec();
            normalize_in_place(&mut x)?;
            knn_score(&self.train, &x, self.k)
        } else {
            knn_score(&self.train, x, self.k)
        }
    }
}

/// Shannon entropy in nats, with `0 ln 0 = 0`. The input is renormalized, so
/// it only has to sum to 1 within `1e-6`.
pub fn softmax_entropy(p: &[f64]) -> Result<f64> {
    if p.is_empty() {
        return Err(Error::usage("probability vector is empty"));
    }
    if let Some(col) = p.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { row: 0, col });
    }
    if let Some(v) = p.iter().find(|&&v| v < 0.0) {
        return Err(Error::usage(format!("negative probability {v}")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::usage(format!(
            "probabilities sum to {total}, expected 1"
        )));
    }
    Ok(-p
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| {
            let q = v / total;
            q * q.ln()
        })
        .sum::<f64>())
}

/// Lens depth of `x` with plain Euclidean distances.
pub fn euclidean_lens_depth(q: &PointSet, x: &[f64]) -> Result<f64> {
    EuclideanLensDepth::new(q)?.score(x)
}

/// Euclidean lens depth with the inner distance matrix computed once.
#[derive(Debug, Clone, PartialEq)]
pub struct EuclideanLensDepth {
    points: PointSet,
    pairwise: DistanceMatrix,
}

impl EuclideanLensDepth {
    pub fn new(q: &PointSet) -> Result<Self> {
        let m = q.len();
        if m < 2 {
            return Err(Error::usage("lens depth needs at least 2 points"));
        }
        let mut lower = Vec::with_capacity(m * (m - 1) / 2);
        for i in 1..m {
            for j in 0..i {
                lower.push(dist(q.row(i), q.row(j)));
            }
        }
        Ok(Self {
            points: q.without_labels(),
            pairwise: DistanceMatrix::from_lower(m, lower)?,
        })
    }
}

impl Scorer for EuclideanLensDepth {
    fn dim(&self) -> usize {
        self.points.dim()
    }

    fn score(&self, x: &[f64]) -> Result<f64> {
        check_query(self.dim(), x)?;
        let dx: Vec<f64> = self.points.rows().map(|r| dist(x, r)).collect();
        let m = dx.len();
        let mut hits = 0u64;
        for i in 1..m {
            for (j, &r) in self.pairwise.lower_row(i).iter().enumerate() {
                hits += (dx[i].max(dx[j]) <= r) as u64;
            }
        }
        Ok(hits as f64 / (m * (m - 1) / 2) as f64)
    }
}
