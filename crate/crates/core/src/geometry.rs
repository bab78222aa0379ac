//! Dense point storage, Euclidean primitives and the symmetric distance container.

use crate::error::{Error, Result};

/// An `n x d` row-major matrix of finite feature vectors with optional class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    data: Vec<f64>,
    n: usize,
    d: usize,
    labels: Option<Vec<u32>>,
}

impl PointSet {
    pub fn new(data: Vec<f64>, n: usize, d: usize) -> Result<Self> {
        Self::build(data, n, d, None)
    }

    pub fn with_labels(data: Vec<f64>, n: usize, d: usize, labels: Vec<u32>) -> Result<Self> {
        Self::build(data, n, d, Some(labels))
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(n * d);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != d {
                return Err(Error::usage(format!(
                    "ragged rows: row {i} has {} columns, expected {d}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::new(data, n, d)
    }

    fn build(data: Vec<f64>, n: usize, d: usize, labels: Option<Vec<u32>>) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::usage(format!("point set must be non-empty, got {n}x{d}")));
        }
        if data.len() != n * d {
            return Err(Error::usage(format!(
                "data length {} does not match shape {n}x{d}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / d,
                col: pos % d,
            });
        }
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(Error::usage(format!(
                    "{} labels supplied for {n} rows",
                    l.len()
                )));
            }
        }
        Ok(Self { data, n, d, labels })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    /// Always false; a `PointSet` holds at least one row.
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.d)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn labels(&self) -> Option<&[u32]> {
        self.labels.as_deref()
    }

    pub fn without_labels(&self) -> PointSet {
        PointSet {
            labels: None,
            ..self.clone()
        }
    }

    /// Sorted distinct class ids, or an error when the set is unlabeled.
    pub fn class_ids(&self) -> Result<Vec<u32>> {
        let labels = self
            .labels
            .as_ref()
            .ok_or_else(|| Error::usage("features carry no class labels"))?;
        let mut ids = labels.clone();
        ids.sort_unstable();
        ids.dedup();
        Ok(ids)
    }

    /// Unlabeled subset of the given rows, in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<PointSet> {
        let mut data = Vec::with_capacity(indices.len() * self.d);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        PointSet::new(data, indices.len(), self.d)
    }

    /// Unlabeled rows whose label equals `class_id`.
    pub fn class_rows(&self, class_id: u32) -> Result<PointSet> {
        let labels = self
            .labels
            .as_ref()
            .ok_or_else(|| Error::usage("features carry no class labels"))?;
        let idx: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|&(_, &l)| l == class_id)
            .map(|(i, _)| i)
            .collect();
        if idx.is_empty() {
            return Err(Error::usage(format!("class {class_id} has no rows")));
        }
        self.select(&idx)
    }

    pub(crate) fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: x.len(),
            });
        }
        Ok(())
    }
}

/// Symmetric `m x m` matrix with zero diagonal, stored as its strict lower triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    m: usize,
    lower: Vec<f64>,
}

#[inline]
fn tri_index(i: usize, j: usize) -> usize {
    debug_assert!(i > j);
    i * (i - 1) / 2 + j
}

impl DistanceMatrix {
    /// Builds from a strict lower triangle laid out row by row:
    /// `(1,0), (2,0), (2,1), (3,0), ...`.
    pub fn from_lower(m: usize, lower: Vec<f64>) -> Result<Self> {
        if lower.len() != m * m.saturating_sub(1) / 2 {
            return Err(Error::usage(format!(
                "lower triangle of a {m}x{m} matrix needs {} entries, got {}",
                m * m.saturating_sub(1) / 2,
                lower.len()
            )));
        }
        if let Some(v) = lower.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::usage(format!(
                "distance entries must be finite and non-negative, found {v}"
            )));
        }
        Ok(Self { m, lower })
    }

    /// Builds from a full square matrix, rejecting asymmetric input.
    pub fn from_square(values: &[Vec<f64>]) -> Result<Self> {
        let m = values.len();
        let mut lower = Vec::with_capacity(m * m.saturating_sub(1) / 2);
        for (i, row) in values.iter().enumerate() {
            if row.len() != m {
                return Err(Error::usage("distance matrix must be square"));
            }
            if row[i] != 0.0 {
                return Err(Error::usage(format!("diagonal entry {i} is not zero")));
            }
            for j in 0..i {
                if row[j] != values[j][i] {
                    return Err(Error::usage(format!(
                        "distance matrix is not symmetric at ({i}, {j})"
                    )));
                }
                lower.push(row[j]);
            }
        }
        Self::from_lower(m, lower)
    }

    pub fn size(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        use std::cmp::Ordering::*;
        match i.cmp(&j) {
            Equal => 0.0,
            Greater => self.lower[tri_index(i, j)],
            Less => self.lower[tri_index(j, i)],
        }
    }

    /// Entries `(i, 0..i)`.
    #[inline]
    pub fn lower_row(&self, i: usize) -> &[f64] {
        let start = i * i.saturating_sub(1) / 2;
        &self.lower[start..start + i]
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.m).map(|j| self.get(i, j)).collect()
    }

    pub fn max_entry(&self) -> f64 {
        self.lower.iter().copied().fold(0.0, f64::max)
    }
}

/// Euclidean distance between two points of equal dimension.
pub fn euclidean(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(sq_dist(a, b).sqrt())
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let t = x - y;
            t * t
        })
        .sum()
}

#[inline]
pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}

/// Index of the row of `q` closest to `x` and its distance. Ties go to the lowest index.
pub fn nearest_particle(x: &[f64], q: &PointSet) -> Result<(usize, f64)> {
    q.check_dim(x)?;
    let mut best = (0, f64::INFINITY);
    for (i, row) in q.rows().enumerate() {
        let s = sq_dist(x, row);
        if s < best.1 {
            best = (i, s);
        }
    }
    Ok((best.0, best.1.sqrt()))
}

/// Scales every row to unit Euclidean norm. Labels are kept.
pub fn l2_normalize(p: &PointSet) -> Result<PointSet> {
    let mut data = p.data.clone();
    for (i, row) in data.chunks_exact_mut(p.d).enumerate() {
        normalize_in_place(row).map_err(|_| Error::ZeroRow { row: i })?;
    }
    Ok(PointSet {
        data,
        ..p.clone()
    })
}

pub(crate) fn normalize_in_place(row: &mut [f64]) -> Result<()> {
    let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::ZeroRow { row: 0 });
    }
    row.iter_mut().for_each(|v| *v /= norm);
    Ok(())
}
