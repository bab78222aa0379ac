//! Out-of-distribution scoring with lens depth over a modified sample Fermat
//! distance.
//!
//! A labeled feature set is split by class. Each class is (optionally) reduced
//! to a smaller set of inner points, and all-pairs Fermat distances are computed
//! over them. A query's score is its empirical lens depth in the deepest class:
//! the fraction of inner-point pairs whose lens contains it.

pub mod baselines;
pub mod cli;
pub mod datasets;
pub mod depth;
pub mod error;
pub mod eval;
pub mod fermat;
pub mod geometry;

pub use error::{Error, Result};
pub use geometry::{DistanceMatrix, PointSet};

/// A feature-space scorer. Higher scores mean more in-distribution.
pub trait Scorer: Sync {
    fn dim(&self) -> usize;
    fn score(&self, x: &[f64]) -> Result<f64>;

    /// Scores every row in parallel. Row indices are attached to per-row errors.
    fn score_rows(&self, xs: &PointSet) -> Result<Vec<f64>> {
        use rayon::prelude::*;
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
                    Error::NonFinite { col, .. } => Error::NonFinite { row: i, col },
                    other => other,
                })
            })
            .collect()
    }
}
