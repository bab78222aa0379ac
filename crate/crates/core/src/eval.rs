//! AUROC, consistency curves, rank correlation and 2-d score grids.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Scorer;

pub const DEFAULT_STEPS: usize = 100;

fn check_scores(name: &str, s: &[f64]) -> Result<()> {
    if s.is_empty() {
        return Err(Error::usage(format!("{name} scores are empty")));
    }
    if let Some(row) = s.iter().position(|v| v.is_nan()) {
        return Err(Error::NonFinite { row, col: 0 });
    }
    Ok(())
}

/// Twice the midrank (1-based) of every value, as exact integers.
fn double_midranks(values: &[f64]) -> Vec<u64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0u64; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start+1 ..= end share the average rank
        let twice = (start + 1 + end) as u64;
        for &i in &order[start..end] {
            ranks[i] = twice;
        }
        start = end;
    }
    ranks
}

/// Probability that a random ID score exceeds a random OOD score, ties
/// counting one half. Higher scores mean more in-distribution.
pub fn auroc(scores_id: &[f64], scores_ood: &[f64]) -> Result<f64> {
    check_scores("ID", scores_id)?;
    check_scores("OOD", scores_ood)?;
    let n_id = scores_id.len() as u128;
    let n_ood = scores_ood.len() as u128;
    let all: Vec<f64> = scores_id.iter().chain(scores_ood).copied().collect();
    let ranks = double_midranks(&all);
    let rank_sum: u128 = ranks[..scores_id.len()].iter().map(|&r| r as u128).sum();
    // 2U and 2 n_id n_ood are both integers
    let num = rank_sum - n_id * (n_id + 1);
    let den = 2 * n_id * n_ood;
    // evaluate the smaller half directly so swapping sides complements exactly
    if 2 * num <= den {
        Ok(num as f64 / den as f64)
    } else {
        Ok(1.0 - (den - num) as f64 / den as f64)
    }
}

/// Retained accuracy after rejecting the lowest-scored fraction `k / steps`
/// for `k` in `0..steps`. Ties are rejected in input order.
pub fn consistency_curve(scores: &[f64], correct: &[bool], steps: usize) -> Result<Vec<(f64, f64)>> {
    if scores.len() != correct.len() {
        return Err(Error::usage(format!(
            "{} scores but {} correctness flags",
            scores.len(),
            correct.len()
        )));
    }
    if steps < 2 {
        return Err(Error::usage(format!("steps must be >= 2, got {steps}")));
    }
    check_scores("curve", scores)?;
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    // correct_from[i]: correct items among order[i..]
    let mut correct_from = vec![0usize; n + 1];
    for i in (0..n).rev() {
        correct_from[i] = correct_from[i + 1] + correct[order[i]] as usize;
    }
    Ok((0..steps)
        .map(|k| {
            let dropped = k * n / steps;
            let kept = n - dropped;
            (k as f64 / steps as f64, correct_from[dropped] as f64 / kept as f64)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub auroc: f64,
    /// `[rejected_fraction, retained_accuracy]` pairs.
    pub curve: Vec<[f64; 2]>,
    pub n_id: usize,
    pub n_ood: usize,
    /// Resolved configuration of the producing run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

impl EvalReport {
    /// OOD items enter the curve as incorrect predictions. `id_correct`
    /// defaults to all correct.
    pub fn compute(
        scores_id: &[f64],
        id_correct: Option<&[bool]>,
        scores_ood: &[f64],
        steps: usize,
    ) -> Result<Self> {
        let auroc = auroc(scores_id, scores_ood)?;
        let mut correct = match id_correct {
            Some(c) if c.len() != scores_id.len() => {
                return Err(Error::usage(format!(
                    "{} ID scores but {} correctness flags",
                    scores_id.len(),
                    c.len()
                )))
            }
            Some(c) => c.to_vec(),
            None => vec![true; scores_id.len()],
        };
        correct.resize(scores_id.len() + scores_ood.len(), false);
        let scores: Vec<f64> = scores_id.iter().chain(scores_ood).copied().collect();
        let curve = consistency_curve(&scores, &correct, steps)?
            .into_iter()
            .map(|(r, a)| [r, a])
            .collect();
        Ok(Self {
            auroc,
            curve,
            n_id: scores_id.len(),
            n_ood: scores_ood.len(),
            config: None,
        })
    }
}

/// Spearman rank correlation: Pearson correlation of midranks.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::usage(format!(
            "spearman needs two equal-length series of at least 2 values, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    check_scores("first", a)?;
    check_scores("second", b)?;
    let ra = double_midranks(a);
    let rb = double_midranks(b);
    let mean = (a.len() + 1) as f64;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in ra.iter().zip(&rb) {
        let (x, y) = (x as f64 - mean, y as f64 - mean);
        sab += x * y;
        saa += x * x;
        sbb += y * y;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::usage("spearman is undefined for a constant series"));
    }
    Ok(sab / (saa * sbb).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridBounds {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl GridBounds {
    /// Center of cell `i` along an axis split into `res` equal cells.
    fn center(lo: f64, hi: f64, i: usize, res: usize) -> f64 {
        lo + (i as f64 + 0.5) * (hi - lo) / res as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub bounds: GridBounds,
    pub resolution: usize,
    /// Row-major: `scores[iy * resolution + ix]`.
    pub scores: Vec<f64>,
}

impl Grid {
    pub fn x(&self, ix: usize) -> f64 {
        GridBounds::center(self.bounds.xmin, self.bounds.xmax, ix, self.resolution)
    }

    pub fn y(&self, iy: usize) -> f64 {
        GridBounds::center(self.bounds.ymin, self.bounds.ymax, iy, self.resolution)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x,y,score")?;
        let r = self.resolution;
        for iy in 0..r {
            for ix in 0..r {
                writeln!(w, "{:?},{:?},{:?}", self.x(ix), self.y(iy), self.scores[iy * r + ix])?;
            }
        }
        Ok(())
    }
}

/// Scores the centers of a `resolution x resolution` lattice over `bounds`.
pub fn grid_map<S: Scorer + ?Sized>(scorer: &S, bounds: GridBounds, resolution: usize) -> Result<Grid> {
    if scorer.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: scorer.dim(),
        });
    }
    if resolution < 2 {
        return Err(Error::usage(format!("resolution must be >= 2, got {resolution}")));
    }
    let GridBounds { xmin, xmax, ymin, ymax } = bounds;
    if ![xmin, xmax, ymin, ymax].iter().all(|v| v.is_finite()) || xmin >= xmax || ymin >= ymax {
        return Err(Error::usage(format!(
            "grid bounds must be finite with xmin < xmax and ymin < ymax, got {bounds:?}"
        )));
    }
    let rows = (0..resolution)
        .into_par_iter()
        .map(|iy| {
            let y = GridBounds::center(ymin, ymax, iy, resolution);
            (0..resolution)
                .map(|ix| scorer.score(&[GridBounds::center(xmin, xmax, ix, resolution), y]))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Grid {
        bounds,
        resolution,
        scores: rows.concat(),
    })
}
