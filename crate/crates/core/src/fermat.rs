//! Sample Fermat distance over a finite point cloud.
//!
//! The distance between two sample points is the cheapest path through the
//! cloud where every hop `(u, v)` costs `|u - v|^alpha`. For `alpha > 1` long
//! hops are penalized, so optimal paths thread through dense regions and
//! follow the shape of the data.
//!
//! Queries that are not sample points enter the graph through a free first
//! hop: the modified distance from `x` to sample `y` is
//! `min_q |x - q|^alpha + D(q, y)`. The unmodified variant snaps `x` to its
//! nearest sample and ignores how far away it is; it is kept to demonstrate
//! the constant-on-Voronoi-cells artifact.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::{Read, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{dist, nearest_particle, sq_dist, DistanceMatrix, PointSet};

pub const GRAPH_MAGIC: &[u8; 8] = b"LDGRAF01";

/// Cost of a single hop of Euclidean length `d`.
#[inline]
pub fn hop_cost(d: f64, alpha: f64) -> f64 {
    if alpha == 1.0 {
        d
    } else {
        d.powf(alpha)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FermatOptions {
    /// Restrict hops to each point's `k` nearest neighbours (symmetrized).
    /// This approximates the exact distance and is off by default.
    pub approx_knn_edges: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FermatGraph {
    points: PointSet,
    alpha: f64,
    pairwise: DistanceMatrix,
    // max over lower_row(i); lets lens counting skip rows no lens can reach
    lower_row_max: Vec<f64>,
}

#[derive(Copy, Clone, PartialEq)]
struct HeapItem {
    cost: f64,
    node: usize,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on cost, then on node index
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

enum Edges {
    Dense(Vec<f64>),
    Sparse(Vec<Vec<(usize, f64)>>),
}

impl Edges {
    fn dense(points: &PointSet, alpha: f64) -> Self {
        let m = points.len();
        let mut w = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..i {
                let c = hop_cost(dist(points.row(i), points.row(j)), alpha);
                w[i * m + j] = c;
                w[j * m + i] = c;
            }
        }
        Edges::Dense(w)
    }

    fn knn(points: &PointSet, alpha: f64, k: usize) -> Self {
        let m = points.len();
        let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
        for i in 0..m {
            let mut cand: Vec<(f64, usize)> = (0..m)
                .filter(|&j| j != i)
                .map(|j| (sq_dist(points.row(i), points.row(j)), j))
                .collect();
            cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            for &(s, j) in cand.iter().take(k) {
                let c = hop_cost(s.sqrt(), alpha);
                adj[i].push((j, c));
                adj[j].push((i, c));
            }
        }
        for list in &mut adj {
            list.sort_by_key(|e| e.0);
            list.dedup_by_key(|e| e.0);
        }
        Edges::Sparse(adj)
    }

    /// Single-source shortest paths; `pred` receives lowest-index predecessors when given.
    fn dijkstra(&self, m: usize, src: usize, mut pred: Option<&mut Vec<usize>>) -> Vec<f64> {
        let mut best = vec![f64::INFINITY; m];
        let mut done = vec![false; m];
        let mut heap = BinaryHeap::with_capacity(m);
        best[src] = 0.0;
        heap.push(HeapItem { cost: 0.0, node: src });
        let mut relax = |u: usize, v: usize, du: f64, w: f64, best: &mut [f64], heap: &mut BinaryHeap<HeapItem>| {
            let nd = du + w;
            if nd < best[v] {
                best[v] = nd;
                heap.push(HeapItem { cost: nd, node: v });
                if let Some(p) = pred.as_deref_mut() {
                    p[v] = u;
                }
            } else if nd == best[v] {
                if let Some(p) = pred.as_deref_mut() {
                    if u < p[v] {
                        p[v] = u;
                    }
                }
            }
        };
        while let Some(HeapItem { cost, node: u }) = heap.pop() {
            if done[u] {
                continue;
            }
            done[u] = true;
            match self {
                Edges::Dense(w) => {
                    let row = &w[u * m..(u + 1) * m];
                    for v in 0..m {
                        if !done[v] {
                            relax(u, v, cost, row[v], &mut best, &mut heap);
                        }
                    }
                }
                Edges::Sparse(adj) => {
                    for &(v, w) in &adj[u] {
                        if !done[v] {
                            relax(u, v, cost, w, &mut best, &mut heap);
                        }
                    }
                }
            }
        }
        best
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha.is_finite() && alpha >= 1.0) {
        return Err(Error::usage(format!("alpha must be >= 1, got {alpha}")));
    }
    Ok(())
}

/// All-pairs sample Fermat distances over `points` with exponent `alpha`.
pub fn build_fermat_graph(points: &PointSet, alpha: f64) -> Result<FermatGraph> {
    build_fermat_graph_with(points, alpha, FermatOptions::default())
}

pub fn build_fermat_graph_with(
    points: &PointSet,
    alpha: f64,
    opts: FermatOptions,
) -> Result<FermatGraph> {
    check_alpha(alpha)?;
    let m = points.len();
    if m < 2 {
        return Err(Error::usage(format!(
            "a fermat graph needs at least 2 points, got {m}"
        )));
    }
    let edges = match opts.approx_knn_edges {
        None => Edges::dense(points, alpha),
        Some(0) => return Err(Error::usage("approx_knn_edges must be at least 1")),
        Some(k) => Edges::knn(points, alpha, k.min(m - 1)),
    };
    let rows: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|s| edges.dijkstra(m, s, None))
        .collect();

    // Both directions are shortest-path lengths of the same undirected graph;
    // they can differ by rounding only. Keep the smaller.
    let mut lower = Vec::with_capacity(m * (m - 1) / 2);
    for i in 1..m {
        for j in 0..i {
            let v = rows[i][j].min(rows[j][i]);
            if !v.is_finite() {
                return Err(Error::Disconnected { from: j, to: i });
            }
            lower.push(v);
        }
    }
    let pairwise = DistanceMatrix::from_lower(m, lower)?;
    Ok(FermatGraph::assemble(points.without_labels(), alpha, pairwise))
}

impl FermatGraph {
    fn assemble(points: PointSet, alpha: f64, pairwise: DistanceMatrix) -> Self {
        let lower_row_max = (0..points.len())
            .map(|i| {
                pairwise
                    .lower_row(i)
                    .iter()
                    .copied()
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        Self {
            points,
            alpha,
            pairwise,
            lower_row_max,
        }
    }

    pub fn points(&self) -> &PointSet {
        &self.points
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn pairwise(&self) -> &DistanceMatrix {
        &self.pairwise
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }

    pub(crate) fn lower_row_max(&self) -> &[f64] {
        &self.lower_row_max
    }

    /// Sample Fermat distance between inner points `i` and `j`.
    pub fn between_samples(&self, i: usize, j: usize) -> Result<f64> {
        let m = self.len();
        if i >= m || j >= m {
            return Err(Error::usage(format!(
                "index ({i}, {j}) out of range for {m} points"
            )));
        }
        Ok(self.pairwise.get(i, j))
    }

    /// First-hop costs `|x - q|^alpha` for every inner point `q`.
    pub fn entry_costs(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.points.check_dim(x)?;
        Ok(self
            .points
            .rows()
            .map(|q| hop_cost(dist(x, q), self.alpha))
            .collect())
    }

    /// Modified distance from an arbitrary query to every inner point:
    /// `out[y] = min_q |x - q|^alpha + D(q, y)`.
    ///
    /// When `x` coincides with inner point `i` the result is exactly row `i`
    /// of the pairwise matrix.
    pub fn modified_to_all(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.points.check_dim(x)?;
        if let Some(i) = self.points.rows().position(|q| sq_dist(x, q) == 0.0) {
            return Ok(self.pairwise.row(i));
        }
        let costs = self.entry_costs(x)?;
        let mut order: Vec<usize> = (0..costs.len()).collect();
        order.sort_by(|&a, &b| costs[a].total_cmp(&costs[b]).then(a.cmp(&b)));

        let m = self.len();
        let mut out = vec![f64::INFINITY; m];
        for (y, slot) in out.iter_mut().enumerate() {
            let mut best = f64::INFINITY;
            for &q in &order {
                let c = costs[q];
                // pairwise entries are non-negative: no later q can improve
                if c >= best {
                    break;
                }
                let v = c + self.pairwise.get(q, y);
                if v < best {
                    best = v;
                }
            }
            *slot = best;
        }
        Ok(out)
    }

    /// Distance row of the nearest inner point to `x`. Constant on Voronoi cells.
    pub fn unmodified_to_all(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (i, _) = nearest_particle(x, &self.points)?;
        Ok(self.pairwise.row(i))
    }

    /// Vertex sequence of a cheapest path from `i` to `j`. Among equal-cost
    /// paths, each vertex takes its lowest-index predecessor.
    pub fn shortest_path(&self, i: usize, j: usize) -> Result<Vec<usize>> {
        self.between_samples(i, j)?;
        let m = self.len();
        let edges = Edges::dense(&self.points, self.alpha);
        let mut pred = vec![usize::MAX; m];
        edges.dijkstra(m, i, Some(&mut pred));
        let mut path = vec![j];
        let mut cur = j;
        while cur != i {
            cur = pred[cur];
            path.push(cur);
        }
        path.reverse();
        Ok(path)
    }

    /// Binary `LDGRAF01` encoding.
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(GRAPH_MAGIC)?;
        w.write_all(&(self.len() as u64).to_le_bytes())?;
        w.write_all(&(self.dim() as u64).to_le_bytes())?;
        w.write_all(&self.alpha.to_le_bytes())?;
        for v in self.points.as_slice() {
            w.write_all(&v.to_le_bytes())?;
        }
        for v in self.pairwise.lower() {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let bad = |msg: &str| Error::usage(format!("invalid LDGRAF01 data: {msg}"));
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(|_| bad("truncated header"))?;
        if &magic != GRAPH_MAGIC {
            return Err(bad("wrong magic"));
        }
        let mut word = [0u8; 8];
        let mut next = |r: &mut R| -> Result<[u8; 8]> {
            r.read_exact(&mut word).map_err(|_| bad("truncated"))?;
            Ok(word)
        };
        let m = u64::from_le_bytes(next(&mut r)?) as usize;
        let d = u64::from_le_bytes(next(&mut r)?) as usize;
        let alpha = f64::from_le_bytes(next(&mut r)?);
        check_alpha(alpha)?;
        if m < 2 || d == 0 {
            return Err(bad("degenerate shape"));
        }
        let mut data = Vec::with_capacity(m * d);
        for _ in 0..m * d {
            data.push(f64::from_le_bytes(next(&mut r)?));
        }
        let mut lower = Vec::with_capacity(m * (m - 1) / 2);
        for _ in 0..m * (m - 1) / 2 {
            lower.push(f64::from_le_bytes(next(&mut r)?));
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest).map_err(|_| bad("read failure"))? != 0 {
            return Err(bad("trailing bytes"));
        }
        let points = PointSet::new(data, m, d)?;
        let pairwise = DistanceMatrix::from_lower(m, lower)?;
        Ok(Self::assemble(points, alpha, pairwise))
    }
}
