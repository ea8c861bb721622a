//! Exact greedy regression trees under squared error.
//!
//! Each node keeps, per feature, its rows sorted by feature value; a split
//! partitions those lists stably, so the whole tree costs O(rows · features ·
//! depth) after the initial sort. Candidate thresholds are midpoints between
//! consecutive distinct values. The split gain is the reduction in the sum of
//! squared errors, so gains telescope to the total reduction from the root
//! to the leaves. Among equal gains the lowest feature index wins, then the
//! lowest threshold. Gains within `TIE_TOLERANCE` times the node SSE are
//! equal, so identical partitions reached through different features tie.

use std::collections::VecDeque;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;

const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Growth {
    /// Expand every splittable node of one depth before the next (depth-capped).
    #[default]
    LevelWise,
    /// Always expand the frontier node with the largest gain (leaf-capped).
    LeafWise,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub max_leaves: Option<usize>,
    /// Fraction of features examined at each split, in (0, 1].
    pub feature_subsample: f64,
    pub growth: Growth,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self { max_depth: None, min_samples_leaf: 1, max_leaves: None, feature_subsample: 1.0, growth: Growth::LevelWise }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<()> {
        if self.min_samples_leaf == 0 {
            return Err(Error::InvalidParameter("min_samples_leaf must be at least 1".into()));
        }
        if !(self.feature_subsample > 0.0 && self.feature_subsample <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "feature_subsample must be in (0, 1], got {}",
                self.feature_subsample
            )));
        }
        if self.max_leaves == Some(0) {
            return Err(Error::InvalidParameter("max_leaves must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Internal {
        feature: usize,
        /// Rows with `x[feature] < threshold` go left.
        threshold: f64,
        gain: f64,
        left: usize,
        right: usize,
        sample_count: usize,
    },
    Leaf {
        prediction: f64,
        sample_count: usize,
    },
}

impl Node {
    pub fn sample_count(&self) -> usize {
        match *self {
            Node::Internal { sample_count, .. } | Node::Leaf { sample_count, .. } => sample_count,
        }
    }
}

/// A fitted tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(prediction: f64, sample_count: usize) -> Self {
        Self { nodes: vec![Node::Leaf { prediction, sample_count }] }
    }

    pub fn leaf_index(&self, row: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Internal { feature, threshold, left, right, .. } => {
                    i = if row[feature] < threshold { left } else { right };
                }
            }
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        match self.nodes[self.leaf_index(row)] {
            Node::Leaf { prediction, .. } => prediction,
            Node::Internal { .. } => unreachable!("leaf_index returns a leaf"),
        }
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Internal { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn internal_nodes(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.nodes.iter().filter_map(|n| match *n {
            Node::Internal { feature, gain, .. } => Some((feature, gain)),
            Node::Leaf { .. } => None,
        })
    }
}

#[derive(Debug, Clone, Copy)]
struct Split {
    feature: usize,
    threshold: f64,
    gain: f64,
    left_count: usize,
}

struct Pending {
    node: usize,
    depth: usize,
    /// Per feature, positions (into the training rows) sorted by value.
    sorted: Vec<Vec<u32>>,
    split: Option<Split>,
}

struct Grower<'a, R: Rng> {
    columns: Vec<Vec<f64>>,
    y: Vec<f64>,
    params: &'a TreeParams,
    rng: &'a mut R,
    n_features: usize,
    nodes: Vec<Node>,
    goes_left: Vec<bool>,
}

impl<R: Rng> Grower<'_, R> {
    fn node_stats(&self, positions: &[u32]) -> (f64, f64) {
        let n = positions.len() as f64;
        let mean = positions.iter().map(|&p| self.y[p as usize]).sum::<f64>() / n;
        let sse = positions.iter().map(|&p| (self.y[p as usize] - mean).powi(2)).sum::<f64>();
        (mean, sse)
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let p = self.n_features;
        if self.params.feature_subsample >= 1.0 {
            return (0..p).collect();
        }
        let k = ((self.params.feature_subsample * p as f64).ceil() as usize).clamp(1, p);
        let mut picked = sample(self.rng, p, k).into_vec();
        picked.sort_unstable();
        picked
    }

    fn best_split(&mut self, pending: &Pending) -> Option<Split> {
        let positions = &pending.sorted[0];
        let n = positions.len();
        let msl = self.params.min_samples_leaf;
        if n < 2 * msl || self.params.max_depth.is_some_and(|d| pending.depth >= d) {
            return None;
        }
        let (mean, sse) = self.node_stats(positions);
        if !(sse > 0.0) {
            return None;
        }
        let total: f64 = positions.iter().map(|&p| self.y[p as usize] - mean).sum();
        let base = total * total / n as f64;
        let mut best: Option<Split> = None;
        for f in self.candidate_features() {
            let col = &self.columns[f];
            let order = &pending.sorted[f];
            let mut left_sum = 0.0;
            for i in 0..n - 1 {
                let pos = order[i] as usize;
                left_sum += self.y[pos] - mean;
                let left_n = i + 1;
                let right_n = n - left_n;
                if left_n < msl {
                    continue;
                }
                if right_n < msl {
                    break;
                }
                let (v, next) = (col[pos], col[order[i + 1] as usize]);
                if v >= next {
                    continue;
                }
                let right_sum = total - left_sum;
                let gain = (left_sum * left_sum / left_n as f64 + right_sum * right_sum / right_n as f64 - base).max(0.0);
                // gains closer than rounding error count as ties
                if best.is_none_or(|b| gain > b.gain + TIE_TOLERANCE * sse) {
                    let mut threshold = v + (next - v) / 2.0;
                    if threshold <= v {
                        threshold = next;
                    }
                    best = Some(Split { feature: f, threshold, gain, left_count: left_n });
                }
            }
        }
        best
    }

    fn make_leaf(&mut self, node: usize, positions: &[u32]) {
        let (mean, _) = self.node_stats(positions);
        self.nodes[node] = Node::Leaf { prediction: mean, sample_count: positions.len() };
    }

    fn apply(&mut self, pending: Pending, split: Split) -> (Pending, Pending) {
        let n = pending.sorted[0].len();
        let col = &self.columns[split.feature];
        for &p in &pending.sorted[0] {
            self.goes_left[p as usize] = col[p as usize] < split.threshold;
        }
        let mut left_sorted = Vec::with_capacity(self.n_features);
        let mut right_sorted = Vec::with_capacity(self.n_features);
        for list in pending.sorted {
            let (l, r): (Vec<u32>, Vec<u32>) = list.into_iter().partition(|&p| self.goes_left[p as usize]);
            left_sorted.push(l);
            right_sorted.push(r);
        }
        debug_assert_eq!(left_sorted[0].len(), split.left_count);
        let left = self.nodes.len();
        let right = left + 1;
        self.nodes.push(Node::Leaf { prediction: 0.0, sample_count: 0 });
        self.nodes.push(Node::Leaf { prediction: 0.0, sample_count: 0 });
        self.nodes[pending.node] = Node::Internal {
            feature: split.feature,
            threshold: split.threshold,
            gain: split.gain,
            left,
            right,
            sample_count: n,
        };
        let depth = pending.depth + 1;
        (
            Pending { node: left, depth, sorted: left_sorted, split: None },
            Pending { node: right, depth, sorted: right_sorted, split: None },
        )
    }
}

/// Row indices of a matrix sorted by value (then index), per feature. Shared
/// by every tree of an ensemble so each fit skips the sort.
#[derive(Debug, Clone)]
pub struct ColumnOrder {
    order: Vec<Vec<u32>>,
    rows: usize,
}

impl ColumnOrder {
    pub fn new(x: &FeatureMatrix) -> Self {
        let order = (0..x.n_cols())
            .map(|f| {
                let mut idx: Vec<u32> = (0..x.n_rows() as u32).collect();
                idx.sort_by(|&a, &b| x.get(a as usize, f).total_cmp(&x.get(b as usize, f)).then(a.cmp(&b)));
                idx
            })
            .collect();
        Self { order, rows: x.n_rows() }
    }

    /// Positions into `rows` sorted per feature, by value then row then position.
    fn restrict(&self, rows: &[usize]) -> Vec<Vec<u32>> {
        let mut start = vec![0u32; self.rows + 1];
        for &r in rows {
            start[r + 1] += 1;
        }
        for i in 0..self.rows {
            start[i + 1] += start[i];
        }
        let mut fill = start.clone();
        let mut by_row = vec![0u32; rows.len()];
        for (j, &r) in rows.iter().enumerate() {
            by_row[fill[r] as usize] = j as u32;
            fill[r] += 1;
        }
        self.order
            .iter()
            .map(|ord| {
                let mut out = Vec::with_capacity(rows.len());
                for &r in ord {
                    out.extend_from_slice(&by_row[start[r as usize] as usize..start[r as usize + 1] as usize]);
                }
                out
            })
            .collect()
    }
}

/// Fits a tree on `rows` of `x` (duplicates allowed, e.g. a bootstrap
/// sample) against `targets` indexed like `x`'s rows.
pub fn fit_tree_rows<R: Rng>(
    x: &FeatureMatrix,
    targets: &[f64],
    rows: &[usize],
    params: &TreeParams,
    rng: &mut R,
) -> Result<Tree> {
    fit_tree_ordered(x, targets, rows, params, rng, &ColumnOrder::new(x))
}

/// [`fit_tree_rows`] with a precomputed [`ColumnOrder`] of `x`.
pub fn fit_tree_ordered<R: Rng>(
    x: &FeatureMatrix,
    targets: &[f64],
    rows: &[usize],
    params: &TreeParams,
    rng: &mut R,
    order: &ColumnOrder,
) -> Result<Tree> {
    params.validate()?;
    if order.rows != x.n_rows() || order.order.len() != x.n_cols() {
        return Err(Error::Schema("column order was built for a different matrix".into()));
    }
    if let Some(&r) = rows.iter().find(|&&r| r >= x.n_rows()) {
        return Err(Error::InvalidParameter(format!("row {r} is out of range")));
    }
    if rows.is_empty() {
        return Err(Error::InsufficientData("cannot fit a tree on zero rows".into()));
    }
    if targets.len() != x.n_rows() {
        return Err(Error::Schema(format!("{} targets for {} rows", targets.len(), x.n_rows())));
    }
    let n_features = x.n_cols();
    let columns: Vec<Vec<f64>> = (0..n_features).map(|f| rows.iter().map(|&r| x.get(r, f)).collect()).collect();
    let y: Vec<f64> = rows.iter().map(|&r| targets[r]).collect();
    if y.iter().chain(columns.iter().flatten()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidRecord("training data contains non-finite values".into()));
    }
    let sorted: Vec<Vec<u32>> =
        if n_features == 0 { vec![(0..rows.len() as u32).collect()] } else { order.restrict(rows) };

    let mut g = Grower {
        columns,
        y,
        params,
        rng,
        n_features,
        nodes: vec![Node::Leaf { prediction: 0.0, sample_count: rows.len() }],
        goes_left: vec![false; rows.len()],
    };
    let root = Pending { node: 0, depth: 0, sorted, split: None };
    let max_leaves = params.max_leaves.unwrap_or(usize::MAX);
    let mut leaves = 1usize;

    match params.growth {
        Growth::LevelWise => {
            let mut queue = VecDeque::from([root]);
            while let Some(mut p) = queue.pop_front() {
                let split = if leaves < max_leaves && n_features > 0 { g.best_split(&p) } else { None };
                match split {
                    Some(s) => {
                        p.split = Some(s);
                        let (l, r) = g.apply(p, s);
                        leaves += 1;
                        queue.push_back(l);
                        queue.push_back(r);
                    }
                    None => g.make_leaf(p.node, &p.sorted[0]),
                }
            }
        }
        Growth::LeafWise => {
            let mut frontier: Vec<Pending> = Vec::new();
            let consider = |g: &mut Grower<'_, R>, mut p: Pending, frontier: &mut Vec<Pending>| {
                p.split = if n_features > 0 { g.best_split(&p) } else { None };
                if p.split.is_some() {
                    frontier.push(p);
                } else {
                    g.make_leaf(p.node, &p.sorted[0]);
                }
            };
            consider(&mut g, root, &mut frontier);
            while leaves < max_leaves && !frontier.is_empty() {
                // largest gain; ties go to the earliest-created node
                let pick = frontier
                    .iter()
                    .enumerate()
                    .max_by(|(_, a), (_, b)| {
                        let (ga, gb) = (a.split.map_or(0.0, |s| s.gain), b.split.map_or(0.0, |s| s.gain));
                        ga.total_cmp(&gb).then(b.node.cmp(&a.node))
                    })
                    .map(|(i, _)| i)
                    .expect("frontier is non-empty");
                let p = frontier.swap_remove(pick);
                let s = p.split.expect("frontier nodes carry a split");
                let (l, r) = g.apply(p, s);
                leaves += 1;
                consider(&mut g, l, &mut frontier);
                consider(&mut g, r, &mut frontier);
            }
            for p in frontier {
                g.make_leaf(p.node, &p.sorted[0]);
            }
        }
    }
    Ok(Tree { nodes: g.nodes })
}

/// Fits a tree on all rows of `x` against its own target.
pub fn fit_tree<R: Rng>(x: &FeatureMatrix, params: &TreeParams, rng: &mut R) -> Result<Tree> {
    let rows: Vec<usize> = (0..x.n_rows()).collect();
    fit_tree_rows(x, x.target(), &rows, params, rng)
}
