//! Squared-loss gradient boosting with exact greedy regression trees.
//!
//! `F0 = mean(targets)`, then each round fits a depth-limited tree to the
//! current residuals and adds it scaled by `eta`. Trees grow level by level:
//! for every feature the rows are visited once in presorted order and each
//! open node accumulates its own left-hand sums, so one level costs
//! O(d * m) regardless of how many nodes it holds.

use serde::{Deserialize, Serialize};

use crate::dataset::Matrix;
use crate::error::{Error, Result};

pub(crate) fn default_eta() -> f64 {
    0.1
}
pub(crate) fn default_nrounds() -> usize {
    200
}
pub(crate) fn default_max_depth() -> usize {
    6
}
pub(crate) fn default_min_leaf() -> usize {
    5
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbtParams {
    pub eta: f64,
    pub nrounds: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for GbtParams {
    fn default() -> Self {
        Self {
            eta: default_eta(),
            nrounds: default_nrounds(),
            max_depth: default_max_depth(),
            min_leaf: default_min_leaf(),
        }
    }
}

impl GbtParams {
    fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::invalid(format!("eta must lie in (0, 1], got {}", self.eta)));
        }
        if self.max_depth == 0 || self.min_leaf == 0 {
            return Err(Error::invalid("max_depth and min_leaf must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
enum Node {
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
    /// Leaf value, already multiplied by eta.
    Leaf(f64),
}

#[derive(Debug, Clone)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    #[inline]
    fn predict(&self, row: &[f64]) -> f64 {
        let mut at = 0usize;
        loop {
            match self.nodes[at] {
                Node::Leaf(v) => return v,
                Node::Split { feature, threshold, left, right } => {
                    at = if row[feature as usize] <= threshold { left as usize } else { right as usize };
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct GbtModel {
    base: f64,
    trees: Vec<Tree>,
    train_loss: Vec<f64>,
}

/// Running statistics for one node that may still be split.
#[derive(Clone, Copy)]
struct Open {
    node: u32,
    count: usize,
    sum: f64,
    sse: f64,
    left_count: usize,
    left_sum: f64,
    last: f64,
    best_gain: f64,
    best_feature: u32,
    best_threshold: f64,
}

const NOT_OPEN: u32 = u32::MAX;

impl GbtModel {
    pub fn fit(params: &GbtParams, features: &Matrix, targets: &[f64]) -> Result<Self> {
        params.validate()?;
        let (m, d) = (features.rows(), features.cols());
        let base = targets.iter().sum::<f64>() / m as f64;
        let mut fitted = vec![base; m];
        let mut resid: Vec<f64> = targets.iter().map(|t| t - base).collect();
        let mut train_loss = Vec::with_capacity(params.nrounds + 1);
        train_loss.push(mean_square(&resid));

        // Presorted (row, value) order per feature; ties keep row order.
        let mut order = vec![0u32; d * m];
        let mut values = vec![0.0; d * m];
        for f in 0..d {
            let o = &mut order[f * m..(f + 1) * m];
            for (i, slot) in o.iter_mut().enumerate() {
                *slot = i as u32;
            }
            o.sort_by(|&a, &b| features.get(a as usize, f).total_cmp(&features.get(b as usize, f)).then(a.cmp(&b)));
            for k in 0..m {
                values[f * m + k] = features.get(o[k] as usize, f);
            }
        }

        let mut trees = Vec::with_capacity(params.nrounds);
        let mut builder = Builder::new(m);
        for _ in 0..params.nrounds {
            let tree = builder.grow(params, features, &order, &values, &resid);
            for i in 0..m {
                if let Node::Leaf(v) = tree.nodes[builder.node_of[i] as usize] {
                    fitted[i] += v;
                }
                resid[i] = targets[i] - fitted[i];
            }
            train_loss.push(mean_square(&resid));
            trees.push(tree);
        }
        Ok(Self { base, trees, train_loss })
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        self.trees.iter().fold(self.base, |acc, t| acc + t.predict(row))
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    /// Mean squared training residual after 0, 1, ..., nrounds trees.
    pub fn training_loss(&self) -> &[f64] {
        &self.train_loss
    }
}

fn mean_square(v: &[f64]) -> f64 {
    v.iter().map(|r| r * r).sum::<f64>() / v.len() as f64
}

/// Scratch buffers reused across boosting rounds.
struct Builder {
    node_of: Vec<u32>,
    slot_of: Vec<u32>,
    open: Vec<Open>,
}

impl Builder {
    fn new(m: usize) -> Self {
        Self { node_of: vec![0; m], slot_of: Vec::new(), open: Vec::new() }
    }

    fn grow(&mut self, params: &GbtParams, features: &Matrix, order: &[u32], values: &[f64], resid: &[f64]) -> Tree {
        let m = resid.len();
        let d = features.cols();
        let min_leaf = params.min_leaf;
        self.node_of.iter_mut().for_each(|n| *n = 0);

        let sum: f64 = resid.iter().sum();
        let sumsq: f64 = resid.iter().map(|r| r * r).sum();
        // Per node: (count, sum, sum of squares).
        let mut stats = vec![(m, sum, sumsq)];
        let mut nodes = vec![Node::Leaf(0.0)];
        let mut frontier = vec![0u32];

        for _depth in 0..params.max_depth {
            self.slot_of.clear();
            self.slot_of.resize(nodes.len(), NOT_OPEN);
            self.open.clear();
            for &n in &frontier {
                let (count, sum, sumsq) = stats[n as usize];
                if count >= 2 * min_leaf {
                    self.slot_of[n as usize] = self.open.len() as u32;
                    self.open.push(Open {
                        node: n,
                        count,
                        sum,
                        sse: (sumsq - sum * sum / count as f64).max(0.0),
                        left_count: 0,
                        left_sum: 0.0,
                        last: f64::NEG_INFINITY,
                        best_gain: 0.0,
                        best_feature: 0,
                        best_threshold: 0.0,
                    });
                }
            }
            if self.open.is_empty() {
                break;
            }

            for f in 0..d {
                for o in self.open.iter_mut() {
                    o.left_count = 0;
                    o.left_sum = 0.0;
                    o.last = f64::NEG_INFINITY;
                }
                let ord = &order[f * m..(f + 1) * m];
                let val = &values[f * m..(f + 1) * m];
                for (&row, &v) in ord.iter().zip(val) {
                    let slot = self.slot_of[self.node_of[row as usize] as usize];
                    if slot == NOT_OPEN {
                        continue;
                    }
                    let o = &mut self.open[slot as usize];
                    let right_count = o.count - o.left_count;
                    if v > o.last && o.left_count >= min_leaf && right_count >= min_leaf {
                        let right_sum = o.sum - o.left_sum;
                        let gain = o.left_sum * o.left_sum / o.left_count as f64
                            + right_sum * right_sum / right_count as f64
                            - o.sum * o.sum / o.count as f64;
                        if gain > o.best_gain {
                            let mut thr = o.last + 0.5 * (v - o.last);
                            if thr >= v {
                                thr = o.last;
                            }
                            o.best_gain = gain;
                            o.best_feature = f as u32;
                            o.best_threshold = thr;
                        }
                    }
                    o.left_count += 1;
                    o.left_sum += resid[row as usize];
                    o.last = v;
                }
            }

            // Open nodes whose best gain is above rounding noise become splits.
            let mut next = Vec::new();
            let mut split_any = false;
            for o in &self.open {
                if o.best_gain > 1e-12 * o.sse && o.best_gain > 0.0 {
                    let left = nodes.len() as u32;
                    nodes.push(Node::Leaf(0.0));
                    nodes.push(Node::Leaf(0.0));
                    stats.push((0, 0.0, 0.0));
                    stats.push((0, 0.0, 0.0));
                    nodes[o.node as usize] =
                        Node::Split { feature: o.best_feature, threshold: o.best_threshold, left, right: left + 1 };
                    next.push(left);
                    next.push(left + 1);
                    split_any = true;
                }
            }
            if !split_any {
                break;
            }
            for (row, &r) in resid.iter().enumerate() {
                let n = self.node_of[row] as usize;
                if let Node::Split { feature, threshold, left, right } = nodes[n] {
                    let child = if features.get(row, feature as usize) <= threshold { left } else { right };
                    self.node_of[row] = child;
                    let s = &mut stats[child as usize];
                    s.0 += 1;
                    s.1 += r;
                    s.2 += r * r;
                }
            }
            frontier = next;
        }

        for (node, &(count, sum, _)) in nodes.iter_mut().zip(&stats) {
            if let Node::Leaf(v) = node {
                *v = if count > 0 { params.eta * sum / count as f64 } else { 0.0 };
            }
        }
        Tree { nodes }
    }
}
