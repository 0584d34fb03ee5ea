//! CART regression trees with variance-reduction splits.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::features::FEATURE_COUNT;

/// One node of a flattened tree. `feature < 0` marks a leaf.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub feature: i32,
    pub threshold: f64,
    pub left: u32,
    pub right: u32,
    /// Mean training label reaching this node (the prediction at leaves).
    pub value: f64,
    /// Bootstrap samples reaching this node.
    pub samples: u32,
    /// Weighted SSE reduction of the split; 0 at leaves.
    pub gain: f64,
}

impl Node {
    fn leaf(value: f64, samples: usize) -> Self {
        Self {
            feature: -1,
            threshold: 0.0,
            left: 0,
            right: 0,
            value,
            samples: samples as u32,
            gain: 0.0,
        }
    }

    #[inline]
    pub fn is_leaf(&self) -> bool {
        self.feature < 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            let n = &self.nodes[i];
            if n.is_leaf() {
                return n.value;
            }
            i = if x[n.feature as usize] <= n.threshold {
                n.left as usize
            } else {
                n.right as usize
            };
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            let n = &nodes[i];
            if n.is_leaf() {
                0
            } else {
                1 + go(nodes, n.left as usize).max(go(nodes, n.right as usize))
            }
        }
        go(&self.nodes, 0)
    }

    pub fn leaves(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| n.is_leaf())
    }
}

const GAIN_TIE_REL: f64 = 1e-9;

pub(crate) struct TreeParams<'a> {
    pub max_depth: usize,
    pub min_leaf: usize,
    pub features_per_split: usize,
    pub candidates: &'a [usize],
}

struct Split {
    feature: usize,
    threshold: f64,
    gain: f64,
    /// number of rows going left after sorting by `feature`
    left_len: usize,
}

pub(crate) struct Builder<'a, R: Rng> {
    x: &'a [[f64; FEATURE_COUNT]],
    y: &'a [f64],
    params: &'a TreeParams<'a>,
    rng: &'a mut R,
    nodes: Vec<Node>,
}

impl<'a, R: Rng> Builder<'a, R> {
    pub fn new(x: &'a [[f64; FEATURE_COUNT]], y: &'a [f64], params: &'a TreeParams<'a>, rng: &'a mut R) -> Self {
        Self {
            x,
            y,
            params,
            rng,
            nodes: Vec::new(),
        }
    }

    pub fn build(mut self, rows: &mut [usize]) -> Tree {
        self.grow(rows, 0);
        Tree { nodes: self.nodes }
    }

    fn grow(&mut self, rows: &mut [usize], depth: usize) -> u32 {
        let n = rows.len();
        let mean = rows.iter().map(|&r| self.y[r]).sum::<f64>() / n as f64;
        let id = self.nodes.len() as u32;
        self.nodes.push(Node::leaf(mean, n));
        if depth >= self.params.max_depth || n < 2 * self.params.min_leaf {
            return id;
        }
        let first = self.y[rows[0]];
        if rows.iter().all(|&r| self.y[r] == first) {
            return id;
        }
        let Some(split) = self.best_split(rows, mean) else {
            return id;
        };
        let f = split.feature;
        rows.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]).then(a.cmp(&b)));
        let (l, r) = rows.split_at_mut(split.left_len);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        let node = &mut self.nodes[id as usize];
        node.feature = f as i32;
        node.threshold = split.threshold;
        node.left = left;
        node.right = right;
        node.gain = split.gain;
        id
    }

    fn best_split(&mut self, rows: &[usize], mean: f64) -> Option<Split> {
        let cands = self.params.candidates;
        let k = self.params.features_per_split.min(cands.len());
        let mut chosen: Vec<usize> = sample(self.rng, cands.len(), k).into_iter().map(|i| cands[i]).collect();
        chosen.sort_unstable();

        let n = rows.len();
        let min_leaf = self.params.min_leaf;
        // labels centered on the node mean keep the prefix sums well conditioned
        let total: f64 = rows.iter().map(|&r| (self.y[r] - mean).powi(2)).sum();
        // gains closer than this are equal up to summation order; the same
        // partition reached through two features must tie exactly
        let tie = GAIN_TIE_REL * total;
        let mut best: Option<Split> = None;
        let mut order: Vec<usize> = rows.to_vec();
        for &f in &chosen {
            order.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]).then(a.cmp(&b)));
            let (mut s, mut s2) = (0.0, 0.0);
            let tot_s: f64 = order.iter().map(|&r| self.y[r] - mean).sum();
            for i in 0..n - 1 {
                let v = self.y[order[i]] - mean;
                s += v;
                s2 += v * v;
                let nl = i + 1;
                let nr = n - nl;
                if nl < min_leaf || nr < min_leaf {
                    continue;
                }
                let (xa, xb) = (self.x[order[i]][f], self.x[order[i + 1]][f]);
                if xa == xb {
                    continue;
                }
                let sse_l = s2 - s * s / nl as f64;
                let rs = tot_s - s;
                let rs2 = total - s2;
                let sse_r = rs2 - rs * rs / nr as f64;
                let gain = total - sse_l - sse_r;
                let mut threshold = 0.5 * (xa + xb);
                if threshold >= xb {
                    // adjacent floats: the midpoint rounds up onto xb
                    threshold = xa;
                }
                // candidates are scanned by ascending (feature, threshold), so
                // keeping the incumbent on a tie realizes the tie-break rule
                let better = match &best {
                    None => gain > tie,
                    Some(b) => gain > b.gain + tie,
                };
                if better {
                    best = Some(Split {
                        feature: f,
                        threshold,
                        gain,
                        left_len: nl,
                    });
                }
            }
        }
        best
    }
}
