//! CART classification trees grown on Gini impurity.

use ndarray::ArrayView2;
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Node {
    /// Samples with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        distribution: Vec<f64>,
    },
}

/// A binary tree stored as a flat node array; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(&self, x: &[f64]) -> &[f64] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
                Node::Leaf { distribution } => return distribution,
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
                Node::Leaf { .. } => 0,
            }
        }
        go(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TreeParams {
    pub max_depth: usize,
    pub mtry: usize,
    pub min_leaf: usize,
}

pub fn gini(counts: &[usize], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

struct Split {
    feature: usize,
    threshold: f64,
    decrease: f64,
}

struct Builder<'a> {
    x: ArrayView2<'a, f64>,
    y: &'a [usize],
    n_classes: usize,
    params: TreeParams,
    nodes: Vec<Node>,
    /// Sample-weighted impurity decrease per feature.
    importance: Vec<f64>,
    /// Class distribution of the training rows reaching each node.
    reach: Vec<Vec<f64>>,
    buf: Vec<(f64, usize)>,
}

impl Builder<'_> {
    fn counts(&self, idx: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.n_classes];
        for &i in idx {
            c[self.y[i]] += 1;
        }
        c
    }

    fn best_split<R: Rng>(&mut self, idx: &[usize], counts: &[usize], rng: &mut R) -> Option<Split> {
        let n = idx.len();
        let parent = gini(counts, n);
        let d = self.x.ncols();
        let mut features = index::sample(rng, d, self.params.mtry.min(d)).into_vec();
        features.sort_unstable();
        let min_leaf = self.params.min_leaf.max(1);
        let mut best: Option<Split> = None;
        let mut left = vec![0usize; self.n_classes];
        for f in features {
            self.buf.clear();
            self.buf.extend(idx.iter().map(|&i| (self.x[[i, f]], self.y[i])));
            self.buf.sort_by(|a, b| a.0.total_cmp(&b.0));
            left.iter_mut().for_each(|c| *c = 0);
            for s in 0..n - 1 {
                left[self.buf[s].1] += 1;
                let (lo, hi) = (self.buf[s].0, self.buf[s + 1].0);
                let nl = s + 1;
                let nr = n - nl;
                if lo == hi || nl < min_leaf || nr < min_leaf {
                    continue;
                }
                let (mut sl, mut sr) = (0.0, 0.0);
                for (t, &l) in counts.iter().zip(&left) {
                    let (pl, pr) = (l as f64 / nl as f64, (t - l) as f64 / nr as f64);
                    sl += pl * pl;
                    sr += pr * pr;
                }
                let child = (nl as f64 / n as f64) * (1.0 - sl) + (nr as f64 / n as f64) * (1.0 - sr);
                let decrease = parent - child;
                if best.as_ref().is_none_or(|b| decrease > b.decrease) {
                    let mut threshold = lo + (hi - lo) / 2.0;
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some(Split {
                        feature: f,
                        threshold,
                        decrease,
                    });
                }
            }
        }
        best
    }

    /// Each node draws from its own seed, derived from its parent's, so a
    /// shallower tree grown from the same root seed is an exact truncation.
    fn grow(&mut self, idx: &mut [usize], depth: usize, node_seed: u64) -> usize {
        let counts = self.counts(idx);
        let n = idx.len();
        let distribution: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let splittable = depth < self.params.max_depth && !pure && n >= 2 * self.params.min_leaf.max(1);
        let split = if splittable {
            self.best_split(idx, &counts, &mut seed::rng(node_seed))
        } else {
            None
        };
        let id = self.nodes.len();
        self.reach.push(distribution.clone());
        let Some(split) = split else {
            self.nodes.push(Node::Leaf { distribution });
            return id;
        };
        self.importance[split.feature] += n as f64 * split.decrease;
        self.nodes.push(Node::Leaf {
            distribution: Vec::new(),
        });
        let f = split.feature;
        let t = split.threshold;
        let mut cut = 0;
        for k in 0..n {
            if self.x[[idx[k], f]] <= t {
                idx.swap(k, cut);
                cut += 1;
            }
        }
        let (l, r) = idx.split_at_mut(cut);
        let left = self.grow(l, depth + 1, seed::derive(node_seed, &[0]));
        let right = self.grow(r, depth + 1, seed::derive(node_seed, &[1]));
        self.nodes[id] = Node::Split {
            feature: f,
            threshold: t,
            left,
            right,
        };
        id
    }
}

/// Grows one tree on the rows listed in `sample` (duplicates allowed).
/// Returns the tree and its unnormalized per-feature impurity decrease.
pub fn grow_tree<R: Rng>(
    x: ArrayView2<'_, f64>,
    y: &[usize],
    n_classes: usize,
    sample: &mut [usize],
    params: TreeParams,
    rng: &mut R,
) -> (Tree, Vec<f64>) {
    let g = grow_profiled(x, y, n_classes, sample, params, rng.random());
    (g.tree, g.importance)
}

pub(crate) struct Grown {
    pub tree: Tree,
    pub importance: Vec<f64>,
    /// Per node, the class distribution of the rows that reached it.
    pub reach: Vec<Vec<f64>>,
}

pub(crate) fn grow_profiled(
    x: ArrayView2<'_, f64>,
    y: &[usize],
    n_classes: usize,
    sample: &mut [usize],
    params: TreeParams,
    root_seed: u64,
) -> Grown {
    let mut b = Builder {
        x,
        y,
        n_classes,
        params,
        nodes: Vec::new(),
        importance: vec![0.0; x.ncols()],
        reach: Vec::new(),
        buf: Vec::with_capacity(sample.len()),
    };
    b.grow(sample, 0, root_seed);
    Grown {
        tree: Tree { nodes: b.nodes },
        importance: b.importance,
        reach: b.reach,
    }
}
