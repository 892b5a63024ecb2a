//! Random forest classifier built from bootstrapped CART trees.

mod search;
mod tree;

use ndarray::ArrayView2;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use search::{
    grid_search_cv, select_on_validation, stratified_folds, CvRow, GridSearch, CYCLIST_DEPTH_GRID, CYCLIST_TREE_GRID,
    PEDESTRIAN_DEPTH_GRID, PEDESTRIAN_TREE_GRID,
};
pub use tree::{gini, grow_tree, Node, Tree, TreeParams};

use crate::error::{Error, Result};
use crate::features::FeatureLayout;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    /// Features tried per split; `None` means `floor(sqrt(d))`.
    pub mtry: Option<usize>,
    pub min_leaf: usize,
    pub seed: u64,
    /// Train each tree on a bootstrap sample (otherwise on all rows).
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 400,
            max_depth: 15,
            mtry: None,
            min_leaf: 1,
            seed: 0,
            bootstrap: true,
        }
    }
}

impl ForestParams {
    pub fn resolved_mtry(&self, d: usize) -> usize {
        self.mtry
            .unwrap_or_else(|| (d as f64).sqrt().floor() as usize)
            .clamp(1, d.max(1))
    }

    fn validate(&self, d: usize) -> Result<()> {
        if self.n_trees == 0 || self.max_depth == 0 {
            return Err(Error::Contract("n_trees and max_depth must be at least 1".into()));
        }
        if let Some(m) = self.mtry {
            if m == 0 || m > d {
                return Err(Error::Contract(format!("mtry {m} outside 1..={d}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionForest {
    pub trees: Vec<Tree>,
    pub n_classes: usize,
    pub n_features: usize,
    /// Mean decrease in impurity per feature, normalized to sum 1.
    pub importances: Vec<f64>,
    pub params: ForestParams,
}

impl DecisionForest {
    /// Trains a forest on rows of `x` with class indices `y` in
    /// `0..n_classes`. Tree `i` draws all its randomness from
    /// `(params.seed, i)`, so results do not depend on scheduling.
    pub fn fit(x: ArrayView2<'_, f64>, y: &[usize], n_classes: usize, params: &ForestParams) -> Result<Self> {
        Self::fit_profiled(x, y, n_classes, params).map(|(f, _)| f)
    }

    /// Like [`DecisionForest::fit`], also returning per tree and node the
    /// class distribution of the training rows that reached the node.
    pub(crate) fn fit_profiled(
        x: ArrayView2<'_, f64>,
        y: &[usize],
        n_classes: usize,
        params: &ForestParams,
    ) -> Result<(Self, Vec<Vec<Vec<f64>>>)> {
        let (n, d) = x.dim();
        if y.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: y.len(),
            });
        }
        if n < 2 {
            return Err(Error::DegenerateForest("need at least 2 samples".into()));
        }
        if let Some(&bad) = y.iter().find(|&&c| c >= n_classes) {
            return Err(Error::Contract(format!("class index {bad} >= {n_classes}")));
        }
        let mut present = vec![false; n_classes];
        y.iter().for_each(|&c| present[c] = true);
        if present.iter().filter(|&&p| p).count() < 2 {
            return Err(Error::DegenerateForest("only one class present".into()));
        }
        params.validate(d)?;
        let tree_params = TreeParams {
            max_depth: params.max_depth,
            mtry: params.resolved_mtry(d),
            min_leaf: params.min_leaf,
        };

        let grown: Vec<tree::Grown> = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = seed::rng_stream(params.seed, t as u64);
                let mut sample: Vec<usize> = if params.bootstrap {
                    (0..n).map(|_| rng.random_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                let root_seed = rng.random();
                tree::grow_profiled(x, y, n_classes, &mut sample, tree_params, root_seed)
            })
            .collect();

        let mut importances = vec![0.0; d];
        let mut trees = Vec::with_capacity(grown.len());
        let mut reach = Vec::with_capacity(grown.len());
        for g in grown {
            let total: f64 = g.importance.iter().sum();
            if total > 0.0 {
                importances
                    .iter_mut()
                    .zip(&g.importance)
                    .for_each(|(a, b)| *a += b / total);
            }
            trees.push(g.tree);
            reach.push(g.reach);
        }
        let total: f64 = importances.iter().sum();
        if total > 0.0 {
            importances.iter_mut().for_each(|v| *v /= total);
        }
        let forest = DecisionForest {
            trees,
            n_classes,
            n_features: d,
            importances,
            params: *params,
        };
        Ok((forest, reach))
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Mean of the per-tree leaf class distributions.
    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let mut p = vec![0.0; self.n_classes];
        for tree in &self.trees {
            p.iter_mut().zip(tree.leaf(x)).for_each(|(a, b)| *a += b);
        }
        let k = self.trees.len() as f64;
        p.iter_mut().for_each(|v| *v /= k);
        Ok(p)
    }

    pub fn predict_proba_rows(&self, x: ArrayView2<'_, f64>) -> Result<Vec<Vec<f64>>> {
        x.rows()
            .into_iter()
            .map(|r| match r.as_slice() {
                Some(s) => self.predict_proba(s),
                None => self.predict_proba(&r.to_vec()),
            })
            .collect()
    }

    /// Top `top_n` features by importance, named under `layout`.
    pub fn importance_report(&self, layout: &FeatureLayout, window: usize, top_n: usize) -> Result<Vec<(String, f64)>> {
        if layout.dim(window) != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                found: layout.dim(window),
            });
        }
        let mut order: Vec<usize> = (0..self.n_features).collect();
        order.sort_by(|&a, &b| self.importances[b].total_cmp(&self.importances[a]).then(a.cmp(&b)));
        order
            .into_iter()
            .take(top_n)
            .map(|i| Ok((layout.feature_name(i, window)?, self.importances[i])))
            .collect()
    }
}

/// How a probability vector becomes a class index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Decision {
    /// Binary: `positive` iff its probability is at least `threshold`.
    Threshold {
        positive: usize,
        negative: usize,
        threshold: f64,
    },
    /// Highest probability, lowest index on ties.
    Argmax,
}

impl Decision {
    pub fn binary(threshold: f64) -> Self {
        Decision::Threshold {
            positive: 0,
            negative: 1,
            threshold,
        }
    }
}

pub fn classify(proba: &[f64], decision: Decision) -> usize {
    match decision {
        Decision::Threshold {
            positive,
            negative,
            threshold,
        } => {
            if proba[positive] >= threshold {
                positive
            } else {
                negative
            }
        }
        Decision::Argmax => argmax(proba),
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in v.iter().enumerate() {
        if p > v[best] {
            best = i;
        }
    }
    best
}
