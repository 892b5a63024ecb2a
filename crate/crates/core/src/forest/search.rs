//! Hyper-parameter selection over (n_trees, max_depth) grids.

use ndarray::{ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{argmax, DecisionForest, ForestParams, Node};
use crate::error::{Error, Result};
use crate::seed;

pub const PEDESTRIAN_TREE_GRID: [usize; 5] = [100, 200, 300, 400, 500];
pub const PEDESTRIAN_DEPTH_GRID: [usize; 4] = [7, 15, 21, 30];
pub const CYCLIST_TREE_GRID: [usize; 6] = [50, 100, 200, 300, 400, 500];
pub const CYCLIST_DEPTH_GRID: [usize; 10] = [7, 10, 13, 16, 19, 22, 25, 28, 31, 34];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub n_trees: usize,
    pub max_depth: usize,
    pub mean: f64,
    pub std: f64,
    pub fold_scores: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct GridSearch {
    pub best: ForestParams,
    pub model: DecisionForest,
    pub table: Vec<CvRow>,
}

/// Assigns each sample a fold so that every class is spread evenly.
pub fn stratified_folds(y: &[usize], n_classes: usize, folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::Contract("need at least 2 folds".into()));
    }
    let mut rng = seed::rng(seed);
    let mut assignment = vec![0; y.len()];
    let mut offset = 0;
    for class in 0..n_classes {
        let mut members: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        if members.is_empty() {
            continue;
        }
        if members.len() < folds {
            return Err(Error::Stratification {
                class,
                count: members.len(),
                folds,
            });
        }
        members.shuffle(&mut rng);
        for (k, &i) in members.iter().enumerate() {
            assignment[i] = (offset + k) % folds;
        }
        offset = (offset + members.len()) % folds;
    }
    Ok(assignment)
}

fn check_grids(tree_grid: &[usize], depth_grid: &[usize]) -> Result<(Vec<usize>, Vec<usize>)> {
    if tree_grid.is_empty() || depth_grid.is_empty() {
        return Err(Error::Contract("empty hyper-parameter grid".into()));
    }
    let mut trees = tree_grid.to_vec();
    let mut depths = depth_grid.to_vec();
    trees.sort_unstable();
    trees.dedup();
    depths.sort_unstable();
    depths.dedup();
    Ok((trees, depths))
}

/// Validation accuracy for every grid cell, indexed `[depth][trees]`.
///
/// Tree `i` depends only on `(seed, i)`, so a forest of `n` trees is a
/// prefix of any larger forest with the same settings. Node randomness is
/// keyed by position, so a depth-limited tree is the deepest tree cut off
/// at that depth. One forest of the largest size and depth therefore
/// scores every cell.
fn score_split(
    train: (ArrayView2<'_, f64>, &[usize]),
    val: (ArrayView2<'_, f64>, &[usize]),
    n_classes: usize,
    trees: &[usize],
    depths: &[usize],
    base: &ForestParams,
) -> Result<Vec<Vec<f64>>> {
    let max_trees = *trees.last().expect("non-empty grid");
    let max_depth = *depths.last().expect("non-empty grid");
    let params = ForestParams {
        n_trees: max_trees,
        max_depth,
        ..*base
    };
    let (forest, reach) = DecisionForest::fit_profiled(train.0, train.1, n_classes, &params)?;
    let mut correct = vec![vec![0usize; trees.len()]; depths.len()];
    let mut sums = vec![vec![0.0; n_classes]; depths.len()];
    let mut path = Vec::new();
    for (row, &label) in val.0.rows().into_iter().zip(val.1) {
        sums.iter_mut().for_each(|s| s.iter_mut().for_each(|v| *v = 0.0));
        let mut next = 0;
        for (t, (tree, reach)) in forest.trees.iter().zip(&reach).enumerate() {
            path.clear();
            let mut i = 0;
            loop {
                path.push(i);
                match &tree.nodes[i] {
                    Node::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    } => i = if row[*feature] <= *threshold { *left } else { *right },
                    Node::Leaf { .. } => break,
                }
            }
            for (di, &depth) in depths.iter().enumerate() {
                let node = path[depth.min(path.len() - 1)];
                sums[di].iter_mut().zip(&reach[node]).for_each(|(a, b)| *a += b);
            }
            while next < trees.len() && trees[next] == t + 1 {
                for (di, sum) in sums.iter().enumerate() {
                    correct[di][next] += usize::from(argmax(sum) == label);
                }
                next += 1;
            }
        }
    }
    let n = val.1.len().max(1) as f64;
    Ok(correct
        .into_iter()
        .map(|c| c.into_iter().map(|c| c as f64 / n).collect())
        .collect())
}

fn pick_best(table: &[CvRow]) -> &CvRow {
    let mut best = &table[0];
    for row in table {
        let better = row.mean > best.mean
            || (row.mean == best.mean && (row.n_trees, row.max_depth) < (best.n_trees, best.max_depth));
        if better {
            best = row;
        }
    }
    best
}

fn build_table(trees: &[usize], depths: &[usize], folds: &[Vec<Vec<f64>>]) -> Vec<CvRow> {
    let mut table = Vec::with_capacity(trees.len() * depths.len());
    for (ti, &n_trees) in trees.iter().enumerate() {
        for (di, &max_depth) in depths.iter().enumerate() {
            let fold_scores: Vec<f64> = folds.iter().map(|f| f[di][ti]).collect();
            let k = fold_scores.len() as f64;
            let mean = fold_scores.iter().sum::<f64>() / k;
            let std = (fold_scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / k).sqrt();
            table.push(CvRow {
                n_trees,
                max_depth,
                mean,
                std,
                fold_scores,
            });
        }
    }
    table
}

/// Stratified k-fold grid search. The winner has the highest mean fold
/// accuracy (ties: fewer trees, then shallower) and is refit on all data.
pub fn grid_search_cv(
    x: ArrayView2<'_, f64>,
    y: &[usize],
    n_classes: usize,
    tree_grid: &[usize],
    depth_grid: &[usize],
    folds: usize,
    base: &ForestParams,
) -> Result<GridSearch> {
    let (trees, depths) = check_grids(tree_grid, depth_grid)?;
    if y.len() < folds {
        return Err(Error::Contract(format!("{} samples for {folds} folds", y.len())));
    }
    let assignment = stratified_folds(y, n_classes, folds, base.seed)?;
    let mut per_fold = Vec::with_capacity(folds);
    for k in 0..folds {
        let tr: Vec<usize> = (0..y.len()).filter(|&i| assignment[i] != k).collect();
        let va: Vec<usize> = (0..y.len()).filter(|&i| assignment[i] == k).collect();
        let xt = x.select(Axis(0), &tr);
        let yt: Vec<usize> = tr.iter().map(|&i| y[i]).collect();
        let xv = x.select(Axis(0), &va);
        let yv: Vec<usize> = va.iter().map(|&i| y[i]).collect();
        per_fold.push(score_split(
            (xt.view(), &yt),
            (xv.view(), &yv),
            n_classes,
            &trees,
            &depths,
            base,
        )?);
    }
    let table = build_table(&trees, &depths, &per_fold);
    let row = pick_best(&table);
    let best = ForestParams {
        n_trees: row.n_trees,
        max_depth: row.max_depth,
        ..*base
    };
    let model = DecisionForest::fit(x, y, n_classes, &best)?;
    Ok(GridSearch { best, model, table })
}

/// Grid search against a fixed validation set; the winner is refit on the
/// training set only.
pub fn select_on_validation(
    train: (ArrayView2<'_, f64>, &[usize]),
    val: (ArrayView2<'_, f64>, &[usize]),
    n_classes: usize,
    tree_grid: &[usize],
    depth_grid: &[usize],
    base: &ForestParams,
) -> Result<GridSearch> {
    let (trees, depths) = check_grids(tree_grid, depth_grid)?;
    let scores = score_split(train, val, n_classes, &trees, &depths, base)?;
    let table = build_table(&trees, &depths, &[scores]);
    let row = pick_best(&table);
    let best = ForestParams {
        n_trees: row.n_trees,
        max_depth: row.max_depth,
        ..*base
    };
    let model = DecisionForest::fit(train.0, train.1, n_classes, &best)?;
    Ok(GridSearch { best, model, table })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};

    fn data(n: usize) -> (Array2<f64>, Vec<usize>) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let x = Array2::from_shape_fn((n, 4), |_| rng.random::<f64>());
        let y = (0..n).map(|i| usize::from(x[[i, 2]] > 0.5)).collect();
        (x, y)
    }

    #[test]
    fn folds_are_stratified() {
        let y: Vec<usize> = (0..53).map(|i| usize::from(i % 3 == 0)).collect();
        let a = stratified_folds(&y, 2, 5, 1).unwrap();
        for class in 0..2 {
            let mut per = [0usize; 5];
            for (i, &f) in a.iter().enumerate() {
                if y[i] == class {
                    per[f] += 1;
                }
            }
            let (lo, hi) = (per.iter().min().unwrap(), per.iter().max().unwrap());
            assert!(hi - lo <= 1, "{per:?}");
        }
        assert_eq!(a, stratified_folds(&y, 2, 5, 1).unwrap());
    }

    #[test]
    fn too_few_for_stratification() {
        let y = [0, 0, 0, 0, 0, 0, 1, 1, 1];
        assert!(matches!(
            stratified_folds(&y, 2, 5, 0),
            Err(Error::Stratification {
                class: 1,
                count: 3,
                folds: 5
            })
        ));
    }

    #[test]
    fn single_cell_grid() {
        let (x, y) = data(60);
        let base = ForestParams {
            seed: 3,
            ..Default::default()
        };
        let gs = grid_search_cv(x.view(), &y, 2, &[7], &[3], 5, &base).unwrap();
        assert_eq!((gs.best.n_trees, gs.best.max_depth), (7, 3));
        assert_eq!(gs.table.len(), 1);
        assert_eq!(gs.model.trees.len(), 7);
    }

    #[test]
    fn table_shape_and_range() {
        let (x, y) = data(80);
        let base = ForestParams::default();
        let gs = grid_search_cv(x.view(), &y, 2, &[5, 10, 3], &[1, 4], 5, &base).unwrap();
        assert_eq!(gs.table.len(), 6);
        for r in &gs.table {
            assert!((0.0..=1.0).contains(&r.mean));
            assert_eq!(r.fold_scores.len(), 5);
        }
        let best = gs.table.iter().map(|r| r.mean).fold(f64::MIN, f64::max);
        let winner = gs
            .table
            .iter()
            .find(|r| r.n_trees == gs.best.n_trees && r.max_depth == gs.best.max_depth)
            .unwrap();
        assert_eq!(winner.mean, best);
    }

    #[test]
    fn prefix_scores_match_separately_trained_forests() {
        let (x, y) = data(90);
        let (xt, yt) = (x.slice(ndarray::s![..60, ..]), &y[..60]);
        let (xv, yv) = (x.slice(ndarray::s![60.., ..]), &y[60..]);
        let base = ForestParams {
            seed: 17,
            ..Default::default()
        };
        let depths = [1usize, 2, 6];
        let scores = score_split((xt, yt), (xv, yv), 2, &[3, 8], &depths, &base).unwrap();
        for (di, (ti, n_trees)) in (0..depths.len()).flat_map(|d| [(d, (0, 3usize)), (d, (1, 8))]) {
            let f = DecisionForest::fit(
                xt,
                yt,
                2,
                &ForestParams {
                    n_trees,
                    max_depth: depths[di],
                    ..base
                },
            )
            .unwrap();
            let probs = f.predict_proba_rows(xv).unwrap();
            let acc = probs.iter().zip(yv).filter(|(p, &l)| argmax(p) == l).count() as f64 / yv.len() as f64;
            assert_eq!(scores[di][ti], acc);
        }
    }

    #[test]
    fn ties_prefer_smaller_models() {
        let row = |n_trees, max_depth, mean| CvRow {
            n_trees,
            max_depth,
            mean,
            std: 0.0,
            fold_scores: vec![],
        };
        let table = vec![
            row(100, 7, 0.9),
            row(100, 15, 0.9),
            row(200, 7, 0.9),
            row(400, 15, 0.95),
        ];
        assert_eq!((pick_best(&table).n_trees, pick_best(&table).max_depth), (400, 15));
        let table = vec![row(200, 7, 0.9), row(100, 15, 0.9), row(100, 7, 0.9)];
        assert_eq!((pick_best(&table).n_trees, pick_best(&table).max_depth), (100, 7));
    }
}
