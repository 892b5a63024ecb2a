//! Leave-riders-out protocol for arm-signal recognition: every ordered
//! choice of (test rider, validation rider) with the remaining riders used
//! for training.

use ndarray::{concatenate, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::{accuracy, confusion, f1_scores};
use crate::error::{Error, Result};
use crate::forest::{classify, select_on_validation, Decision, DecisionForest, ForestParams};

/// All per-frame samples of one rider.
#[derive(Debug, Clone)]
pub struct RiderData {
    pub name: String,
    pub x: Array2<f64>,
    pub y: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSplit {
    pub train: Vec<usize>,
    pub validation: usize,
    pub test: usize,
}

/// Enumerates `n * (n - 1)` splits; 12 for four riders.
pub fn protocol_runs(n_riders: usize) -> Result<Vec<RunSplit>> {
    if n_riders < 4 {
        return Err(Error::Contract(format!("need at least 4 riders, found {n_riders}")));
    }
    let mut runs = Vec::new();
    for test in 0..n_riders {
        for validation in (0..n_riders).filter(|&v| v != test) {
            runs.push(RunSplit {
                train: (0..n_riders).filter(|&r| r != test && r != validation).collect(),
                validation,
                test,
            });
        }
    }
    Ok(runs)
}

pub trait Classifier {
    fn predict(&self, x: &[f64]) -> Result<usize>;

    fn describe(&self) -> String {
        String::new()
    }
}

/// Trains a classifier given training and validation data.
pub trait ModelFactory {
    type Model: Classifier;
    fn fit(
        &self,
        train: (ArrayView2<'_, f64>, &[usize]),
        val: (ArrayView2<'_, f64>, &[usize]),
        n_classes: usize,
    ) -> Result<Self::Model>;
}

/// Random forest selected on the validation rider over a parameter grid.
#[derive(Debug, Clone)]
pub struct ForestFactory {
    pub tree_grid: Vec<usize>,
    pub depth_grid: Vec<usize>,
    pub base: ForestParams,
}

pub struct ForestClassifier(pub DecisionForest);

impl Classifier for ForestClassifier {
    fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(classify(&self.0.predict_proba(x)?, Decision::Argmax))
    }

    fn describe(&self) -> String {
        format!(
            "n_trees={} max_depth={}",
            self.0.params.n_trees, self.0.params.max_depth
        )
    }
}

impl ModelFactory for ForestFactory {
    type Model = ForestClassifier;

    fn fit(
        &self,
        train: (ArrayView2<'_, f64>, &[usize]),
        val: (ArrayView2<'_, f64>, &[usize]),
        n_classes: usize,
    ) -> Result<ForestClassifier> {
        let gs = select_on_validation(train, val, n_classes, &self.tree_grid, &self.depth_grid, &self.base)?;
        Ok(ForestClassifier(gs.model))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub split: RunSplit,
    pub acc: f64,
    pub f1_macro: f64,
    pub confusion: Vec<Vec<usize>>,
    pub model: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub name: String,
    pub acc: f64,
    pub acc_std: Option<f64>,
    pub f1: f64,
    pub f1_std: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolReport {
    pub runs: Vec<RunReport>,
    /// Worst, Best and Avg rows, the first two chosen by accuracy.
    pub summary: Vec<SummaryRow>,
}

fn stack<'a>(riders: impl Iterator<Item = &'a RiderData>) -> Result<(Array2<f64>, Vec<usize>)> {
    let riders: Vec<&RiderData> = riders.collect();
    let views: Vec<ArrayView2<'_, f64>> = riders.iter().map(|r| r.x.view()).collect();
    let x = concatenate(Axis(0), &views).map_err(|e| Error::Contract(e.to_string()))?;
    let y = riders.iter().flat_map(|r| r.y.iter().copied()).collect();
    Ok((x, y))
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (mean, (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt())
}

pub fn run_protocol<F: ModelFactory>(riders: &[RiderData], n_classes: usize, factory: &F) -> Result<ProtocolReport> {
    let splits = protocol_runs(riders.len())?;
    let mut runs = Vec::with_capacity(splits.len());
    for split in splits {
        let (xt, yt) = stack(split.train.iter().map(|&r| &riders[r]))?;
        let val = &riders[split.validation];
        let test = &riders[split.test];
        let model = factory.fit((xt.view(), &yt), (val.x.view(), &val.y), n_classes)?;
        let preds = test
            .x
            .rows()
            .into_iter()
            .map(|r| model.predict(&r.to_vec()))
            .collect::<Result<Vec<_>>>()?;
        runs.push(RunReport {
            acc: accuracy(&preds, &test.y)?,
            f1_macro: f1_scores(&preds, &test.y, n_classes)?.macro_f1,
            confusion: confusion(&preds, &test.y, n_classes)?,
            model: model.describe(),
            split,
        });
    }
    let by_acc = |better: fn(f64, f64) -> bool| {
        let mut pick = &runs[0];
        for r in &runs {
            if better(r.acc, pick.acc) {
                pick = r;
            }
        }
        pick
    };
    let worst = by_acc(|a, b| a < b);
    let best = by_acc(|a, b| a > b);
    let accs: Vec<f64> = runs.iter().map(|r| r.acc).collect();
    let f1s: Vec<f64> = runs.iter().map(|r| r.f1_macro).collect();
    let (acc, acc_std) = mean_std(&accs);
    let (f1, f1_std) = mean_std(&f1s);
    let summary = vec![
        SummaryRow {
            name: "Worst".into(),
            acc: worst.acc,
            acc_std: None,
            f1: worst.f1_macro,
            f1_std: None,
        },
        SummaryRow {
            name: "Best".into(),
            acc: best.acc,
            acc_std: None,
            f1: best.f1_macro,
            f1_std: None,
        },
        SummaryRow {
            name: "Avg".into(),
            acc,
            acc_std: Some(acc_std),
            f1,
            f1_std: Some(f1_std),
        },
    ];
    Ok(ProtocolReport { runs, summary })
}
