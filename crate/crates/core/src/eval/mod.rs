//! Evaluation: class balancing, accuracy / F1 / confusion, and
//! time-to-event probability and predictability curves.

mod protocol;

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub use protocol::{
    protocol_runs, run_protocol, Classifier, ForestFactory, ModelFactory, ProtocolReport, RiderData, RunReport,
    RunSplit, SummaryRow,
};

use crate::error::{Error, Result};
use crate::seed;

/// Indices of a class-balanced subset: every class is subsampled without
/// replacement to the size of the smallest one. Indices are returned in
/// ascending order.
pub fn balance<L: Ord + Copy>(labels: &[L], seed: u64) -> Result<Vec<usize>> {
    let mut by_class: BTreeMap<L, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    if by_class.len() < 2 {
        return Err(Error::EmptyClass(format!(
            "balancing needs at least 2 classes, found {}",
            by_class.len()
        )));
    }
    let keep = by_class.values().map(Vec::len).min().expect("non-empty");
    let mut rng = seed::rng(seed);
    let mut out = Vec::with_capacity(keep * by_class.len());
    for mut members in by_class.into_values() {
        if members.len() > keep {
            members.shuffle(&mut rng);
            members.truncate(keep);
        }
        out.extend(members);
    }
    out.sort_unstable();
    Ok(out)
}

fn check_lengths(preds: &[usize], labels: &[usize]) -> Result<()> {
    if preds.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            found: preds.len(),
        });
    }
    if preds.is_empty() {
        return Err(Error::Contract("no decisions to evaluate".into()));
    }
    Ok(())
}

/// Fraction of correct decisions, `(TP + TN) / (P + N)` in the binary case.
pub fn accuracy(preds: &[usize], labels: &[usize]) -> Result<f64> {
    check_lengths(preds, labels)?;
    let correct = preds.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(correct as f64 / labels.len() as f64)
}

/// Confusion counts; rows are true classes, columns predictions.
pub fn confusion(preds: &[usize], labels: &[usize], n_classes: usize) -> Result<Vec<Vec<usize>>> {
    check_lengths(preds, labels)?;
    let mut m = vec![vec![0; n_classes]; n_classes];
    for (&p, &l) in preds.iter().zip(labels) {
        if p >= n_classes || l >= n_classes {
            return Err(Error::Contract(format!("class index outside 0..{n_classes}")));
        }
        m[l][p] += 1;
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F1Report {
    pub per_class: Vec<f64>,
    pub macro_f1: f64,
    /// Classes absent from both predictions and labels (scored 0).
    pub absent: Vec<usize>,
}

/// One-vs-rest F1 per class and their unweighted mean.
pub fn f1_scores(preds: &[usize], labels: &[usize], n_classes: usize) -> Result<F1Report> {
    check_lengths(preds, labels)?;
    let mut per_class = Vec::with_capacity(n_classes);
    let mut absent = Vec::new();
    for c in 0..n_classes {
        let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
        for (&p, &l) in preds.iter().zip(labels) {
            match (p == c, l == c) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                _ => {}
            }
        }
        if tp + fp + fn_ == 0 {
            absent.push(c);
            per_class.push(0.0);
            continue;
        }
        let precision = if tp + fp == 0 {
            0.0
        } else {
            tp as f64 / (tp + fp) as f64
        };
        let recall = if tp + fn_ == 0 {
            0.0
        } else {
            tp as f64 / (tp + fn_) as f64
        };
        per_class.push(if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        });
    }
    let macro_f1 = per_class.iter().sum::<f64>() / n_classes.max(1) as f64;
    Ok(F1Report {
        per_class,
        macro_f1,
        absent,
    })
}

/// Per-frame action probabilities of one test sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSequence {
    pub id: String,
    pub action: String,
    pub event_frame: Option<i64>,
    /// `(frame, probability of the sequence's action)`.
    pub points: Vec<(i64, f64)>,
}

impl ScoredSequence {
    fn by_tte(&self) -> Result<impl Iterator<Item = (i64, f64)> + '_> {
        let event = self.event_frame.ok_or_else(|| Error::MissingEvent(self.id.clone()))?;
        Ok(self.points.iter().map(move |&(f, p)| (event - f, p)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TtePoint {
    pub tte: i64,
    pub mean: f64,
    /// Population std across contributing sequences.
    pub std: f64,
    pub n: usize,
    /// Fewer than two sequences contribute; `std` is reported as 0.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictabilityPoint {
    pub tte: i64,
    pub fraction: f64,
    pub n: usize,
}

fn group_by_tte(sequences: &[ScoredSequence], action: &str) -> Result<BTreeMap<i64, Vec<f64>>> {
    let mut groups: BTreeMap<i64, Vec<f64>> = BTreeMap::new();
    for s in sequences.iter().filter(|s| s.action == action) {
        for (tte, p) in s.by_tte()? {
            groups.entry(tte).or_default().push(p);
        }
    }
    Ok(groups)
}

/// Mean and std of the action probability at each time-to-event, ordered
/// from the largest TTE (earliest) to the smallest.
pub fn tte_curves(sequences: &[ScoredSequence], action: &str) -> Result<Vec<TtePoint>> {
    Ok(group_by_tte(sequences, action)?
        .into_iter()
        .rev()
        .map(|(tte, ps)| {
            let n = ps.len();
            let mean = ps.iter().sum::<f64>() / n as f64;
            let std = if n < 2 {
                0.0
            } else {
                (ps.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / n as f64).sqrt()
            };
            TtePoint {
                tte,
                mean,
                std,
                n,
                degenerate: n < 2,
            }
        })
        .collect())
}

/// Fraction of sequences whose action probability reaches `thr` at each
/// time-to-event, ordered from the largest TTE to the smallest.
pub fn predictability(sequences: &[ScoredSequence], action: &str, thr: f64) -> Result<Vec<PredictabilityPoint>> {
    Ok(group_by_tte(sequences, action)?
        .into_iter()
        .rev()
        .map(|(tte, ps)| PredictabilityPoint {
            tte,
            fraction: ps.iter().filter(|&&p| p >= thr).count() as f64 / ps.len() as f64,
            n: ps.len(),
        })
        .collect())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub seeds: Vec<u64>,
    pub window: Option<usize>,
    pub noise_pct: Option<f64>,
    pub balance_seed: Option<u64>,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub classes: Vec<String>,
    pub acc: f64,
    pub f1_per_class: Vec<f64>,
    pub f1_macro: f64,
    pub confusion: Vec<Vec<usize>>,
    pub n_decisions: usize,
    pub tte_curves: BTreeMap<String, Vec<TtePoint>>,
    pub predictability: BTreeMap<String, Vec<PredictabilityPoint>>,
    pub run_metadata: RunMetadata,
}

impl EvalReport {
    /// Classification metrics over `preds` / `labels` plus curves for every
    /// action found in `sequences`.
    pub fn build(
        classes: Vec<String>,
        preds: &[usize],
        labels: &[usize],
        sequences: &[ScoredSequence],
        run_metadata: RunMetadata,
    ) -> Result<Self> {
        let n = classes.len();
        let f1 = f1_scores(preds, labels, n)?;
        let mut tte = BTreeMap::new();
        let mut pred = BTreeMap::new();
        let actions: std::collections::BTreeSet<&str> = sequences
            .iter()
            .filter(|s| s.event_frame.is_some())
            .map(|s| s.action.as_str())
            .collect();
        for action in actions {
            let with_event: Vec<ScoredSequence> = sequences
                .iter()
                .filter(|s| s.action == action && s.event_frame.is_some())
                .cloned()
                .collect();
            tte.insert(action.to_string(), tte_curves(&with_event, action)?);
            pred.insert(
                action.to_string(),
                predictability(&with_event, action, run_metadata.threshold)?,
            );
        }
        Ok(EvalReport {
            classes,
            acc: accuracy(preds, labels)?,
            f1_per_class: f1.per_class,
            f1_macro: f1.macro_f1,
            confusion: confusion(preds, labels, n)?,
            n_decisions: preds.len(),
            tte_curves: tte,
            predictability: pred,
            run_metadata,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn seq(id: &str, event: i64, probs: &[(i64, f64)]) -> ScoredSequence {
        ScoredSequence {
            id: id.into(),
            action: "StartCrossing".into(),
            event_frame: Some(event),
            points: probs.to_vec(),
        }
    }

    #[test]
    fn balance_large_counts() {
        let labels: Vec<u8> = std::iter::repeat_n(0, 17045)
            .chain(std::iter::repeat_n(1, 5161))
            .collect();
        let idx = balance(&labels, 7).unwrap();
        assert_eq!(idx.len(), 10_322);
        let pos = idx.iter().filter(|&&i| labels[i] == 0).count();
        assert_eq!(pos, 5161);
        assert_eq!(idx, balance(&labels, 7).unwrap());
        assert_ne!(idx, balance(&labels, 8).unwrap());
    }

    #[test]
    fn balance_identity_and_errors() {
        let labels = [0, 1, 1, 0];
        assert_eq!(balance(&labels, 1).unwrap(), vec![0, 1, 2, 3]);
        assert!(balance(&[1, 1, 1], 1).is_err());
    }

    #[test]
    fn accuracy_arithmetic() {
        // TP = TN = 4000 out of P = N = 5161.
        let labels: Vec<usize> = std::iter::repeat_n(0, 5161)
            .chain(std::iter::repeat_n(1, 5161))
            .collect();
        let preds: Vec<usize> = labels
            .iter()
            .enumerate()
            .map(|(i, &l)| if i % 5161 < 4000 { l } else { 1 - l })
            .collect();
        let acc = accuracy(&preds, &labels).unwrap();
        assert!((acc - 8000.0 / 10322.0).abs() < 1e-15);
        assert!((acc - 0.7750).abs() < 1e-4);
        assert_eq!(accuracy(&labels, &labels).unwrap(), 1.0);
        assert!(accuracy(&[0], &[0, 1]).is_err());
        assert!(accuracy(&[], &[]).is_err());
    }

    #[test]
    fn random_guessing_near_half() {
        let mut rng = seed::rng(12);
        let labels: Vec<usize> = (0..10_000).map(|i| i % 2).collect();
        let preds: Vec<usize> = (0..10_000).map(|_| rng.random_range(0..2)).collect();
        let acc = accuracy(&preds, &labels).unwrap();
        assert!((acc - 0.5).abs() < 0.02, "{acc}");
    }

    #[test]
    fn f1_examples() {
        let labels = [0, 1, 2, 1];
        let r = f1_scores(&labels, &labels, 3).unwrap();
        assert_eq!(r.per_class, vec![1.0, 1.0, 1.0]);
        // class 0: TP=1 (idx0), FP=1 (idx1), FN=1 (idx2)
        let labels = [0, 1, 0, 1];
        let preds = [0, 0, 1, 1];
        let r = f1_scores(&preds, &labels, 2).unwrap();
        assert!((r.per_class[0] - 0.5).abs() < 1e-15);
        let r = f1_scores(&[0, 0], &[0, 0], 3).unwrap();
        assert_eq!(r.absent, vec![1, 2]);
        assert!((r.macro_f1 - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn confusion_row_sums() {
        let labels = [0, 0, 1, 2, 2, 2];
        let preds = [0, 1, 1, 2, 0, 2];
        let m = confusion(&preds, &labels, 3).unwrap();
        assert_eq!(m, vec![vec![1, 1, 0], vec![0, 1, 0], vec![1, 0, 2]]);
        assert!(confusion(&[5], &[0], 3).is_err());
    }

    #[test]
    fn tte_aggregation() {
        let seqs = vec![seq("a", 10, &[(5, 0.4), (6, 1.0)]), seq("b", 10, &[(5, 0.8)])];
        let curve = tte_curves(&seqs, "StartCrossing").unwrap();
        assert_eq!(curve[0].tte, 5);
        assert!((curve[0].mean - 0.6).abs() < 1e-12);
        assert!((curve[0].std - 0.2).abs() < 1e-12);
        assert!(!curve[0].degenerate);
        assert_eq!(curve[1].tte, 4);
        assert!(curve[1].degenerate);
        assert_eq!(curve[1].std, 0.0);
        assert!(tte_curves(&seqs, "Other").unwrap().is_empty());
    }

    #[test]
    fn missing_event_is_an_error() {
        let mut s = seq("a", 0, &[(0, 1.0)]);
        s.event_frame = None;
        assert!(matches!(tte_curves(&[s], "StartCrossing"), Err(Error::MissingEvent(_))));
    }

    #[test]
    fn predictability_fractions() {
        let seqs: Vec<_> = (0..14)
            .map(|i| {
                seq(
                    &format!("s{i}"),
                    0,
                    &[(0, if i < 12 { 0.7 } else { 0.2 }), (1, 0.9), (2, 0.1)],
                )
            })
            .collect();
        let p = predictability(&seqs, "StartCrossing", 0.5).unwrap();
        let at = |t| p.iter().find(|x| x.tte == t).unwrap().fraction;
        assert!((at(0) - 12.0 / 14.0).abs() < 1e-12);
        assert_eq!(at(-1), 1.0);
        assert_eq!(at(-2), 0.0);
    }
}
