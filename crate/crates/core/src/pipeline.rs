//! Glue between keypoint streams and classifier inputs.

use std::collections::BTreeMap;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::features::{window_features, FeatureLayout};
use crate::skeleton::{impute_degenerate, validate_frame, Label, LabeledSequence, Role, SkeletonFrame};

/// How frames are grouped into sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Grouping {
    /// By `(video_id, track_id)`; frames without a track id are skipped.
    Track,
    /// One sequence per video, ignoring track ids.
    Video,
}

/// Handling of windows that contain degenerate frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Degenerate {
    /// Drop the window (training).
    Drop,
    /// Carry keypoints forward from the last valid frame (inference).
    Impute,
}

/// Groups frames of one role into time-ordered sequences, keyed by
/// `(video_id, track_id)` in ascending key order.
pub fn group_sequences(frames: &[SkeletonFrame], role: Role, grouping: Grouping) -> Result<Vec<LabeledSequence>> {
    let mut groups: BTreeMap<(String, Option<u64>), Vec<SkeletonFrame>> = BTreeMap::new();
    for f in frames.iter().filter(|f| f.role == role) {
        let key = match grouping {
            Grouping::Track => match f.track_id {
                Some(t) => (f.video_id.clone(), Some(t)),
                None => continue,
            },
            Grouping::Video => (f.video_id.clone(), None),
        };
        groups.entry(key).or_default().push(f.clone());
    }
    groups
        .into_values()
        .map(|mut fs| {
            fs.sort_by_key(|f| f.frame);
            let event = fs.iter().find_map(|f| f.tte.map(|t| f.frame + t));
            let label = fs.last().and_then(|f| f.label);
            LabeledSequence::new(fs, label, event)
        })
        .collect()
}

/// One windowed sample.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowRow {
    pub video_id: String,
    pub track_id: Option<u64>,
    /// Frame index of the newest frame.
    pub frame: i64,
    pub label: Option<Label>,
    pub tte: Option<i64>,
    pub imputed: bool,
    pub values: Vec<f64>,
}

/// Feature rows for all length-`window` windows of each sequence.
pub fn window_rows(
    sequences: &[LabeledSequence],
    layout: &FeatureLayout,
    window: usize,
    cmin: f64,
    degenerate: Degenerate,
) -> Result<Vec<WindowRow>> {
    if window == 0 {
        return Err(Error::Contract("window length must be at least 1".into()));
    }
    let schema = layout.schema();
    let mut rows = Vec::new();
    for seq in sequences {
        let mut frames = seq.frames.clone();
        let flags = match degenerate {
            Degenerate::Impute => impute_degenerate(&mut frames, cmin)?,
            Degenerate::Drop => frames
                .iter()
                .map(|f| validate_frame(f, &schema, cmin).map(|v| !v.is_valid()))
                .collect::<Result<Vec<_>>>()?,
        };
        for (start, w) in frames.windows(window).enumerate() {
            let bad = flags[start..start + window].iter().any(|&b| b);
            if bad && degenerate == Degenerate::Drop {
                continue;
            }
            let newest = &w[window - 1];
            let values = match window_features(w, layout, window) {
                Ok(v) => v.values,
                // imputation had no valid frame to carry forward
                Err(Error::DegenerateFrame(_)) => continue,
                Err(e) => return Err(e),
            };
            rows.push(WindowRow {
                video_id: newest.video_id.clone(),
                track_id: newest.track_id,
                frame: newest.frame,
                label: newest.label,
                tte: newest.tte,
                imputed: bad,
                values,
            });
        }
    }
    Ok(rows)
}

/// Stacks labeled rows into a design matrix with class indices from
/// `classes`. Rows with no label or a label outside `classes` are skipped.
pub fn design_matrix(rows: &[WindowRow], classes: &[Label]) -> Result<(Array2<f64>, Vec<usize>)> {
    let kept: Vec<(&WindowRow, usize)> = rows
        .iter()
        .filter_map(|r| {
            r.label
                .and_then(|l| classes.iter().position(|&c| c == l))
                .map(|c| (r, c))
        })
        .collect();
    let d = rows.first().map_or(0, |r| r.values.len());
    let mut x = Array2::zeros((kept.len(), d));
    for (i, (r, _)) in kept.iter().enumerate() {
        if r.values.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: r.values.len(),
            });
        }
        x.row_mut(i).assign(&ndarray::ArrayView1::from(&r.values[..]));
    }
    Ok((x, kept.into_iter().map(|(_, c)| c).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{gen_pedestrian, SynthAction, SynthSpec};

    fn seq(name: &str, n: usize) -> LabeledSequence {
        let mut spec = SynthSpec::new(SynthAction::KeepWalkingToCross);
        spec.name = name.into();
        spec.n_frames = n;
        gen_pedestrian(&spec).unwrap().sequence
    }

    #[test]
    fn rows_per_sequence() {
        let layout = FeatureLayout::for_role(Role::Pedestrian);
        let rows = window_rows(&[seq("a", 20), seq("b", 5)], &layout, 14, 0.1, Degenerate::Drop).unwrap();
        assert_eq!(rows.len(), 7);
        assert!(rows.iter().all(|r| r.values.len() == 5544 && r.video_id == "a"));
        assert_eq!(rows[0].frame, 13);
    }

    #[test]
    fn degenerate_windows_dropped_or_imputed() {
        let layout = FeatureLayout::for_role(Role::Pedestrian);
        let mut s = seq("a", 6);
        s.frames[3].keypoints[0].c = 0.0;
        let dropped = window_rows(std::slice::from_ref(&s), &layout, 2, 0.1, Degenerate::Drop).unwrap();
        assert_eq!(dropped.len(), 3);
        let imputed = window_rows(&[s], &layout, 2, 0.1, Degenerate::Impute).unwrap();
        assert_eq!(imputed.len(), 5);
        assert_eq!(imputed.iter().filter(|r| r.imputed).count(), 2);
    }

    #[test]
    fn grouping_by_track() {
        let mut frames = seq("a", 4).frames;
        frames[0].track_id = Some(2);
        frames[1].track_id = Some(1);
        frames[2].track_id = Some(1);
        let seqs = group_sequences(&frames, Role::Pedestrian, Grouping::Track).unwrap();
        assert_eq!(seqs.len(), 2);
        assert_eq!(seqs[0].frames.len(), 2);
        let seqs = group_sequences(&frames, Role::Pedestrian, Grouping::Video).unwrap();
        assert_eq!(seqs.len(), 1);
        assert_eq!(seqs[0].len(), 4);
    }

    #[test]
    fn design_matrix_skips_unlabeled() {
        let layout = FeatureLayout::for_role(Role::Pedestrian);
        let mut rows = window_rows(&[seq("a", 5)], &layout, 1, 0.1, Degenerate::Drop).unwrap();
        rows[1].label = None;
        let (x, y) = design_matrix(&rows, &Label::PEDESTRIAN).unwrap();
        assert_eq!(x.nrows(), 4);
        assert_eq!(y, vec![0; 4]);
    }
}
