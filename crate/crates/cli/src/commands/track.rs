use std::collections::HashMap;
use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use vru_core::tracker::{Detection, Tracker, TrackerConfig, CHI2_95_4DOF};
use vru_core::{Error, SkeletonFrame};

use crate::{read_jsonl, write_atomic, write_jsonl, CliError, CliResult};

#[derive(Debug, Clone, Args)]
pub struct TrackArgs {
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Per-video summary as JSON.
    #[arg(long)]
    pub meta: Option<PathBuf>,
    /// Reject unknown fields and out-of-order frames.
    #[arg(long)]
    pub strict: bool,
    #[arg(long, default_value_t = 3)]
    pub n_init: u32,
    #[arg(long, default_value_t = 30)]
    pub max_age: u32,
    /// Maximum cosine distance for appearance matches.
    #[arg(long, default_value_t = 0.7)]
    pub appearance_gate: f64,
    /// Maximum 1 - IoU for matches without embeddings.
    #[arg(long, default_value_t = 0.7)]
    pub iou_gate: f64,
    /// Mahalanobis gate (squared distance, 4 degrees of freedom).
    #[arg(long, default_value_t = CHI2_95_4DOF)]
    pub chi2_gate: f64,
}

impl TrackArgs {
    pub fn config(&self) -> TrackerConfig {
        TrackerConfig {
            n_init: self.n_init,
            max_age: self.max_age,
            appearance_gate: self.appearance_gate,
            iou_gate: self.iou_gate,
            chi2_gate: self.chi2_gate,
            ..TrackerConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VideoSummary {
    pub video_id: String,
    pub records: usize,
    pub frames: usize,
    pub tracks_created: u64,
    pub confirmed_ids: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackMeta {
    /// Track ids are only unique within a video.
    pub id_space: &'static str,
    pub videos: Vec<VideoSummary>,
}

/// Groups records by video in order of first appearance.
fn by_video(frames: Vec<SkeletonFrame>) -> Vec<(String, Vec<SkeletonFrame>)> {
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut groups: Vec<(String, Vec<SkeletonFrame>)> = Vec::new();
    for f in frames {
        let i = *index.entry(f.video_id.clone()).or_insert_with(|| {
            groups.push((f.video_id.clone(), Vec::new()));
            groups.len() - 1
        });
        groups[i].1.push(f);
    }
    groups
}

/// Tracks one video. Records sharing a frame index are the detections of
/// that frame; only detections matched to a confirmed track get an id.
pub fn track_video(records: &mut [SkeletonFrame], config: &TrackerConfig, strict: bool) -> CliResult<VideoSummary> {
    if let Some(w) = records.windows(2).find(|w| w[1].frame < w[0].frame) {
        if strict {
            return Err(Error::OutOfOrder {
                frame: w[1].frame,
                last: w[0].frame,
            }
            .into());
        }
        log::warn!("{}: frames out of order, sorting", w[0].video_id);
        records.sort_by_key(|f| f.frame);
    }
    let mut tracker = Tracker::new(*config);
    let mut confirmed = Vec::new();
    let mut start = 0;
    let mut n_frames = 0;
    while start < records.len() {
        let frame = records[start].frame;
        let end = start + records[start..].iter().take_while(|f| f.frame == frame).count();
        let dets: Vec<Detection> = records[start..end]
            .iter()
            .map(|f| {
                let conf = f.keypoints.iter().map(|k| k.c).sum::<f64>() / f.keypoints.len().max(1) as f64;
                let d = Detection::new(f.bbox, conf);
                match &f.embedding {
                    Some(e) => d.with_embedding(e.clone()),
                    None => d,
                }
            })
            .collect();
        for r in &mut records[start..end] {
            r.track_id = None;
        }
        for snap in tracker.step(&dets, frame)? {
            if let Some(d) = snap.detection {
                records[start + d].track_id = Some(snap.id);
                if !confirmed.contains(&snap.id) {
                    confirmed.push(snap.id);
                }
            }
        }
        n_frames += 1;
        start = end;
    }
    confirmed.sort_unstable();
    Ok(VideoSummary {
        video_id: records.first().map(|f| f.video_id.clone()).unwrap_or_default(),
        records: records.len(),
        frames: n_frames,
        tracks_created: tracker.tracks_created(),
        confirmed_ids: confirmed,
    })
}

pub fn run(args: &TrackArgs) -> CliResult<()> {
    let frames = read_jsonl(&args.input, args.strict)?;
    let config = args.config();
    if !(config.iou_gate.is_finite() && config.appearance_gate.is_finite() && config.chi2_gate > 0.0) {
        return Err(CliError::Input(
            "gate thresholds must be finite and the chi-square gate positive".into(),
        ));
    }
    let mut out = Vec::with_capacity(frames.len());
    let mut meta = TrackMeta {
        id_space: "per-video",
        videos: Vec::new(),
    };
    for (_, mut records) in by_video(frames) {
        meta.videos.push(track_video(&mut records, &config, args.strict)?);
        out.extend(records);
    }
    write_jsonl(&args.out, &out)?;
    if let Some(path) = &args.meta {
        write_atomic(path, |w| {
            serde_json::to_writer_pretty(&mut *w, &meta)?;
            w.write_all(b"\n")?;
            Ok(())
        })?;
    }
    Ok(())
}
