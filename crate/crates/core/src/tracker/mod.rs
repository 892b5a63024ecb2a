//! Multi-object tracking of road users: Kalman-filtered boxes, appearance
//! or IoU association, and a tentative/confirmed/ended lifecycle.

mod assignment;
pub mod kalman;

use std::collections::VecDeque;

pub use assignment::hungarian;
pub use kalman::{Gaussian, KalmanConfig, KalmanFilter, CHI2_95_4DOF};

use crate::error::{Error, Result};
use crate::skeleton::BBox;

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub bbox: BBox,
    pub confidence: f64,
    /// Unit-norm appearance embedding, when available.
    pub embedding: Option<Vec<f64>>,
}

impl Detection {
    pub fn new(bbox: BBox, confidence: f64) -> Self {
        Detection {
            bbox,
            confidence,
            embedding: None,
        }
    }

    pub fn with_embedding(mut self, embedding: Vec<f64>) -> Self {
        self.embedding = Some(embedding);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackStatus {
    Tentative,
    Confirmed,
    Ended,
}

#[derive(Debug, Clone)]
pub struct TrackState {
    pub id: u64,
    pub filter: Gaussian,
    pub status: TrackStatus,
    pub frames_since_update: u32,
    pub consecutive_hits: u32,
    pub gallery: VecDeque<Vec<f64>>,
}

impl TrackState {
    pub fn bbox(&self) -> BBox {
        self.filter.bbox()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackerConfig {
    /// Consecutive hits needed to confirm a track.
    pub n_init: u32,
    /// A track ends once it has gone more than this many frames unmatched.
    pub max_age: u32,
    /// Maximum cosine distance for appearance matches.
    pub appearance_gate: f64,
    /// Maximum `1 - IoU` for IoU matches.
    pub iou_gate: f64,
    /// Squared Mahalanobis gate on the box innovation.
    pub chi2_gate: f64,
    pub gallery_size: usize,
    pub kalman: KalmanConfig,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            n_init: 3,
            max_age: 30,
            appearance_gate: 0.7,
            iou_gate: 0.7,
            chi2_gate: CHI2_95_4DOF,
            gallery_size: 100,
            kalman: KalmanConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Association {
    /// `(track index, detection index)` pairs.
    pub matches: Vec<(usize, usize)>,
    pub unmatched_tracks: Vec<usize>,
    pub unmatched_detections: Vec<usize>,
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Matches predicted tracks to detections by minimum total cost.
///
/// The cost is the cosine distance to the closest gallery embedding when
/// both sides carry embeddings, and `1 - IoU` otherwise. Pairs outside the
/// Mahalanobis gate or above the cost gate are never matched.
pub fn associate(
    tracks: &[TrackState],
    detections: &[Detection],
    kf: &KalmanFilter,
    config: &TrackerConfig,
) -> Association {
    let n = tracks.len();
    let m = detections.len();
    if n == 0 || m == 0 {
        return Association {
            matches: Vec::new(),
            unmatched_tracks: (0..n).collect(),
            unmatched_detections: (0..m).collect(),
        };
    }
    let mut cost = vec![vec![0.0; m]; n];
    let mut gate = vec![vec![0.0; m]; n];
    for (t, track) in tracks.iter().enumerate() {
        let predicted = track.bbox();
        for (d, det) in detections.iter().enumerate() {
            let (c, g) = match (&det.embedding, track.gallery.is_empty()) {
                (Some(e), false) => {
                    let best = track.gallery.iter().map(|g| cosine(g, e)).fold(f64::MIN, f64::max);
                    (1.0 - best, config.appearance_gate)
                }
                _ => (1.0 - predicted.iou(&det.bbox), config.iou_gate),
            };
            let z = kalman::measurement(&det.bbox);
            let admissible = kf.gating_distance(&track.filter, &z) <= config.chi2_gate;
            cost[t][d] = if admissible && c <= g { c } else { g + 1e-5 };
            gate[t][d] = if admissible { g } else { f64::NEG_INFINITY };
        }
    }
    let mut matches = Vec::new();
    let mut track_used = vec![false; n];
    let mut det_used = vec![false; m];
    for (t, d) in hungarian(&cost) {
        if cost[t][d] <= gate[t][d] {
            matches.push((t, d));
            track_used[t] = true;
            det_used[d] = true;
        }
    }
    Association {
        matches,
        unmatched_tracks: (0..n).filter(|&t| !track_used[t]).collect(),
        unmatched_detections: (0..m).filter(|&d| !det_used[d]).collect(),
    }
}

/// A confirmed track as seen after one tracker step.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackSnapshot {
    pub id: u64,
    pub bbox: BBox,
    /// Index of the detection matched this frame.
    pub detection: Option<usize>,
}

/// Tracker for a single video stream.
#[derive(Debug, Clone)]
pub struct Tracker {
    config: TrackerConfig,
    kf: KalmanFilter,
    tracks: Vec<TrackState>,
    next_id: u64,
    last_frame: Option<i64>,
}

impl Default for Tracker {
    fn default() -> Self {
        Self::new(TrackerConfig::default())
    }
}

impl Tracker {
    pub fn new(config: TrackerConfig) -> Self {
        Tracker {
            kf: KalmanFilter::new(config.kalman),
            config,
            tracks: Vec::new(),
            next_id: 1,
            last_frame: None,
        }
    }

    /// Live (not ended) tracks.
    pub fn tracks(&self) -> &[TrackState] {
        &self.tracks
    }

    /// Total number of tracks created so far.
    pub fn tracks_created(&self) -> u64 {
        self.next_id - 1
    }

    /// Advances to `frame` and processes its detections. Frames skipped
    /// since the previous call are treated as frames without detections.
    pub fn step(&mut self, detections: &[Detection], frame: i64) -> Result<Vec<TrackSnapshot>> {
        if let Some(last) = self.last_frame {
            if frame <= last {
                return Err(Error::OutOfOrder { frame, last });
            }
            for _ in last + 1..frame {
                self.advance(&[])?;
            }
        }
        self.last_frame = Some(frame);
        self.advance(detections)
    }

    fn advance(&mut self, detections: &[Detection]) -> Result<Vec<TrackSnapshot>> {
        for t in self.tracks.iter_mut() {
            t.filter = self.kf.predict(&t.filter);
        }
        let assoc = associate(&self.tracks, detections, &self.kf, &self.config);
        let mut matched_det = vec![None; self.tracks.len()];
        for &(ti, di) in &assoc.matches {
            let det = &detections[di];
            let track = &mut self.tracks[ti];
            track.filter = self.kf.update(&track.filter, &kalman::measurement(&det.bbox))?;
            track.frames_since_update = 0;
            track.consecutive_hits += 1;
            if let Some(e) = &det.embedding {
                track.gallery.push_back(e.clone());
                if track.gallery.len() > self.config.gallery_size {
                    track.gallery.pop_front();
                }
            }
            if track.status == TrackStatus::Tentative && track.consecutive_hits >= self.config.n_init {
                track.status = TrackStatus::Confirmed;
            }
            matched_det[ti] = Some(di);
        }
        for &ti in &assoc.unmatched_tracks {
            let track = &mut self.tracks[ti];
            track.frames_since_update += 1;
            track.consecutive_hits = 0;
            if track.frames_since_update > self.config.max_age {
                track.status = TrackStatus::Ended;
            }
        }
        let mut snapshots: Vec<TrackSnapshot> = self
            .tracks
            .iter()
            .zip(&matched_det)
            .filter(|(t, _)| t.status == TrackStatus::Confirmed)
            .map(|(t, &d)| TrackSnapshot {
                id: t.id,
                bbox: t.bbox(),
                detection: d,
            })
            .collect();
        self.tracks.retain(|t| t.status != TrackStatus::Ended);
        for &di in &assoc.unmatched_detections {
            let det = &detections[di];
            let status = if self.config.n_init <= 1 {
                TrackStatus::Confirmed
            } else {
                TrackStatus::Tentative
            };
            let track = TrackState {
                id: self.next_id,
                filter: self.kf.initiate(&kalman::measurement(&det.bbox)),
                status,
                frames_since_update: 0,
                consecutive_hits: 1,
                gallery: det.embedding.iter().cloned().collect(),
            };
            self.next_id += 1;
            if status == TrackStatus::Confirmed {
                snapshots.push(TrackSnapshot {
                    id: track.id,
                    bbox: track.bbox(),
                    detection: Some(di),
                });
            }
            self.tracks.push(track);
        }
        Ok(snapshots)
    }
}
