//! Test-time noise models: keypoint jitter relative to the local skeleton
//! scale and bounding-box fallback noise.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::seed;
use crate::skeleton::{BBox, SkeletonFrame};

/// Std of the box fallback noise as a fraction of box width / height.
pub const BBOX_NOISE_FRACTION: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Std as a fraction of each keypoint's nearest-neighbor distance.
    pub pct: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(pct: f64, seed: u64) -> Self {
        NoiseSpec {
            pct: pct.max(0.0),
            seed,
        }
    }
}

/// Distance from each point to its nearest other point.
pub fn nearest_neighbor_distances(points: &[(f64, f64)]) -> Vec<f64> {
    points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            points
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, q)| (p.0 - q.0).hypot(p.1 - q.1))
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

fn frame_seed(frame: &SkeletonFrame, seed: u64) -> u64 {
    seed::derive(
        seed,
        &[
            seed::hash_str(&frame.video_id),
            frame.frame as u64,
            frame.track_id.unwrap_or(u64::MAX),
        ],
    )
}

/// Adds zero-mean Gaussian noise to each keypoint coordinate with std
/// `pct` times the keypoint's distance to its nearest neighbor in the
/// clean frame. Noise for a keypoint depends only on the seed, the frame
/// identity and the keypoint id.
pub fn keypoint_noise(frame: &SkeletonFrame, spec: &NoiseSpec) -> SkeletonFrame {
    let mut out = frame.clone();
    if spec.pct == 0.0 || frame.keypoints.len() < 2 {
        return out;
    }
    let points: Vec<(f64, f64)> = frame.keypoints.iter().map(|k| (k.x, k.y)).collect();
    let nn = nearest_neighbor_distances(&points);
    let base = frame_seed(frame, spec.seed);
    let ids = frame.schema().ids();
    for ((kp, d), &id) in out.keypoints.iter_mut().zip(nn).zip(ids) {
        let s = spec.pct * d;
        let mut rng = seed::rng_stream(base, id as u64);
        let nx: f64 = rng.sample(StandardNormal);
        let ny: f64 = rng.sample(StandardNormal);
        kp.x += s * nx;
        kp.y += s * ny;
    }
    out
}

/// Perturbs the box corners with independent Gaussian noise: std
/// `fraction * w` on x coordinates and `fraction * h` on y coordinates.
/// Inverted corners are swapped back.
pub fn bbox_noise<R: Rng>(gt: &BBox, fraction: f64, rng: &mut R) -> BBox {
    let sx = fraction * gt.w;
    let sy = fraction * gt.h;
    let mut n = || -> f64 { rng.sample(StandardNormal) };
    let x1 = gt.x + sx * n();
    let y1 = gt.y + sy * n();
    let x2 = gt.x + gt.w + sx * n();
    let y2 = gt.y + gt.h + sy * n();
    let (x1, x2) = if x2 < x1 { (x2, x1) } else { (x1, x2) };
    let (y1, y2) = if y2 < y1 { (y2, y1) } else { (y1, y2) };
    let w = (x2 - x1).max(f64::MIN_POSITIVE);
    let h = (y2 - y1).max(f64::MIN_POSITIVE);
    BBox::new(x1, y1, w, h)
}

/// Noisy stand-in for a missing detection, derived from the ground truth.
pub fn bbox_fallback_noise(gt: &BBox, seed: u64) -> BBox {
    bbox_noise(gt, BBOX_NOISE_FRACTION, &mut seed::rng(seed))
}

/// Applies [`bbox_fallback_noise`] to a frame's box with a seed derived
/// from the frame identity.
pub fn frame_bbox_noise(frame: &SkeletonFrame, seed: u64) -> SkeletonFrame {
    let mut out = frame.clone();
    out.bbox = bbox_fallback_noise(&frame.bbox, frame_seed(frame, seed));
    out
}
