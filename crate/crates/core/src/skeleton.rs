//! Keypoint schemas, skeleton frames and labeled sequences.
//!
//! Keypoints use a dense canonical numbering shared by both roles:
//!
//! | id | keypoint   | id | keypoint   |
//! |----|------------|----|------------|
//! | 1  | neck       | 8  | left hip   |
//! | 2  | left sh.   | 9  | right hip  |
//! | 3  | right sh.  | 10 | left knee  |
//! | 4  | left elbow | 11 | right knee |
//! | 5  | right elb. | 12 | left ankle |
//! | 6  | left wrist | 13 | right ankle|
//! | 7  | right wr.  |    |            |
//!
//! The pedestrian schema drops the arms (ids 4 to 7). Frames store
//! keypoints in schema order, so a pedestrian frame has 9 entries and a
//! cyclist frame 13. Image coordinates: x to the right, y downward.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NECK: u8 = 1;
pub const L_SHOULDER: u8 = 2;
pub const R_SHOULDER: u8 = 3;
pub const L_ELBOW: u8 = 4;
pub const R_ELBOW: u8 = 5;
pub const L_WRIST: u8 = 6;
pub const R_WRIST: u8 = 7;
pub const L_HIP: u8 = 8;
pub const R_HIP: u8 = 9;
pub const L_KNEE: u8 = 10;
pub const R_KNEE: u8 = 11;
pub const L_ANKLE: u8 = 12;
pub const R_ANKLE: u8 = 13;

const NAMES: [&str; 13] = [
    "neck",
    "left_shoulder",
    "right_shoulder",
    "left_elbow",
    "right_elbow",
    "left_wrist",
    "right_wrist",
    "left_hip",
    "right_hip",
    "left_knee",
    "right_knee",
    "left_ankle",
    "right_ankle",
];

const PEDESTRIAN_IDS: [u8; 9] = [1, 2, 3, 8, 9, 10, 11, 12, 13];
const CYCLIST_IDS: [u8; 13] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13];

/// Default minimum keypoint confidence for a frame to count as valid.
pub const DEFAULT_CMIN: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Pedestrian,
    Cyclist,
}

impl Role {
    pub fn schema(self) -> KeypointSchema {
        KeypointSchema::new(self)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Pedestrian => "pedestrian",
            Role::Cyclist => "cyclist",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pedestrian" => Ok(Role::Pedestrian),
            "cyclist" => Ok(Role::Cyclist),
            other => Err(Error::Contract(format!("unknown role `{other}`"))),
        }
    }
}

/// Ordered keypoint selection for one road-user role.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KeypointSchema {
    role: Role,
    ids: &'static [u8],
}

impl KeypointSchema {
    pub fn new(role: Role) -> Self {
        let ids: &'static [u8] = match role {
            Role::Pedestrian => &PEDESTRIAN_IDS,
            Role::Cyclist => &CYCLIST_IDS,
        };
        KeypointSchema { role, ids }
    }

    pub fn pedestrian() -> Self {
        Self::new(Role::Pedestrian)
    }

    pub fn cyclist() -> Self {
        Self::new(Role::Cyclist)
    }

    pub fn role(&self) -> Role {
        self.role
    }

    /// Number of keypoints, K.
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Canonical ids in schema order.
    pub fn ids(&self) -> &'static [u8] {
        self.ids
    }

    /// Schema position of a canonical id.
    pub fn position(&self, id: u8) -> Option<usize> {
        self.ids.iter().position(|&k| k == id)
    }

    pub fn name(id: u8) -> &'static str {
        NAMES[(id - 1) as usize]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub c: f64,
}

impl Keypoint {
    pub fn new(x: f64, y: f64, c: f64) -> Self {
        Keypoint { x, y, c }
    }
}

impl From<[f64; 3]> for Keypoint {
    fn from(v: [f64; 3]) -> Self {
        Keypoint::new(v[0], v[1], v[2])
    }
}

impl From<Keypoint> for [f64; 3] {
    fn from(k: Keypoint) -> Self {
        [k.x, k.y, k.c]
    }
}

/// Axis-aligned box, top-left corner plus size, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        BBox { x, y, w, h }
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn area(&self) -> f64 {
        self.w.max(0.0) * self.h.max(0.0)
    }

    pub fn iou(&self, other: &BBox) -> f64 {
        let x1 = self.x.max(other.x);
        let y1 = self.y.max(other.y);
        let x2 = (self.x + self.w).min(other.x + other.w);
        let y2 = (self.y + self.h).min(other.y + other.h);
        let inter = (x2 - x1).max(0.0) * (y2 - y1).max(0.0);
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }

    /// Tight box around the given points, padded by `margin` times its size.
    pub fn around(points: impl IntoIterator<Item = (f64, f64)>, margin: f64) -> Self {
        let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
        for (x, y) in points {
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
        }
        let (w, h) = (x1 - x0, y1 - y0);
        let (mx, my) = (w * margin, h * margin);
        BBox::new(x0 - mx, y0 - my, w + 2.0 * mx, h + 2.0 * my)
    }
}

impl From<[f64; 4]> for BBox {
    fn from(v: [f64; 4]) -> Self {
        BBox::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.x, b.y, b.w, b.h]
    }
}

/// Ground-truth action labels. Pedestrians are binary crossing /
/// not-crossing; cyclist arm signals are annotated vehicle-centric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    C,
    NC,
    TurnLeft,
    TurnRight,
    Stop,
    NoSign,
}

impl Label {
    pub const PEDESTRIAN: [Label; 2] = [Label::C, Label::NC];
    pub const CYCLIST: [Label; 4] = [Label::TurnLeft, Label::TurnRight, Label::Stop, Label::NoSign];

    pub fn as_str(self) -> &'static str {
        match self {
            Label::C => "C",
            Label::NC => "NC",
            Label::TurnLeft => "TurnLeft",
            Label::TurnRight => "TurnRight",
            Label::Stop => "Stop",
            Label::NoSign => "NoSign",
        }
    }

    /// The class set for a role, in the index order used by classifiers.
    pub fn classes(role: Role) -> &'static [Label] {
        match role {
            Role::Pedestrian => &Self::PEDESTRIAN,
            Role::Cyclist => &Self::CYCLIST,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "C" => Label::C,
            "NC" => Label::NC,
            "TurnLeft" => Label::TurnLeft,
            "TurnRight" => Label::TurnRight,
            "Stop" => Label::Stop,
            "NoSign" => Label::NoSign,
            other => return Err(Error::Contract(format!("unknown label `{other}`"))),
        })
    }
}

/// One road user's skeleton in one video frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkeletonFrame {
    pub video_id: String,
    pub frame: i64,
    pub track_id: Option<u64>,
    pub bbox: BBox,
    pub keypoints: Vec<Keypoint>,
    pub label: Option<Label>,
    pub tte: Option<i64>,
    pub embedding: Option<Vec<f64>>,
    pub role: Role,
}

impl SkeletonFrame {
    pub fn schema(&self) -> KeypointSchema {
        self.role.schema()
    }

    /// Keypoint by canonical id.
    pub fn keypoint(&self, id: u8) -> Option<&Keypoint> {
        self.schema().position(id).and_then(|p| self.keypoints.get(p))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Degeneracy {
    LowConfidence { id: u8, confidence_milli: i64 },
    NonFinite { id: u8 },
    ZeroHeight,
}

impl fmt::Display for Degeneracy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Degeneracy::LowConfidence { id, .. } => {
                write!(f, "low-confidence keypoint {id} ({})", KeypointSchema::name(*id))
            }
            Degeneracy::NonFinite { id } => write!(f, "non-finite keypoint {id}"),
            Degeneracy::ZeroHeight => f.write_str("zero height"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Validation {
    Valid,
    Degenerate(Degeneracy),
}

impl Validation {
    pub fn is_valid(&self) -> bool {
        matches!(self, Validation::Valid)
    }
}

/// Checks that every keypoint is finite and confident enough and that the
/// skeleton has a positive vertical extent. Reports the first failure.
pub fn validate_frame(frame: &SkeletonFrame, schema: &KeypointSchema, cmin: f64) -> Result<Validation> {
    if frame.keypoints.len() != schema.len() {
        return Err(Error::SchemaMismatch {
            expected: schema.len(),
            found: frame.keypoints.len(),
        });
    }
    for (kp, &id) in frame.keypoints.iter().zip(schema.ids()) {
        if !(kp.x.is_finite() && kp.y.is_finite() && kp.c.is_finite()) {
            return Ok(Validation::Degenerate(Degeneracy::NonFinite { id }));
        }
        if kp.c < cmin {
            return Ok(Validation::Degenerate(Degeneracy::LowConfidence {
                id,
                confidence_milli: (kp.c * 1000.0).round() as i64,
            }));
        }
    }
    let (lo, hi) = frame
        .keypoints
        .iter()
        .fold((f64::MAX, f64::MIN), |(lo, hi), k| (lo.min(k.y), hi.max(k.y)));
    if hi - lo > 0.0 {
        Ok(Validation::Valid)
    } else {
        Ok(Validation::Degenerate(Degeneracy::ZeroHeight))
    }
}

/// Time-ordered frames of one tracked road user.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSequence {
    pub frames: Vec<SkeletonFrame>,
    pub action_label: Option<Label>,
    /// Frame index at which the time-to-event is zero.
    pub event_frame: Option<i64>,
}

impl LabeledSequence {
    pub fn new(frames: Vec<SkeletonFrame>, action_label: Option<Label>, event_frame: Option<i64>) -> Result<Self> {
        if let Some(w) = frames.windows(2).find(|w| w[1].frame <= w[0].frame) {
            return Err(Error::OutOfOrder {
                frame: w[1].frame,
                last: w[0].frame,
            });
        }
        Ok(LabeledSequence {
            frames,
            action_label,
            event_frame,
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// A window of `T` consecutive frames; it takes the label and TTE of its
/// newest frame.
#[derive(Debug, Clone, Copy)]
pub struct Window<'a> {
    pub start: usize,
    pub frames: &'a [SkeletonFrame],
    pub label: Option<Label>,
    pub tte: Option<i64>,
}

impl<'a> Window<'a> {
    pub fn newest(&self) -> &'a SkeletonFrame {
        self.frames.last().expect("windows are non-empty")
    }
}

/// All length-`t` windows of a sequence, oldest first.
pub fn window_slices(seq: &LabeledSequence, t: usize) -> Result<Vec<Window<'_>>> {
    if t == 0 {
        return Err(Error::Contract("window length must be at least 1".into()));
    }
    Ok(seq
        .frames
        .windows(t)
        .enumerate()
        .map(|(start, frames)| {
            let newest = &frames[t - 1];
            Window {
                start,
                frames,
                label: newest.label,
                tte: newest.tte,
            }
        })
        .collect())
}

/// Replaces each degenerate frame's keypoints with those of the most recent
/// valid frame of the sequence. Returns the per-frame imputed flags; frames
/// with no valid predecessor are left untouched and flagged.
pub fn impute_degenerate(frames: &mut [SkeletonFrame], cmin: f64) -> Result<Vec<bool>> {
    let mut last_valid: Option<Vec<Keypoint>> = None;
    let mut flags = Vec::with_capacity(frames.len());
    for f in frames.iter_mut() {
        let schema = f.schema();
        if validate_frame(f, &schema, cmin)?.is_valid() {
            last_valid = Some(f.keypoints.clone());
            flags.push(false);
        } else {
            if let Some(kps) = &last_valid {
                f.keypoints = kps.clone();
            }
            flags.push(true);
        }
    }
    Ok(flags)
}
