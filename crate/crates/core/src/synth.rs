//! Deterministic 2D stick-figure sequences with ground-truth labels and
//! time-to-event, for pedestrians (gait) and cyclists (arm signals).

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
use crate::skeleton::{self as sk, BBox, Keypoint, Label, LabeledSequence, Role, SkeletonFrame};

/// Keypoint confidence written on synthetic frames.
pub const SYNTH_CONFIDENCE: f64 = 0.9;
/// Frames over which an arm signal moves from rest to its final pose.
pub const SIGNAL_RAMP_FRAMES: usize = 5;
/// Frames over which a pedestrian starting to walk reaches full gait.
pub const START_RAMP_FRAMES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SynthAction {
    KeepWalkingToCross,
    StartCrossing,
    Standing,
    WalkAlong,
    TurnLeft,
    TurnRight,
    Stop,
    NoSign,
}

impl SynthAction {
    pub const PEDESTRIAN: [SynthAction; 4] = [
        SynthAction::KeepWalkingToCross,
        SynthAction::StartCrossing,
        SynthAction::Standing,
        SynthAction::WalkAlong,
    ];
    pub const CYCLIST: [SynthAction; 4] = [
        SynthAction::TurnLeft,
        SynthAction::TurnRight,
        SynthAction::Stop,
        SynthAction::NoSign,
    ];

    pub fn role(self) -> Role {
        if Self::PEDESTRIAN.contains(&self) {
            Role::Pedestrian
        } else {
            Role::Cyclist
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SynthAction::KeepWalkingToCross => "KeepWalkingToCross",
            SynthAction::StartCrossing => "StartCrossing",
            SynthAction::Standing => "Standing",
            SynthAction::WalkAlong => "WalkAlong",
            SynthAction::TurnLeft => "TurnLeft",
            SynthAction::TurnRight => "TurnRight",
            SynthAction::Stop => "Stop",
            SynthAction::NoSign => "NoSign",
        }
    }
}

impl fmt::Display for SynthAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SynthAction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        SynthAction::PEDESTRIAN
            .iter()
            .chain(&SynthAction::CYCLIST)
            .copied()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::InvalidSpec(format!("unknown action `{s}`")))
    }
}

/// Camera view of the figure. `Back` and `Front` look along the road
/// user's heading; `Left` and `Right` are profiles facing that image side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum View {
    Back,
    Front,
    Left,
    Right,
}

/// Body proportions as fractions of the neck-to-ankle height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodyShape {
    pub shoulder_width: f64,
    pub hip_width: f64,
    pub torso: f64,
    pub thigh: f64,
    pub shin: f64,
    pub upper_arm: f64,
    pub forearm: f64,
}

impl Default for BodyShape {
    fn default() -> Self {
        BodyShape {
            shoulder_width: 0.24,
            hip_width: 0.16,
            torso: 0.40,
            thigh: 0.30,
            shin: 0.30,
            upper_arm: 0.17,
            forearm: 0.15,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub name: String,
    pub action: SynthAction,
    pub n_frames: usize,
    pub base_height_px: f64,
    pub gait_amplitude_rad: f64,
    pub gait_period_frames: f64,
    pub jitter_std_px: f64,
    /// Frame with time-to-event zero.
    pub onset_frame: Option<usize>,
    pub view: View,
    /// Signal a right turn with the left forearm raised instead of the
    /// right arm horizontal.
    pub alt_right_turn: bool,
    pub body: BodyShape,
    /// Image position of the neck in the first frame.
    pub origin: (f64, f64),
    /// Horizontal speed while walking, as a fraction of height per frame.
    pub walk_speed: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn new(action: SynthAction) -> Self {
        let view = match action.role() {
            Role::Pedestrian => View::Right,
            Role::Cyclist => View::Back,
        };
        SynthSpec {
            name: format!("synth-{action}"),
            action,
            n_frames: 60,
            base_height_px: 160.0,
            gait_amplitude_rad: 0.35,
            gait_period_frames: 30.0,
            jitter_std_px: 0.0,
            onset_frame: None,
            view,
            alt_right_turn: false,
            body: BodyShape::default(),
            origin: (640.0, 200.0),
            walk_speed: 0.02,
            seed: 0,
        }
    }

    pub fn role(&self) -> Role {
        self.action.role()
    }

    fn validate(&self) -> Result<()> {
        if self.n_frames == 0 {
            return Err(Error::InvalidSpec("n_frames must be at least 1".into()));
        }
        if let Some(o) = self.onset_frame {
            if o >= self.n_frames {
                return Err(Error::InvalidSpec(format!("onset {o} outside 0..{}", self.n_frames)));
            }
        }
        let positive = |v: f64| v > 0.0;
        if !positive(self.base_height_px)
            || !positive(self.gait_period_frames)
            || !(self.jitter_std_px >= 0.0 && self.jitter_std_px.is_finite())
        {
            return Err(Error::InvalidSpec("height, period and jitter must be positive".into()));
        }
        if self.action == SynthAction::StartCrossing && self.onset_frame.is_none() {
            return Err(Error::InvalidSpec("StartCrossing needs an onset frame".into()));
        }
        Ok(())
    }
}

/// A generated sequence plus the action that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSequence {
    pub action: SynthAction,
    pub sequence: LabeledSequence,
}

type Pose = [(f64, f64); 13];

fn set(pose: &mut Pose, id: u8, p: (f64, f64)) {
    pose[(id - 1) as usize] = p;
}

fn get(pose: &Pose, id: u8) -> (f64, f64) {
    pose[(id - 1) as usize]
}

/// Image-x sign of the figure's left side, for frontal views.
fn left_sign(view: View) -> f64 {
    match view {
        View::Front => 1.0,
        _ => -1.0,
    }
}

/// Pedestrian pose at gait phase `phase` (radians); `walking` false gives
/// the neutral standing pose.
/// `phase` is the gait phase and the fraction of full gait amplitude.
fn pedestrian_pose(spec: &SynthSpec, neck: (f64, f64), phase: Option<(f64, f64)>) -> Pose {
    let h = spec.base_height_px;
    let b = &spec.body;
    let mut pose = [(0.0, 0.0); 13];
    let (swing_l, bend_l, swing_r, bend_r) = match phase {
        Some((ph, gain)) => {
            let a = gain * spec.gait_amplitude_rad;
            let swing = a * ph.sin();
            // knee flexes while the leg swings forward
            let bend = |p: f64| 1.2 * a * (0.5 - 0.5 * p.cos()).powi(2);
            (swing, bend(ph), -swing, bend(ph + PI))
        }
        None => (0.0, 0.0, 0.0, 0.0),
    };
    let hip_y = neck.1 + b.torso * h;
    set(&mut pose, sk::NECK, neck);
    match spec.view {
        View::Left | View::Right => {
            let facing = if spec.view == View::Right { 1.0 } else { -1.0 };
            // Profile: near and far sides are separated by a small depth offset.
            let depth = 0.02 * h;
            set(&mut pose, sk::L_SHOULDER, (neck.0 - depth, neck.1 + 0.03 * h));
            set(&mut pose, sk::R_SHOULDER, (neck.0 + depth, neck.1 + 0.03 * h));
            let legs = [
                (sk::L_HIP, sk::L_KNEE, sk::L_ANKLE, -depth, swing_l, bend_l),
                (sk::R_HIP, sk::R_KNEE, sk::R_ANKLE, depth, swing_r, bend_r),
            ];
            for (hip, knee, ankle, off, swing, bend) in legs {
                let hp = (neck.0 + off, hip_y);
                let kp = (
                    hp.0 + facing * b.thigh * h * swing.sin(),
                    hp.1 + b.thigh * h * swing.cos(),
                );
                let shin = swing - bend;
                let ap = (kp.0 + facing * b.shin * h * shin.sin(), kp.1 + b.shin * h * shin.cos());
                set(&mut pose, hip, hp);
                set(&mut pose, knee, kp);
                set(&mut pose, ankle, ap);
            }
        }
        View::Back | View::Front => {
            let s = left_sign(spec.view);
            let sway = phase.map_or(0.0, |(p, gain)| gain * 0.01 * h * p.sin());
            set(
                &mut pose,
                sk::L_SHOULDER,
                (neck.0 + s * b.shoulder_width * h / 2.0 + sway, neck.1 + 0.03 * h),
            );
            set(
                &mut pose,
                sk::R_SHOULDER,
                (neck.0 - s * b.shoulder_width * h / 2.0 + sway, neck.1 + 0.03 * h),
            );
            let legs = [
                (sk::L_HIP, sk::L_KNEE, sk::L_ANKLE, s, swing_l, bend_l),
                (sk::R_HIP, sk::R_KNEE, sk::R_ANKLE, -s, swing_r, bend_r),
            ];
            for (hip, knee, ankle, side, swing, bend) in legs {
                // Swing happens along the viewing axis and shows up as
                // vertical foreshortening of thigh and shin.
                let hp = (neck.0 + side * b.hip_width * h / 2.0 + sway, hip_y);
                let kp = (hp.0, hp.1 + b.thigh * h * swing.cos());
                let ap = (kp.0, kp.1 + b.shin * h * (swing - bend).cos());
                set(&mut pose, hip, hp);
                set(&mut pose, knee, kp);
                set(&mut pose, ankle, ap);
            }
        }
    }
    // Arms hang along the torso; unused by the pedestrian schema.
    for (sh, el, wr) in [
        (sk::L_SHOULDER, sk::L_ELBOW, sk::L_WRIST),
        (sk::R_SHOULDER, sk::R_ELBOW, sk::R_WRIST),
    ] {
        let p = get(&pose, sh);
        set(&mut pose, el, (p.0, p.1 + b.upper_arm * h));
        set(&mut pose, wr, (p.0, p.1 + (b.upper_arm + b.forearm) * h));
    }
    pose
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum ArmPose {
    Rest,
    Horizontal,
    BentUp,
    BentDown,
}

fn arm_target(shoulder: (f64, f64), out: f64, pose: ArmPose, b: &BodyShape, h: f64) -> ((f64, f64), (f64, f64)) {
    let (ua, fa) = (b.upper_arm * h, b.forearm * h);
    match pose {
        // Forward to the handlebar, foreshortened: slightly out and down.
        ArmPose::Rest => {
            let e = (shoulder.0 + out * 0.2 * ua, shoulder.1 + 0.9 * ua);
            (e, (e.0 - out * 0.1 * fa, e.1 + 0.8 * fa))
        }
        ArmPose::Horizontal => {
            let e = (shoulder.0 + out * ua, shoulder.1);
            (e, (e.0 + out * fa, e.1))
        }
        ArmPose::BentUp => {
            let e = (shoulder.0 + out * ua, shoulder.1);
            (e, (e.0, e.1 - fa))
        }
        ArmPose::BentDown => {
            let e = (shoulder.0 + out * ua, shoulder.1);
            (e, (e.0, e.1 + fa))
        }
    }
}

fn lerp(a: (f64, f64), b: (f64, f64), t: f64) -> (f64, f64) {
    (a.0 + (b.0 - a.0) * t, a.1 + (b.1 - a.1) * t)
}

/// Cyclist pose with the signal blended in by `alpha` in `[0, 1]`.
fn cyclist_pose(spec: &SynthSpec, alpha: f64) -> Pose {
    let h = spec.base_height_px;
    let b = &spec.body;
    let neck = spec.origin;
    let s = left_sign(spec.view);
    let mut pose = [(0.0, 0.0); 13];
    set(&mut pose, sk::NECK, neck);
    let hip_y = neck.1 + b.torso * h * 0.95;
    let sides = [
        (
            s,
            sk::L_SHOULDER,
            sk::L_ELBOW,
            sk::L_WRIST,
            sk::L_HIP,
            sk::L_KNEE,
            sk::L_ANKLE,
        ),
        (
            -s,
            sk::R_SHOULDER,
            sk::R_ELBOW,
            sk::R_WRIST,
            sk::R_HIP,
            sk::R_KNEE,
            sk::R_ANKLE,
        ),
    ];
    let (left_arm, right_arm) = match spec.action {
        SynthAction::TurnLeft => (ArmPose::Horizontal, ArmPose::Rest),
        SynthAction::TurnRight if spec.alt_right_turn => (ArmPose::BentUp, ArmPose::Rest),
        SynthAction::TurnRight => (ArmPose::Rest, ArmPose::Horizontal),
        SynthAction::Stop => (ArmPose::BentDown, ArmPose::Rest),
        _ => (ArmPose::Rest, ArmPose::Rest),
    };
    for ((out, sh, el, wr, hip, knee, ankle), arm) in sides.into_iter().zip([left_arm, right_arm]) {
        let shoulder = (neck.0 + out * b.shoulder_width * h / 2.0, neck.1 + 0.03 * h);
        set(&mut pose, sh, shoulder);
        let (e0, w0) = arm_target(shoulder, out, ArmPose::Rest, b, h);
        let (e1, w1) = arm_target(shoulder, out, arm, b, h);
        set(&mut pose, el, lerp(e0, e1, alpha));
        set(&mut pose, wr, lerp(w0, w1, alpha));
        // Seated: thighs forward (foreshortened), shins down.
        let hp = (neck.0 + out * b.hip_width * h / 2.0, hip_y);
        let kp = (hp.0 + out * 0.02 * h, hp.1 + 0.35 * b.thigh * h);
        let ap = (kp.0 - out * 0.01 * h, kp.1 + 0.9 * b.shin * h);
        set(&mut pose, hip, hp);
        set(&mut pose, knee, kp);
        set(&mut pose, ankle, ap);
    }
    pose
}

const MIN_BOX_ASPECT: f64 = 0.45;

fn vehicle_centric(action: SynthAction, view: View) -> Label {
    let front = view == View::Front;
    match action {
        SynthAction::TurnLeft if front => Label::TurnRight,
        SynthAction::TurnLeft => Label::TurnLeft,
        SynthAction::TurnRight if front => Label::TurnLeft,
        SynthAction::TurnRight => Label::TurnRight,
        SynthAction::Stop => Label::Stop,
        _ => Label::NoSign,
    }
}

/// Padded keypoint extent, widened to a minimum aspect ratio the way a
/// person detector box covers the arms and head.
fn detector_box(keypoints: &[Keypoint]) -> BBox {
    let tight = BBox::around(keypoints.iter().map(|k| (k.x, k.y)), 0.1);
    let min_w = MIN_BOX_ASPECT * tight.h;
    if tight.w >= min_w {
        return tight;
    }
    let (cx, _) = tight.center();
    BBox::new(cx - min_w / 2.0, tight.y, min_w, tight.h)
}

fn make_frame(spec: &SynthSpec, frame: usize, pose: &Pose, rng: &mut impl Rng) -> SkeletonFrame {
    let role = spec.role();
    let keypoints: Vec<Keypoint> = role
        .schema()
        .ids()
        .iter()
        .map(|&id| {
            let (x, y) = get(pose, id);
            let jx: f64 = rng.sample(StandardNormal);
            let jy: f64 = rng.sample(StandardNormal);
            Keypoint::new(
                x + spec.jitter_std_px * jx,
                y + spec.jitter_std_px * jy,
                SYNTH_CONFIDENCE,
            )
        })
        .collect();
    let bbox = detector_box(&keypoints);
    SkeletonFrame {
        video_id: spec.name.clone(),
        frame: frame as i64,
        track_id: None,
        bbox,
        keypoints,
        label: None,
        tte: spec.onset_frame.map(|o| o as i64 - frame as i64),
        embedding: None,
        role,
    }
}

/// Walking figures swing their legs sinusoidally and translate sideways;
/// `StartCrossing` stands still until the onset frame and then walks,
/// reaching full gait after [`START_RAMP_FRAMES`] frames.
pub fn gen_pedestrian(spec: &SynthSpec) -> Result<SyntheticSequence> {
    spec.validate()?;
    if spec.role() != Role::Pedestrian {
        return Err(Error::InvalidSpec(format!(
            "{} is not a pedestrian action",
            spec.action
        )));
    }
    let mut rng = seed::rng(spec.seed);
    let omega = 2.0 * PI / spec.gait_period_frames;
    let h = spec.base_height_px;
    let heading = match spec.view {
        View::Left => -1.0,
        View::Right => 1.0,
        _ => 0.0,
    };
    let onset = spec.onset_frame.unwrap_or(0);
    let mut frames = Vec::with_capacity(spec.n_frames);
    for f in 0..spec.n_frames {
        let walk_t = match spec.action {
            SynthAction::KeepWalkingToCross | SynthAction::WalkAlong => Some(f as f64),
            SynthAction::StartCrossing if f >= onset => Some((f - onset) as f64),
            _ => None,
        };
        // StartCrossing accelerates into its gait; the others walk throughout.
        let ramp = if spec.action == SynthAction::StartCrossing {
            START_RAMP_FRAMES as f64
        } else {
            0.0
        };
        let gain = walk_t.map_or(0.0, |t| if ramp > 0.0 { (t / ramp).min(1.0) } else { 1.0 });
        let travelled = walk_t.map_or(0.0, |t| if t < ramp { t * t / (2.0 * ramp) } else { t - ramp / 2.0 });
        let shift = heading * spec.walk_speed * h * travelled;
        let neck = (spec.origin.0 + shift, spec.origin.1);
        let pose = pedestrian_pose(spec, neck, walk_t.map(|t| (omega * t, gain)));
        let mut frame = make_frame(spec, f, &pose, &mut rng);
        let crossing = match spec.action {
            SynthAction::KeepWalkingToCross => true,
            SynthAction::StartCrossing => f >= onset,
            _ => false,
        };
        frame.label = Some(if crossing { Label::C } else { Label::NC });
        frames.push(frame);
    }
    let action_label = match spec.action {
        SynthAction::KeepWalkingToCross | SynthAction::StartCrossing => Label::C,
        _ => Label::NC,
    };
    let sequence = LabeledSequence::new(frames, Some(action_label), spec.onset_frame.map(|o| o as i64))?;
    Ok(SyntheticSequence {
        action: spec.action,
        sequence,
    })
}

/// Seated cyclist; arm signals start at the onset frame and reach their
/// final pose over [`SIGNAL_RAMP_FRAMES`] frames. Labels are vehicle-centric.
pub fn gen_cyclist(spec: &SynthSpec) -> Result<SyntheticSequence> {
    spec.validate()?;
    if spec.role() != Role::Cyclist {
        return Err(Error::InvalidSpec(format!("{} is not a cyclist action", spec.action)));
    }
    if !matches!(spec.view, View::Back | View::Front) {
        return Err(Error::InvalidSpec(
            "cyclists are generated in back or front view".into(),
        ));
    }
    let mut rng = seed::rng(spec.seed);
    let onset = spec.onset_frame.unwrap_or(0);
    let signal = vehicle_centric(spec.action, spec.view);
    let mut frames = Vec::with_capacity(spec.n_frames);
    for f in 0..spec.n_frames {
        let alpha = if f < onset {
            0.0
        } else {
            ((f - onset + 1) as f64 / SIGNAL_RAMP_FRAMES as f64).min(1.0)
        };
        let pose = cyclist_pose(spec, alpha);
        let mut frame = make_frame(spec, f, &pose, &mut rng);
        frame.label = Some(if f >= onset { signal } else { Label::NoSign });
        frames.push(frame);
    }
    let sequence = LabeledSequence::new(frames, Some(signal), spec.onset_frame.map(|o| o as i64))?;
    Ok(SyntheticSequence {
        action: spec.action,
        sequence,
    })
}

pub fn generate(spec: &SynthSpec) -> Result<SyntheticSequence> {
    match spec.role() {
        Role::Pedestrian => gen_pedestrian(spec),
        Role::Cyclist => gen_cyclist(spec),
    }
}

/// Recipe for a corpus of randomized sequences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub prefix: String,
    pub actions: Vec<SynthAction>,
    pub per_action: usize,
    pub n_frames: usize,
    pub jitter_std_px: f64,
    pub body: BodyShape,
    /// Each body proportion is scaled per sequence by a uniform factor in
    /// `1 ± body_variation`.
    #[serde(default = "default_body_variation")]
    pub body_variation: f64,
    pub seed: u64,
}

fn default_body_variation() -> f64 {
    0.1
}

impl CorpusSpec {
    pub fn pedestrian(per_action: usize, seed: u64) -> Self {
        CorpusSpec {
            prefix: "ped".into(),
            actions: SynthAction::PEDESTRIAN.to_vec(),
            per_action,
            n_frames: 40,
            jitter_std_px: 1.0,
            body: BodyShape::default(),
            body_variation: default_body_variation(),
            seed,
        }
    }

    pub fn cyclist(per_action: usize, seed: u64) -> Self {
        CorpusSpec {
            prefix: "cyc".into(),
            actions: SynthAction::CYCLIST.to_vec(),
            per_action,
            n_frames: 40,
            jitter_std_px: 1.0,
            body: BodyShape::default(),
            body_variation: default_body_variation(),
            seed,
        }
    }
}

/// Expands a corpus recipe. Every sequence draws its size, gait, view and
/// onset from a stream keyed by its position, so changing `per_action`
/// leaves earlier sequences unchanged.
pub fn corpus(spec: &CorpusSpec) -> Result<Vec<SyntheticSequence>> {
    let mut out = Vec::with_capacity(spec.actions.len() * spec.per_action);
    for (ai, &action) in spec.actions.iter().enumerate() {
        for i in 0..spec.per_action {
            let s = seed::derive(spec.seed, &[ai as u64, i as u64]);
            let mut rng = seed::rng(s);
            let mut item = SynthSpec::new(action);
            item.name = format!("{}-{}-{:04}", spec.prefix, action, i);
            item.n_frames = spec.n_frames;
            item.jitter_std_px = spec.jitter_std_px;
            item.body = spec.body;
            item.seed = s;
            item.base_height_px = rng.random_range(120.0..220.0);
            item.gait_period_frames = rng.random_range(24.0..36.0);
            item.gait_amplitude_rad = rng.random_range(0.30..0.45);
            item.origin = (rng.random_range(200.0..1000.0), rng.random_range(150.0..300.0));
            let front_back = if rng.random_bool(0.5) { View::Back } else { View::Front };
            let profile = if rng.random_bool(0.5) { View::Left } else { View::Right };
            item.view = match action {
                SynthAction::KeepWalkingToCross | SynthAction::StartCrossing => profile,
                SynthAction::WalkAlong => front_back,
                SynthAction::Standing => {
                    if rng.random_bool(0.5) {
                        profile
                    } else {
                        front_back
                    }
                }
                _ => front_back,
            };
            let n = spec.n_frames;
            item.onset_frame = match action {
                SynthAction::Standing | SynthAction::WalkAlong => None,
                SynthAction::NoSign => None,
                SynthAction::KeepWalkingToCross => Some(rng.random_range(n / 2..n)),
                _ => Some(rng.random_range(n / 4..=n / 2)),
            };
            if action == SynthAction::TurnRight {
                item.alt_right_turn = rng.random_bool(0.5);
            }
            let v = spec.body_variation.clamp(0.0, 0.5);
            if v > 0.0 {
                let b = &mut item.body;
                for part in [
                    &mut b.shoulder_width,
                    &mut b.hip_width,
                    &mut b.torso,
                    &mut b.thigh,
                    &mut b.shin,
                    &mut b.upper_arm,
                    &mut b.forearm,
                ] {
                    *part *= rng.random_range(1.0 - v..=1.0 + v);
                }
            }
            out.push(generate(&item)?);
        }
    }
    Ok(out)
}
