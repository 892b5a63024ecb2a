//! Intention recognition for vulnerable road users from 2D skeletons.
//!
//! The pipeline runs detection boxes through a Kalman [`tracker`], turns
//! each tracked skeleton into height-normalized [`features`], classifies
//! sliding windows with a random [`forest`], and scores the result with
//! the [`eval`] protocol. [`synth`] produces labeled stick-figure sequences
//! and [`perturb`] injects test-time noise.

pub mod error;
pub mod eval;
pub mod features;
pub mod forest;
pub mod io;
pub mod perturb;
pub mod pipeline;
pub mod seed;
pub mod skeleton;
pub mod synth;
pub mod tracker;

pub use error::{Error, Result};
pub use features::{FeatureLayout, FeatureVector};
pub use forest::{DecisionForest, ForestParams};
pub use skeleton::{BBox, Keypoint, KeypointSchema, Label, LabeledSequence, Role, SkeletonFrame};
