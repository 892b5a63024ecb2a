use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::features::FeatureLayout;
use crate::forest::{CvRow, DecisionForest, ForestParams, Tree};
use crate::skeleton::{Label, Role};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// SHA-256 over the newline-joined feature names of a layout and window.
pub fn layout_checksum(layout: &FeatureLayout, window: usize) -> String {
    let mut h = Sha256::new();
    for name in layout.names(window) {
        h.update(name.as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub folds: usize,
    pub tree_grid: Vec<usize>,
    pub depth_grid: Vec<usize>,
    pub n_samples: usize,
    pub cv_table: Vec<CvRow>,
}

/// Persisted classifier: feature layout identity plus the forest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub role: Role,
    #[serde(rename = "T")]
    pub window: usize,
    /// Canonical keypoint ids in schema order.
    pub schema: Vec<u8>,
    pub layout_checksum: String,
    pub classes: Vec<Label>,
    pub params: ForestParams,
    pub n_features: usize,
    pub trees: Vec<Tree>,
    pub importances: Vec<f64>,
    pub training: TrainingMeta,
}

impl ModelFile {
    pub fn new(role: Role, window: usize, classes: Vec<Label>, forest: DecisionForest, training: TrainingMeta) -> Self {
        let layout = FeatureLayout::for_role(role);
        ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            role,
            window,
            schema: role.schema().ids().to_vec(),
            layout_checksum: layout_checksum(&layout, window),
            classes,
            params: forest.params,
            n_features: forest.n_features,
            trees: forest.trees,
            importances: forest.importances,
            training,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// Parses and checks the layout identity.
    pub fn from_json(s: &str) -> Result<Self> {
        let m: ModelFile = serde_json::from_str(s)?;
        if m.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported model format {}", m.format_version)));
        }
        if m.schema != m.role.schema().ids() {
            return Err(Error::Format("schema does not match role".into()));
        }
        let layout = FeatureLayout::for_role(m.role);
        if layout.dim(m.window) != m.n_features || layout_checksum(&layout, m.window) != m.layout_checksum {
            return Err(Error::Format("feature layout checksum mismatch".into()));
        }
        if m.classes.len() < 2 {
            return Err(Error::Format("model needs at least 2 classes".into()));
        }
        Ok(m)
    }

    pub fn layout(&self) -> FeatureLayout {
        FeatureLayout::for_role(self.role)
    }

    pub fn forest(&self) -> DecisionForest {
        DecisionForest {
            trees: self.trees.clone(),
            n_classes: self.classes.len(),
            n_features: self.n_features,
            importances: self.importances.clone(),
            params: self.params,
        }
    }
}
