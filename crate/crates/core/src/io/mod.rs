//! Interchange formats: keypoint JSON Lines and the model file.

mod model;
mod record;

pub use model::{layout_checksum, ModelFile, TrainingMeta, MODEL_FORMAT_VERSION};
pub use record::{parse_record, read_records, record_line, write_records, ParseMode, RECORD_FIELDS};
