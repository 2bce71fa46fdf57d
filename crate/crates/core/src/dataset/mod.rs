//! Dataset records, splits, and the synthetic scene generator.

mod boxes;
mod config;
mod records;
mod split;
mod synthetic;

pub use boxes::{parse_boxes, write_boxes, FrameBox};
pub use config::{parse_key_values, GeneratorConfig};
pub use records::{format_record, parse_record_line, parse_records, write_records, FeatureRecord, FIELD_COUNT};
pub use split::{split, split_indices, Split, MIN_SPLIT_SIZE, TEST_RATIO, VALIDATION_FRACTION};
pub use synthetic::{
    camera_trajectory, derive_seed, generate_dataset, generate_scene, observe, observe_all, FrameData,
    NoiseModel, ObservedPair, ScenePoint, SceneObject, SyntheticScene,
};
