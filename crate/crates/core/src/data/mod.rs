//! Dataset handling: label maps, directory scanning, preprocessing, and
//! splitting.

pub mod label_map;
pub mod manifest;
pub mod preprocess;
pub mod split;
pub mod synth;

pub use label_map::LabelMap;
pub use manifest::{scan_dataset, DatasetManifest, ManifestEntry, SkipRecord, SkipReport};
pub use preprocess::{
    preprocess_buffer, preprocess_image, ChannelOrder, Normalization, Pixels, PreprocessConfig,
};
pub use split::{make_folds, make_label_folds, stratified_split, FoldPlan};
pub use synth::{generate_blobs, generate_image_tree, ImageTreeOptions};
