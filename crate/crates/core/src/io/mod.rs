//! Dataset manifests, label folding, feature caches, model files and
//! synthetic datasets.

mod binary;
pub mod cache;
pub mod dataset;
pub mod manifest;
pub mod model_file;
pub mod synthetic;

pub use cache::{cache_key, cache_path, read_features, write_features, CACHE_MAGIC, CACHE_VERSION};
pub use dataset::{build_class_datasets, BuildOutput, ClassData, EntryFailure};
pub use manifest::{fold_labels, load_folding, load_manifest, parse_manifest, DatasetManifest, LabelFolding, ManifestEntry, Split};
pub use model_file::{decode_model, encode_model, read_model, write_model, MODEL_MAGIC, MODEL_VERSION};
pub use synthetic::{generate_synthetic_dataset, SyntheticDataset, SyntheticSpec, Warp};
