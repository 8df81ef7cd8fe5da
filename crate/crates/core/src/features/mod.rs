//! Per-cough feature vectors, sensor fusion, normalization, Fisher-score
//! ranking and dataset handling.

mod dataset;
mod fisher;
mod normalize;
mod sensor;
mod vector;

pub use dataset::{split_dataset, write_feature_csv, DatasetManifest, ManifestEntry};
pub use fisher::{fisher_score, select_top_k};
pub use normalize::Normalizer;
pub use sensor::{
    fuse, fused_names, FusedVector, SensorRecord, FUSED_LEN, MAX_BODY_TEMP_C, MIN_BODY_TEMP_C, SENSOR_LEN,
};
pub use vector::{extract_features, feature_names, FeatureExtractor, FeatureVector, FEATURE_LEN, N_MFCC};
