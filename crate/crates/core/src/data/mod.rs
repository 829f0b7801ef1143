//! Ingestion: dice parsing, stat blocks, feature extraction, datasets and normalization.

pub mod dataset;
pub mod dice;
pub mod normalize;
pub mod record;

pub use dataset::{
    canonical_feature_names, load_dataset, read_csv, read_json, DataFormat, Dataset, Sample,
};
pub use dice::{parse_dice_expression, DiceExpr, DiceTerm};
pub use normalize::{apply_normalization, fit_normalization, NormalizationParams};
pub use record::{
    clamp_level, extract_features, feature_index, FeatureVector, MonsterRecord, FEATURE_NAMES,
    LEVEL_CAP, NUM_FEATURES,
};
