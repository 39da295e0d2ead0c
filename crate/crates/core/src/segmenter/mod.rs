//! Reference segmenter: a linear-softmax pixel classifier over hand-crafted
//! intensity and position features, trained on the soft-Dice loss.

mod features;
mod model;
mod train;

pub use features::{extract_features, FeatureMap, NUM_FEATURES, SMOOTHING_RADII};
pub use model::{
    decode_model, encode_model, load_model, predict, predict_labels, reconstruct_labels, save_model, ModelParams,
    Segmenter, Weights,
};
pub use train::{
    loss_and_weight_grad, train, train_set, TrainConfig, TrainOutcome, TrainingSet, IMPROVEMENT_THRESHOLD,
};
