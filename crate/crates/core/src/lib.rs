//! Suggestive annotation workbench.
//!
//! Uncertainty-driven case selection for segmentation: a soft-Dice trained
//! pixel classifier produces 4-class probability maps, unlabeled cases are
//! ranked by their Average BvSB margin, and the annotation effort a model
//! saves is measured as the share of the ground-truth boundary it already
//! reproduces.
//!
//! Classes are fixed: 0 background, 1 CSF, 2 GM, 3 WM.

pub mod active;
pub mod boundary;
pub mod error;
pub mod fsutil;
pub mod json;
pub mod metrics;
pub mod phantom;
pub mod rng;
pub mod scalar;
pub mod segmenter;
pub mod tensor;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use tensor::{LabelMap, Logits, ProbMap, Volume, NUM_CLASSES};

/// Single-precision probability map, the on-disk representation.
pub type ProbMap32 = ProbMap<f32>;
/// Double-precision probability map.
pub type ProbMap64 = ProbMap<f64>;
pub type Logits32 = Logits<f32>;
pub type Logits64 = Logits<f64>;
