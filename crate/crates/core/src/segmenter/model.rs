use std::path::Path;

use super::features::{extract_features, FeatureMap, NUM_FEATURES};
use crate::error::{Error, Result};
use crate::fsutil;
use crate::metrics::softmax_in_place;
use crate::scalar::Scalar;
use crate::tensor::{LabelMap, ProbMap, Volume, NUM_CLASSES};

pub type Weights = [[f64; NUM_FEATURES]; NUM_CLASSES];

/// Weights of the linear-softmax pixel classifier (class × feature).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub weights: Weights,
    pub trained_epochs: u32,
    pub rng_seed: u64,
}

impl ModelParams {
    /// Untrained model: zero weights, so every prediction is uniform.
    pub fn fresh(seed: u64) -> Self {
        Self {
            weights: [[0.0; NUM_FEATURES]; NUM_CLASSES],
            trained_epochs: 0,
            rng_seed: seed,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().flatten().all(|w| w.is_finite())
    }

    pub(crate) fn logits_into(&self, features: &FeatureMap, out: &mut Vec<f64>) {
        out.clear();
        for px in features.data().chunks_exact(NUM_FEATURES) {
            for row in &self.weights {
                out.push(row.iter().zip(px).map(|(w, x)| w * x).sum());
            }
        }
    }

    pub fn predict_features<S: Scalar>(&self, features: &FeatureMap) -> Result<ProbMap<S>> {
        if !self.is_finite() {
            return Err(Error::invariant("model has non-finite weights"));
        }
        let mut p = Vec::with_capacity(features.num_pixels() * NUM_CLASSES);
        self.logits_into(features, &mut p);
        softmax_in_place(&mut p);
        let (r, c) = features.dims();
        ProbMap::new(vec![r, c], p.into_iter().map(S::narrow).collect())
    }
}

/// Anything that maps a 2D intensity slice to 4-class probabilities.
pub trait Segmenter {
    fn predict_slice(&self, slice: &Volume) -> Result<ProbMap<f64>>;
}

impl Segmenter for ModelParams {
    fn predict_slice(&self, slice: &Volume) -> Result<ProbMap<f64>> {
        predict(self, slice)
    }
}

pub fn predict<S: Scalar>(model: &ModelParams, slice: &Volume) -> Result<ProbMap<S>> {
    model.predict_features(&extract_features(slice)?)
}

/// Per-pixel argmax; ties go to the lowest class id.
pub fn reconstruct_labels<S: Scalar>(pm: &ProbMap<S>) -> LabelMap {
    let labels = pm
        .data()
        .chunks_exact(NUM_CLASSES)
        .map(|px| {
            let mut best = 0;
            for c in 1..NUM_CLASSES {
                if px[c] > px[best] {
                    best = c;
                }
            }
            best as u8
        })
        .collect();
    LabelMap::new(pm.dims().to_vec(), labels).expect("argmax is a class id")
}

/// Label a 2D slice or every axial slice of a 3D volume.
pub fn predict_labels(seg: &impl Segmenter, volume: &Volume) -> Result<LabelMap> {
    let slices = volume
        .axial_slices()
        .iter()
        .map(|s| seg.predict_slice(s).map(|pm| reconstruct_labels(&pm)))
        .collect::<Result<Vec<_>>>()?;
    LabelMap::stack_axial(&slices)
}

const MAGIC: &[u8; 4] = b"SGM1";

/// `"SGM1" | u32 classes | u32 features | f64 weights row-major | u32 epochs | u64 seed`, LE.
pub fn encode_model(m: &ModelParams) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + 8 + NUM_CLASSES * NUM_FEATURES * 8 + 12);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(NUM_CLASSES as u32).to_le_bytes());
    out.extend_from_slice(&(NUM_FEATURES as u32).to_le_bytes());
    for w in m.weights.iter().flatten() {
        out.extend_from_slice(&w.to_le_bytes());
    }
    out.extend_from_slice(&m.trained_epochs.to_le_bytes());
    out.extend_from_slice(&m.rng_seed.to_le_bytes());
    out
}

pub fn decode_model(bytes: &[u8]) -> Result<ModelParams> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::format(0, "missing SGM1 magic"));
    }
    let expected = 4 + 8 + NUM_CLASSES * NUM_FEATURES * 8 + 4 + 8;
    if bytes.len() < 12 {
        return Err(Error::format(bytes.len(), "truncated header"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    if u32_at(4) as usize != NUM_CLASSES {
        return Err(Error::format(4, format!("class count {} unsupported", u32_at(4))));
    }
    if u32_at(8) as usize != NUM_FEATURES {
        return Err(Error::format(8, format!("feature count {} unsupported", u32_at(8))));
    }
    if bytes.len() != expected {
        let at = bytes.len().min(expected);
        return Err(Error::format(
            at,
            format!("expected {expected} bytes, have {}", bytes.len()),
        ));
    }
    let mut weights = [[0.0; NUM_FEATURES]; NUM_CLASSES];
    for (i, w) in weights.iter_mut().flatten().enumerate() {
        let o = 12 + 8 * i;
        *w = f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    }
    let tail = 12 + NUM_CLASSES * NUM_FEATURES * 8;
    Ok(ModelParams {
        weights,
        trained_epochs: u32_at(tail),
        rng_seed: u64::from_le_bytes(bytes[tail + 4..tail + 12].try_into().unwrap()),
    })
}

pub fn save_model(m: &ModelParams, path: impl AsRef<Path>) -> Result<()> {
    fsutil::write_atomic(path.as_ref(), &encode_model(m))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelParams> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn slice() -> Volume {
        Volume::from_f32(vec![4, 4], (0..16).map(|i| i as f32 / 15.0).collect()).unwrap()
    }

    #[test]
    fn zero_weights_predict_uniform() {
        let pm: ProbMap<f32> = predict(&ModelParams::fresh(1), &slice()).unwrap();
        assert!(pm.data().iter().all(|&p| p == 0.25));
    }

    #[test]
    fn raising_a_class_row_raises_its_probability() {
        let mut m = ModelParams::fresh(1);
        m.weights[0] = [0.3, -1.0, 2.0, 0.1, 0.5, -0.2, 0.0];
        m.weights[2] = [-0.7, 0.2, 0.4, 1.0, 0.0, 0.3, 0.1];
        let before: ProbMap<f64> = predict(&m, &slice()).unwrap();
        // the bias feature is 1 everywhere, so its weight shifts every logit of the class
        m.weights[2][6] += 0.5;
        let after: ProbMap<f64> = predict(&m, &slice()).unwrap();
        for i in 0..16 {
            assert!(after.pixel(i)[2] > before.pixel(i)[2]);
        }
    }

    #[test]
    fn argmax_with_low_tie_break() {
        let pm = ProbMap::<f64>::new(
            vec![1, 3],
            vec![0.25, 0.25, 0.25, 0.25, 0.1, 0.2, 0.4, 0.3, 0.0, 0.0, 0.0, 1.0],
        )
        .unwrap();
        assert_eq!(reconstruct_labels(&pm).data(), &[0, 2, 3]);
        let l = LabelMap::new(vec![2, 2], vec![3, 2, 1, 0]).unwrap();
        assert_eq!(reconstruct_labels(&ProbMap::<f32>::one_hot(&l)), l);
    }

    #[test]
    fn non_finite_model_is_rejected() {
        let mut m = ModelParams::fresh(0);
        m.weights[1][1] = f64::INFINITY;
        assert!(predict::<f64>(&m, &slice()).is_err());
    }

    #[test]
    fn model_file_errors() {
        let mut m = ModelParams::fresh(3);
        m.weights[3][5] = -0.125;
        let bytes = encode_model(&m);
        assert_eq!(bytes.len(), 4 + 8 + 28 * 8 + 12);
        assert_eq!(decode_model(&bytes).unwrap(), m);
        assert!(matches!(
            decode_model(&bytes[..100]),
            Err(Error::Format { offset: 100, .. })
        ));
        assert!(matches!(decode_model(b"SGM2"), Err(Error::Format { offset: 0, .. })));
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode_model(&extra).is_err());
    }
}
