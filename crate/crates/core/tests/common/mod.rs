#![allow(dead_code)]

use suggestive::metrics::soft_dice_grad;
use suggestive::rng::SplitMix64;
use suggestive::segmenter::{extract_features, loss_and_weight_grad, TrainingSet, NUM_FEATURES};
use suggestive::tensor::Tensor;
use suggestive::{LabelMap, Logits, ProbMap, Volume};

pub fn random_labels(rng: &mut SplitMix64, rows: usize, cols: usize) -> LabelMap {
    LabelMap::new(vec![rows, cols], (0..rows * cols).map(|_| rng.below(4) as u8).collect()).unwrap()
}

/// Blocky label map: random-sized rectangles of random classes painted over background.
pub fn random_blobs(rng: &mut SplitMix64, rows: usize, cols: usize) -> LabelMap {
    let mut d = vec![0u8; rows * cols];
    for _ in 0..6 {
        let (h, w) = (
            1 + rng.below(rows as u64 / 2) as usize,
            1 + rng.below(cols as u64 / 2) as usize,
        );
        let (r0, c0) = (
            rng.below((rows - h + 1) as u64) as usize,
            rng.below((cols - w + 1) as u64) as usize,
        );
        let class = rng.below(4) as u8;
        for r in r0..r0 + h {
            for c in c0..c0 + w {
                d[r * cols + c] = class;
            }
        }
    }
    LabelMap::new(vec![rows, cols], d).unwrap()
}

pub fn random_logits(rng: &mut SplitMix64, rows: usize, cols: usize, scale: f64) -> Logits<f64> {
    Logits::new(
        vec![rows, cols],
        (0..rows * cols * 4).map(|_| scale * rng.symmetric()).collect(),
    )
    .unwrap()
}

pub fn random_probs(rng: &mut SplitMix64, rows: usize, cols: usize) -> ProbMap<f64> {
    let mut data = Vec::with_capacity(rows * cols * 4);
    for _ in 0..rows * cols {
        let raw: Vec<f64> = (0..4).map(|_| rng.uniform() + 1e-3).collect();
        let s: f64 = raw.iter().sum();
        data.extend(raw.iter().map(|v| v / s));
    }
    ProbMap::new(vec![rows, cols], data).unwrap()
}

/// Relative error of one analytic component against its finite-difference estimate.
/// Magnitudes below `floor` are compared against `floor` instead.
pub fn rel_err(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

// ---------------------------------------------------------------------------
// Independent oracles. Deliberately naive; they share no code with the library.
// ---------------------------------------------------------------------------

/// Set-counting Dice.
pub fn oracle_dice(pred: &LabelMap, gt: &LabelMap, class_id: u8) -> f64 {
    use std::collections::HashSet;
    let set = |m: &LabelMap| -> HashSet<usize> {
        m.data()
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == class_id)
            .map(|(i, _)| i)
            .collect()
    };
    let (a, b) = (set(pred), set(gt));
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    2.0 * a.intersection(&b).count() as f64 / (a.len() + b.len()) as f64
}

/// Sort each pixel's channels and average top-minus-second.
pub fn oracle_bvsb(data: &[f64]) -> f64 {
    let n = data.len() / 4;
    let mut total = 0.0;
    for px in data.chunks(4) {
        let mut v = px.to_vec();
        v.sort_by(|a, b| b.partial_cmp(a).unwrap());
        total += v[0] - v[1];
    }
    total / n as f64
}

/// Double loop over pixels and their four neighbors.
pub fn oracle_boundary(m: &LabelMap, class_id: u8) -> Vec<(usize, usize)> {
    let (rows, cols) = (m.dims()[0] as isize, m.dims()[1] as isize);
    let get = |r: isize, c: isize| -> Option<u8> {
        if r < 0 || c < 0 || r >= rows || c >= cols {
            None
        } else {
            Some(m.data()[(r * cols + c) as usize])
        }
    };
    let mut out = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if get(r, c) != Some(class_id) {
                continue;
            }
            let neighbors = [(r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)];
            if neighbors.iter().any(|&(a, b)| get(a, b) != Some(class_id)) {
                out.push((r as usize, c as usize));
            }
        }
    }
    out
}

/// All-pairs Chebyshev matching of gt boundary pixels against pred boundary pixels.
pub fn oracle_saved_effort(gt: &LabelMap, pred: &LabelMap, class_id: u8, tol: usize) -> f64 {
    let gb = oracle_boundary(gt, class_id);
    let pb = oracle_boundary(pred, class_id);
    if gb.is_empty() {
        return 100.0;
    }
    let matched = gb
        .iter()
        .filter(|&&(r, c)| pb.iter().any(|&(pr, pc)| r.abs_diff(pr).max(c.abs_diff(pc)) <= tol))
        .count();
    100.0 * matched as f64 / gb.len() as f64
}

/// Soft-Dice loss of softmax(logits), recomputed from scratch.
pub fn oracle_soft_dice_of_logits(logits: &[f64], gt: &[u8]) -> f64 {
    let eps = 1e-6;
    let mut inter = [0.0; 4];
    let mut pm = [0.0; 4];
    let mut gm = [0.0; 4];
    for (z, &g) in logits.chunks(4).zip(gt) {
        let m = z.iter().cloned().fold(f64::MIN, f64::max);
        let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
        let s: f64 = e.iter().sum();
        for c in 0..4 {
            let p = e[c] / s;
            pm[c] += p;
            if c == g as usize {
                inter[c] += p;
                gm[c] += 1.0;
            }
        }
    }
    4.0 - (0..4)
        .map(|c| (2.0 * inter[c] + eps) / (pm[c] + gm[c] + eps))
        .sum::<f64>()
}

pub const FD_STEP: f64 = 1e-3;

/// Central finite differences of `f` at `x`.
pub fn central_differences(x: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut buf = x.to_vec();
    (0..x.len())
        .map(|i| {
            buf[i] = x[i] + FD_STEP;
            let up = f(&buf);
            buf[i] = x[i] - FD_STEP;
            let down = f(&buf);
            buf[i] = x[i];
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

/// Largest componentwise relative error.
pub fn max_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| rel_err(a, n, f64::MIN_POSITIVE))
        .fold(0.0, f64::max)
}

/// Worst relative error of `soft_dice_grad` on a random 8x8 fixture.
pub fn logit_gradient_error(seed: u64) -> f64 {
    let mut rng = SplitMix64::new(seed);
    let gt = random_labels(&mut rng, 8, 8);
    let z = random_logits(&mut rng, 8, 8, 3.0);
    let analytic = soft_dice_grad(&z, &gt).unwrap();
    let numeric = central_differences(z.data(), |x| oracle_soft_dice_of_logits(x, gt.data()));
    max_rel_err(analytic.data(), &numeric)
}

/// Loss as a function of the flattened weights, via library features and the oracle loss.
pub fn weight_objective(features: &[Vec<f64>], labels: &[LabelMap], w: &[f64]) -> f64 {
    let mut total = 0.0;
    for (f, l) in features.iter().zip(labels) {
        let logits: Vec<f64> = f
            .chunks(NUM_FEATURES)
            .flat_map(|px| (0..4).map(move |c| (0..NUM_FEATURES).map(|k| w[c * NUM_FEATURES + k] * px[k]).sum::<f64>()))
            .collect();
        total += oracle_soft_dice_of_logits(&logits, l.data());
    }
    total / features.len() as f64
}

/// Worst relative error of the analytic weight gradient on a random 8x8 two-case fixture.
pub fn weight_gradient_error(seed: u64) -> f64 {
    let mut rng = SplitMix64::new(seed);
    let vols: Vec<Volume> = (0..2)
        .map(|_| Volume::from_f32(vec![8, 8], (0..64).map(|_| rng.uniform() as f32).collect()).unwrap())
        .collect();
    let labels: Vec<LabelMap> = (0..2).map(|_| random_blobs(&mut rng, 8, 8)).collect();
    let mut weights = [[0.0; NUM_FEATURES]; 4];
    weights.iter_mut().flatten().for_each(|w| *w = 2.0 * rng.symmetric());
    let pairs: Vec<_> = vols.iter().cloned().zip(labels.iter().cloned()).collect();
    let set = TrainingSet::from_pairs(&pairs).unwrap();
    let (loss, grad) = loss_and_weight_grad(&weights, &set);
    let features: Vec<Vec<f64>> = vols
        .iter()
        .map(|v| extract_features(v).unwrap().data().to_vec())
        .collect();
    let flat: Vec<f64> = weights.iter().flatten().copied().collect();
    assert!((loss - weight_objective(&features, &labels, &flat)).abs() < 1e-12);
    let numeric = central_differences(&flat, |w| weight_objective(&features, &labels, w));
    let analytic: Vec<f64> = grad.iter().flatten().copied().collect();
    max_rel_err(&analytic, &numeric)
}

/// A random 2D or 3D tensor of any of the three VTF1 kinds; f32 volumes use arbitrary bit patterns.
pub fn random_tensor(rng: &mut SplitMix64) -> Tensor {
    let rank = 2 + rng.below(2) as usize;
    let dims: Vec<usize> = (0..rank).map(|_| 1 + rng.below(5) as usize).collect();
    let n: usize = dims.iter().product();
    match rng.below(4) {
        0 => Tensor::Volume(Volume::from_u8(dims, (0..n).map(|_| rng.below(256) as u8).collect()).unwrap()),
        1 => Tensor::Volume(
            Volume::from_f32(dims, (0..n).map(|_| f32::from_bits(rng.next_u64() as u32)).collect()).unwrap(),
        ),
        2 => Tensor::Labels(LabelMap::new(dims, (0..n).map(|_| rng.below(4) as u8).collect()).unwrap()),
        _ => {
            let mut data = Vec::new();
            for _ in 0..n {
                let raw: Vec<f64> = (0..4).map(|_| rng.uniform()).collect();
                let s: f64 = raw.iter().sum::<f64>().max(1e-12);
                data.extend(raw.iter().map(|v| (v / s) as f32));
            }
            Tensor::Probs(ProbMap::new(dims, data).unwrap())
        }
    }
}
